//! Scenario presets: one TOML file per figure, embedded at build time.

use serde::Deserialize;
use toml::{Table, Value};

use crate::caj::Method;
use crate::error::{CajError, Result};
use crate::signal::FrameConfig;

/// Preset sources in catalog order.
const PRESETS: &[(&str, &str)] = &[
    ("fig3-msad", include_str!("../../scenarios/fig3-msad.toml")),
    ("fig4-msad-ntp", include_str!("../../scenarios/fig4-msad-ntp.toml")),
    ("fig5-angle", include_str!("../../scenarios/fig5-angle.toml")),
    ("fig6-outage", include_str!("../../scenarios/fig6-outage.toml")),
    ("fig7-outage-k", include_str!("../../scenarios/fig7-outage-k.toml")),
    ("fig8-ser-k4", include_str!("../../scenarios/fig8-ser-k4.toml")),
    ("fig9-ser-k16", include_str!("../../scenarios/fig9-ser-k16.toml")),
    ("fig10-2jn-k4", include_str!("../../scenarios/fig10-2jn-k4.toml")),
    ("fig11-2jn-k16", include_str!("../../scenarios/fig11-2jn-k16.toml")),
    ("fig12-multikj", include_str!("../../scenarios/fig12-multikj.toml")),
    ("fig13-multitn", include_str!("../../scenarios/fig13-multitn.toml")),
    ("fig14-tv", include_str!("../../scenarios/fig14-tv.toml")),
    ("fig15-contour", include_str!("../../scenarios/fig15-contour.toml")),
    ("fig16-contour", include_str!("../../scenarios/fig16-contour.toml")),
    ("ser-ntp", include_str!("../../scenarios/ser-ntp.toml")),
];

/// What a scenario measures; selects the emitted metrics and default trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Estimation,
    Ser,
    Outage,
}

impl ScenarioKind {
    pub fn default_trials(&self) -> u64 {
        match self {
            ScenarioKind::Estimation => 2_000,
            ScenarioKind::Ser | ScenarioKind::Outage => 20_000,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    name: String,
    #[serde(default)]
    values: Vec<f64>,
    start: Option<f64>,
    stop: Option<f64>,
    step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesFile {
    label: String,
    method: Method,
    #[serde(default)]
    set: Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: String,
    title: String,
    #[serde(default)]
    description: String,
    kind: ScenarioKind,
    trials: Option<u64>,
    #[serde(default = "default_seed")]
    seed: u64,
    base: Table,
    sweep: SweepFile,
    grid: Option<SweepFile>,
    series: Vec<SeriesFile>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub values: Vec<f64>,
}

impl Sweep {
    fn from_file(f: SweepFile) -> Result<Self> {
        let mut values = f.values;
        match (f.start, f.stop, f.step) {
            (None, None, None) => {}
            (Some(start), Some(stop), Some(step)) => {
                if !values.is_empty() {
                    return Err(CajError::config(format!("sweep '{}' gives both values and a range", f.name)));
                }
                if !(step > 0.0) || stop < start {
                    return Err(CajError::config(format!("sweep '{}' has an empty range", f.name)));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                values = (0..=n).map(|i| start + i as f64 * step).collect();
            }
            _ => return Err(CajError::config(format!("sweep '{}' needs start, stop and step", f.name))),
        }
        if values.is_empty() {
            return Err(CajError::config(format!("sweep '{}' has no values", f.name)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CajError::config(format!("sweep '{}' has a non-finite value", f.name)));
        }
        Ok(Self { name: f.name, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub method: Method,
    pub overrides: Table,
}

/// A validated scenario: every (series, sweep point) resolves to a valid
/// frame configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub id: String,
    pub title: String,
    pub description: String,
    pub kind: ScenarioKind,
    pub trials: u64,
    pub master_seed: u64,
    pub base: Table,
    pub sweep: Sweep,
    pub series: Vec<Series>,
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

const INTEGER_KEYS: [&str; 5] = ["k", "k_t", "k_j", "n_tp", "n_td"];

/// Sets `key` in a frame-config table; `tau_g` and `tau_h` expand to Jakes
/// fading specs and integer fields accept integral floats.
pub fn set_parameter(table: &mut Table, key: &str, value: &Value) -> Result<()> {
    let as_f64 = |v: &Value| -> Result<f64> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(CajError::config(format!("parameter '{key}' expects a number, got {other}"))),
        }
    };
    match key {
        "tau_g" | "tau_h" => {
            let tau = as_f64(value)?;
            let mut spec = Table::new();
            spec.insert("kind".into(), Value::String(if tau == 0.0 { "block" } else { "jakes" }.into()));
            spec.insert("tau".into(), Value::Float(tau));
            let field = if key == "tau_g" { "fading_g" } else { "fading_h" };
            table.insert(field.into(), Value::Table(spec));
        }
        k if INTEGER_KEYS.contains(&k) => {
            let x = as_f64(value)?;
            if x.fract() != 0.0 || x < 0.0 {
                return Err(CajError::config(format!("parameter '{key}' must be a non-negative integer, got {x}")));
            }
            table.insert(key.into(), Value::Integer(x as i64));
        }
        _ => {
            table.insert(key.into(), value.clone());
        }
    }
    Ok(())
}

fn frame_from_table(table: &Table) -> Result<FrameConfig> {
    FrameConfig::deserialize(Value::Table(table.clone()))
        .map_err(|e| CajError::config(format!("invalid frame configuration: {e}")))
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| CajError::config(format!("scenario file: {e}")))?;
        if file.id.trim().is_empty() {
            return Err(CajError::config("scenario id is empty"));
        }
        let sweep = Sweep::from_file(file.sweep)?;
        let grid = file.grid.map(Sweep::from_file).transpose()?;
        if file.series.is_empty() {
            return Err(CajError::config(format!("scenario '{}' has no series", file.id)));
        }
        let mut series = Vec::new();
        for s in file.series {
            match &grid {
                None => series.push(Series {
                    label: s.label,
                    method: s.method,
                    overrides: s.set,
                }),
                Some(g) => {
                    for &v in &g.values {
                        let mut overrides = s.set.clone();
                        set_parameter(&mut overrides, &g.name, &Value::Float(v))?;
                        series.push(Series {
                            label: format!("{} {}={}", s.label, g.name, format_value(v)),
                            method: s.method,
                            overrides,
                        });
                    }
                }
            }
        }
        let sc = Self {
            trials: file.trials.unwrap_or(file.kind.default_trials()),
            id: file.id,
            title: file.title,
            description: file.description,
            kind: file.kind,
            master_seed: file.seed,
            base: file.base,
            sweep,
            series,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// Frame configuration of one (series, sweep point) cell.
    pub fn frame_config(&self, series: usize, point: usize) -> Result<FrameConfig> {
        let s = self
            .series
            .get(series)
            .ok_or_else(|| CajError::config(format!("series index {series} out of range")))?;
        let v = *self
            .sweep
            .values
            .get(point)
            .ok_or_else(|| CajError::config(format!("sweep index {point} out of range")))?;
        let mut table = Table::new();
        for (k, val) in self.base.iter().chain(s.overrides.iter()) {
            set_parameter(&mut table, k, val)?;
        }
        set_parameter(&mut table, &self.sweep.name, &Value::Float(v))?;
        frame_from_table(&table)
    }

    /// Rejects the scenario before any simulation if a cell is invalid.
    /// Returns the distinct warnings raised by the cells.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.trials < 1 {
            return Err(CajError::config(format!("scenario '{}' needs at least one trial", self.id)));
        }
        if self.sweep.values.is_empty() {
            return Err(CajError::config(format!("scenario '{}' has an empty sweep", self.id)));
        }
        let mut labels: Vec<&str> = self.series.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(CajError::config(format!("scenario '{}' repeats a series label", self.id)));
        }
        let mut warnings: Vec<String> = Vec::new();
        for si in 0..self.series.len() {
            for pi in 0..self.sweep.values.len() {
                let cfg = self.frame_config(si, pi).map_err(|e| {
                    CajError::config(format!("{} / {}: {e}", self.id, self.series[si].label))
                })?;
                let w = cfg.validate().map_err(|e| {
                    CajError::config(format!(
                        "{} / {} at {}={}: {e}",
                        self.id, self.series[si].label, self.sweep.name, self.sweep.values[pi]
                    ))
                })?;
                let method = self.series[si].method;
                if matches!(method, Method::Nls | Method::Ev) && cfg.k_j == 0 {
                    return Err(CajError::config(format!(
                        "{} / {}: {method} needs at least one jammer",
                        self.id, self.series[si].label
                    )));
                }
                if method == Method::Nls && cfg.k_j > 1 {
                    return Err(CajError::config(format!(
                        "{} / {}: NLS handles a single jammer",
                        self.id, self.series[si].label
                    )));
                }
                for msg in w {
                    let msg = format!("{}: {msg}", self.series[si].label);
                    if !warnings.contains(&msg) {
                        warnings.push(msg);
                    }
                }
            }
        }
        Ok(warnings)
    }

    pub fn with_trials(mut self, trials: u64) -> Result<Self> {
        if trials < 1 {
            return Err(CajError::config("trials must be at least 1"));
        }
        self.trials = trials;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    /// Replaces the sweep grid.
    pub fn with_sweep_values(mut self, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CajError::config("sweep must have at least one value"));
        }
        self.sweep.values = values;
        self.validate()?;
        Ok(self)
    }

    /// Keeps only the named series, in the given order.
    pub fn with_series(mut self, labels: &[&str]) -> Result<Self> {
        let mut picked = Vec::new();
        for l in labels {
            let s = self
                .series
                .iter()
                .find(|s| s.label == *l)
                .ok_or_else(|| CajError::config(format!("scenario '{}' has no series '{l}'", self.id)))?;
            picked.push(s.clone());
        }
        self.series = picked;
        Ok(self)
    }

    /// Adds or replaces an override on every series.
    pub fn with_override(mut self, key: &str, value: Value) -> Result<Self> {
        for s in &mut self.series {
            s.overrides.insert(key.into(), value.clone());
        }
        self.validate()?;
        Ok(self)
    }
}

/// All shipped presets, in catalog order.
pub fn catalog() -> Result<Vec<ScenarioConfig>> {
    let mut out: Vec<ScenarioConfig> = Vec::with_capacity(PRESETS.len());
    for (name, text) in PRESETS {
        let sc = ScenarioConfig::from_toml_str(text).map_err(|e| CajError::config(format!("preset {name}: {e}")))?;
        if sc.id != *name {
            return Err(CajError::config(format!("preset file {name} declares id '{}'", sc.id)));
        }
        if out.iter().any(|o| o.id == sc.id) {
            return Err(CajError::config(format!("duplicate scenario id '{}'", sc.id)));
        }
        out.push(sc);
    }
    Ok(out)
}

pub fn scenario_ids() -> Vec<&'static str> {
    PRESETS.iter().map(|(id, _)| *id).collect()
}

pub fn find_scenario(id: &str) -> Result<ScenarioConfig> {
    let text = PRESETS
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, text)| *text)
        .ok_or_else(|| CajError::config(format!("unknown scenario '{id}' (try list-scenarios)")))?;
    ScenarioConfig::from_toml_str(text)
}
