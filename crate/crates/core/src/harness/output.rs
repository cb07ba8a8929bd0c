//! CSV records, run manifests and analytic curve files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{beta, outage_analytical, AnalyticInputs, MetricsRecord};
use crate::caj::Method;
use crate::error::{CajError, Result};
use crate::harness::catalog::{ScenarioConfig, ScenarioKind};

pub const CSV_HEADER: [&str; 8] = [
    "scenario",
    "method",
    "sweep_name",
    "sweep_value",
    "metric",
    "value",
    "trials",
    "seed",
];

const SIG_DIGITS: usize = 9;

/// `x` with `digits` significant digits, positional for moderate exponents.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..(digits as i32)).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to the value the CSV will carry.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("formatted float parses")
}

pub fn write_csv_to<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let to_err = |e: csv::Error| CajError::Csv {
        path: PathBuf::from("<stream>"),
        source: e,
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for r in records {
        w.write_record([
            r.scenario.as_str(),
            r.method.as_str(),
            r.sweep_name.as_str(),
            &format_sig(r.sweep_value, SIG_DIGITS),
            r.metric.as_str(),
            &format_sig(r.value, SIG_DIGITS),
            &r.trials.to_string(),
            &r.seed.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| CajError::io("<stream>", e))?;
    Ok(())
}

pub fn emit_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CajError::io(path, e))?;
    write_csv_to(records, BufWriter::new(file)).map_err(|e| match e {
        CajError::Csv { source, .. } => CajError::Csv {
            path: path.to_path_buf(),
            source,
        },
        CajError::Io { source, .. } => CajError::io(path, source),
        other => other,
    })
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| CajError::Csv {
            path: PathBuf::from("<stream>"),
            source: e,
        })?
        .clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(CajError::config(format!("unexpected CSV header: {header:?}")));
    }
    rdr.deserialize()
        .map(|r| {
            r.map_err(|e| CajError::Csv {
                path: PathBuf::from("<stream>"),
                source: e,
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = File::open(path).map_err(|e| CajError::io(path, e))?;
    read_csv_from(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub total_frames: u64,
    pub trials_per_point: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CajError::io(path, std::io::Error::other(e)))?;
        std::fs::write(path, text + "\n").map_err(|e| CajError::io(path, e))
    }
}

/// Package version, with `git describe` appended when available.
pub fn version_text() -> String {
    let base = env!("CARGO_PKG_VERSION").to_string();
    let described = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match described {
        Some(d) => format!("{base} ({d})"),
        None => base,
    }
}

/// Analytical outage over the sweep grid for an isotropic jammer, one record
/// per (series, sweep point).
pub fn analytic_records(sc: &ScenarioConfig) -> Result<Vec<MetricsRecord>> {
    if sc.kind != ScenarioKind::Outage {
        return Err(CajError::config(format!(
            "scenario '{}' has no analytical outage curve",
            sc.id
        )));
    }
    let mut out = Vec::new();
    for (si, series) in sc.series.iter().enumerate() {
        for (pi, &v) in sc.sweep.values.iter().enumerate() {
            let cfg = sc.frame_config(si, pi)?;
            let inputs = AnalyticInputs::isotropic(&cfg);
            let method = match series.method {
                Method::Nls => Method::Nls,
                _ => Method::Ev,
            };
            let b = if cfg.k_j == 0 {
                cfg.ts_power() / (cfg.noise_variance * (cfg.k as f64 - 1.0))
            } else {
                beta(&inputs, method)?
            };
            let p = outage_analytical(cfg.k, b, cfg.gamma_th())?;
            let r = MetricsRecord {
                scenario: sc.id.clone(),
                method: series.label.clone(),
                sweep_name: sc.sweep.name.clone(),
                sweep_value: round_sig(v),
                metric: "outage_analytic".into(),
                value: round_sig(p),
                trials: 1,
                seed: sc.master_seed,
            };
            r.validate()?;
            out.push(r);
        }
    }
    Ok(out)
}

pub fn emit_analytic(sc: &ScenarioConfig, path: &Path) -> Result<Vec<MetricsRecord>> {
    let records = analytic_records(sc)?;
    emit_csv(&records, path)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::catalog::find_scenario;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(1.0, 9), "1");
        assert_eq!(format_sig(-2.5, 9), "-2.5");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(123456789.4, 9), "123456789");
        assert_eq!(format_sig(1.5e-7, 9), "1.5e-7");
        assert_eq!(format_sig(6.02214076e23, 9), "6.02214076e23");
        assert_eq!(format_sig(1e-3, 9), "0.001");
    }

    #[test]
    fn empty_record_set_is_header_only() {
        let mut buf = Vec::new();
        write_csv_to(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "scenario,method,sweep_name,sweep_value,metric,value,trials,seed\n");
    }

    #[test]
    fn round_trip_reproduces_records() {
        let values = [0.0, 1.0 / 3.0, 2.0e-9, 123.456789123, -4.5e12, 0.000123456789];
        let records: Vec<MetricsRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| MetricsRecord {
                scenario: "s".into(),
                method: format!("EV K={i}, quoted \"label\""),
                sweep_name: "gamma_ts_db".into(),
                sweep_value: round_sig(i as f64 * 0.1),
                metric: "ser".into(),
                value: round_sig(v),
                trials: 20_000,
                seed: u64::MAX - i as u64,
            })
            .collect();
        let mut buf = Vec::new();
        write_csv_to(&records, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn analytic_grid_cardinality() {
        let sc = find_scenario("fig7-outage-k").unwrap();
        let recs = analytic_records(&sc).unwrap();
        assert_eq!(recs.len(), sc.series.len() * sc.sweep.values.len());
        assert!(analytic_records(&find_scenario("fig8-ser-k4").unwrap()).is_err());
    }
}
