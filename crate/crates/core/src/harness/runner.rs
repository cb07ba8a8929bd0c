//! Monte Carlo execution of a scenario.

use rayon::prelude::*;

use crate::analysis::{
    beta, leak_error_variance, outage_analytical, received_snr, AnalyticInputs, MetricsRecord,
};
use crate::caj::{run_pipeline_with, FrameDiagnostics, Method};
use crate::error::{CajError, Result};
use crate::estimator::PilotBasis;
use crate::harness::catalog::{ScenarioConfig, ScenarioKind};
use crate::harness::output::round_sig;
use crate::harness::seed::{check_bounds, trial_rng};
use crate::signal::{FrameConfig, FrameSource};

pub const WORKERS_ENV: &str = "CAJSIM_WORKERS";

/// Worker count from `CAJSIM_WORKERS`, else the available parallelism.
pub fn default_workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CajError::config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub total_frames: u64,
    pub warnings: Vec<String>,
}

/// Per-trial outcome; `None` marks a frame the pipeline could not process.
type TrialOutcome = Option<FrameDiagnostics>;

fn run_trial(
    sc: &ScenarioConfig,
    source: &FrameSource,
    basis: &PilotBasis,
    method: Method,
    point: usize,
    series: usize,
    trial: u64,
) -> Result<TrialOutcome> {
    let mut rng = trial_rng(sc.master_seed, &sc.id, point, series, trial);
    let frame = source.draw(&mut rng)?;
    match run_pipeline_with(source.config(), &frame, method, basis) {
        Ok(out) => Ok(Some(out.diagnostics)),
        Err(e) if e.is_per_frame() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Simulates one (series, sweep point) cell and returns the raw per-trial
/// outcomes in trial order.
pub fn simulate_cell(
    sc: &ScenarioConfig,
    series: usize,
    point: usize,
    pool: &rayon::ThreadPool,
) -> Result<(FrameConfig, Vec<TrialOutcome>)> {
    let cfg = sc.frame_config(series, point)?;
    let source = FrameSource::new(&cfg)?;
    let basis = PilotBasis::new(source.pilots())?;
    let method = sc.series[series].method;
    let outcomes: Result<Vec<TrialOutcome>> = pool.install(|| {
        (0..sc.trials)
            .into_par_iter()
            .map(|t| run_trial(sc, &source, &basis, method, point, series, t))
            .collect()
    });
    Ok((cfg, outcomes?))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Reduces the outcomes of one cell into named metric values, in a fixed
/// order.
pub fn summarize_cell(
    kind: ScenarioKind,
    method: Method,
    cfg: &FrameConfig,
    outcomes: &[TrialOutcome],
) -> Result<Vec<(&'static str, f64)>> {
    let ok: Vec<&FrameDiagnostics> = outcomes.iter().flatten().collect();
    let degenerate = (outcomes.len() - ok.len()) as f64;
    let mut out = Vec::new();

    let ser = || -> f64 {
        let errors: usize = ok.iter().map(|d| d.symbol_errors).sum();
        let symbols: usize = ok.iter().map(|d| d.symbols).sum();
        if symbols == 0 {
            1.0
        } else {
            errors as f64 / symbols as f64
        }
    };
    let estimates = matches!(method, Method::Nls | Method::Ev);

    match kind {
        ScenarioKind::Estimation => {
            if estimates {
                if let Some(m) = mean(ok.iter().filter_map(|d| d.msad)) {
                    out.push(("msad", m));
                }
                if let Some(a) = mean(ok.iter().filter_map(|d| d.angle_deg)) {
                    out.push(("angle_deg", a));
                }
            }
        }
        ScenarioKind::Ser => out.push(("ser", ser())),
        ScenarioKind::Outage => {
            let k = cfg.k;
            let ps = cfg.ts_power();
            let sigma2 = cfg.noise_variance;
            let gamma_th = cfg.gamma_th();
            let n = outcomes.len() as f64;
            let pooled = mean(ok.iter().map(|d| leak_error_variance(d.jam_leak, k))).unwrap_or(0.0);
            let below = |eps: &dyn Fn(&FrameDiagnostics) -> f64| -> f64 {
                let hits = ok
                    .iter()
                    .filter(|d| received_snr(d.f_norm2, ps, k, eps(d), d.jam_block_energy, sigma2) < gamma_th)
                    .count();
                (hits as f64 + degenerate) / n
            };
            out.push(("outage", below(&|_| pooled)));
            out.push(("outage_frame_proxy", below(&|d| leak_error_variance(d.jam_leak, k))));
            if estimates || cfg.k_j == 0 {
                let mut total = degenerate;
                for d in &ok {
                    let inputs = AnalyticInputs::from_frame(cfg, d);
                    let b = if cfg.k_j == 0 {
                        ps / (sigma2 * (k as f64 - 1.0))
                    } else {
                        match beta(&inputs, method) {
                            Ok(b) => b,
                            Err(e) if e.is_per_frame() => {
                                total += 1.0;
                                continue;
                            }
                            Err(e) => return Err(e),
                        }
                    };
                    total += outage_analytical(k, b, gamma_th)?;
                }
                out.push(("outage_analytic_mc", total / n));
            }
            out.push(("ser", ser()));
        }
    }
    if cfg.k_j > 0 {
        if let Some(r) = mean(ok.iter().map(|d| d.residual_jam_fraction)) {
            out.push(("residual_jam_fraction", r));
        }
    }
    out.push(("degenerate_frames", degenerate));
    Ok(out)
}

/// Runs every (series, sweep point) cell. Output is a pure function of the
/// scenario and master seed; the worker count only changes wall time.
pub fn run_scenario(sc: &ScenarioConfig, workers: usize) -> Result<RunOutput> {
    let warnings = sc.validate()?;
    if workers < 1 {
        return Err(CajError::config("worker count must be at least 1"));
    }
    check_bounds(sc.sweep.values.len(), sc.series.len(), sc.trials)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CajError::config(format!("cannot start worker pool: {e}")))?;

    let mut records = Vec::new();
    let mut total_frames = 0u64;
    for (si, series) in sc.series.iter().enumerate() {
        for (pi, &v) in sc.sweep.values.iter().enumerate() {
            let (cfg, outcomes) = simulate_cell(sc, si, pi, &pool)?;
            total_frames += outcomes.len() as u64;
            for (metric, value) in summarize_cell(sc.kind, series.method, &cfg, &outcomes)? {
                let r = MetricsRecord {
                    scenario: sc.id.clone(),
                    method: series.label.clone(),
                    sweep_name: sc.sweep.name.clone(),
                    sweep_value: round_sig(v),
                    metric: metric.into(),
                    value: round_sig(value),
                    trials: sc.trials,
                    seed: sc.master_seed,
                };
                r.validate()?;
                records.push(r);
            }
        }
    }
    Ok(RunOutput {
        records,
        total_frames,
        warnings,
    })
}

/// Values of one metric for one series, in sweep order.
pub fn series_metric(records: &[MetricsRecord], series: &str, metric: &str) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.method == series && r.metric == metric)
        .map(|r| (r.sweep_value, r.value))
        .collect()
}
