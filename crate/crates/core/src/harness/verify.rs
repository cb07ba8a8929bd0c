//! Self-checks run by `cajsim verify`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{cosine_angle_deg, msad_term};
use crate::caj::{run_pipeline_with, Method};
use crate::channel::{jakes_autocorrelation, sample_jakes, FadingSpec};
use crate::error::Result;
use crate::estimator::{ev_estimate_with, nls_estimate_with, PilotBasis};
use crate::harness::catalog::find_scenario;
use crate::harness::output::write_csv_to;
use crate::harness::runner::run_scenario;
use crate::signal::{FrameConfig, FrameSource};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Energy splits exactly between the pilot span and its complement.
pub fn check_parseval() -> Result<CheckOutcome> {
    let cfg = FrameConfig::default();
    let src = FrameSource::new(&cfg)?;
    let basis = PilotBasis::new(src.pilots())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let frame = src.draw(&mut rng)?;
        let s = basis.pilots().column(0);
        let along = (&frame.y_tp * s.map(|z| z.conj())).norm_squared() / s.norm_squared();
        let rest = basis.cleaned(&frame.y_tp)?.norm_squared();
        let total = frame.y_tp.norm_squared();
        worst = worst.max(((along + rest) / total - 1.0).abs());
    }
    Ok(outcome("parseval", worst < 1e-9, format!("max relative error {worst:.3e}")))
}

/// MSAD and angle do not depend on a common phase of the observations.
pub fn check_phase_invariance() -> Result<CheckOutcome> {
    let cfg = FrameConfig::default();
    let src = FrameSource::new(&cfg)?;
    let basis = PilotBasis::new(src.pilots())?;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let frame = src.draw(&mut rng)?;
        let g = frame.truth.g[0].at(0).into_owned();
        let g_bar = &g / Complex64::from(g.norm());
        let rot = Complex64::from_polar(1.0, 0.7 + trial as f64);
        let y_rot = &frame.y_tp * rot;
        let g_rot = &g_bar * rot;
        for est in [nls_estimate_with, ev_estimate_with] {
            let a = est(&frame.y_tp, &basis)?.direction(0);
            let b = est(&y_rot, &basis)?.direction(0);
            worst = worst
                .max((msad_term(&a, &g_bar) - msad_term(&b, &g_rot)).abs())
                .max((cosine_angle_deg(&a, &g_bar) - cosine_angle_deg(&b, &g_rot)).abs() * 1e-6);
        }
    }
    Ok(outcome("phase-invariance", worst < 1e-12, format!("max deviation {worst:.3e}")))
}

/// CSV bytes do not depend on the worker count.
pub fn check_worker_determinism(workers: usize) -> Result<CheckOutcome> {
    let sc = find_scenario("fig8-ser-k4")?
        .with_trials(40)?
        .with_series(&["EV", "NLS"])?
        .with_sweep_values(vec![0.0, 8.0])?;
    let csv = |w: usize| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv_to(&run_scenario(&sc, w)?.records, &mut buf)?;
        Ok(buf)
    };
    let many = workers.max(3);
    let same = csv(1)? == csv(many)?;
    Ok(outcome("worker-determinism", same, format!("1 worker vs {many} workers")))
}

/// Empirical Jakes autocorrelation against the Bessel target.
pub fn check_jakes() -> Result<CheckOutcome> {
    let (tau, n_td, k, realizations) = (0.1, 1000, 8, 2000);
    let spec = FadingSpec::jakes(tau);
    let lags: Vec<usize> = (0..=500).step_by(25).collect();
    let starts = [0usize, 125, 250, 375, 499];
    let mut acc = vec![0.0; lags.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..realizations {
        let ch = sample_jakes(&mut rng, k, &spec, n_td, n_td)?.dense();
        for (i, &lag) in lags.iter().enumerate() {
            for &n in &starts {
                acc[i] += ch.column(n).dotc(&ch.column(n + lag)).re;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (i, &lag) in lags.iter().enumerate() {
        let emp = acc[i] / acc[0];
        worst = worst.max((emp - jakes_autocorrelation(tau, lag as f64, n_td)).abs());
    }
    Ok(outcome("jakes-autocorrelation", worst <= 0.03, format!("max deviation {worst:.4}")))
}

/// Measured EV direction error against the efficient-estimator bound.
pub fn check_crlb() -> Result<CheckOutcome> {
    let mut details = Vec::new();
    let mut passed = true;
    for gamma_tj_db in [30.0, 40.0] {
        let cfg = FrameConfig {
            k: 4,
            n_tp: 50,
            n_td: 10,
            gamma_tj_db,
            ..FrameConfig::default()
        };
        let src = FrameSource::new(&cfg)?;
        let basis = PilotBasis::new(src.pilots())?;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let trials = 5000;
        let (mut measured, mut bound) = (0.0, 0.0);
        let k = cfg.k as f64;
        for _ in 0..trials {
            let frame = src.draw(&mut rng)?;
            let d = run_pipeline_with(&cfg, &frame, Method::Ev, &basis)?.diagnostics;
            measured += d.jam_leak / (k * (k - 1.0));
            bound += cfg.noise_variance / (k * d.jam_proj_energy);
        }
        let ratio = measured / bound;
        passed &= (ratio - 1.0).abs() <= 0.2;
        details.push(format!("gamma_tj={gamma_tj_db} dB ratio {ratio:.3}"));
    }
    Ok(outcome("crlb", passed, details.join(", ")))
}

pub fn run_verify(workers: usize) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_parseval()?,
        check_phase_invariance()?,
        check_worker_determinism(workers)?,
        check_jakes()?,
        check_crlb()?,
    ])
}
