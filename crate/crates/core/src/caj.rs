//! Null-space projection, transformed-channel estimation and zero-forcing
//! detection, plus the per-frame pipeline that ties them to an estimator.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{cosine_angle_deg, msad_term};
use crate::error::{CajError, Result};
use crate::estimator::{multi_jam_estimate_with, nls_estimate_with, true_null_space, EstimationResult, PilotBasis};
use crate::mathcore::{ComplexMatrix, ComplexVector};
use crate::signal::{qpsk_slice, Frame, FrameConfig};

/// Largest admissible condition number of `F^H F`.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Nls,
    Ev,
    Perfect,
    None,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Nls, Method::Ev, Method::Perfect, Method::None];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Nls => "NLS",
            Method::Ev => "EV",
            Method::Perfect => "PERFECT",
            Method::None => "NONE",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CajError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NLS" => Ok(Method::Nls),
            "EV" => Ok(Method::Ev),
            "PERFECT" | "PRFCT" => Ok(Method::Perfect),
            "NONE" => Ok(Method::None),
            other => Err(CajError::config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CajState {
    pub g_perp: ComplexMatrix,
    /// Column `i` estimates `G_perp^H h_i`.
    pub f_hat: ComplexMatrix,
}

/// `f_i = G_perp^H Y_tp conj(s_i) / |s_i|^2` for every pilot column.
pub fn estimate_transformed_channel(
    g_perp: &ComplexMatrix,
    y_tp: &ComplexMatrix,
    pilots: &ComplexMatrix,
) -> Result<CajState> {
    if y_tp.ncols() != pilots.nrows() || g_perp.nrows() != y_tp.nrows() {
        return Err(CajError::config("projection, Y_tp and pilot shapes disagree"));
    }
    let mut ls = y_tp * pilots.map(|z| z.conj());
    for (i, s) in pilots.column_iter().enumerate() {
        let energy = s.norm_squared();
        if energy == 0.0 {
            return Err(CajError::config(format!("pilot {i} has zero energy")));
        }
        ls.column_mut(i).scale_mut(1.0 / energy);
    }
    Ok(CajState {
        g_perp: g_perp.clone(),
        f_hat: g_perp.adjoint() * ls,
    })
}

/// Receive filter `W = G_perp F (F^H F)^{-1}` so that the soft symbols are
/// `W^H Y_td`.
pub fn zf_filter(state: &CajState) -> Result<ComplexMatrix> {
    let f = &state.f_hat;
    if f.nrows() < f.ncols() {
        return Err(CajError::Infeasible(format!(
            "{} streams cannot be separated in {} dimensions",
            f.ncols(),
            f.nrows()
        )));
    }
    let sv = f.singular_values();
    let (max, min) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    let cond = if min > 0.0 { (max / min).powi(2) } else { f64::INFINITY };
    if !(cond < MAX_CONDITION) {
        return Err(CajError::Infeasible(format!(
            "transformed channel Gram matrix has condition number {cond:.3e}"
        )));
    }
    let gram = f.adjoint() * f;
    let inv = gram
        .cholesky()
        .ok_or_else(|| CajError::Infeasible("transformed channel Gram matrix is not positive definite".into()))?
        .inverse();
    Ok(&state.g_perp * f * inv)
}

/// Soft symbols `(F^H F)^{-1} F^H G_perp^H Y_td`, one row per stream.
pub fn zf_detect(state: &CajState, y_td: &ComplexMatrix) -> Result<ComplexMatrix> {
    if y_td.nrows() != state.g_perp.nrows() {
        return Err(CajError::config("Y_td and projection shapes disagree"));
    }
    Ok(zf_filter(state)?.adjoint() * y_td)
}

/// Per-frame side quantities, computed from the frame truth.
#[derive(Debug, Clone, Default)]
pub struct FrameDiagnostics {
    /// Angle between the first estimated and true jamming direction.
    pub angle_deg: Option<f64>,
    /// `| |g_hat| - |g_bar| |^2` for the first jammer.
    pub msad: Option<f64>,
    /// `sum_l |G_perp^H g_l|^2` at the first pilot symbol.
    pub jam_leak: f64,
    /// `jam_leak / sum_l |g_l|^2`.
    pub residual_jam_fraction: f64,
    /// `|G_perp^H h_1|^2` at the first pilot symbol.
    pub f_norm2: f64,
    /// `|j_tp|^2` of the first jammer.
    pub jam_block_energy: f64,
    /// `sum_n |j_tp^H psi_n|^2` over the pilot complement.
    pub jam_proj_energy: f64,
    /// `|j_tp^H s_perp|^2` for the single NLS projection vector.
    pub jam_nls_energy: f64,
    /// `|j_tp^H s_bar|^2` along the normalised first pilot.
    pub jam_pilot_energy: f64,
    pub symbol_errors: usize,
    pub symbols: usize,
    pub residual_energy: f64,
}

impl FrameDiagnostics {
    pub fn ser(&self) -> f64 {
        self.symbol_errors as f64 / self.symbols.max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub soft: ComplexMatrix,
    pub detected: Vec<Vec<u8>>,
    pub diagnostics: FrameDiagnostics,
}

/// Jamming-subspace estimate for `method` without detection.
pub fn estimate_subspace(cfg: &FrameConfig, frame: &Frame, method: Method, basis: &PilotBasis) -> Result<EstimationResult> {
    let k = cfg.k;
    match method {
        Method::Nls | Method::Ev if cfg.k_j == 0 => Err(CajError::config(format!(
            "{method} needs at least one jammer to estimate"
        ))),
        Method::Nls if cfg.k_j > 1 => Err(CajError::config("NLS handles a single jammer only")),
        Method::Nls => nls_estimate_with(&frame.y_tp, basis),
        Method::Ev => multi_jam_estimate_with(&frame.y_tp, basis, cfg.k_j),
        Method::Perfect if cfg.k_j > 0 => {
            let g: Vec<ComplexVector> = frame.truth.g.iter().map(|c| c.at(0).into_owned()).collect();
            true_null_space(&g)
        }
        Method::Perfect | Method::None => Ok(EstimationResult {
            g_hat_dirs: ComplexMatrix::zeros(k, 0),
            g_perp: ComplexMatrix::identity(k, k),
            residual_energy: 0.0,
        }),
    }
}

pub fn run_pipeline(cfg: &FrameConfig, frame: &Frame, method: Method) -> Result<PipelineOutput> {
    run_pipeline_with(cfg, frame, method, &PilotBasis::new(&frame.pilots)?)
}

/// Estimate, project, detect and score one frame.
pub fn run_pipeline_with(cfg: &FrameConfig, frame: &Frame, method: Method, basis: &PilotBasis) -> Result<PipelineOutput> {
    if frame.y_tp.shape() != (cfg.k, cfg.n_tp) || frame.y_td.shape() != (cfg.k, cfg.n_td) {
        return Err(CajError::config("frame does not match its configuration"));
    }
    let est = estimate_subspace(cfg, frame, method, basis)?;
    let state = estimate_transformed_channel(&est.g_perp, &frame.y_tp, basis.pilots())?;
    let soft = zf_detect(&state, &frame.y_td)?;

    let scale = Complex64::from(1.0 / cfg.ts_power().sqrt());
    let mut detected = Vec::with_capacity(cfg.k_t);
    let mut errors = 0;
    for (i, truth) in frame.truth.data_indices.iter().enumerate() {
        let row: Vec<Complex64> = soft.row(i).iter().map(|z| z * scale).collect();
        let d = qpsk_slice(&row);
        errors += d.iter().zip(truth).filter(|(a, b)| a != b).count();
        detected.push(d);
    }

    let mut diag = FrameDiagnostics {
        symbol_errors: errors,
        symbols: cfg.k_t * cfg.n_td,
        residual_energy: est.residual_energy,
        ..Default::default()
    };
    let proj = est.g_perp.adjoint();
    let h0 = frame.truth.h[0].at(0);
    diag.f_norm2 = (&proj * h0).norm_squared();
    if cfg.k_j > 0 {
        let mut total = 0.0;
        for g in &frame.truth.g {
            let g0 = g.at(0);
            diag.jam_leak += (&proj * g0).norm_squared();
            total += g0.norm_squared();
        }
        diag.residual_jam_fraction = diag.jam_leak / total;

        let g_bar = frame.truth.g[0].at(0).into_owned();
        let g_bar = &g_bar / Complex64::from(g_bar.norm());
        if est.k_j() > 0 && matches!(method, Method::Nls | Method::Ev) {
            let g_hat = est.direction(0);
            diag.angle_deg = Some(cosine_angle_deg(&g_hat, &g_bar));
            diag.msad = Some(msad_term(&g_hat, &g_bar));
        }

        let j = frame.truth.jam_pilot(0, cfg.n_tp);
        diag.jam_block_energy = j.norm_squared();
        let s_perp = basis.s_perp();
        let coeffs = s_perp.adjoint() * &j;
        diag.jam_proj_energy = coeffs.norm_squared();
        diag.jam_nls_energy = coeffs[0].norm_sqr();
        let s0 = basis.pilots().column(0);
        diag.jam_pilot_energy = s0.dotc(&j).norm_sqr() / s0.norm_squared();
    }

    Ok(PipelineOutput {
        soft,
        detected,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::sample_cscwg_matrix;
    use crate::signal::{make_pilots, FrameSource};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("ZFIC".parse::<Method>().is_err());
    }

    #[test]
    fn perfect_noiseless_pipeline_is_exact() {
        let cfg = FrameConfig {
            k: 6,
            k_t: 2,
            k_j: 2,
            n_tp: 20,
            n_td: 200,
            ..FrameConfig::default()
        };
        let src = FrameSource::new(&cfg).unwrap().without_noise();
        let frame = src.draw(&mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let out = run_pipeline(&cfg, &frame, Method::Perfect).unwrap();
        assert_eq!(out.diagnostics.symbol_errors, 0);
        let data = frame.truth.tn_symbols.rows(cfg.n_tp, cfg.n_td).transpose();
        assert!((&out.soft - data).camax() < 1e-9);
        assert!(out.diagnostics.residual_jam_fraction < 1e-20);
    }

    #[test]
    fn noiseless_true_projection_gives_true_transformed_channel() {
        let cfg = FrameConfig {
            n_tp: 20,
            n_td: 10,
            ..FrameConfig::default()
        };
        let src = FrameSource::new(&cfg).unwrap().without_noise();
        let frame = src.draw(&mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let basis = PilotBasis::new(&frame.pilots).unwrap();
        let est = estimate_subspace(&cfg, &frame, Method::Perfect, &basis).unwrap();
        let state = estimate_transformed_channel(&est.g_perp, &frame.y_tp, &frame.pilots).unwrap();
        let f = est.g_perp.adjoint() * frame.truth.h[0].at(0);
        assert!((state.f_hat.column(0) - f).camax() < 1e-10);
    }

    #[test]
    fn ls_error_statistics_on_noise() {
        let s = make_pilots(20, 1, 2.0).unwrap();
        let eye = ComplexMatrix::identity(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 10_000;
        let mut mean = ComplexVector::zeros(3);
        let mut power = 0.0;
        for _ in 0..trials {
            let w = sample_cscwg_matrix(&mut rng, 3, 20, 1.0);
            let st = estimate_transformed_channel(&eye, &w, &s).unwrap();
            mean += st.f_hat.column(0);
            power += st.f_hat.column(0).norm_squared();
        }
        mean /= Complex64::from(trials as f64);
        assert!(mean.camax() < 0.02);
        let var = power / (3.0 * trials as f64);
        let target = 1.0 / 40.0;
        assert!((var / target - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn ill_conditioned_channels_are_infeasible() {
        let g_perp = ComplexMatrix::identity(3, 3);
        let mut f = ComplexMatrix::zeros(3, 2);
        f[(0, 0)] = Complex64::new(1.0, 0.0);
        f[(0, 1)] = Complex64::new(1.0, 1e-12);
        let state = CajState { g_perp, f_hat: f };
        assert!(matches!(zf_filter(&state), Err(CajError::Infeasible(_))));
    }

    #[test]
    fn baseline_without_jammer_needs_no_estimate() {
        let cfg = FrameConfig {
            k_j: 0,
            n_tp: 20,
            n_td: 50,
            gamma_ts_db: 30.0,
            ..FrameConfig::default()
        };
        let src = FrameSource::new(&cfg).unwrap();
        let frame = src.draw(&mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(run_pipeline(&cfg, &frame, Method::None).is_ok());
        assert!(matches!(run_pipeline(&cfg, &frame, Method::Ev), Err(CajError::Config(_))));
    }
}
