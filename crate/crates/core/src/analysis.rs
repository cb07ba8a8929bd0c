//! Closed-form performance expressions and empirical metrics.

use serde::{Deserialize, Serialize};

use crate::caj::{FrameDiagnostics, Method};
use crate::error::{CajError, Result};
use crate::mathcore::{chi2_cdf, ComplexVector};
use crate::signal::FrameConfig;

/// Inputs of the analytical expressions for one realised jammer sequence.
///
/// `jam_power` is the pilot-block energy `|j_tp|^2`; `signal_power` is the
/// per-symbol friendly power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticInputs {
    pub k: usize,
    pub k_j: usize,
    pub n_tp: usize,
    pub n_td: usize,
    pub sigma2: f64,
    pub signal_power: f64,
    pub jam_power: f64,
    /// `sum_n |j_tp^H psi_n|^2` over the pilot complement.
    pub jam_projection_energy: f64,
    /// `|j_tp^H s_perp|^2` for the NLS projection vector.
    pub jam_nls_energy: f64,
    /// `|j_tp^H s_bar|^2` along the normalised pilot.
    pub jam_pilot_energy: f64,
    pub gamma_th: f64,
    /// `|g|^2`; the analysis convention is `K`.
    pub g_norm2: f64,
}

impl AnalyticInputs {
    /// Inputs for a jammer whose pilot-block energy is spread isotropically.
    pub fn isotropic(cfg: &FrameConfig) -> Self {
        let jam_power = cfg.n_tp as f64 * cfg.tj_power();
        let per_dim = jam_power / cfg.n_tp as f64;
        Self {
            k: cfg.k,
            k_j: cfg.k_j,
            n_tp: cfg.n_tp,
            n_td: cfg.n_td,
            sigma2: cfg.noise_variance,
            signal_power: cfg.ts_power(),
            jam_power,
            jam_projection_energy: per_dim * (cfg.n_tp - cfg.k_t) as f64,
            jam_nls_energy: per_dim,
            jam_pilot_energy: per_dim * cfg.k_t as f64,
            gamma_th: cfg.gamma_th(),
            g_norm2: cfg.k as f64,
        }
    }

    /// Inputs built from the jammer actually drawn in a frame.
    pub fn from_frame(cfg: &FrameConfig, diag: &FrameDiagnostics) -> Self {
        Self {
            k: cfg.k,
            k_j: cfg.k_j,
            n_tp: cfg.n_tp,
            n_td: cfg.n_td,
            sigma2: cfg.noise_variance,
            signal_power: cfg.ts_power(),
            jam_power: diag.jam_block_energy,
            jam_projection_energy: diag.jam_proj_energy,
            jam_nls_energy: diag.jam_nls_energy,
            jam_pilot_energy: diag.jam_pilot_energy,
            gamma_th: cfg.gamma_th(),
            g_norm2: cfg.k as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let slack = 1e-9 * self.jam_power.max(1.0);
        if self.jam_projection_energy > self.jam_power + slack || self.jam_nls_energy > self.jam_power + slack {
            return Err(CajError::Domain(format!(
                "projection energy exceeds jammer energy {}",
                self.jam_power
            )));
        }
        if !(self.sigma2 > 0.0) {
            return Err(CajError::Domain("noise variance must be positive".into()));
        }
        Ok(())
    }
}

/// Jammer SNR captured by the single NLS projection.
pub fn received_jam_snr_nls(a: &AnalyticInputs) -> f64 {
    a.jam_nls_energy * a.g_norm2 / (a.k as f64 * a.sigma2)
}

/// Per-dimension jammer SNR of the cleaned pilot block used by EV.
pub fn received_jam_snr_ev(a: &AnalyticInputs) -> f64 {
    (a.jam_power - a.jam_pilot_energy) * a.g_norm2 / (a.k as f64 * (a.n_tp as f64 - 1.0) * a.sigma2)
}

/// Jammer SNR collected over the whole pilot complement.
pub fn received_jam_snr_ev_total(a: &AnalyticInputs) -> f64 {
    a.jam_projection_energy * a.g_norm2 / (a.k as f64 * a.sigma2)
}

/// Scalar `d` of the Fisher information `d I` for the jamming direction.
pub fn fim_diag(a: &AnalyticInputs) -> f64 {
    a.jam_projection_energy / a.sigma2
}

/// Per-entry estimation error variance of an efficient estimator, normalised
/// to `|g|^2 = K`.
pub fn crlb_error_variance(a: &AnalyticInputs) -> Result<f64> {
    if a.jam_projection_energy <= 0.0 {
        return Err(CajError::Degenerate("jammer has no energy outside the pilots".into()));
    }
    Ok(a.sigma2 / (a.k as f64 * a.jam_projection_energy))
}

/// Effective post-projection SNR scale of the chi-squared outage law.
pub fn beta(a: &AnalyticInputs, method: Method) -> Result<f64> {
    let base = a.signal_power / (a.sigma2 * (a.k as f64 - 1.0));
    if a.jam_power == 0.0 {
        return Ok(base);
    }
    let captured = match method {
        Method::Ev => a.jam_projection_energy,
        Method::Nls => a.jam_nls_energy,
        other => {
            return Err(CajError::config(format!("beta is defined for EV and NLS, not {other}")));
        }
    };
    if captured <= 0.0 {
        return Err(CajError::Degenerate(format!(
            "{method} captures no jammer energy; beta is undefined"
        )));
    }
    Ok(base / (a.jam_power / captured + 1.0))
}

pub fn outage_analytical(k: usize, beta: f64, gamma_th: f64) -> Result<f64> {
    if k < 2 {
        return Err(CajError::Domain(format!("outage needs K >= 2, got {k}")));
    }
    if !(beta > 0.0) {
        return Err(CajError::Domain(format!("beta must be positive, got {beta}")));
    }
    chi2_cdf(2.0 * gamma_th / beta, 2 * (k as u32 - 1))
}

/// Received friendly SNR after projection for a realised transformed channel,
/// with `sigma_eps2` the per-entry direction error variance.
pub fn received_snr(f_norm2: f64, signal_power: f64, k: usize, sigma_eps2: f64, jam_power: f64, sigma2: f64) -> f64 {
    f_norm2 * signal_power / ((k as f64 - 1.0) * (k as f64 * sigma_eps2 * jam_power + sigma2))
}

/// Per-entry error variance implied by the measured leakage `|G_perp^H g|^2`.
pub fn leak_error_variance(jam_leak: f64, k: usize) -> f64 {
    jam_leak / (k as f64 * (k as f64 - 1.0))
}

/// Dominant number of required multiplications.
pub fn complexity_nrm(method: Method, k: u64, k_j: u64, n_tp: u64, n_td: u64) -> Result<i64> {
    let n_tf = n_tp + n_td;
    let (k, k_j, n_tp, n_td, n_tf) = (k as i64, k_j as i64, n_tp as i64, n_td as i64, n_tf as i64);
    match method {
        Method::Ev => Ok(k * n_tp * n_tp + k * k * (2 * n_tp + n_td) - k * k_j * n_tf),
        Method::Nls => Ok(k * k * (2 * n_tp + n_td) - k * k_j * n_tf),
        Method::None => Ok(k * n_tf),
        Method::Perfect => Err(CajError::config("no complexity count for the PERFECT baseline")),
    }
}

/// `| |g_hat| - |g_bar| |^2` with elementwise moduli.
pub fn msad_term(g_hat: &ComplexVector, g_bar: &ComplexVector) -> f64 {
    g_hat.iter().zip(g_bar.iter()).map(|(a, b)| (a.norm() - b.norm()).powi(2)).sum()
}

pub fn msad(estimates: &[ComplexVector], truth: &[ComplexVector]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(CajError::UndefinedMetric("MSAD of an empty ensemble".into()));
    }
    if estimates.len() != truth.len() {
        return Err(CajError::config("estimate and truth ensembles differ in size"));
    }
    let total: f64 = estimates.iter().zip(truth).map(|(e, t)| msad_term(e, t)).sum();
    Ok(total / estimates.len() as f64)
}

/// `arccos |g_hat^H g_bar|` in degrees for unit vectors.
pub fn cosine_angle_deg(g_hat: &ComplexVector, g_bar: &ComplexVector) -> f64 {
    g_hat.dotc(g_bar).norm().clamp(0.0, 1.0).acos().to_degrees()
}

pub fn ser(detected: &[u8], truth: &[u8]) -> Result<f64> {
    if truth.is_empty() {
        return Err(CajError::UndefinedMetric("SER over zero symbols".into()));
    }
    if detected.len() != truth.len() {
        return Err(CajError::config("detected and transmitted symbol counts differ"));
    }
    let errors = detected.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / truth.len() as f64)
}

pub fn empirical_outage(gamma_rs: &[f64], gamma_th: f64) -> Result<f64> {
    if gamma_rs.is_empty() {
        return Err(CajError::UndefinedMetric("outage over zero frames".into()));
    }
    let below = gamma_rs.iter().filter(|&&g| g < gamma_th).count();
    Ok(below as f64 / gamma_rs.len() as f64)
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario: String,
    pub method: String,
    pub sweep_name: String,
    pub sweep_value: f64,
    pub metric: String,
    pub value: f64,
    pub trials: u64,
    pub seed: u64,
}

impl MetricsRecord {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(CajError::UndefinedMetric(format!("{} has no trials", self.metric)));
        }
        if !self.value.is_finite() || !self.sweep_value.is_finite() {
            return Err(CajError::UndefinedMetric(format!(
                "{} at {}={} is not finite",
                self.metric, self.sweep_name, self.sweep_value
            )));
        }
        Ok(())
    }
}
