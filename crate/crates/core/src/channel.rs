//! Friendly and jamming channel generation: block Rayleigh fading and the
//! Jakes time-varying model with Bessel-J0 autocorrelation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CajError, Result};
use crate::mathcore::{bessel_j0, sample_cscwg, sample_cscwg_matrix, ComplexMatrix};

/// Coherence time of a channel with maximum Doppler `f_d`: `t_c = 0.423 / f_d`.
pub const COHERENCE_CONSTANT: f64 = 0.423;

/// Remaining pivot below which the Cholesky factorisation of the Jakes
/// covariance stops; plays the role of the diagonal jitter.
const CHOLESKY_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FadingKind {
    #[default]
    Block,
    Jakes,
}

/// Fading model of one link. `tau` is the ratio of the data interval to the
/// channel coherence time; block fading ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FadingSpec {
    #[serde(default)]
    pub kind: FadingKind,
    #[serde(default)]
    pub tau: f64,
}

impl FadingSpec {
    pub fn block() -> Self {
        Self {
            kind: FadingKind::Block,
            tau: 0.0,
        }
    }

    pub fn jakes(tau: f64) -> Self {
        Self {
            kind: FadingKind::Jakes,
            tau,
        }
    }

    pub fn effective_tau(&self) -> f64 {
        match self.kind {
            FadingKind::Block => 0.0,
            FadingKind::Jakes => self.tau,
        }
    }

    pub fn is_time_varying(&self) -> bool {
        self.effective_tau() > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(CajError::config(format!("fading tau must be >= 0, got {}", self.tau)));
        }
        Ok(())
    }
}

pub fn coherence_time(doppler_hz: f64) -> f64 {
    COHERENCE_CONSTANT / doppler_hz
}

/// `tau = t_d / t_c` for a data interval `t_d` and Doppler spread `f_d`.
pub fn tau_from_doppler(doppler_hz: f64, data_interval: f64) -> f64 {
    data_interval / coherence_time(doppler_hz)
}

pub fn doppler_from_tau(tau: f64, data_interval: f64) -> f64 {
    tau * COHERENCE_CONSTANT / data_interval
}

/// Target autocorrelation `J0(0.846 pi tau lag / n_td)` of the symbol-spaced
/// channel samples.
pub fn jakes_autocorrelation(tau: f64, lag: f64, n_td: usize) -> f64 {
    bessel_j0(2.0 * COHERENCE_CONSTANT * std::f64::consts::PI * tau * lag / n_td as f64)
}

/// Channel vectors over a frame. Column `n` of the logical `K x n_symbols`
/// matrix is the channel at symbol `n`; a constant realisation stores a
/// single column.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    gains: ComplexMatrix,
    n_symbols: usize,
    constant: bool,
}

impl ChannelRealization {
    pub fn constant(h: nalgebra::DVector<Complex64>, n_symbols: usize) -> Self {
        let k = h.len();
        Self {
            gains: ComplexMatrix::from_column_slice(k, 1, h.as_slice()),
            n_symbols,
            constant: true,
        }
    }

    pub fn time_varying(gains: ComplexMatrix) -> Self {
        let n_symbols = gains.ncols();
        Self {
            gains,
            n_symbols,
            constant: false,
        }
    }

    pub fn zeros(k: usize, n_symbols: usize) -> Self {
        Self::constant(nalgebra::DVector::zeros(k), n_symbols)
    }

    pub fn sensors(&self) -> usize {
        self.gains.nrows()
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn at(&self, n: usize) -> nalgebra::DVectorView<'_, Complex64> {
        debug_assert!(n < self.n_symbols);
        if self.constant {
            self.gains.column(0)
        } else {
            self.gains.column(n)
        }
    }

    /// The full `K x n_symbols` gain matrix.
    pub fn dense(&self) -> ComplexMatrix {
        if self.constant {
            ComplexMatrix::from_fn(self.gains.nrows(), self.n_symbols, |r, _| self.gains[(r, 0)])
        } else {
            self.gains.clone()
        }
    }

    /// Holds the channel fixed over the first `prefix` symbols at its value
    /// at symbol `prefix`.
    pub fn freeze_prefix(&mut self, prefix: usize) {
        if self.constant || prefix == 0 || prefix >= self.n_symbols {
            return;
        }
        let anchor = self.gains.column(prefix).into_owned();
        for n in 0..prefix {
            self.gains.set_column(n, &anchor);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.gains *= Complex64::from(factor);
    }
}

/// Draws `h ~ CN(0, I_K)` held constant over the frame.
pub fn sample_block<R: Rng + ?Sized>(rng: &mut R, k: usize, n_symbols: usize) -> ChannelRealization {
    ChannelRealization::constant(sample_cscwg(rng, k, 1.0), n_symbols)
}

/// Low-rank Cholesky factor `L` (n x r) with `L L^T` equal to the Jakes
/// covariance up to the pivot tolerance.
#[derive(Debug, Clone)]
pub struct JakesFactor {
    pub tau: f64,
    pub n_symbols: usize,
    pub n_td: usize,
    factor: DMatrix<f64>,
}

impl JakesFactor {
    /// Diagonally pivoted Cholesky of the Toeplitz matrix
    /// `Sigma[i, j] = J0(0.846 pi tau |i - j| / n_td)`, stopped once every
    /// remaining pivot is below the jitter level.
    pub fn new(tau: f64, n_symbols: usize, n_td: usize) -> Result<Self> {
        if !(tau > 0.0) || n_symbols == 0 || n_td == 0 {
            return Err(CajError::config(format!(
                "Jakes factor needs tau > 0 and positive lengths (tau={tau}, n={n_symbols}, n_td={n_td})"
            )));
        }
        let n = n_symbols;
        let rho: Vec<f64> = (0..n)
            .map(|lag| jakes_autocorrelation(tau, lag as f64, n_td))
            .collect();
        let mut residual: Vec<f64> = vec![1.0; n];
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < n {
            let (pivot, &d): (usize, &f64) = residual
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("n > 0");
            if !d.is_finite() {
                return Err(CajError::Numerical(format!(
                    "Jakes covariance factorisation broke down (tau={tau}, n={n})"
                )));
            }
            if d < CHOLESKY_JITTER {
                break;
            }
            let root = d.sqrt();
            let mut col = vec![0.0; n];
            for (j, slot) in col.iter_mut().enumerate() {
                let mut v = rho[j.abs_diff(pivot)];
                for prev in &cols {
                    v -= prev[j] * prev[pivot];
                }
                *slot = v / root;
            }
            for (j, r) in residual.iter_mut().enumerate() {
                *r -= col[j] * col[j];
            }
            residual[pivot] = 0.0;
            cols.push(col);
        }
        let worst = residual.iter().cloned().fold(0.0, f64::max);
        if worst > CHOLESKY_JITTER || residual.iter().any(|r| *r < -1e-6) {
            return Err(CajError::Numerical(format!(
                "Jakes covariance is not positive semi-definite (tau={tau}, residual {worst:.3e})"
            )));
        }
        let r = cols.len();
        let factor = DMatrix::from_fn(n, r, |i, j| cols[j][i]);
        Ok(Self {
            tau,
            n_symbols,
            n_td,
            factor,
        })
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `K` independent sequences, one per row.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> ComplexMatrix {
        let white = sample_cscwg_matrix(rng, k, self.rank(), 1.0);
        let mut out = ComplexMatrix::zeros(k, self.n_symbols);
        for n in 0..self.n_symbols {
            for (j, &l) in self.factor.row(n).iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                for s in 0..k {
                    out[(s, n)] += white[(s, j)] * l;
                }
            }
        }
        out
    }
}

type FactorKey = (u64, usize, usize);

fn factor_cache() -> &'static Mutex<HashMap<FactorKey, Arc<JakesFactor>>> {
    static CACHE: OnceLock<Mutex<HashMap<FactorKey, Arc<JakesFactor>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared, memoised factor for `(tau, n_symbols, n_td)`.
pub fn jakes_factor(tau: f64, n_symbols: usize, n_td: usize) -> Result<Arc<JakesFactor>> {
    let key = (tau.to_bits(), n_symbols, n_td);
    if let Some(f) = factor_cache().lock().expect("cache poisoned").get(&key) {
        return Ok(Arc::clone(f));
    }
    let built = Arc::new(JakesFactor::new(tau, n_symbols, n_td)?);
    let mut cache = factor_cache().lock().expect("cache poisoned");
    Ok(Arc::clone(cache.entry(key).or_insert(built)))
}

/// Draws a `K`-sensor channel under `spec`. Zero effective Doppler reduces to
/// block fading.
pub fn sample_jakes<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    spec: &FadingSpec,
    n_symbols: usize,
    n_td: usize,
) -> Result<ChannelRealization> {
    spec.validate()?;
    if n_symbols == 0 {
        return Err(CajError::config("channel needs at least one symbol"));
    }
    let tau = spec.effective_tau();
    if tau == 0.0 {
        return Ok(sample_block(rng, k, n_symbols));
    }
    let factor = jakes_factor(tau, n_symbols, n_td)?;
    Ok(ChannelRealization::time_varying(factor.sample(rng, k)))
}
