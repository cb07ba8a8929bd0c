//! Constellation, pilots, jammer waveform and received-frame assembly.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{jakes_factor, sample_jakes, ChannelRealization, FadingSpec};
use crate::error::{CajError, Result};
use crate::mathcore::{sample_cscwg_matrix, ComplexMatrix, ComplexVector};

/// QPSK points in index order; index 0 is `(1 + i)/sqrt 2`.
pub const QPSK: [Complex64; 4] = [
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn default_one() -> usize {
    1
}
fn default_n_td() -> usize {
    1000
}
fn default_gamma_ts() -> f64 {
    10.0
}
fn default_gamma_tj() -> f64 {
    40.0
}
fn default_gamma_th() -> f64 {
    -10.0
}
fn default_sigma2() -> f64 {
    1.0
}

/// Scenario scalars of one frame. Powers are per-symbol SNRs relative to
/// `noise_variance`. `k_j = 0` describes the jammer-free reference link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub k: usize,
    #[serde(default = "default_one")]
    pub k_t: usize,
    #[serde(default = "default_one")]
    pub k_j: usize,
    pub n_tp: usize,
    #[serde(default = "default_n_td")]
    pub n_td: usize,
    #[serde(default = "default_gamma_ts")]
    pub gamma_ts_db: f64,
    #[serde(default = "default_gamma_tj")]
    pub gamma_tj_db: f64,
    #[serde(default = "default_sigma2")]
    pub noise_variance: f64,
    #[serde(default = "default_gamma_th")]
    pub gamma_th_db: f64,
    #[serde(default)]
    pub fading_h: FadingSpec,
    #[serde(default)]
    pub fading_g: FadingSpec,
    /// Hold both channels at their first data-symbol value during the pilots.
    #[serde(default)]
    pub freeze_pilots: bool,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            k: 4,
            k_t: 1,
            k_j: 1,
            n_tp: 50,
            n_td: default_n_td(),
            gamma_ts_db: default_gamma_ts(),
            gamma_tj_db: default_gamma_tj(),
            noise_variance: 1.0,
            gamma_th_db: default_gamma_th(),
            fading_h: FadingSpec::block(),
            fading_g: FadingSpec::block(),
            freeze_pilots: false,
        }
    }
}

impl FrameConfig {
    pub fn n_tf(&self) -> usize {
        self.n_tp + self.n_td
    }

    /// Per-symbol transmit power of each friendly node.
    pub fn ts_power(&self) -> f64 {
        db_to_linear(self.gamma_ts_db) * self.noise_variance
    }

    /// Per-symbol transmit power of each jammer.
    pub fn tj_power(&self) -> f64 {
        db_to_linear(self.gamma_tj_db) * self.noise_variance
    }

    pub fn gamma_th(&self) -> f64 {
        db_to_linear(self.gamma_th_db)
    }

    /// Checks the structural invariants and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |msg: String| Err(CajError::Config(msg));
        if self.k < 2 {
            return bad(format!("K must be at least 2, got {}", self.k));
        }
        if self.k_t < 1 {
            return bad("K_t must be at least 1".into());
        }
        if self.k_j >= self.k {
            return bad(format!("K_j = {} must be below K = {}", self.k_j, self.k));
        }
        if self.k - self.k_j < self.k_t {
            return bad(format!(
                "K - K_j = {} leaves too few dimensions for K_t = {} streams",
                self.k - self.k_j,
                self.k_t
            ));
        }
        if self.n_tp <= self.k_t {
            return bad(format!("N_tp = {} must exceed K_t = {}", self.n_tp, self.k_t));
        }
        if self.n_tp <= self.k {
            return bad(format!("N_tp = {} must exceed K = {}", self.n_tp, self.k));
        }
        if self.n_td < 1 {
            return bad("N_td must be at least 1".into());
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return bad(format!("noise variance must be positive, got {}", self.noise_variance));
        }
        for (name, v) in [
            ("gamma_ts_db", self.gamma_ts_db),
            ("gamma_tj_db", self.gamma_tj_db),
            ("gamma_th_db", self.gamma_th_db),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        self.fading_h.validate()?;
        self.fading_g.validate()?;
        let mut warnings = Vec::new();
        if self.k_j > 0 && self.k - self.k_j == self.k_t {
            warnings.push(format!(
                "K - K_j = K_t = {}: detection is invertible but has no spare dimension",
                self.k_t
            ));
        }
        Ok(warnings)
    }
}

pub fn qpsk_point(index: u8, power: f64) -> Complex64 {
    QPSK[index as usize & 3] * power.sqrt()
}

pub fn qpsk_symbols(indices: &[u8], power: f64) -> ComplexVector {
    ComplexVector::from_iterator(indices.len(), indices.iter().map(|&i| qpsk_point(i, power)))
}

pub fn qpsk_indices<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..4u8)).collect()
}

/// `n` uniform QPSK symbols at `power`, together with their indices.
pub fn qpsk_modulate<R: Rng + ?Sized>(rng: &mut R, n: usize, power: f64) -> (Vec<u8>, ComplexVector) {
    let idx = qpsk_indices(rng, n);
    let sym = qpsk_symbols(&idx, power);
    (idx, sym)
}

/// Nearest-point hard decision; ties go to the lower index.
pub fn qpsk_slice(soft: &[Complex64]) -> Vec<u8> {
    soft.iter()
        .map(|z| {
            let mut best = 0u8;
            let mut best_d = f64::INFINITY;
            for (i, c) in QPSK.iter().enumerate() {
                let d = (z - c).norm_sqr();
                if d < best_d {
                    best_d = d;
                    best = i as u8;
                }
            }
            best
        })
        .collect()
}

/// First `k_t` columns of the `n_tp`-point DFT matrix, scaled so every entry
/// has modulus `sqrt(power)`.
pub fn make_pilots(n_tp: usize, k_t: usize, power: f64) -> Result<ComplexMatrix> {
    if n_tp <= k_t {
        return Err(CajError::config(format!("N_tp = {n_tp} must exceed K_t = {k_t}")));
    }
    let amp = power.sqrt();
    Ok(ComplexMatrix::from_fn(n_tp, k_t, |n, i| {
        let phase = 2.0 * PI * ((n * i) % n_tp) as f64 / n_tp as f64;
        Complex64::from_polar(amp, phase)
    }))
}

/// Ground truth of a frame, for scoring only.
#[derive(Debug, Clone)]
pub struct FrameTruth {
    pub h: Vec<ChannelRealization>,
    pub g: Vec<ChannelRealization>,
    /// `N_tf x K_t`: pilots followed by data.
    pub tn_symbols: ComplexMatrix,
    /// `K_t` rows of `N_td` QPSK indices.
    pub data_indices: Vec<Vec<u8>>,
    /// `N_tf x K_j` jammer waveform.
    pub jn_symbols: ComplexMatrix,
}

impl FrameTruth {
    /// Jammer `l` during the pilot block.
    pub fn jam_pilot(&self, l: usize, n_tp: usize) -> ComplexVector {
        self.jn_symbols.view((0, l), (n_tp, 1)).column(0).into_owned()
    }
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub y_tp: ComplexMatrix,
    pub y_td: ComplexMatrix,
    pub pilots: ComplexMatrix,
    pub truth: FrameTruth,
}

/// Builds `Y[:, n] = sum_i h_i[n] s_i[n] + sum_l g_l[n] j_l[n] + w[n]` from
/// explicit channels, waveforms and noise.
pub fn assemble_frame(
    cfg: &FrameConfig,
    h: Vec<ChannelRealization>,
    g: Vec<ChannelRealization>,
    tn_symbols: ComplexMatrix,
    data_indices: Vec<Vec<u8>>,
    jn_symbols: ComplexMatrix,
    noise: &ComplexMatrix,
) -> Result<Frame> {
    let (k, n_tf) = (cfg.k, cfg.n_tf());
    let mismatch = |what: &str| Err(CajError::Config(format!("frame assembly: {what} has the wrong shape")));
    if h.len() != cfg.k_t || h.iter().any(|c| c.sensors() != k || c.n_symbols() != n_tf) {
        return mismatch("friendly channel set");
    }
    if g.len() != jn_symbols.ncols() || g.iter().any(|c| c.sensors() != k || c.n_symbols() != n_tf) {
        return mismatch("jamming channel set");
    }
    if tn_symbols.shape() != (n_tf, cfg.k_t) {
        return mismatch("friendly symbol matrix");
    }
    if jn_symbols.nrows() != n_tf {
        return mismatch("jammer symbol matrix");
    }
    if noise.shape() != (k, n_tf) {
        return mismatch("noise matrix");
    }
    if data_indices.len() != cfg.k_t || data_indices.iter().any(|d| d.len() != cfg.n_td) {
        return mismatch("data index table");
    }

    let mut y = noise.clone();
    for n in 0..n_tf {
        let mut col = y.column_mut(n);
        for (i, hi) in h.iter().enumerate() {
            col.axpy(tn_symbols[(n, i)], &hi.at(n), Complex64::new(1.0, 0.0));
        }
        for (l, gl) in g.iter().enumerate() {
            col.axpy(jn_symbols[(n, l)], &gl.at(n), Complex64::new(1.0, 0.0));
        }
    }
    let y_tp = y.columns(0, cfg.n_tp).into_owned();
    let y_td = y.columns(cfg.n_tp, cfg.n_td).into_owned();
    let pilots = tn_symbols.rows(0, cfg.n_tp).into_owned();
    Ok(Frame {
        y_tp,
        y_td,
        pilots,
        truth: FrameTruth {
            h,
            g,
            tn_symbols,
            data_indices,
            jn_symbols,
        },
    })
}

/// Draws frames for one validated configuration. Pilots and Jakes factors
/// are computed once and shared.
#[derive(Debug, Clone)]
pub struct FrameSource {
    cfg: FrameConfig,
    pilots: Arc<ComplexMatrix>,
    noiseless: bool,
}

impl FrameSource {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        cfg.validate()?;
        let pilots = make_pilots(cfg.n_tp, cfg.k_t, cfg.ts_power())?;
        for spec in [cfg.fading_h, cfg.fading_g] {
            if spec.is_time_varying() {
                jakes_factor(spec.effective_tau(), cfg.n_tf(), cfg.n_td)?;
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            pilots: Arc::new(pilots),
            noiseless: false,
        })
    }

    /// Test hook: frames carry no thermal noise (powers keep their SNR scale).
    pub fn without_noise(mut self) -> Self {
        self.noiseless = true;
        self
    }

    pub fn config(&self) -> &FrameConfig {
        &self.cfg
    }

    pub fn pilots(&self) -> &ComplexMatrix {
        &self.pilots
    }

    fn channel<R: Rng + ?Sized>(&self, rng: &mut R, spec: &FadingSpec) -> Result<ChannelRealization> {
        let cfg = &self.cfg;
        let mut c = sample_jakes(rng, cfg.k, spec, cfg.n_tf(), cfg.n_td)?;
        if cfg.freeze_pilots {
            c.freeze_prefix(cfg.n_tp);
        }
        Ok(c)
    }

    /// Random draws happen in a fixed order: friendly channels, jamming
    /// channels, data indices, jammer indices, noise.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Frame> {
        let cfg = &self.cfg;
        let n_tf = cfg.n_tf();
        let h = (0..cfg.k_t)
            .map(|_| self.channel(rng, &cfg.fading_h))
            .collect::<Result<Vec<_>>>()?;
        let g = (0..cfg.k_j)
            .map(|_| self.channel(rng, &cfg.fading_g))
            .collect::<Result<Vec<_>>>()?;

        let ps = cfg.ts_power();
        let data_indices: Vec<Vec<u8>> = (0..cfg.k_t).map(|_| qpsk_indices(rng, cfg.n_td)).collect();
        let mut tn = ComplexMatrix::zeros(n_tf, cfg.k_t);
        tn.rows_mut(0, cfg.n_tp).copy_from(&*self.pilots);
        for (i, idx) in data_indices.iter().enumerate() {
            for (n, &d) in idx.iter().enumerate() {
                tn[(cfg.n_tp + n, i)] = qpsk_point(d, ps);
            }
        }

        let pj = cfg.tj_power();
        let mut jn = ComplexMatrix::zeros(n_tf, cfg.k_j);
        for l in 0..cfg.k_j {
            for (n, d) in qpsk_indices(rng, n_tf).into_iter().enumerate() {
                jn[(n, l)] = qpsk_point(d, pj);
            }
        }

        let noise = if self.noiseless {
            ComplexMatrix::zeros(cfg.k, n_tf)
        } else {
            sample_cscwg_matrix(rng, cfg.k, n_tf, cfg.noise_variance)
        };
        assemble_frame(cfg, h, g, tn, data_indices, jn, &noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_block;
    use crate::mathcore::svd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constellation_definition() {
        assert_eq!(qpsk_point(0, 1.0), Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        for i in 0..4 {
            assert!((qpsk_point(i, 3.7).norm_sqr() - 3.7).abs() < 1e-14);
        }
    }

    #[test]
    fn slicing() {
        assert_eq!(qpsk_slice(&[Complex64::new(0.9, 1.1)]), vec![0]);
        assert_eq!(qpsk_slice(&QPSK), vec![0, 1, 2, 3]);
        // equidistant from all four points
        assert_eq!(qpsk_slice(&[Complex64::new(0.0, 0.0)]), vec![0]);
        // on the boundary between 1 and 2
        assert_eq!(qpsk_slice(&[Complex64::new(-1.0, 0.0)]), vec![1]);
    }

    #[test]
    fn modulate_slice_loopback() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (idx, sym) = qpsk_modulate(&mut rng, 10_000, 5.0);
        let scaled: Vec<Complex64> = sym.iter().map(|z| z / 5f64.sqrt()).collect();
        assert_eq!(qpsk_slice(&scaled), idx);
    }

    #[test]
    fn qpsk_is_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (_, sym) = qpsk_modulate(&mut rng, 100_000, 1.0);
        assert!((sym.sum() / 100_000.0).norm() < 0.01);
    }

    #[test]
    fn pilots_are_orthogonal() {
        let s = make_pilots(20, 1, 1.0).unwrap();
        assert!((s.column(0).norm_squared() - 20.0).abs() < 1e-12);
        let s = make_pilots(20, 3, 2.5).unwrap();
        let gram = s.adjoint() * &s;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 50.0 } else { 0.0 };
                assert!((gram[(i, j)] - Complex64::from(target)).norm() < 1e-9);
            }
        }
        assert!(s.iter().all(|z| (z.norm() - 2.5f64.sqrt()).abs() < 1e-12));
        assert!(make_pilots(3, 3, 1.0).is_err());
    }

    #[test]
    fn snr_bookkeeping() {
        let cfg = FrameConfig {
            gamma_ts_db: 7.0,
            gamma_tj_db: 23.0,
            ..FrameConfig::default()
        };
        assert_eq!(cfg.ts_power(), 10f64.powf(0.7));
        assert_eq!(cfg.tj_power(), 10f64.powf(2.3));
    }

    #[test]
    fn validation() {
        let ok = FrameConfig::default();
        assert!(ok.validate().unwrap().is_empty());
        let cases = [
            FrameConfig { k: 1, ..ok.clone() },
            FrameConfig { k_j: 4, ..ok.clone() },
            FrameConfig { k_t: 4, ..ok.clone() },
            FrameConfig { n_tp: 4, ..ok.clone() },
            FrameConfig { n_td: 0, ..ok.clone() },
            FrameConfig { noise_variance: 0.0, ..ok.clone() },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(CajError::Config(_))), "{c:?}");
        }
        let tight = FrameConfig { k_t: 3, ..ok.clone() };
        assert_eq!(tight.validate().unwrap().len(), 1);
        let clean = FrameConfig { k_j: 0, ..ok };
        assert!(clean.validate().unwrap().is_empty());
    }

    #[test]
    fn noiseless_jammer_free_pilot_block_is_rank_one() {
        let cfg = FrameConfig {
            k_j: 0,
            n_tp: 20,
            n_td: 10,
            ..FrameConfig::default()
        };
        let src = FrameSource::new(&cfg).unwrap().without_noise();
        let frame = src.draw(&mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let h = frame.truth.h[0].at(0).into_owned();
        let expected = &h * frame.pilots.column(0).transpose();
        assert!((&frame.y_tp - expected).norm() < 1e-10);
        let sv = svd(&frame.y_tp).unwrap().singular_values;
        assert!(sv[1] < 1e-10 * sv[0]);
    }

    #[test]
    fn noise_only_frame_has_unit_variance() {
        let cfg = FrameConfig {
            k: 4,
            k_j: 0,
            n_tp: 50,
            n_td: 2450,
            ..FrameConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = sample_cscwg_matrix(&mut rng, 4, 2500, 1.0);
        let h = vec![ChannelRealization::zeros(4, 2500)];
        let tn = ComplexMatrix::zeros(2500, 1);
        let frame = assemble_frame(
            &cfg,
            h,
            vec![],
            tn,
            vec![vec![0; 2450]],
            ComplexMatrix::zeros(2500, 0),
            &noise,
        )
        .unwrap();
        let power = (frame.y_tp.norm_squared() + frame.y_td.norm_squared()) / 10_000.0;
        assert!((0.97..=1.03).contains(&power), "{power}");
    }

    #[test]
    fn superposition() {
        let cfg = FrameConfig {
            n_tp: 20,
            n_td: 30,
            ..FrameConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n_tf = cfg.n_tf();
        let h = vec![sample_block(&mut rng, 4, n_tf)];
        let g = vec![sample_block(&mut rng, 4, n_tf)];
        let tn = sample_cscwg_matrix(&mut rng, n_tf, 1, 2.0);
        let jn = sample_cscwg_matrix(&mut rng, n_tf, 1, 5.0);
        let w = sample_cscwg_matrix(&mut rng, 4, n_tf, 1.0);
        let idx = vec![vec![0; cfg.n_td]];
        let zero_h = vec![ChannelRealization::zeros(4, n_tf)];
        let both = assemble_frame(&cfg, h.clone(), g.clone(), tn.clone(), idx.clone(), jn.clone(), &w).unwrap();
        let a = assemble_frame(&cfg, h, vec![ChannelRealization::zeros(4, n_tf)], tn.clone(), idx.clone(), jn.clone(), &w).unwrap();
        let b = assemble_frame(&cfg, zero_h, g, tn, idx, jn, &w).unwrap();
        let w_tp = w.columns(0, cfg.n_tp);
        let lhs = &a.y_tp + &b.y_tp - w_tp;
        assert!((lhs - &both.y_tp).camax() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let cfg = FrameConfig {
            n_tp: 20,
            n_td: 5,
            ..FrameConfig::default()
        };
        let w = ComplexMatrix::zeros(3, 25);
        let r = assemble_frame(
            &cfg,
            vec![ChannelRealization::zeros(4, 25)],
            vec![],
            ComplexMatrix::zeros(25, 1),
            vec![vec![0; 5]],
            ComplexMatrix::zeros(25, 0),
            &w,
        );
        assert!(matches!(r, Err(CajError::Config(_))));
    }

    #[test]
    fn draws_are_reproducible() {
        let cfg = FrameConfig {
            n_tp: 20,
            n_td: 40,
            fading_g: FadingSpec::jakes(0.05),
            ..FrameConfig::default()
        };
        let src = FrameSource::new(&cfg).unwrap();
        let a = src.draw(&mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = src.draw(&mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a.y_tp, b.y_tp);
        assert_eq!(a.y_td, b.y_td);
        assert_eq!(a.truth.data_indices, b.truth.data_indices);
    }
}
