//! Jamming-direction estimation from the pilot block.
//!
//! The friendly pilots are erased by projecting the rows of `Y_tp` onto the
//! orthogonal complement `S_perp` of the pilot matrix; what remains is the
//! jamming component plus noise.

use num_complex::Complex64;

use crate::error::{CajError, Result};
use crate::mathcore::{orthonormal_complement, phase_normalize, svd, ComplexMatrix, ComplexVector};

/// Relative size below which `Y_tp conj(s_perp)` counts as zero.
const NLS_DEGENERATE_TOL: f64 = 1e-12;

/// Pilot matrix together with its orthonormal complement.
#[derive(Debug, Clone)]
pub struct PilotBasis {
    pilots: ComplexMatrix,
    s_perp: ComplexMatrix,
}

impl PilotBasis {
    pub fn new(pilots: &ComplexMatrix) -> Result<Self> {
        if pilots.ncols() == 0 {
            return Err(CajError::config("pilot matrix has no columns"));
        }
        let s_perp = orthonormal_complement(pilots)?;
        Ok(Self {
            pilots: pilots.clone(),
            s_perp,
        })
    }

    pub fn pilots(&self) -> &ComplexMatrix {
        &self.pilots
    }

    /// `N_tp x (N_tp - K_t)` with orthonormal columns spanning the
    /// complement of the pilots.
    pub fn s_perp(&self) -> &ComplexMatrix {
        &self.s_perp
    }

    pub fn n_tp(&self) -> usize {
        self.pilots.nrows()
    }

    /// `Z_tp = Y_tp conj(S_perp)`.
    pub fn cleaned(&self, y_tp: &ComplexMatrix) -> Result<ComplexMatrix> {
        if y_tp.ncols() != self.n_tp() {
            return Err(CajError::config(format!(
                "Y_tp has {} columns but the pilots span {} symbols",
                y_tp.ncols(),
                self.n_tp()
            )));
        }
        Ok(y_tp * self.s_perp.map(|z| z.conj()))
    }
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    /// `K x K_j` unit directions, each phase-normalised.
    pub g_hat_dirs: ComplexMatrix,
    /// `K x (K - K_j)` orthonormal basis of the estimated null space.
    pub g_perp: ComplexMatrix,
    /// Energy of the cleaned pilot block outside the estimated subspace.
    pub residual_energy: f64,
}

impl EstimationResult {
    pub fn direction(&self, l: usize) -> ComplexVector {
        self.g_hat_dirs.column(l).into_owned()
    }

    pub fn k_j(&self) -> usize {
        self.g_hat_dirs.ncols()
    }
}

/// Normalised least squares with the single vector `s_perp` taken as the
/// first column of the pilot complement.
pub fn nls_estimate(y_tp: &ComplexMatrix, s_tp: &ComplexVector) -> Result<EstimationResult> {
    let pilots = ComplexMatrix::from_column_slice(s_tp.len(), 1, s_tp.as_slice());
    nls_estimate_with(y_tp, &PilotBasis::new(&pilots)?)
}

pub fn nls_estimate_with(y_tp: &ComplexMatrix, basis: &PilotBasis) -> Result<EstimationResult> {
    if y_tp.nrows() < 2 {
        return Err(CajError::config("NLS estimation needs at least two sensors"));
    }
    if y_tp.ncols() != basis.n_tp() {
        return Err(CajError::config("Y_tp and pilot lengths differ"));
    }
    let s_perp = basis.s_perp().column(0);
    let mut v = ComplexVector::zeros(y_tp.nrows());
    for (n, s) in s_perp.iter().enumerate() {
        v.axpy(s.conj(), &y_tp.column(n), Complex64::new(1.0, 0.0));
    }
    let norm = v.norm();
    if norm < NLS_DEGENERATE_TOL * y_tp.norm().max(1.0) {
        return Err(CajError::Degenerate(
            "pilot-orthogonal projection of Y_tp vanishes; the jammer has no energy along s_perp".into(),
        ));
    }
    v /= Complex64::from(norm);
    phase_normalize(&mut v);
    let g_hat = ComplexMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let g_perp = orthonormal_complement(&g_hat)?;
    Ok(EstimationResult {
        g_hat_dirs: g_hat,
        g_perp,
        residual_energy: 0.0,
    })
}

/// Principal left singular vector of the cleaned pilot block.
pub fn ev_estimate(y_tp: &ComplexMatrix, pilots: &ComplexMatrix) -> Result<EstimationResult> {
    multi_jam_estimate(y_tp, pilots, 1)
}

pub fn ev_estimate_with(y_tp: &ComplexMatrix, basis: &PilotBasis) -> Result<EstimationResult> {
    multi_jam_estimate_with(y_tp, basis, 1)
}

/// Rank-`k_j` truncated SVD of the cleaned pilot block: the leading `k_j`
/// left singular vectors span the jamming subspace, the rest form `G_perp`.
pub fn multi_jam_estimate(y_tp: &ComplexMatrix, pilots: &ComplexMatrix, k_j: usize) -> Result<EstimationResult> {
    multi_jam_estimate_with(y_tp, &PilotBasis::new(pilots)?, k_j)
}

pub fn multi_jam_estimate_with(y_tp: &ComplexMatrix, basis: &PilotBasis, k_j: usize) -> Result<EstimationResult> {
    let k = y_tp.nrows();
    if k_j == 0 {
        return Err(CajError::config("subspace estimation needs K_j >= 1"));
    }
    if k_j >= k {
        return Err(CajError::Infeasible(format!(
            "K_j = {k_j} jammers cannot be nulled with K = {k} sensors"
        )));
    }
    let z = basis.cleaned(y_tp)?;
    let dec = svd(&z)?;
    let residual_energy = dec.singular_values.iter().skip(k_j).map(|s| s * s).sum();

    let u = if dec.u.ncols() < k {
        // wide-side shortfall: complete the thin factor
        let extra = orthonormal_complement(&dec.u)?;
        let mut full = ComplexMatrix::zeros(k, k);
        full.columns_mut(0, dec.u.ncols()).copy_from(&dec.u);
        full.columns_mut(dec.u.ncols(), extra.ncols()).copy_from(&extra);
        full
    } else {
        dec.u
    };
    if u.ncols() < k_j {
        return Err(CajError::Degenerate(format!(
            "cleaned pilot block has rank below K_j = {k_j}"
        )));
    }
    Ok(EstimationResult {
        g_hat_dirs: u.columns(0, k_j).into_owned(),
        g_perp: u.columns(k_j, k - k_j).into_owned(),
        residual_energy,
    })
}

/// Null-space basis of the true jamming channels at one symbol.
pub fn true_null_space(g: &[ComplexVector]) -> Result<EstimationResult> {
    let k = g.first().map(|c| c.len()).ok_or_else(|| CajError::config("no jamming channels"))?;
    let mut dirs = ComplexMatrix::zeros(k, g.len());
    // Gram-Schmidt so the complement sees an orthonormal input.
    for (l, col) in g.iter().enumerate() {
        let mut v = col.clone();
        for _ in 0..2 {
            for m in 0..l {
                let q = dirs.column(m).into_owned();
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        let n = v.norm();
        if n < 1e-12 * col.norm().max(1e-300) {
            return Err(CajError::Degenerate("true jamming channels are linearly dependent".into()));
        }
        v /= Complex64::from(n);
        phase_normalize(&mut v);
        dirs.set_column(l, &v);
    }
    let g_perp = orthonormal_complement(&dirs)?;
    Ok(EstimationResult {
        g_hat_dirs: dirs,
        g_perp,
        residual_energy: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::{gram_deviation, sample_cscwg, sample_cscwg_matrix};
    use crate::signal::{make_pilots, qpsk_modulate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless_block(
        rng: &mut ChaCha8Rng,
        k: usize,
        n_tp: usize,
        k_j: usize,
    ) -> (ComplexMatrix, ComplexMatrix, Vec<ComplexVector>) {
        let s = make_pilots(n_tp, 1, 10.0).unwrap();
        let h = sample_cscwg(rng, k, 1.0);
        let mut y = &h * s.column(0).transpose();
        let mut gs = Vec::new();
        for _ in 0..k_j {
            let g = sample_cscwg(rng, k, 1.0);
            let (_, j) = qpsk_modulate(rng, n_tp, 1e4);
            y += &g * j.transpose();
            gs.push(g);
        }
        (y, s, gs)
    }

    fn alignment(est: &ComplexVector, g: &ComplexVector) -> f64 {
        est.dotc(g).norm() / g.norm()
    }

    #[test]
    fn noiseless_nls_and_ev_recover_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (y, s, g) = noiseless_block(&mut rng, 4, 20, 1);
        let nls = nls_estimate(&y, &s.column(0).into_owned()).unwrap();
        let ev = ev_estimate(&y, &s).unwrap();
        for est in [&nls, &ev] {
            assert!((alignment(&est.direction(0), &g[0]) - 1.0).abs() < 1e-10);
            assert!((est.direction(0).norm() - 1.0).abs() < 1e-10);
            assert!((est.g_perp.adjoint() * &est.g_hat_dirs).camax() < 1e-10);
            assert!(gram_deviation(&est.g_perp) < 1e-10);
        }
        assert!(ev.residual_energy < 1e-16 * y.norm_squared());
    }

    #[test]
    fn nls_rejects_jammer_along_pilot() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = make_pilots(20, 1, 1.0).unwrap();
        let g = sample_cscwg(&mut rng, 4, 1.0);
        let h = sample_cscwg(&mut rng, 4, 1.0);
        let y = (&h + &g * Complex64::from(3.0)) * s.column(0).transpose();
        let r = nls_estimate(&y, &s.column(0).into_owned());
        assert!(matches!(r, Err(CajError::Degenerate(_))));
    }

    #[test]
    fn two_jammer_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (y, s, g) = noiseless_block(&mut rng, 4, 20, 2);
        let est = multi_jam_estimate(&y, &s, 2).unwrap();
        let proj = est.g_perp.adjoint();
        for gl in &g {
            assert!((&proj * gl).norm() / gl.norm() < 1e-9);
        }
        assert!(gram_deviation(&est.g_hat_dirs) < 1e-10);
    }

    #[test]
    fn single_jammer_multi_equals_ev() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = make_pilots(30, 1, 10.0).unwrap();
        let y = sample_cscwg_matrix(&mut rng, 5, 30, 1.0);
        let a = ev_estimate(&y, &s).unwrap();
        let b = multi_jam_estimate(&y, &s, 1).unwrap();
        assert_eq!(a.g_hat_dirs, b.g_hat_dirs);
        assert_eq!(a.g_perp, b.g_perp);
    }

    #[test]
    fn infeasible_jammer_count() {
        let s = make_pilots(10, 1, 1.0).unwrap();
        let y = ComplexMatrix::from_element(3, 10, Complex64::new(1.0, 0.0));
        assert!(matches!(multi_jam_estimate(&y, &s, 3), Err(CajError::Infeasible(_))));
    }

    #[test]
    fn wide_shortfall_still_returns_full_null_space() {
        // K = 8 sensors, only 5 cleaned pilot dimensions
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = make_pilots(9, 4, 1.0).unwrap();
        let y = sample_cscwg_matrix(&mut rng, 8, 9, 1.0);
        let est = multi_jam_estimate(&y, &s, 2).unwrap();
        assert_eq!(est.g_perp.shape(), (8, 6));
        let mut all = ComplexMatrix::zeros(8, 8);
        all.columns_mut(0, 2).copy_from(&est.g_hat_dirs);
        all.columns_mut(2, 6).copy_from(&est.g_perp);
        assert!(gram_deviation(&all) < 1e-10);
    }

    #[test]
    fn true_null_space_annihilates_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = vec![sample_cscwg(&mut rng, 6, 1.0), sample_cscwg(&mut rng, 6, 1.0)];
        let est = true_null_space(&g).unwrap();
        for gl in &g {
            assert!((est.g_perp.adjoint() * gl).norm() < 1e-10 * gl.norm());
        }
    }
}
