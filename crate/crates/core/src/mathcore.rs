//! Numerical kernels shared by the estimator, projection and analysis code:
//! complex SVD, orthonormal completion, the chi-squared CDF, the Bessel
//! function J0 and circularly-symmetric complex Gaussian sampling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CajError, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Iteration cap handed to the implicit-shift QR sweep of the SVD.
const SVD_MAX_ITER: usize = 10_000;

/// Candidate basis vectors whose residual after projection falls below this
/// norm are treated as lying in the span already built.
const COMPLEMENT_SKIP_TOL: f64 = 1e-6;

/// Tolerance on the Gram matrix of a basis handed to [`orthonormal_complement`].
const COMPLEMENT_INPUT_TOL: f64 = 1e-8;

/// Thin SVD `m = U diag(s) V^H` with singular values sorted descending.
///
/// Each left singular vector is rotated so that its largest-modulus entry is
/// real and positive; the matching right vector gets the same rotation so the
/// factorisation is unchanged.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdResult {
    pub fn rank_truncated(&self, rank: usize) -> ComplexMatrix {
        let (m, n) = (self.u.nrows(), self.v.nrows());
        let mut out = ComplexMatrix::zeros(m, n);
        for i in 0..rank.min(self.singular_values.len()) {
            let scaled = self.u.column(i) * Complex64::from(self.singular_values[i]);
            out += scaled * self.v.column(i).adjoint();
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.rank_truncated(self.singular_values.len())
    }
}

pub fn svd(m: &ComplexMatrix) -> Result<SvdResult> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(CajError::config(format!("svd of empty {rows}x{cols} matrix")));
    }
    ensure_finite(m, "svd input")?;

    let decomposition = m
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| {
            CajError::Numerical(format!(
                "SVD of {rows}x{cols} matrix did not converge within {SVD_MAX_ITER} iterations"
            ))
        })?;
    let u_raw = decomposition.u.expect("left vectors requested");
    let v_t = decomposition.v_t.expect("right vectors requested");
    let sv = decomposition.singular_values;

    let r = sv.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));

    let mut u = ComplexMatrix::zeros(rows, r);
    let mut v = ComplexMatrix::zeros(cols, r);
    let mut singular_values = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        singular_values.push(sv[src]);
        let mut ucol = u_raw.column(src).into_owned();
        // v_t rows are v^H, so conjugate to get the column v.
        let mut vcol = v_t.row(src).adjoint();
        let rot = phase_rotation(ucol.as_slice());
        ucol *= rot;
        vcol *= rot;
        u.set_column(dst, &ucol);
        v.set_column(dst, &vcol);
    }

    let out = SvdResult {
        u,
        singular_values,
        v,
    };
    ensure_finite(&out.u, "svd left vectors")?;
    Ok(out)
}

/// Unit-modulus factor that makes the largest-modulus entry of `x` real
/// positive (identity for the zero vector).
pub fn phase_rotation(x: &[Complex64]) -> Complex64 {
    let mut best = Complex64::new(0.0, 0.0);
    let mut best_norm = 0.0;
    for &z in x {
        let n = z.norm_sqr();
        if n > best_norm * (1.0 + 1e-12) {
            best = z;
            best_norm = n;
        }
    }
    if best_norm == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        best.conj() / best.norm()
    }
}

pub fn phase_normalize(v: &mut ComplexVector) {
    let rot = phase_rotation(v.as_slice());
    *v *= rot;
}

/// Completes the `k` orthonormal columns of `basis` (dimension `n`) to a
/// unitary matrix and returns the `n - k` new columns.
///
/// Columns are normalised first and then checked for mutual orthogonality.
/// Candidates are the standard basis vectors in index order, each projected
/// out of the current span twice (classical Gram-Schmidt with one full
/// re-orthogonalisation pass).
pub fn orthonormal_complement(basis: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (n, k) = basis.shape();
    if k >= n {
        return Err(CajError::config(format!(
            "orthonormal complement needs fewer columns than rows, got {n}x{k}"
        )));
    }
    ensure_finite(basis, "complement input")?;

    let mut q: Vec<ComplexVector> = Vec::with_capacity(n);
    for j in 0..k {
        let col = basis.column(j);
        let norm = col.norm();
        if norm < 1e-300 {
            return Err(CajError::Degenerate(format!("column {j} of the basis is zero")));
        }
        q.push(col / Complex64::from(norm));
    }
    for a in 0..k {
        for b in (a + 1)..k {
            let overlap = q[a].dotc(&q[b]).norm();
            if overlap > COMPLEMENT_INPUT_TOL {
                return Err(CajError::Degenerate(format!(
                    "basis columns {a} and {b} are not orthogonal (|<qa,qb>| = {overlap:.3e})"
                )));
            }
        }
    }

    for i in 0..n {
        if q.len() == n {
            break;
        }
        let mut cand = ComplexVector::zeros(n);
        cand[i] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for qj in &q {
                let coeff = qj.dotc(&cand);
                cand.axpy(-coeff, qj, Complex64::new(1.0, 0.0));
            }
        }
        let norm = cand.norm();
        if norm < COMPLEMENT_SKIP_TOL {
            continue;
        }
        q.push(cand / Complex64::from(norm));
    }
    if q.len() != n {
        return Err(CajError::Degenerate(format!(
            "could only complete {} of {n} basis vectors",
            q.len()
        )));
    }
    Ok(ComplexMatrix::from_columns(&q[k..]))
}

/// CDF of the chi-squared distribution with `k` real degrees of freedom,
/// evaluated through the regularised lower incomplete gamma `P(k/2, x/2)`.
pub fn chi2_cdf(x: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(CajError::Domain("chi-squared needs k >= 1".into()));
    }
    if !(x >= 0.0) {
        return Err(CajError::Domain(format!("chi-squared CDF at negative x = {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let p = statrs::function::gamma::gamma_lr(0.5 * k as f64, 0.5 * x);
    Ok(p.clamp(0.0, 1.0))
}

/// Bessel function of the first kind, order zero.
///
/// Miller's backward recurrence normalised by `J0 + 2 sum J_2m = 1` for
/// `|x| <= 25`, the Hankel asymptotic expansion beyond.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-8 {
        return 1.0 - 0.25 * ax * ax;
    }
    if ax > 25.0 {
        return j0_asymptotic(ax);
    }
    // even starting order well above the turning point
    let start = 2 * ((ax + 15.0 + 6.0 * ax.sqrt()) as usize / 2 + 1);
    let two_over_x = 2.0 / ax;
    let mut above = 0.0;
    let mut current = 1.0;
    let mut even_sum = 0.0;
    let mut take = false;
    for order in (1..=start).rev() {
        let below = order as f64 * two_over_x * current - above;
        above = current;
        current = below;
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            even_sum *= 1e-250;
        }
        if take {
            even_sum += current;
        }
        take = !take;
    }
    // even_sum now holds J0 + J2 + J4 + ... (unnormalised)
    current / (2.0 * even_sum - current)
}

fn j0_asymptotic(x: f64) -> f64 {
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    for k in 1..100usize {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd / (k as f64 * 8.0 * x);
        if next > term {
            break; // series is asymptotic: stop at the smallest term
        }
        term = next;
        match k % 4 {
            1 => q -= term,
            2 => p -= term,
            3 => q += term,
            _ => p += term,
        }
        if term < 1e-17 {
            break;
        }
    }
    let chi = x - std::f64::consts::FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Draws `n` i.i.d. `CN(0, variance)` samples.
pub fn sample_cscwg<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> ComplexVector {
    assert!(variance >= 0.0, "noise variance must be non-negative");
    let scale = (0.5 * variance).sqrt();
    ComplexVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(scale * re, scale * im)
    })
}

/// Fills a `rows x cols` matrix with i.i.d. `CN(0, variance)` entries,
/// column by column.
pub fn sample_cscwg_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> ComplexMatrix {
    assert!(variance >= 0.0, "noise variance must be non-negative");
    let scale = (0.5 * variance).sqrt();
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(scale * re, scale * im)
    })
}

pub fn ensure_finite(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(CajError::Numerical(format!("{what} contains non-finite entries")))
    }
}

/// Largest entry-wise deviation of `m^H m` from the identity.
pub fn gram_deviation(m: &ComplexMatrix) -> f64 {
    let gram = m.adjoint() * m;
    let mut worst: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - Complex64::from(target)).norm());
        }
    }
    worst
}

pub fn unit(v: &ComplexVector) -> Option<ComplexVector> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / Complex64::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_cscwg_matrix(&mut rng, rows, cols, 1.0)
    }

    fn relative_frobenius(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn svd_identity() {
        let s = svd(&ComplexMatrix::identity(3, 3)).unwrap();
        for sv in s.singular_values {
            assert!((sv - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_rank_one_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = unit(&sample_cscwg(&mut rng, 4, 1.0)).unwrap() * Complex64::from(2.0);
        let v = unit(&sample_cscwg(&mut rng, 5, 1.0)).unwrap() * Complex64::from(3.0);
        let m = &u * v.adjoint();
        let s = svd(&m).unwrap();
        assert!((s.singular_values[0] - 6.0).abs() < 1e-12);
        assert!(s.singular_values[1].abs() < 1e-12);
    }

    #[test]
    fn svd_random_wide_reconstructs() {
        let m = random_matrix(4, 7, 11);
        let s = svd(&m).unwrap();
        assert!(relative_frobenius(&s.reconstruct(), &m) < 1e-9);
        assert!(gram_deviation(&s.u) < 1e-10);
        assert!(gram_deviation(&s.v) < 1e-10);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_phase_convention() {
        let m = random_matrix(5, 3, 3);
        let s = svd(&m).unwrap();
        for i in 0..s.u.ncols() {
            let col = s.u.column(i);
            let (idx, _) = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap();
            assert!(col[idx].im.abs() < 1e-12 && col[idx].re > 0.0);
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = random_matrix(3, 3, 1);
        m[(1, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(svd(&m), Err(CajError::Numerical(_))));
    }

    #[test]
    fn complement_of_e1_in_c2() {
        let basis = ComplexMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), 0.0.into()]);
        let c = orthonormal_complement(&basis).unwrap();
        assert_eq!(c.shape(), (2, 1));
        assert!(c[(0, 0)].norm() < 1e-15);
        assert!((c[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complement_of_random_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = unit(&sample_cscwg(&mut rng, 4, 1.0)).unwrap();
        let c = orthonormal_complement(&ComplexMatrix::from_columns(&[g.clone()])).unwrap();
        assert_eq!(c.shape(), (4, 3));
        let leak = c.adjoint() * &g;
        assert!(leak.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn complement_of_two_orthogonal_pilots_is_unitary() {
        let n = 20;
        let pilots = ComplexMatrix::from_fn(n, 2, |r, c| {
            let phase = 2.0 * std::f64::consts::PI * (r * c) as f64 / n as f64;
            Complex64::from_polar(1.0 / (n as f64).sqrt(), phase)
        });
        let c = orthonormal_complement(&pilots).unwrap();
        assert_eq!(c.shape(), (20, 18));
        let mut full = ComplexMatrix::zeros(n, n);
        full.columns_mut(0, 2).copy_from(&pilots);
        full.columns_mut(2, 18).copy_from(&c);
        assert!(gram_deviation(&full) < 1e-10);
        assert!(gram_deviation(&full.adjoint()) < 1e-10);
    }

    #[test]
    fn complement_rejects_dependent_columns() {
        let col = ComplexVector::from_vec(vec![1.0.into(), 1.0.into(), 0.0.into()]);
        let basis = ComplexMatrix::from_columns(&[col.clone(), col * Complex64::new(0.0, 2.0)]);
        assert!(matches!(orthonormal_complement(&basis), Err(CajError::Degenerate(_))));
    }

    #[test]
    fn chi2_closed_forms() {
        for k in 1..10 {
            assert_eq!(chi2_cdf(0.0, k).unwrap(), 0.0);
        }
        let expected = 1.0 - (-1.0f64).exp();
        let got = chi2_cdf(2.0, 2).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-12, "{got} vs {expected}");
        assert!(chi2_cdf(-0.1, 3).is_err());
        assert!(chi2_cdf(1.0, 0).is_err());
    }

    /// Composite Simpson quadrature of the chi-squared density, k = 6.
    fn chi2_6_by_quadrature(x: f64) -> f64 {
        let density = |t: f64| t * t * (-t / 2.0).exp() / 16.0;
        let n = 20_000;
        let h = x / n as f64;
        let mut acc = density(0.0) + density(x);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * density(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn chi2_matches_quadrature_k6() {
        let mut prev = 0.0;
        for i in 1..=40 {
            let x = 0.5 * i as f64;
            let got = chi2_cdf(x, 6).unwrap();
            assert!((got - chi2_6_by_quadrature(x)).abs() < 1e-9, "x = {x}");
            assert!(got >= prev && got <= 1.0);
            prev = got;
        }
    }

    /// Trapezoid rule on J0(x) = (1/pi) int_0^pi cos(x sin t) dt; the integrand
    /// is smooth and periodic so the rule converges geometrically.
    fn j0_by_integral(x: f64) -> f64 {
        let n = 400;
        let h = std::f64::consts::PI / n as f64;
        let mut acc = 0.5 * (1.0 + (x * 0.0f64.sin()).cos());
        for i in 1..n {
            acc += (x * (i as f64 * h).sin()).cos();
        }
        acc * h / std::f64::consts::PI
    }

    fn j0_by_series(x: f64) -> f64 {
        let q = -(x * x) / 4.0;
        let mut term = 1.0;
        let mut acc = 1.0;
        for k in 1..80 {
            term *= q / (k as f64 * k as f64);
            acc += term;
        }
        acc
    }

    #[test]
    fn j0_reference_values() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-12);
        assert!((bessel_j0(1.0) - j0_by_series(1.0)).abs() < 1e-14);
        // first zero by bisection on the series oracle
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if j0_by_series(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 2.404826).abs() < 1e-6);
        assert!(bessel_j0(2.404826).abs() < 1e-5);
    }

    #[test]
    fn j0_matches_oracles_up_to_20() {
        for i in -400..=400 {
            let x = i as f64 * 0.05;
            let got = bessel_j0(x);
            assert!((got - j0_by_integral(x)).abs() < 1e-9, "x = {x}");
            if x.abs() <= 8.0 {
                assert!((got - j0_by_series(x)).abs() < 1e-9, "x = {x}");
            }
            assert!(got.abs() <= 1.0);
            assert_eq!(got, bessel_j0(-x));
        }
    }

    #[test]
    fn j0_large_argument_continuity() {
        for &x in &[24.9, 25.0, 25.1, 30.0, 60.0] {
            assert!((bessel_j0(x) - j0_by_integral(x)).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn cscwg_is_reproducible() {
        let a = sample_cscwg(&mut ChaCha8Rng::seed_from_u64(5), 16, 1.0);
        let b = sample_cscwg(&mut ChaCha8Rng::seed_from_u64(5), 16, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn cscwg_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for &(var, lo, hi) in &[(1.0, 0.99, 1.01), (4.0, 3.95, 4.05)] {
            let w = sample_cscwg(&mut rng, 1_000_000, var);
            let n = w.len() as f64;
            let mean = w.iter().sum::<Complex64>() / n;
            let power = w.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
            let pseudo = w.iter().map(|z| z * z).sum::<Complex64>() / n;
            assert!(mean.norm() < 0.005 * var.sqrt());
            assert!(power > lo && power < hi, "{power}");
            assert!(pseudo.norm() < 0.01 * var);
        }
    }
}
