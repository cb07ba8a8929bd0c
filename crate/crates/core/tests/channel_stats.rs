use cajsim::channel::{jakes_autocorrelation, sample_block, sample_jakes, FadingSpec};
use cajsim::mathcore::bessel_j0;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn block_entries_are_unit_variance_and_uncorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (k, n) = (4, 20_000);
    let mut power = vec![0.0; k];
    let mut cross = Complex64::new(0.0, 0.0);
    let mut mean = Complex64::new(0.0, 0.0);
    for _ in 0..n {
        let h = sample_block(&mut rng, k, 1).dense();
        for i in 0..k {
            power[i] += h[(i, 0)].norm_sqr();
        }
        cross += h[(0, 0)] * h[(1, 0)].conj();
        mean += h[(2, 0)];
    }
    for p in power {
        assert!((p / n as f64 - 1.0).abs() < 0.04);
    }
    assert!(cross.norm() / (n as f64) < 0.03);
    assert!(mean.norm() / (n as f64) < 0.03);
}

#[test]
fn jakes_matches_bessel_autocorrelation_at_fast_fading() {
    // tau = 2 puts several J0 zero crossings inside the frame
    let (tau, n_td, k, reps) = (2.0, 200, 4, 1500);
    let spec = FadingSpec::jakes(tau);
    let lags = [0usize, 10, 25, 50, 75, 100, 150];
    let mut acc = vec![Complex64::new(0.0, 0.0); lags.len()];
    let mut cross = Complex64::new(0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..reps {
        let h = sample_jakes(&mut rng, k, &spec, n_td, n_td).unwrap().dense();
        for (i, &lag) in lags.iter().enumerate() {
            for n in [0usize, 20, 40] {
                acc[i] += h.column(n + lag).dotc(&h.column(n));
            }
        }
        cross += h[(0, 30)] * h[(1, 30)].conj();
    }
    let samples = (reps * k * 3) as f64;
    assert!((acc[0].re / samples - 1.0).abs() < 0.05, "{}", acc[0].re / samples);
    for (i, &lag) in lags.iter().enumerate() {
        let emp = acc[i].re / samples;
        let target = jakes_autocorrelation(tau, lag as f64, n_td);
        assert!((emp - target).abs() < 0.05, "lag {lag}: {emp} vs {target}");
        assert!(acc[i].im.abs() / samples < 0.05);
    }
    assert!(cross.norm() / (reps as f64) < 0.06);
}

#[test]
fn autocorrelation_target_is_j0() {
    assert_eq!(jakes_autocorrelation(0.3, 0.0, 1000), 1.0);
    let x = 2.0 * 0.423 * std::f64::consts::PI * 0.3 * 400.0 / 1000.0;
    assert_eq!(jakes_autocorrelation(0.3, 400.0, 1000), bessel_j0(x));
}
