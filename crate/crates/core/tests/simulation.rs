//! Monte Carlo engine: noise statistics, exact finite-time moments,
//! scheme agreement and reproducibility.

use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use shearflow::profiles::{self_similar_sine, ScaleRange};
use shearflow::rng::{Component, NormalStream};
use shearflow::simulator::{
    antiderivative_bound, brownian_increments, euler_maruyama_2d, ito_identity_residual, msd_ensemble,
    pairwise_sum, sample_displacement, with_threads, BrownianPath, Scheme, SimConfig, SubstepRule,
};

fn config(checkpoints: Vec<f64>, n_paths: usize, seed: u64) -> SimConfig {
    SimConfig {
        checkpoints,
        base_dt: 0.01,
        substep: SubstepRule { pilot_paths: 0, ..Default::default() },
        n_paths,
        seed,
        scale_range: None,
        scheme: Scheme::ExactRepresentation,
    }
}

/// `E[(∫₀ᵗ √2·2π cos(2π b_s) ds)²]` for one `√2 sin` scale of unit period,
/// from the Gaussian covariance of `cos(2πb_u)cos(2πb_s)` integrated in
/// closed form.
fn single_sine_drift_moment(t: f64) -> f64 {
    let c = 2.0 * std::f64::consts::PI.powi(2);
    let a2 = 8.0 * std::f64::consts::PI.powi(2);
    let near = t / c - (1.0 - (-c * t).exp()) / (c * c);
    let far = (1.0 - (-c * t).exp()) / (3.0 * c * c) - (1.0 - (-4.0 * c * t).exp()) / (12.0 * c * c);
    a2 * (near + far)
}

/// Kolmogorov–Smirnov statistic of a sample against `N(0, 1)`.
fn ks_standard_normal(mut x: Vec<f64>) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = n.cdf(v);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn transverse_increments_are_standard_gaussian() {
    let grid = [0.0, 0.1, 0.35, 1.0, 2.5];
    let mut z = Vec::new();
    for pid in 0..3000 {
        let inc = brownian_increments(11, pid, &grid).unwrap();
        for (d, w) in inc.iter().zip(grid.windows(2)) {
            z.push(d / (w[1] - w[0]).sqrt());
        }
    }
    let n = z.len() as f64;
    let d = ks_standard_normal(z);
    // 0.1% critical value of the asymptotic Kolmogorov distribution
    assert!(d < 1.95 / n.sqrt(), "KS statistic {d}");
}

#[test]
fn streams_of_different_paths_are_uncorrelated() {
    let n = 20_000;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for pid in 0..n {
        let x = NormalStream::new(5, pid, Component::Transverse).next();
        let y = NormalStream::new(5, pid, Component::Longitudinal).next();
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    let r = sxy / (sxx * syy).sqrt();
    assert!(r.abs() < 4.0 / (n as f64).sqrt(), "correlation {r}");
}

#[test]
fn zero_drift_msd_is_time() {
    let f = self_similar_sine(4, 2.0, 1).unwrap();
    let mut c = config(vec![0.5, 2.0, 10.0, 40.0], 20_000, 1);
    c.scale_range = Some(ScaleRange::EMPTY);
    let s = msd_ensemble(&f, &c).unwrap();
    for r in &s.rows {
        assert!((r.msd - r.t).abs() < 4.0 * r.stderr, "t={} msd={} ± {}", r.t, r.msd, r.stderr);
        assert_eq!(r.drift_msd, 0.0);
    }
}

#[test]
fn single_scale_matches_exact_finite_time_moment() {
    let f = self_similar_sine(4, 2.0, 1).unwrap();
    let mut c = config(vec![0.05, 0.5, 5.0, 50.0], 20_000, 2);
    c.scale_range = Some(ScaleRange::inclusive(0, 0));
    let s = msd_ensemble(&f, &c).unwrap();
    for r in &s.rows {
        let exact = single_sine_drift_moment(r.t);
        // drift part only: the trapezoid bias at dt = 0.01 is well under 1%
        let slack = 4.0 * r.drift_stderr + 1e-2 * exact;
        assert!((r.drift_msd - exact).abs() < slack, "t={}: {} vs {}", r.t, r.drift_msd, exact);
        assert!((r.msd - r.t - exact).abs() < 4.0 * r.stderr + 1e-2 * exact);
    }
    // long-time slope approaches 4·Var = 4
    let last = s.rows.last().unwrap();
    assert!((single_sine_drift_moment(50.0) / 50.0 - 4.0).abs() < 0.01);
    assert!((last.msd / last.t - 5.0).abs() < 0.1);
}

#[test]
fn drift_and_noise_parts_are_uncorrelated() {
    let f = self_similar_sine(4, 2.0, 1).unwrap();
    let c = config(vec![1.0, 4.0], 4000, 3);
    let (mut sdn, mut sdd, mut snn) = (0.0, 0.0, 0.0);
    for pid in 0..c.n_paths as u64 {
        let p = sample_displacement(&f, &c, pid).unwrap();
        let (d, n) = (p.drift[1], p.noise[1]);
        sdn += d * n;
        sdd += d * d;
        snn += n * n;
    }
    let r = sdn / (sdd * snn).sqrt();
    assert!(r.abs() < 4.0 / (c.n_paths as f64).sqrt(), "correlation {r}");
    let var = snn / c.n_paths as f64;
    assert!((var - 4.0).abs() < 4.0 * 4.0 * (2.0 / c.n_paths as f64).sqrt());
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let f = self_similar_sine(8, 2.0, 2).unwrap();
    let c = config(vec![0.5, 1.0, 3.0], 700, 9);
    let csv = |threads| {
        let s = with_threads(Some(threads), || msd_ensemble(&f, &c)).unwrap().unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        buf
    };
    let one = csv(1);
    assert_eq!(one, csv(3));
    assert_eq!(one, csv(8));
}

#[test]
fn euler_maruyama_tracks_exact_representation() {
    let f = self_similar_sine(4, 2.0, 1).unwrap();
    let mut err = Vec::new();
    for dt in [0.02, 0.005] {
        let mut c = config(vec![0.5, 2.0], 1, 4);
        c.base_dt = dt;
        let mut e = config(vec![0.5, 2.0], 1, 4);
        e.base_dt = dt;
        e.scheme = Scheme::EulerMaruyama2d;
        let mut worst: f64 = 0.0;
        for pid in 0..50 {
            let exact = sample_displacement(&f, &c, pid).unwrap();
            let em = euler_maruyama_2d(&f, &e, pid).unwrap();
            for (i, y) in em.iter().enumerate() {
                // same transverse path in both schemes
                assert!((y[0] - exact.b[i]).abs() < 1e-9);
                worst = worst.max((y[1] - exact.y[i]).abs());
            }
        }
        err.push(worst);
    }
    assert!(err[1] < err[0], "{err:?}");
    assert!(err[1] < 0.5, "{err:?}");
}

#[test]
fn halving_the_step_barely_moves_the_msd() {
    let f = self_similar_sine(4, 2.0, 1).unwrap();
    let mut c = config(vec![1.0, 8.0], 4000, 6);
    c.scale_range = Some(ScaleRange::inclusive(0, 0));
    let a = msd_ensemble(&f, &c).unwrap();
    c.base_dt = 0.005;
    let b = msd_ensemble(&f, &c).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        // the transverse draws differ between grids, so the two drift
        // moments are independent estimates
        let se = x.drift_stderr.hypot(y.drift_stderr);
        assert!((x.drift_msd - y.drift_msd).abs() < 4.0 * se, "{} vs {}", x.drift_msd, y.drift_msd);
        assert!(se < 0.05 * y.drift_msd);
    }
}

#[test]
fn ito_identity_residual_shrinks_with_grid() {
    let f = self_similar_sine(4, 3.0, 2).unwrap();
    let mean_residual = |n: usize| {
        (0..20).map(|pid| ito_identity_residual(&f, 2, &BrownianPath::uniform(8, pid, 2.0, n).unwrap()).unwrap())
            .sum::<f64>()
            / 20.0
    };
    let r: Vec<f64> = [1000, 4000, 16_000].into_iter().map(mean_residual).collect();
    assert!(r[1] < 0.7 * r[0] && r[2] < 0.7 * r[1], "{r:?}");
    assert!(antiderivative_bound(&f, 2).unwrap() > 0.0);
    assert_eq!(ito_identity_residual(&f, 0, &BrownianPath::uniform(8, 0, 2.0, 10).unwrap()).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairwise_sum_matches_compensated_sum(v in prop::collection::vec(-1e6..1e6f64, 0..500)) {
        let naive: f64 = v.iter().sum();
        let scale: f64 = v.iter().map(|x| x.abs()).sum::<f64>() + 1.0;
        prop_assert!((pairwise_sum(&v) - naive).abs() <= 1e-12 * scale);
    }

    #[test]
    fn seek_lands_on_the_same_draw(seed in any::<u64>(), pid in 0u64..1000, step in 0u64..5000) {
        let mut a = NormalStream::new(seed, pid, Component::Transverse);
        for _ in 0..step {
            a.next();
        }
        let mut b = NormalStream::new(seed, pid, Component::Transverse);
        b.seek(step);
        prop_assert_eq!(a.next().to_bits(), b.next().to_bits());
    }

    #[test]
    fn adding_checkpoints_keeps_earlier_values(pid in 0u64..100, extra in 0.1..5.0f64) {
        let f = self_similar_sine(4, 2.0, 1).unwrap();
        let short = config(vec![0.3, 1.0], 1, 12);
        let long = config(vec![0.3, 1.0, 1.0 + extra], 1, 12);
        let a = sample_displacement(&f, &short, pid).unwrap();
        let b = sample_displacement(&f, &long, pid).unwrap();
        prop_assert_eq!(a.y[0].to_bits(), b.y[0].to_bits());
        prop_assert_eq!(a.y[1].to_bits(), b.y[1].to_bits());
    }

    #[test]
    fn sample_parts_add_up(pid in 0u64..1000) {
        let f = self_similar_sine(4, 2.0, 1).unwrap();
        let p = sample_displacement(&f, &config(vec![0.5, 1.5], 1, 13), pid).unwrap();
        for i in 0..2 {
            prop_assert_eq!(p.y[i], p.drift[i] + p.noise[i]);
        }
    }
}
