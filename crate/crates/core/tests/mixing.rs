//! Mixing functional: bound, symmetries and agreement with Monte Carlo.

use proptest::prelude::*;

use shearflow::spectral::{mc_mixing_estimate, mixing_functional, mixing_sum_direct, MixingProblem};
use shearflow::trig::TrigPoly;

fn mean_zero_poly() -> impl Strategy<Value = TrigPoly> {
    (prop::collection::vec(-1.0..1.0f64, 1..5), prop::collection::vec(-1.0..1.0f64, 1..5))
        .prop_filter("nonzero", |(c, s)| c.iter().chain(s).any(|v| v.abs() > 1e-3))
        .prop_map(|(c, s)| TrigPoly::new(0.0, &c, &s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_within_bound(
        f in mean_zero_poly(),
        g in mean_zero_poly(),
        r in prop::sample::select(vec![2.0, 4.0, 8.0, 16.0, 64.0]),
        t in prop::sample::select(vec![0.125, 1.0, 8.0]),
    ) {
        let res = mixing_functional(&MixingProblem::new(f, g, r, t, 1.0).unwrap());
        prop_assert!(res.value.abs() <= res.bound, "{} > {}", res.value, res.bound);
        prop_assert!(res.imaginary.abs() <= 1e-12 * (1.0 + res.bound));
    }

    #[test]
    fn reduced_and_direct_sums_agree(
        f in mean_zero_poly(),
        g in mean_zero_poly(),
        r in 1.5..20.0f64,
        t in 0.01..10.0f64,
        period in 0.5..8.0f64,
    ) {
        let p = MixingProblem::new(f, g, r, t, period).unwrap();
        let a = mixing_functional(&p).value;
        let b = mixing_sum_direct(&p).value;
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn linear_in_the_fast_function(
        f1 in mean_zero_poly(),
        f2 in mean_zero_poly(),
        g in mean_zero_poly(),
        a in -3.0..3.0f64,
    ) {
        let v = |f: TrigPoly| mixing_functional(&MixingProblem::new(f, g.clone(), 4.0, 1.0, 1.0).unwrap()).value;
        let deg = f1.degree().max(f2.degree());
        let pad = |p: &TrigPoly| {
            let mut c = p.cos_coeffs().to_vec();
            let mut s = p.sin_coeffs().to_vec();
            c.resize(deg, 0.0);
            s.resize(deg, 0.0);
            (c, s)
        };
        let (c1, s1) = pad(&f1);
        let (c2, s2) = pad(&f2);
        let c: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a * x + y).collect();
        let s: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| a * x + y).collect();
        let combined = v(TrigPoly::new(0.0, &c, &s));
        let expect = a * v(f1) + v(f2);
        prop_assert!((combined - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
    }
}

#[test]
fn monte_carlo_agrees_with_exact_sum() {
    let sine = TrigPoly::new(0.0, &[], &[2f64.sqrt()]);
    let cases = [
        MixingProblem::new(sine.clone(), sine.clone(), 2.0, 0.125, 1.0).unwrap(),
        MixingProblem::new(TrigPoly::new(0.0, &[0.5], &[1.0]), TrigPoly::new(0.0, &[1.0], &[]), 2.0, 0.05, 1.0)
            .unwrap(),
    ];
    for (i, p) in cases.iter().enumerate() {
        let exact = mixing_functional(p).value;
        let mc = mc_mixing_estimate(p, 20_000, 1024, 7 + i as u64).unwrap();
        let z = (mc.estimate - exact) / mc.stderr;
        assert!(z.abs() < 4.0, "case {i}: exact {exact}, mc {} ± {}", mc.estimate, mc.stderr);
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let sine = TrigPoly::new(0.0, &[], &[1.0]);
    let p = MixingProblem::new(sine.clone(), sine, 4.0, 0.5, 1.0).unwrap();
    let a = mc_mixing_estimate(&p, 500, 256, 3).unwrap();
    let b = mc_mixing_estimate(&p, 500, 256, 3).unwrap();
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}
