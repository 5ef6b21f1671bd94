//! The Brownian mixing functional
//! `I = E[G(b_t) ∫₀ᵗ f'(r b_s) ds]` for periodic `f`, `G`: exact Fourier
//! double sum, its `2‖f‖‖G'‖/r`-type bound, and a Monte Carlo cross-check.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Component, NormalStream};
use crate::simulator::pairwise_sum;
use crate::trig::{Harmonics, TrigPoly};

/// `f` and `G` are given as period-1 shapes; the functions entering the
/// functional are `x ↦ f(x/R)` and `x ↦ G(x/R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingProblem {
    f: TrigPoly,
    g: TrigPoly,
    r: f64,
    t: f64,
    period: f64,
}

impl MixingProblem {
    pub fn new(f: TrigPoly, g: TrigPoly, r: f64, t: f64, period: f64) -> Result<Self> {
        for (name, p) in [("f", &f), ("G", &g)] {
            if p.mean().abs() > 1e-12 * (1.0 + p.l2_norm()) {
                return Err(Error::NonzeroMean(name, p.mean()));
            }
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("r must be positive, got {r}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        Ok(Self { f, g, r, t, period })
    }

    pub fn f(&self) -> &TrigPoly {
        &self.f
    }

    pub fn g(&self) -> &TrigPoly {
        &self.g
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Same shapes and `r` on period 1, at time `t/R²`.
    pub fn reduced(&self) -> MixingProblem {
        MixingProblem { period: 1.0, t: self.t / (self.period * self.period), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingResult {
    pub value: f64,
    /// Imaginary part left over by the complex sum; zero up to rounding.
    pub imaginary: f64,
    pub bound: f64,
    pub truncation_error: f64,
}

const DEGENERATE: f64 = 1e-12;

/// `(1 − e^{−x t})/x` with the `x → 0` limit `t`, stable for either sign of x.
fn relax(x: f64, t: f64) -> f64 {
    if x == 0.0 {
        t
    } else {
        -(-x * t).exp_m1() / x
    }
}

/// `∫₀ᵗ exp(−(ω²/2)[(kr+m)² s + m²(t−s)]) ds` with `ω = 2π/R`.
fn time_integral(k: i64, m: i64, r: f64, t: f64, period: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let w2 = (TAU / period).powi(2);
    let (k, m) = (k as f64, m as f64);
    let a = 0.5 * w2 * m * m;
    let d = 0.5 * (k * r).powi(2) + k * r * m;
    if d.abs() < DEGENERATE {
        return t * (-a * t).exp();
    }
    let x = w2 * d;
    if x >= 0.0 {
        (-a * t).exp() * relax(x, t)
    } else {
        // factor the larger decay out so nothing overflows
        let b = a + x;
        (-b * t).exp() * relax(-x, t)
    }
}

/// `J_{k,m}(t) = e^{−(2π)²m²t/2} (1 − e^{−(2π)²((kr)²/2+krm)t}) / ((2π)²((kr)²/2+krm))`,
/// with the limit `t·e^{−(2π)²m²t/2}` when the denominator vanishes.
pub fn jkm(k: i64, m: i64, r: f64, t: f64) -> f64 {
    time_integral(k, m, r, t, 1.0)
}

/// Bound `2 R ‖f‖ ‖G'‖ / r` with period-1 shape norms; for `R = 1` this is
/// `2‖f‖_{L²}‖G'‖_{L²}/r`.
pub fn mixing_bound(problem: &MixingProblem) -> f64 {
    problem.period * problem.f.l2_norm() * problem.g.derivative_l2_norm(1) * 2.0 / problem.r
}

fn unit_period_sum(p: &MixingProblem) -> Complex64 {
    let fs = p.f.spectrum();
    let gs = p.g.spectrum();
    let mut acc = Complex64::new(0.0, 0.0);
    for &(k, fk) in &fs {
        if k == 0 {
            continue;
        }
        let d = Complex64::new(0.0, TAU * k as f64);
        for &(m, gm) in &gs {
            acc += jkm(k, m, p.r, p.t) * d * fk * gm;
        }
    }
    acc
}

/// Exact value: the period-`R` problem is reduced to period 1 at time
/// `t/R²` (Brownian scaling) and the result multiplied by `R`.
pub fn mixing_functional(problem: &MixingProblem) -> MixingResult {
    let reduced = problem.reduced();
    let v = unit_period_sum(&reduced) * problem.period;
    MixingResult { value: v.re, imaginary: v.im, bound: mixing_bound(problem), truncation_error: 0.0 }
}

/// Exact value summed directly on period `R`, without the scaling reduction.
pub fn mixing_sum_direct(problem: &MixingProblem) -> MixingResult {
    let fs = problem.f.spectrum();
    let gs = problem.g.spectrum();
    let mut acc = Complex64::new(0.0, 0.0);
    for &(k, fk) in &fs {
        if k == 0 {
            continue;
        }
        let d = Complex64::new(0.0, TAU * k as f64 / problem.period);
        for &(m, gm) in &gs {
            acc += time_integral(k, m, problem.r, problem.t, problem.period) * d * fk * gm;
        }
    }
    MixingResult { value: acc.re, imaginary: acc.im, bound: mixing_bound(problem), truncation_error: 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

const MC_LANES: usize = 8;

/// Monte Carlo estimate of the functional with trapezoidal time integration
/// on `n_steps` equal steps. Deterministic for fixed `(seed, n_paths, n_steps)`.
pub fn mc_mixing_estimate(problem: &MixingProblem, n_paths: usize, n_steps: usize, seed: u64) -> Result<McEstimate> {
    if n_paths < 100 {
        return Err(Error::InvalidArgument(format!("n_paths must be >= 100, got {n_paths}")));
    }
    if n_steps < 64 {
        return Err(Error::InvalidArgument(format!("n_steps must be >= 64, got {n_steps}")));
    }
    let big_r = problem.period;
    // F'(r b) = f'(r b / R) / R, G(b) = g(b / R)
    let df = Harmonics::from_poly(&problem.f.derivative_poly(1), 1.0 / big_r);
    let g = &problem.g;
    let h = problem.t / n_steps as f64;
    let sd = h.sqrt();
    let arg_scale = problem.r / big_r;
    let groups = n_paths.div_ceil(MC_LANES);
    let values: Vec<f64> = (0..groups)
        .into_par_iter()
        .flat_map_iter(|grp| {
            let first = (grp * MC_LANES) as u64;
            let mut streams: [NormalStream; MC_LANES] =
                std::array::from_fn(|l| NormalStream::new(seed, first + l as u64, Component::Mixing));
            let mut b = [0.0f64; MC_LANES];
            let mut x = [0.0f64; MC_LANES];
            let mut prev = [0.0f64; MC_LANES];
            df.accumulate(&x, &mut prev);
            let mut acc = [0.0f64; MC_LANES];
            for _ in 0..n_steps {
                for l in 0..MC_LANES {
                    b[l] += sd * streams[l].next();
                    x[l] = b[l] * arg_scale;
                }
                let mut cur = [0.0f64; MC_LANES];
                df.accumulate(&x, &mut cur);
                for l in 0..MC_LANES {
                    acc[l] += 0.5 * h * (prev[l] + cur[l]);
                }
                prev = cur;
            }
            let active = MC_LANES.min(n_paths - grp * MC_LANES);
            (0..active).map(move |l| g.eval(b[l] / big_r) * acc[l]).collect::<Vec<_>>()
        })
        .collect();
    let n = values.len() as f64;
    let mean = pairwise_sum(&values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    Ok(McEstimate { estimate: mean, stderr: (var / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn sine() -> TrigPoly {
        TrigPoly::new(0.0, &[], &[SQRT_2])
    }

    #[test]
    fn jkm_examples() {
        assert_eq!(jkm(1, 0, 2.0, 0.0), 0.0);
        let t = 0.3;
        let degenerate = jkm(1, -1, 2.0, t);
        assert!((degenerate - t * (-(TAU * TAU) * t / 2.0).exp()).abs() < 1e-15);
        let w = TAU * TAU;
        let expect = (1.0 - (-w * 2.0 * 0.01f64).exp()) / (w * 2.0);
        assert!((jkm(1, 0, 2.0, 0.01) - expect).abs() < 1e-15);
    }

    #[test]
    fn jkm_matches_quadrature() {
        let w = TAU * TAU;
        for &(k, m, r, t) in &[(1i64, -1i64, 2.0, 0.7), (2, -3, 1.5, 0.2), (-1, 2, 0.5, 1.0), (3, -2, 1.0, 0.05)] {
            let (kf, mf) = (k as f64, m as f64);
            let n = 20000;
            let hs = t / n as f64;
            let f = |s: f64| (-0.5 * w * ((kf * r + mf).powi(2) * s + mf * mf * (t - s))).exp();
            let mut q = 0.5 * (f(0.0) + f(t));
            for i in 1..n {
                q += f(i as f64 * hs);
            }
            q *= hs;
            let j = jkm(k, m, r, t);
            assert!((q - j).abs() < 1e-8 * (1.0 + j.abs()), "{k} {m} {r} {t}: {q} vs {j}");
        }
    }

    #[test]
    fn near_degenerate_is_continuous() {
        let t = 0.4;
        let exact = jkm(1, -1, 2.0, t);
        let near = jkm(1, -1, 2.0 + 1e-9, t);
        assert!((exact - near).abs() < 1e-8);
    }

    #[test]
    fn zero_f_gives_zero() {
        let p = MixingProblem::new(TrigPoly::zero(), sine(), 8.0, 1.0, 1.0).unwrap();
        assert_eq!(mixing_functional(&p).value, 0.0);
        let mc = mc_mixing_estimate(&p, 100, 64, 1).unwrap();
        assert_eq!(mc.estimate, 0.0);
    }

    #[test]
    fn sine_pair_bound_and_halving() {
        let p8 = MixingProblem::new(sine(), sine(), 8.0, 1.0, 1.0).unwrap();
        let r8 = mixing_functional(&p8);
        // ‖f‖ = 1 and ‖G'‖² = ∫(2√2π cos 2πx)² = 4π²
        assert!((r8.bound - 2.0 * std::f64::consts::PI * 2.0 / 8.0).abs() < 1e-12);
        assert!(r8.value.abs() <= r8.bound);
        assert!(r8.imaginary.abs() < 1e-12);
        let p16 = MixingProblem::new(sine(), sine(), 16.0, 1.0, 1.0).unwrap();
        let r16 = mixing_functional(&p16);
        assert!(r16.value.abs() <= r8.bound / 2.0);
        assert!((r16.bound - r8.bound / 2.0).abs() < 1e-12);
    }

    #[test]
    fn direct_and_reduced_agree() {
        let f = TrigPoly::new(0.0, &[0.3, 0.0, -0.5], &[1.0, 0.2]);
        let g = TrigPoly::new(0.0, &[0.0, 0.8], &[-0.4]);
        for &big_r in &[1.0, 2.0, 3.7, 10.0] {
            let p = MixingProblem::new(f.clone(), g.clone(), 2.5, 1.3, big_r).unwrap();
            let a = mixing_functional(&p).value;
            let b = mixing_sum_direct(&p).value;
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{big_r}: {a} {b}");
        }
    }

    #[test]
    fn rejects_nonzero_mean() {
        let f = TrigPoly::new(0.5, &[], &[1.0]);
        assert!(matches!(MixingProblem::new(f, sine(), 1.0, 1.0, 1.0), Err(Error::NonzeroMean("f", _))));
        assert!(MixingProblem::new(sine(), sine(), 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn mc_is_deterministic_and_sizes_checked() {
        let p = MixingProblem::new(sine(), sine(), 2.0, 0.5, 1.0).unwrap();
        let a = mc_mixing_estimate(&p, 200, 64, 9).unwrap();
        let b = mc_mixing_estimate(&p, 200, 64, 9).unwrap();
        assert_eq!(a, b);
        assert!(mc_mixing_estimate(&p, 99, 64, 9).is_err());
        assert!(mc_mixing_estimate(&p, 100, 63, 9).is_err());
    }
}
