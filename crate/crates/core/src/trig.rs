//! Real trigonometric polynomials of period 1,
//! `c + Σ_j a_j cos(2πjx) + b_j sin(2πjx)`, plus a fast branchless sincos
//! used by the Monte Carlo kernels.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    constant: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigPoly {
    /// Builds `constant + Σ cos[j-1]·cos(2πjx) + sin[j-1]·sin(2πjx)`.
    /// The shorter coefficient list is padded with zeros.
    pub fn new(constant: f64, cos: &[f64], sin: &[f64]) -> Self {
        let k = cos.len().max(sin.len());
        let mut c = cos.to_vec();
        let mut s = sin.to_vec();
        c.resize(k, 0.0);
        s.resize(k, 0.0);
        Self { constant, cos: c, sin: s }
    }

    pub fn zero() -> Self {
        Self::new(0.0, &[], &[])
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    /// Highest frequency carried (including zero trailing pairs).
    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.cos.iter().chain(&self.sin).all(|&v| v == 0.0)
    }

    pub fn mean(&self) -> f64 {
        self.constant
    }

    /// Variance over one period, `½ Σ (a_j² + b_j²)`.
    pub fn variance(&self) -> f64 {
        0.5 * self.cos.iter().zip(&self.sin).map(|(a, b)| a * a + b * b).sum::<f64>()
    }

    /// `(∫₀¹ f²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.constant * self.constant + self.variance()).sqrt()
    }

    /// L² norm over one period of the derivative of the given order.
    pub fn derivative_l2_norm(&self, order: u32) -> f64 {
        if order == 0 {
            return self.l2_norm();
        }
        let s: f64 = self
            .cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(i, (a, b))| (TAU * (i + 1) as f64).powi(2 * order as i32) * (a * a + b * b))
            .sum();
        (0.5 * s).sqrt()
    }

    /// Coefficients of the derivative of the given order.
    pub fn derivative_poly(&self, order: u32) -> TrigPoly {
        let mut out = self.clone();
        if order == 0 {
            return out;
        }
        out.constant = 0.0;
        for j in 0..out.cos.len() {
            let w = TAU * (j + 1) as f64;
            let (mut a, mut b) = (self.cos[j], self.sin[j]);
            for _ in 0..order {
                let (na, nb) = (w * b, -w * a);
                a = na;
                b = nb;
            }
            out.cos[j] = a;
            out.sin[j] = b;
        }
        out
    }

    /// Value at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let u = x - x.floor();
        let mut acc = self.constant;
        for (j, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            if *a == 0.0 && *b == 0.0 {
                continue;
            }
            let arg = ((j + 1) as f64 * u).fract() * TAU;
            let (s, c) = arg.sin_cos();
            acc += a * c + b * s;
        }
        acc
    }

    /// Derivative of the given order at `x`.
    pub fn eval_derivative(&self, x: f64, order: u32) -> f64 {
        if order == 0 {
            return self.eval(x);
        }
        let u = x - x.floor();
        let mut acc = 0.0;
        for (j, (a0, b0)) in self.cos.iter().zip(&self.sin).enumerate() {
            if *a0 == 0.0 && *b0 == 0.0 {
                continue;
            }
            let w = TAU * (j + 1) as f64;
            let scale = w.powi(order as i32);
            // each derivative maps (a, b) to w·(b, -a)
            let (a, b) = match order % 4 {
                0 => (*a0, *b0),
                1 => (*b0, -*a0),
                2 => (-*a0, -*b0),
                _ => (-*b0, *a0),
            };
            let arg = ((j + 1) as f64 * u).fract() * TAU;
            let (s, c) = arg.sin_cos();
            acc += scale * (a * c + b * s);
        }
        acc
    }

    /// Complex coefficient of `e^{2πijx}`.
    pub fn coefficient(&self, j: i64) -> Complex64 {
        if j == 0 {
            return Complex64::new(self.constant, 0.0);
        }
        let idx = j.unsigned_abs() as usize - 1;
        if idx >= self.cos.len() {
            return Complex64::new(0.0, 0.0);
        }
        let (a, b) = (self.cos[idx], self.sin[idx]);
        if j > 0 {
            Complex64::new(0.5 * a, -0.5 * b)
        } else {
            Complex64::new(0.5 * a, 0.5 * b)
        }
    }

    /// Nonzero complex coefficients `(j, c_j)` for `j` in `-K..=K`.
    pub fn spectrum(&self) -> Vec<(i64, Complex64)> {
        let k = self.degree() as i64;
        (-k..=k)
            .map(|j| (j, self.coefficient(j)))
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .collect()
    }

    pub fn scaled(&self, s: f64) -> TrigPoly {
        TrigPoly {
            constant: self.constant * s,
            cos: self.cos.iter().map(|v| v * s).collect(),
            sin: self.sin.iter().map(|v| v * s).collect(),
        }
    }

    /// `x ↦ f(-x)`.
    pub fn reflected(&self) -> TrigPoly {
        TrigPoly {
            constant: self.constant,
            cos: self.cos.clone(),
            sin: self.sin.iter().map(|v| -v).collect(),
        }
    }

    /// `x ↦ f(x + shift)`.
    pub fn shifted(&self, shift: f64) -> TrigPoly {
        let mut out = self.clone();
        for j in 0..self.cos.len() {
            let (s, c) = (((j + 1) as f64 * shift).fract() * TAU).sin_cos();
            let (a, b) = (self.cos[j], self.sin[j]);
            out.cos[j] = a * c + b * s;
            out.sin[j] = b * c - a * s;
        }
        out
    }

    /// `(min, max)` of the derivative of the given order over one period.
    ///
    /// Dense grid of `4096·K` points, then one Newton step per grid-local
    /// extremum. A small slack is added outward so the result brackets the
    /// true extrema.
    pub fn extrema(&self, order: u32) -> (f64, f64) {
        let k = self.degree().max(1);
        let n = 4096 * k;
        let h = 1.0 / n as f64;
        let vals: Vec<f64> = (0..n).map(|i| self.eval_derivative(i as f64 * h, order)).collect();
        let scale = self.abs_coefficient_sum(order);
        let max = self.refine(&vals, h, order, 1.0, scale);
        let min = -self.refine(&vals, h, order, -1.0, scale);
        (min, max)
    }

    /// `sup |f^{(order)}|`, biased slightly upward.
    pub fn sup_abs(&self, order: u32) -> f64 {
        let (lo, hi) = self.extrema(order);
        lo.abs().max(hi.abs())
    }

    fn abs_coefficient_sum(&self, order: u32) -> f64 {
        let base = if order == 0 { self.constant.abs() } else { 0.0 };
        base + self
            .cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(i, (a, b))| (TAU * (i + 1) as f64).powi(order as i32) * (a.abs() + b.abs()))
            .sum::<f64>()
    }

    /// Maximum of `sign·f^{(order)}` from grid values plus Newton refinement.
    fn refine(&self, vals: &[f64], h: f64, order: u32, sign: f64, scale: f64) -> f64 {
        let n = vals.len();
        let mut best = f64::NEG_INFINITY;
        let mut slack: f64 = 0.0;
        for i in 0..n {
            let v = sign * vals[i];
            let prev = sign * vals[(i + n - 1) % n];
            let next = sign * vals[(i + 1) % n];
            if v < prev || v < next {
                continue;
            }
            let x0 = i as f64 * h;
            let d1 = sign * self.eval_derivative(x0, order + 1);
            let d2 = sign * self.eval_derivative(x0, order + 2);
            let mut cand = v;
            let mut x = x0;
            if d2 < 0.0 {
                let step = -d1 / d2;
                if step.abs() <= h {
                    x = x0 + step;
                    cand = cand.max(sign * self.eval_derivative(x, order));
                }
            }
            if cand > best {
                best = cand;
                let e1 = self.eval_derivative(x, order + 1);
                let e2 = self.eval_derivative(x, order + 2);
                // quadratic model of the remaining gap to the true extremum
                slack = if e2 != 0.0 { 0.5 * e1 * e1 / e2.abs() } else { 0.0 };
            }
        }
        best + slack.min(1e-10) + 1e-13 * (1.0 + scale)
    }
}

/// Mean-free harmonic sum `Σ_j a_j cos(2πjx) + b_j sin(2πjx)` laid out for
/// evaluation on lanes of independent arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonics {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Harmonics {
    /// Harmonic part of `p` times `scale`; the constant is dropped.
    pub fn from_poly(p: &TrigPoly, scale: f64) -> Self {
        Self {
            cos: p.cos_coeffs().iter().map(|v| v * scale).collect(),
            sin: p.sin_coeffs().iter().map(|v| v * scale).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    /// Adds the sum at `x[l]` (in turns) to `out[l]` for every lane.
    ///
    /// Each lane sees the same sequence of floating-point operations whatever
    /// `L` is, so results do not depend on the lane width.
    #[inline(always)]
    pub fn accumulate<const L: usize>(&self, x: &[f64; L], out: &mut [f64; L]) {
        let k = self.cos.len();
        if k == 0 {
            return;
        }
        let mut s1 = [0.0; L];
        let mut c1 = [0.0; L];
        for l in 0..L {
            let (s, c) = sincos_turns(x[l]);
            s1[l] = s;
            c1[l] = c;
        }
        let (a, b) = (self.cos[0], self.sin[0]);
        for l in 0..L {
            out[l] += a * c1[l] + b * s1[l];
        }
        let mut sj = s1;
        let mut cj = c1;
        for j in 1..k {
            let (a, b) = (self.cos[j], self.sin[j]);
            for l in 0..L {
                let c = cj[l] * c1[l] - sj[l] * s1[l];
                let s = sj[l] * c1[l] + cj[l] * s1[l];
                cj[l] = c;
                sj[l] = s;
                out[l] += a * c + b * s;
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut out = [0.0];
        self.accumulate(&[x], &mut out);
        out[0]
    }
}

/// `(sin 2πx, cos 2πx)` for moderate `|x|` (argument in turns).
///
/// Quarter-turn reduction and branchless quadrant fix-up, so that lanes of
/// the Monte Carlo kernels vectorize. Absolute error is below 1e-13 for
/// `|x| ≤ 1e6`.
#[inline(always)]
pub fn sincos_turns(x: f64) -> (f64, f64) {
    let q = (x * 4.0).round_ties_even();
    let r = x - q * 0.25;
    let th = r * TAU;
    let t2 = th * th;
    let s = th
        * (1.0
            + t2 * (-1.0 / 6.0
                + t2 * (1.0 / 120.0
                    + t2 * (-1.0 / 5040.0
                        + t2 * (1.0 / 362880.0
                            + t2 * (-1.0 / 39916800.0
                                + t2 * (1.0 / 6227020800.0 + t2 * (-1.0 / 1307674368000.0))))))));
    let c = 1.0
        + t2 * (-0.5
            + t2 * (1.0 / 24.0
                + t2 * (-1.0 / 720.0
                    + t2 * (1.0 / 40320.0
                        + t2 * (-1.0 / 3628800.0
                            + t2 * (1.0 / 479001600.0
                                + t2 * (-1.0 / 87178291200.0 + t2 * (1.0 / 20922789888000.0))))))));
    let qi = (q as i64) & 3;
    let swap = (qi & 1) as f64;
    let s1 = s + swap * (c - s);
    let c1 = c + swap * (s - c);
    let sgn_s = 1.0 - 2.0 * ((qi >> 1) as f64);
    let sgn_c = 1.0 - 2.0 * ((((qi + 1) >> 1) & 1) as f64);
    (sgn_s * s1, sgn_c * c1)
}
