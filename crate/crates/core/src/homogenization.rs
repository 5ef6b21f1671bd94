//! Exact lattice spectra of truncated fields, variances, effective
//! diffusivities, shear cell solutions and the deterministic brackets.

use std::collections::BTreeMap;
use std::f64::consts::{SQRT_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{FourierProfile, MultiscaleField, ScaleLadder, ScaleRange};
use crate::quad::adaptive_simpson;
use crate::trig::TrigPoly;

/// `H(x) = Σ_m c_m e^{2πimx/R}` on the lattice of period `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpectrum {
    period: u64,
    /// Sorted by frequency; conjugate-symmetric.
    coeffs: Vec<(i64, Complex64)>,
}

impl LatticeSpectrum {
    pub fn zero() -> Self {
        Self { period: 1, coeffs: Vec::new() }
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn coeffs(&self) -> &[(i64, Complex64)] {
        &self.coeffs
    }

    pub fn support(&self) -> Vec<i64> {
        self.coeffs.iter().map(|(m, _)| *m).collect()
    }

    pub fn coefficient(&self, m: i64) -> Complex64 {
        self.coeffs
            .binary_search_by_key(&m, |(k, _)| *k)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i].1)
    }

    /// `Σ_{m≠0} |c_m|²`.
    pub fn variance(&self) -> f64 {
        self.coeffs.iter().filter(|(m, _)| *m != 0).map(|(_, c)| c.norm_sqr()).sum()
    }

    /// `c_0`, the mean over one period.
    pub fn mean(&self) -> f64 {
        self.coefficient(0).re
    }

    fn omega(&self, m: i64) -> f64 {
        TAU * m as f64 / self.period as f64
    }

    fn phase(&self, m: i64, x: f64) -> Complex64 {
        let r = self.period as f64;
        let u = x / r;
        let turns = (m as f64 * (u - u.floor())).fract();
        Complex64::from_polar(1.0, TAU * turns)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_derivative(x, 0)
    }

    pub fn eval_derivative(&self, x: f64, order: u32) -> f64 {
        self.coeffs
            .iter()
            .map(|&(m, c)| {
                let w = Complex64::new(0.0, self.omega(m)).powu(order);
                (c * w * self.phase(m, x)).re
            })
            .sum()
    }

    /// `∫₀^x (H − κ)`, termwise; periodic with period `R`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .filter(|(m, _)| *m != 0)
            .map(|&(m, c)| (c * (self.phase(m, x) - 1.0) / Complex64::new(0.0, self.omega(m))).re)
            .sum()
    }
}

/// Lattice spectrum of `H^{k,p}`: frequency `j` of scale `n` lands on
/// `j·R_p/R_n`; colliding frequencies are summed and exact cancellations
/// removed from the support.
pub fn field_spectrum(field: &MultiscaleField, range: ScaleRange) -> Result<LatticeSpectrum> {
    field.check_range(range)?;
    if range.is_empty() {
        return Ok(LatticeSpectrum::zero());
    }
    let ladder = field.ladder();
    let period = field.period(range);
    let mut acc: BTreeMap<i64, (Complex64, f64)> = BTreeMap::new();
    for n in range.iter() {
        let mult = (period / ladder.radius(n)) as i64;
        let g = ladder.gamma(n);
        for (j, c) in field.profile(n).poly().spectrum() {
            let m = j.checked_mul(mult).ok_or(Error::FrequencyOverflow)?;
            let v = c * g;
            let e = acc.entry(m).or_insert((Complex64::new(0.0, 0.0), 0.0));
            e.0 += v;
            e.1 += v.norm();
        }
    }
    let coeffs = acc
        .into_iter()
        .filter(|(_, (c, mag))| c.norm() > 1e-13 * mag)
        .map(|(m, (c, _))| (m, c))
        .collect();
    Ok(LatticeSpectrum { period, coeffs })
}

/// `Var(H^{k,p})` and `κ^{k,p}`; both zero on an empty range.
pub fn variance(field: &MultiscaleField, range: ScaleRange) -> Result<(f64, f64)> {
    let s = field_spectrum(field, range)?;
    Ok((s.variance(), s.mean()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDiffusivity {
    pub d11: f64,
    pub d22: f64,
    pub variance: f64,
}

impl EffectiveDiffusivity {
    pub fn from_variance(variance: f64) -> Self {
        Self { d11: 1.0, d22: 1.0 + 4.0 * variance, variance }
    }
}

/// Effective diffusivity of the field truncated to scales `0..=p`.
pub fn effective_diffusivity(field: &MultiscaleField, p: usize) -> Result<EffectiveDiffusivity> {
    effective_diffusivity_range(field, ScaleRange::upto(p))
}

pub fn effective_diffusivity_range(field: &MultiscaleField, range: ScaleRange) -> Result<EffectiveDiffusivity> {
    let (v, _) = variance(field, range)?;
    Ok(EffectiveDiffusivity::from_variance(v))
}

/// Shear cell corrector `χ_l(x) = −2 l₂ ∫₀^{x₁} (H − κ)`.
#[derive(Debug, Clone)]
pub struct CellSolution {
    l2: f64,
    spectrum: LatticeSpectrum,
}

impl CellSolution {
    pub fn eval(&self, x1: f64, _x2: f64) -> f64 {
        if self.l2 == 0.0 {
            return 0.0;
        }
        -2.0 * self.l2 * self.spectrum.antiderivative(x1)
    }

    pub fn gradient(&self, x1: f64, _x2: f64) -> [f64; 2] {
        if self.l2 == 0.0 {
            return [0.0, 0.0];
        }
        [-2.0 * self.l2 * (self.spectrum.eval(x1) - self.spectrum.mean()), 0.0]
    }

    pub fn period(&self) -> u64 {
        self.spectrum.period()
    }
}

pub fn cell_solution(field: &MultiscaleField, p: usize, direction: [f64; 2]) -> Result<CellSolution> {
    Ok(CellSolution { l2: direction[1], spectrum: field_spectrum(field, ScaleRange::upto(p))? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremBracket {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub preconditions_ok: bool,
    pub precondition_report: String,
}

impl TheoremBracket {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

fn epsilon(field: &MultiscaleField) -> f64 {
    let l = field.ladder();
    4.0 * field.constants().k1 / (l.rho_min() as f64 * (l.gamma_min() - 1.0))
}

/// `1 + 4(1 ∓ ε) Σ_{k≤p} γ_k²`.
pub fn thm_diffusivity_bracket(field: &MultiscaleField, p: usize) -> Result<TheoremBracket> {
    field.check_range(ScaleRange::upto(p))?;
    let eps = epsilon(field);
    let s: f64 = field.ladder().gammas()[..=p].iter().map(|g| g * g).sum();
    let ok = eps < 1.0;
    let h1 = field.ladder().rho_min() as f64 > field.ladder().gamma_max();
    Ok(TheoremBracket {
        name: "diffusivity_bracket".into(),
        lower: 1.0 + 4.0 * (1.0 - eps) * s,
        upper: 1.0 + 4.0 * (1.0 + eps) * s,
        preconditions_ok: ok,
        precondition_report: format!(
            "epsilon = {eps:.6} ({}); rho_min > gamma_max: {h1}",
            if ok { "< 1" } else { ">= 1, bracket not guaranteed" }
        ),
    })
}

/// `γ_p²(1 − (γ_min−1)^{-1})² ≤ Var(H^{0,p}) ≤ γ_p²(1 − γ_min^{-1})^{-2}`.
pub fn variance_bracket_lemma(field: &MultiscaleField, p: usize) -> Result<TheoremBracket> {
    field.check_range(ScaleRange::upto(p))?;
    let l = field.ladder();
    let gm = l.gamma_min();
    let gp2 = l.gamma(p).powi(2);
    let ok = gm > 2.0;
    let lower = gp2 * (1.0 - 1.0 / (gm - 1.0)).powi(2);
    let upper = gp2 / (1.0 - 1.0 / gm).powi(2);
    Ok(TheoremBracket {
        name: "variance_growth".into(),
        lower,
        upper,
        preconditions_ok: ok,
        precondition_report: format!("gamma_min = {gm} ({})", if ok { "> 2" } else { "<= 2" }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionDefect {
    pub defect: f64,
    pub bound: f64,
}

/// `|Var(H^p) − Var(H^{p−1}) − γ_p² Var(h_p)|` against
/// `2 γ_p K₁ r_p^{-1} √Var(H^{p−1})`.
///
/// For unit-variance profiles the subtracted term is `γ_p²`.
pub fn variance_recursion_defect(field: &MultiscaleField, p: usize) -> Result<RecursionDefect> {
    if p == 0 {
        return Err(Error::InvalidArgument("recursion defect needs p >= 1".into()));
    }
    field.check_range(ScaleRange::upto(p))?;
    let l = field.ladder();
    let (vp, _) = variance(field, ScaleRange::upto(p))?;
    let (vq, _) = variance(field, ScaleRange::below(p))?;
    let gp = l.gamma(p);
    let defect = (vp - vq - gp * gp * field.profile(p).variance()).abs();
    let bound = 2.0 * gp * field.constants().k1 / l.ratios()[p] as f64 * vq.sqrt();
    Ok(RecursionDefect { defect, bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingDefect {
    pub lhs: f64,
    pub bound: f64,
}

/// `|∫g(x)f(Rx)dx − ∫g∫f|` (exact, via spectra) against `‖g'‖∞ R^{-1} ∫|f|`.
pub fn scale_mixing_defect(g: &TrigPoly, f: &TrigPoly, r: u64) -> Result<MixingDefect> {
    if r < 1 {
        return Err(Error::InvalidArgument("R must be a positive integer".into()));
    }
    let r = r as i64;
    let lhs: Complex64 = f
        .spectrum()
        .into_iter()
        .filter(|(k, _)| *k != 0)
        .map(|(k, fk)| g.coefficient(-k * r) * fk)
        .sum();
    let panels = 8 * f.degree().max(1);
    let l1 = adaptive_simpson(|x| f.eval(x).abs(), 0.0, 1.0, 1e-8, panels);
    Ok(MixingDefect { lhs: lhs.re.abs(), bound: g.sup_abs(1) / r as f64 * l1 })
}

/// Field whose scales telescope: scale `n ≥ 1` carries
/// `(√2/γ_n)(sin 2πx − sin 2πr_n x)`, so its high mode cancels the
/// frequency-1 mode of scale `n−1` and `H^{0,p} = √2 sin(2πx/R_p)`.
///
/// The profiles are deliberately not unit-variance: with unit variance and
/// growing `γ_n` no family can keep `Var(H^{0,p})` bounded.
pub fn telescoping_family(ladder: ScaleLadder) -> Result<MultiscaleField> {
    let mut profiles = vec![FourierProfile::sine()];
    for n in 1..=ladder.top() {
        let r = ladder.ratios()[n] as usize;
        let a = SQRT_2 / ladder.gamma(n);
        let mut sin = vec![0.0; r];
        sin[0] = a;
        sin[r - 1] = -a;
        profiles.push(FourierProfile::unnormalized(&[], &sin)?);
    }
    MultiscaleField::new(ladder, profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{build_ladder, eval_field, normalize_profile, self_similar_sine, LadderRule};
    use std::f64::consts::PI;

    fn quadrature_variance(field: &MultiscaleField, range: ScaleRange, pts: usize) -> f64 {
        let r = field.period(range) as f64;
        let n = pts * r as usize;
        let vals: Vec<f64> =
            (0..n).map(|i| eval_field(field, i as f64 * r / n as f64, range, 0).unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
    }

    #[test]
    fn single_sine_spectrum() {
        let f = self_similar_sine(4, 2.0, 2).unwrap();
        let s = field_spectrum(&f, ScaleRange::upto(0)).unwrap();
        assert_eq!(s.support(), vec![-1, 1]);
        for (_, c) in s.coeffs() {
            assert!((c.norm() - SQRT_2 / 2.0).abs() < 1e-15);
        }
        let s = field_spectrum(&f, ScaleRange::upto(2)).unwrap();
        assert_eq!(s.period(), 16);
        assert_eq!(s.support(), vec![-16, -4, -1, 1, 4, 16]);
    }

    #[test]
    fn disjoint_variance_is_additive() {
        let f = self_similar_sine(4, 2.0, 2).unwrap();
        let (v, k) = variance(&f, ScaleRange::upto(2)).unwrap();
        assert!((v - 21.0).abs() < 1e-12);
        assert_eq!(k, 0.0);
        assert!((effective_diffusivity(&f, 2).unwrap().d22 - 85.0).abs() < 1e-12);
        assert!((effective_diffusivity(&f, 0).unwrap().d22 - 5.0).abs() < 1e-15);
        let zero = effective_diffusivity_range(&f, ScaleRange::EMPTY).unwrap();
        assert_eq!((zero.d11, zero.d22), (1.0, 1.0));
    }

    #[test]
    fn spectrum_reproduces_evaluation() {
        let ladder = build_ladder(&LadderRule::Explicit { ratios: vec![1.0, 3.0, 2.0], gammas: vec![1.0, 2.5, 7.0] })
            .unwrap();
        let profiles = vec![
            normalize_profile(&[0.3, 1.0], &[0.5]).unwrap(),
            normalize_profile(&[], &[1.0, 0.0, 0.7]).unwrap(),
            normalize_profile(&[0.2, 0.0, 0.0, 1.0], &[0.1]).unwrap(),
        ];
        let f = MultiscaleField::new(ladder, profiles).unwrap();
        let s = field_spectrum(&f, ScaleRange::upto(2)).unwrap();
        for i in 0..64 {
            let x = -13.0 + 0.4173 * i as f64;
            let direct = eval_field(&f, x, ScaleRange::upto(2), 0).unwrap();
            assert!((s.eval(x) - direct).abs() < 1e-9 * (1.0 + direct.abs()));
            let d1 = eval_field(&f, x, ScaleRange::upto(2), 1).unwrap();
            assert!((s.eval_derivative(x, 1) - d1).abs() < 1e-9 * (1.0 + d1.abs()));
        }
        for &(m, c) in s.coeffs() {
            let c2 = s.coefficient(-m);
            assert!((c - c2.conj()).norm() < 1e-15);
        }
        // frequency 3 of scale 0 and frequency 1 of scale 1 collide on the lattice
        let q = quadrature_variance(&f, ScaleRange::upto(2), 1024);
        assert!((s.variance() - q).abs() < 1e-9 * q);
    }

    #[test]
    fn telescoping_support_and_variance() {
        let ladder = build_ladder(&LadderRule::SelfSimilar { rho: 3.0, gamma: 2.5, levels: 4 }).unwrap();
        let f = telescoping_family(ladder).unwrap();
        let s = field_spectrum(&f, ScaleRange::upto(1)).unwrap();
        // union of supports would be {±1, ±3}; scale 1 cancels scale 0
        assert_eq!(s.support(), vec![-1, 1]);
        for p in 0..=4 {
            let (v, _) = variance(&f, ScaleRange::upto(p)).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "p = {p}: {v}");
        }
        for p in 1..=4 {
            let d = variance_recursion_defect(&f, p).unwrap();
            assert!(d.defect > 0.5 && d.defect <= d.bound, "{d:?}");
        }
    }

    #[test]
    fn cell_solution_single_sine() {
        let f = self_similar_sine(4, 2.0, 1).unwrap();
        let chi = cell_solution(&f, 0, [0.0, 1.0]).unwrap();
        for &x in &[0.0, 0.1, 0.5, 0.83] {
            let exact = -2.0 * SQRT_2 * (1.0 - (TAU * x).cos()) / TAU;
            assert!((chi.eval(x, 0.3) - exact).abs() < 1e-14);
        }
        assert!(chi.eval(1.0, 0.0).abs() < 1e-14);
        let e1 = cell_solution(&f, 1, [1.0, 0.0]).unwrap();
        assert_eq!(e1.eval(0.37, 2.0), 0.0);
        let chi1 = cell_solution(&f, 1, [0.0, 1.0]).unwrap();
        assert!(chi1.eval(chi1.period() as f64, 0.0).abs() < 1e-12);
    }

    #[test]
    fn cell_solution_reproduces_diffusivity() {
        // D_22 = ⟨|e₂ − ∇χ|²⟩ with the gradient taken in x₁ only.
        let f = self_similar_sine(3, 2.0, 1).unwrap();
        let chi = cell_solution(&f, 1, [0.0, 1.0]).unwrap();
        let n = 6000;
        let r = chi.period() as f64;
        let d: f64 = (0..n)
            .map(|i| {
                let g = chi.gradient(i as f64 * r / n as f64, 0.0);
                1.0 + g[0] * g[0]
            })
            .sum::<f64>()
            / n as f64;
        assert!((d - effective_diffusivity(&f, 1).unwrap().d22).abs() < 1e-9);
    }

    #[test]
    fn diffusivity_bracket_examples() {
        let f = self_similar_sine(100, 2.0, 5).unwrap();
        let b = thm_diffusivity_bracket(&f, 2).unwrap();
        let eps = 8.0 * SQRT_2 * PI / 100.0;
        assert!((b.lower - (1.0 + 4.0 * (1.0 - eps) * 21.0)).abs() < 1e-7);
        assert!((b.upper - (1.0 + 4.0 * (1.0 + eps) * 21.0)).abs() < 1e-7);
        assert!(b.preconditions_ok);
        assert!(thm_diffusivity_bracket(&f, 0).unwrap().contains(5.0));
        let g = self_similar_sine(4, 2.0, 2).unwrap();
        assert!(!thm_diffusivity_bracket(&g, 1).unwrap().preconditions_ok);
    }

    #[test]
    fn lemma_bracket_examples() {
        let f = self_similar_sine(5, 3.0, 2).unwrap();
        let b = variance_bracket_lemma(&f, 1).unwrap();
        assert!((b.lower - 9.0 * 0.25).abs() < 1e-12);
        assert!((b.upper - 9.0 * 2.25).abs() < 1e-12);
        assert!(b.preconditions_ok);
        let (v, _) = variance(&f, ScaleRange::upto(1)).unwrap();
        assert!(b.contains(v));
        let g = self_similar_sine(5, 2.0, 2).unwrap();
        assert!(!variance_bracket_lemma(&g, 1).unwrap().preconditions_ok);
    }

    #[test]
    fn recursion_defect_examples() {
        let f = self_similar_sine(100, 2.0, 2).unwrap();
        let d = variance_recursion_defect(&f, 1).unwrap();
        assert_eq!(d.defect, 0.0);
        assert!(d.defect <= d.bound);
        assert!(variance_recursion_defect(&f, 0).is_err());
    }

    #[test]
    fn mixing_defect_examples() {
        let s = FourierProfile::sine().poly().clone();
        let d = scale_mixing_defect(&s, &s, 1).unwrap();
        assert!((d.lhs - 1.0).abs() < 1e-14);
        assert!((d.bound - 8.0).abs() < 1e-7);
        let d4 = scale_mixing_defect(&s, &s, 4).unwrap();
        assert_eq!(d4.lhs, 0.0);
        assert!((d4.bound - 2.0).abs() < 1e-7);
        assert!(scale_mixing_defect(&s, &s, 0).is_err());
    }
}
