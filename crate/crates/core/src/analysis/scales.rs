//! How many scales are active at time `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{validate_hypotheses, MultiscaleField};

/// Convention for the amplitude below scale 0: `γ₋₁ = γ₀/γ_min`.
pub const GAMMA_MINUS_ONE_CONVENTION: &str = "gamma_{-1} = gamma_0 / gamma_min";

/// `θ_n = R_{n+1}² (γ_{n−1}/γ_{n+1})² / (8 K₁²) · (1 − γ_max/ρ_min)²` for
/// `n = 0..P−1`; the effective-scale count is the first `n` with `t ≤ θ_n`.
pub fn n_ef_thresholds(field: &MultiscaleField) -> Result<Vec<f64>> {
    let report = validate_hypotheses(field);
    if !report.h1_holds {
        return Err(Error::Hypothesis(format!(
            "effective-scale count needs rho_min > gamma_max ({})",
            report.violations.join("; ")
        )));
    }
    let l = field.ladder();
    let k1 = field.constants().k1;
    let sep = (1.0 - l.gamma_max() / l.rho_min() as f64).powi(2);
    Ok((0..l.top())
        .map(|n| {
            let r = l.radius(n + 1) as f64;
            let q = l.gamma_ext(n as isize - 1) / l.gamma(n + 1);
            r * r * q * q / 8.0 / (k1 * k1) * sep
        })
        .collect())
}

/// Number of effective (already homogenized) scales at time `t`.
pub fn n_ef(field: &MultiscaleField, t: f64) -> Result<usize> {
    check_time(t)?;
    let th = n_ef_thresholds(field)?;
    first_at_least(&th, t)
}

/// `inf{n : t ≤ R_n²}`, the simplified count.
pub fn n_simple(field: &MultiscaleField, t: f64) -> Result<usize> {
    check_time(t)?;
    let th: Vec<f64> = field.ladder().radii().iter().map(|&r| (r as f64) * (r as f64)).collect();
    first_at_least(&th, t)
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    Ok(())
}

fn first_at_least(thresholds: &[f64], t: f64) -> Result<usize> {
    thresholds.iter().position(|&th| t <= th).ok_or(Error::TruncationTooSmall {
        t,
        threshold: thresholds.last().copied().unwrap_or(0.0),
    })
}

/// `16 (1 + K₀²) (1 − (γ_min − 1)^{-1})^{-2}`.
pub fn p_of_t_constant(field: &MultiscaleField) -> Result<f64> {
    let gm = field.ladder().gamma_min();
    if !(gm > 2.0) {
        return Err(Error::Hypothesis(format!("scale index p(t) needs gamma_min > 2, got {gm}")));
    }
    let k0 = field.constants().k0;
    Ok(16.0 * (1.0 + k0 * k0) / (1.0 - 1.0 / (gm - 1.0)).powi(2))
}

/// `sup{n : C R_n² < t}`.
pub fn p_of_t(field: &MultiscaleField, t: f64) -> Result<usize> {
    check_time(t)?;
    let c = p_of_t_constant(field)?;
    let l = field.ladder();
    let th = |n: usize| c * (l.radius(n) as f64).powi(2);
    if t <= th(0) {
        return Err(Error::BelowFirstScale { t, threshold: th(0) });
    }
    if t > th(l.top()) {
        return Err(Error::TruncationTooSmall { t, threshold: th(l.top()) });
    }
    Ok((0..=l.top()).rev().find(|&n| th(n) < t).unwrap())
}

/// `ln γ_p / ln R_p`; undefined at `p = 0` where `R_0 = 1`.
pub fn nu_pred(field: &MultiscaleField, p: usize) -> Option<f64> {
    let l = field.ladder();
    (p >= 1 && p <= l.top()).then(|| l.gamma(p).ln() / (l.radius(p) as f64).ln())
}

/// Leading-order window for the exponent under scale separation:
/// `[ln γ_min / (ln ρ_max + ln(γ_max/γ_min)), ln γ_max / (ln ρ_min + ln(γ_min/γ_max))]`.
pub fn nu_window_separated(field: &MultiscaleField) -> (f64, f64) {
    let l = field.ladder();
    let (gmin, gmax) = (l.gamma_min(), l.gamma_max());
    let (rmin, rmax) = (l.rho_min() as f64, l.rho_max() as f64);
    (gmin.ln() / (rmax.ln() + (gmax / gmin).ln()), gmax.ln() / (rmin.ln() + (gmin / gmax).ln()))
}

/// `[ln γ_min / ln ρ_max, ln γ_max / ln ρ_min]`, which contains every `ν(t)`.
pub fn nu_window(field: &MultiscaleField) -> (f64, f64) {
    let l = field.ladder();
    (l.gamma_min().ln() / (l.rho_max() as f64).ln(), l.gamma_max().ln() / (l.rho_min() as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCount {
    pub t: f64,
    pub n_ef: Option<usize>,
    pub n_simple: Option<usize>,
    pub p_of_t: Option<usize>,
    pub nu_pred: Option<f64>,
    pub window: (f64, f64),
    pub window_separated: Option<(f64, f64)>,
}

/// All counts at `t`; counts whose hypotheses fail or whose range is
/// exceeded are `None`.
pub fn scale_count(field: &MultiscaleField, t: f64) -> ScaleCount {
    let p = p_of_t(field, t).ok();
    let h1 = validate_hypotheses(field).h1_holds;
    ScaleCount {
        t,
        n_ef: n_ef(field, t).ok(),
        n_simple: n_simple(field, t).ok(),
        p_of_t: p,
        nu_pred: p.and_then(|p| nu_pred(field, p)),
        window: nu_window(field),
        window_separated: h1.then(|| nu_window_separated(field)),
    }
}
