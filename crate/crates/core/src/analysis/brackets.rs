//! Explicit bounds on the mean squared displacement.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::scales::{n_ef, p_of_t};
use crate::error::{Error, Result};
use crate::profiles::{validate_hypotheses, MultiscaleField, ScaleRange};

/// Which growth assumption a run is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Regime {
    /// `ρ_min > γ_max`: lower bound from the effective-scale count.
    Hypothesis1,
    /// `ρ_min² > γ_max`, flat profiles at 0: explicit two-sided window.
    Hypothesis2,
    /// Constant ratios: `MSD ∝ t^{1+α}`, `α = ln γ / ln ρ`.
    SelfSimilar,
    /// `R_n ≈ ρ^{n^α}`: `MSD ∝ t γ^{β(t)}`.
    FastSeparation { rho: f64, alpha: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketSource {
    EffectiveScalesLower,
    ExplicitWindow,
    SelfSimilarShape,
    FastSeparationShape,
}

impl BracketSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            BracketSource::EffectiveScalesLower => "effective_scales_lower",
            BracketSource::ExplicitWindow => "explicit_window",
            BracketSource::SelfSimilarShape => "self_similar_shape",
            BracketSource::FastSeparationShape => "fast_separation_shape",
        }
    }
}

impl fmt::Display for BracketSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBracket {
    pub t: f64,
    pub msd_lower: f64,
    /// `None` for one-sided bounds.
    pub msd_upper: Option<f64>,
    pub source: BracketSource,
    pub preconditions_ok: bool,
    pub report: String,
}

impl PredictionBracket {
    fn skipped(t: f64, source: BracketSource, report: String) -> Self {
        Self { t, msd_lower: f64::NAN, msd_upper: None, source, preconditions_ok: false, report }
    }
}

/// Bracket for `E[(y_t·e₂)²]` when the drift uses the scales in `range`.
///
/// Failed preconditions are reported in the bracket rather than as errors,
/// so callers can record them. An empty range (no drift) is refused, and
/// the bounds are only stated for the full ladder.
pub fn msd_prediction_bracket(
    field: &MultiscaleField,
    range: ScaleRange,
    t: f64,
    regime: &Regime,
) -> Result<PredictionBracket> {
    if range.is_empty() {
        return Err(Error::NoScales("prediction bracket"));
    }
    if range != field.full_range() {
        return Err(Error::InvalidArgument(format!("brackets need all scales {}, got {range}", field.full_range())));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    Ok(match regime {
        Regime::Hypothesis1 => effective_scales_lower(field, t),
        Regime::Hypothesis2 => explicit_window(field, t),
        Regime::SelfSimilar => self_similar_shape(field, t),
        Regime::FastSeparation { rho, alpha, gamma } => fast_separation_shape(t, *rho, *alpha, *gamma),
    })
}

/// `t γ²_{n_ef(t)−1} / 4`.
fn effective_scales_lower(field: &MultiscaleField, t: f64) -> PredictionBracket {
    let src = BracketSource::EffectiveScalesLower;
    let l = field.ladder();
    let k1 = field.constants().k1;
    let need = 8.0 * k1 / (l.gamma_min() - 1.0);
    let rho = l.rho_min() as f64;
    let n = match n_ef(field, t) {
        Ok(n) => n,
        Err(e) => return PredictionBracket::skipped(t, src, e.to_string()),
    };
    let g = l.gamma_ext(n as isize - 1);
    let ok = rho > need;
    let report = format!(
        "n_ef = {n}; rho_min = {rho} {} 8 K1/(gamma_min-1) = {need:.6}",
        if ok { ">" } else { "<=" }
    );
    PredictionBracket { t, msd_lower: t * g * g / 4.0, msd_upper: None, source: src, preconditions_ok: ok, report }
}

/// Two-sided bounds valid for `C R_p² < t ≤ C R_{p+1}²`:
///
/// lower `t γ_p² (a² − γ_max ρ_min⁻² 400 K₀K₂ (1−γ_max/ρ_min²)⁻¹ (1 + (1+K₀) ρ_min⁻¹ (γ_min−1)/(γ_min−2)))`,
/// upper `t γ_p² (1+K₀²)(1 + 2050 γ_max² a⁻⁴ K₂² (1−γ_max/ρ_min²)⁻²)`, with `a = 1 − (γ_min−1)⁻¹`.
fn explicit_window(field: &MultiscaleField, t: f64) -> PredictionBracket {
    let src = BracketSource::ExplicitWindow;
    let hyp = validate_hypotheses(field);
    if !hyp.h2_holds {
        return PredictionBracket::skipped(t, src, format!("hypothesis 2 fails: {}", hyp.violations.join("; ")));
    }
    let p = match p_of_t(field, t) {
        Ok(p) => p,
        Err(e) => return PredictionBracket::skipped(t, src, e.to_string()),
    };
    let l = field.ladder();
    let c = field.constants();
    let (gmin, gmax) = (l.gamma_min(), l.gamma_max());
    let rho = l.rho_min() as f64;
    let a = 1.0 - 1.0 / (gmin - 1.0);
    let sep = 1.0 - gmax / (rho * rho);
    let lower_paren = a * a
        - gmax / (rho * rho) * 400.0 * c.k0 * c.k2 / sep
            * (1.0 + (1.0 + c.k0) / rho * (gmin - 1.0) / (gmin - 2.0));
    let upper_paren = (1.0 + c.k0 * c.k0) * (1.0 + 2050.0 * gmax * gmax / a.powi(4) * c.k2 * c.k2 / (sep * sep));
    let gp2 = l.gamma(p).powi(2);
    let ok = lower_paren > 0.0;
    PredictionBracket {
        t,
        msd_lower: t * gp2 * lower_paren,
        msd_upper: Some(t * gp2 * upper_paren),
        source: src,
        preconditions_ok: ok,
        report: format!(
            "p = {p}; lower constant = {lower_paren:.6e}{}",
            if ok { "" } else { " (not positive, bound vacuous)" }
        ),
    }
}

fn self_similar_shape(field: &MultiscaleField, t: f64) -> PredictionBracket {
    let l = field.ladder();
    let src = BracketSource::SelfSimilarShape;
    if l.rho_min() != l.rho_max() || l.gamma_min() != l.gamma_max() {
        return PredictionBracket::skipped(t, src, "ladder is not self-similar".into());
    }
    let alpha = l.gamma_max().ln() / (l.rho_max() as f64).ln();
    let v = t.powf(1.0 + alpha);
    PredictionBracket {
        t,
        msd_lower: v,
        msd_upper: Some(v),
        source: src,
        preconditions_ok: false,
        report: format!("shape t^(1+{alpha:.6}) only; prefactors are not explicit"),
    }
}

/// `β(t) = 2 (2 ln ρ)^{−1/α} (ln t)^{1/α}`.
pub fn fast_separation_beta(rho: f64, alpha: f64, t: f64) -> f64 {
    2.0 * (2.0 * rho.ln()).powf(-1.0 / alpha) * t.ln().powf(1.0 / alpha)
}

/// `t γ^{β(t)}`, the growth law under fast scale separation.
pub fn fast_separation_curve(rho: f64, alpha: f64, gamma: f64, t: f64) -> f64 {
    t * gamma.powf(fast_separation_beta(rho, alpha, t))
}

fn fast_separation_shape(t: f64, rho: f64, alpha: f64, gamma: f64) -> PredictionBracket {
    let v = fast_separation_curve(rho, alpha, gamma, t);
    PredictionBracket {
        t,
        msd_lower: v,
        msd_upper: Some(v),
        source: BracketSource::FastSeparationShape,
        preconditions_ok: false,
        report: format!("shape t*gamma^beta(t), beta = {:.6}; prefactors are not explicit", fast_separation_beta(rho, alpha, t)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{kolmogorov_preset, self_similar_sine};

    #[test]
    fn quarter_lower_bound() {
        let f = self_similar_sine(100, 2.0, 3).unwrap();
        let b = msd_prediction_bracket(&f, f.full_range(), 1e3, &Regime::Hypothesis1).unwrap();
        assert_eq!(b.msd_lower, 1e3 / 4.0);
        assert!(b.preconditions_ok, "{}", b.report);
        assert_eq!(b.msd_upper, None);
        let b = msd_prediction_bracket(&f, f.full_range(), 2e4, &Regime::Hypothesis1).unwrap();
        assert_eq!(b.msd_lower, 2e4 * 4.0 / 4.0);
        // γ₋₁ = 1/2 below the first threshold
        let b = msd_prediction_bracket(&f, f.full_range(), 0.5, &Regime::Hypothesis1).unwrap();
        assert_eq!(b.msd_lower, 0.5 * 0.25 / 4.0);
    }

    #[test]
    fn truncation_is_reported() {
        let f = self_similar_sine(100, 2.0, 1).unwrap();
        let b = msd_prediction_bracket(&f, f.full_range(), 1e9, &Regime::Hypothesis1).unwrap();
        assert!(!b.preconditions_ok);
        assert!(b.report.contains("truncation"));
    }

    #[test]
    fn explicit_window_vacuous_for_small_ratio() {
        let f = kolmogorov_preset(6).unwrap();
        let c = super::super::scales::p_of_t_constant(&f).unwrap();
        let b = msd_prediction_bracket(&f, f.full_range(), 2.0 * c * 256.0, &Regime::Hypothesis2).unwrap();
        assert!(!b.preconditions_ok);
        assert!(b.msd_lower < 0.0);
        assert!(b.msd_upper.unwrap() > 0.0);
    }

    #[test]
    fn explicit_window_needs_flat_profiles() {
        // √2 sin has h'(0) ≠ 0
        let f = self_similar_sine(100, 3.0, 2).unwrap();
        let b = msd_prediction_bracket(&f, f.full_range(), 1e6, &Regime::Hypothesis2).unwrap();
        assert!(!b.preconditions_ok);
        assert!(b.report.contains("hypothesis 2"));
    }

    #[test]
    fn empty_range_refused() {
        let f = self_similar_sine(100, 2.0, 1).unwrap();
        let r = msd_prediction_bracket(&f, ScaleRange::EMPTY, 1.0, &Regime::Hypothesis1);
        assert!(matches!(r, Err(Error::NoScales(_))));
        let r = msd_prediction_bracket(&f, ScaleRange::upto(0), 1.0, &Regime::Hypothesis1);
        assert!(r.is_err());
    }

    #[test]
    fn shape_brackets_never_checkable() {
        let f = kolmogorov_preset(2).unwrap();
        let b = msd_prediction_bracket(&f, f.full_range(), 100.0, &Regime::SelfSimilar).unwrap();
        assert!(!b.preconditions_ok);
        assert!((b.msd_lower - 100f64.powf(7.0 / 3.0)).abs() < 1e-6 * b.msd_lower);
        let r = Regime::FastSeparation { rho: 10.0, alpha: 2.0, gamma: 2.0 };
        let b = msd_prediction_bracket(&f, f.full_range(), 100.0, &r).unwrap();
        assert!(!b.preconditions_ok);
    }

    #[test]
    fn beta_formula() {
        // α = 1: β = ln t / ln ρ, so t γ^β = t^{1 + ln γ/ln ρ}
        let v = fast_separation_curve(10.0, 1.0, 2.0, 1e4);
        assert!((v - 1e4f64.powf(1.0 + 2f64.ln() / 10f64.ln())).abs() < 1e-8 * v);
        let b = fast_separation_beta(std::f64::consts::E.powf(0.5), 2.0, std::f64::consts::E.powi(4));
        assert!((b - 4.0).abs() < 1e-12);
    }
}
