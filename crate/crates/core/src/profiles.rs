//! Periodic profiles, scale ladders and the truncated multiscale stream
//! function `H^{k,p}(x) = Σ_{n=k}^{p} γ_n h_n(x / R_n)`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trig::TrigPoly;

/// One period-1 profile `h_n`, with `h_n(0) = 0`.
///
/// Profiles built by [`normalize_profile`] have unit variance. Profiles built
/// with [`FourierProfile::unnormalized`] keep their amplitude; they exist for
/// constructed families such as the telescoping one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierProfile {
    poly: TrigPoly,
    normalized: bool,
}

/// Scales raw coefficients to unit variance and shifts the constant so the
/// profile vanishes at 0.
pub fn normalize_profile(cos: &[f64], sin: &[f64]) -> Result<FourierProfile> {
    if cos.iter().chain(sin).any(|v| !v.is_finite()) {
        return Err(Error::InvalidProfile("non-finite coefficient".into()));
    }
    let raw = TrigPoly::new(0.0, cos, sin);
    let var = raw.variance();
    if var == 0.0 {
        return Err(Error::DegenerateProfile);
    }
    let scaled = raw.scaled(1.0 / var.sqrt());
    Ok(FourierProfile { poly: anchor_at_zero(scaled), normalized: true })
}

fn anchor_at_zero(p: TrigPoly) -> TrigPoly {
    let at_zero: f64 = p.cos_coeffs().iter().sum();
    TrigPoly::new(-at_zero, p.cos_coeffs(), p.sin_coeffs())
}

impl FourierProfile {
    /// Profile with the given amplitude; only the constant is adjusted so that
    /// `h(0) = 0`.
    pub fn unnormalized(cos: &[f64], sin: &[f64]) -> Result<FourierProfile> {
        if cos.iter().chain(sin).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite coefficient".into()));
        }
        let raw = TrigPoly::new(0.0, cos, sin);
        if raw.variance() == 0.0 {
            return Err(Error::DegenerateProfile);
        }
        Ok(FourierProfile { poly: anchor_at_zero(raw), normalized: false })
    }

    /// `√2 sin(2πx)`.
    pub fn sine() -> FourierProfile {
        normalize_profile(&[], &[1.0]).expect("nonzero")
    }

    /// `√2 (1 − cos 2πx)`: zero value and zero slope at the origin.
    pub fn cosine_valley() -> FourierProfile {
        normalize_profile(&[-1.0], &[]).expect("nonzero")
    }

    pub fn poly(&self) -> &TrigPoly {
        &self.poly
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn eval(&self, x: f64, order: u32) -> f64 {
        self.poly.eval_derivative(x, order)
    }

    pub fn variance(&self) -> f64 {
        self.poly.variance()
    }

    pub fn constants(&self) -> ProfileConstants {
        profile_constants(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConstants {
    pub osc: f64,
    pub sup_d1: f64,
    pub sup_d2: f64,
}

/// Oscillation and derivative sup-norms of a profile (slightly upper-biased).
pub fn profile_constants(profile: &FourierProfile) -> ProfileConstants {
    let (lo, hi) = profile.poly.extrema(0);
    ProfileConstants { osc: hi - lo, sup_d1: profile.poly.sup_abs(1), sup_d2: profile.poly.sup_abs(2) }
}

/// How the sequences `r_n` and `γ_n` are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LadderRule {
    /// `r_0..r_P` with `r_0 = 1`, `γ_0..γ_P` with `γ_0 = 1`.
    Explicit { ratios: Vec<f64>, gammas: Vec<f64> },
    /// `R_n = ρ^n`, `γ_n = γ^n`.
    SelfSimilar {
        rho: f64,
        gamma: f64,
        #[serde(rename = "P")]
        levels: usize,
    },
    /// `R_n = R_{n-1}·⌊ρ^{n^α} / R_{n-1}⌋`, `γ_n = γ^n`.
    FastSeparation {
        rho: f64,
        alpha: f64,
        gamma: f64,
        #[serde(rename = "P")]
        levels: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    ratios: Vec<u64>,
    gamma_steps: Vec<f64>,
    gammas: Vec<f64>,
    radii: Vec<u64>,
    rho_min: u64,
    rho_max: u64,
    gamma_min: f64,
    gamma_max: f64,
}

/// Largest integer represented exactly by f64.
const EXACT_LIMIT: f64 = 9_007_199_254_740_992.0;

fn integer_ratio(index: usize, value: f64) -> Result<u64> {
    if !value.is_finite() || value.fract() != 0.0 || !(0.0..=EXACT_LIMIT).contains(&value) {
        return Err(Error::NonIntegerRatio { index, value });
    }
    Ok(value as u64)
}

pub fn build_ladder(rule: &LadderRule) -> Result<ScaleLadder> {
    match rule {
        LadderRule::Explicit { ratios, gammas } => {
            if ratios.len() != gammas.len() {
                return Err(Error::InvalidLadder(format!(
                    "{} ratios but {} gammas",
                    ratios.len(),
                    gammas.len()
                )));
            }
            if ratios.len() < 2 {
                return Err(Error::InvalidLadder("need at least scales 0 and 1".into()));
            }
            let r: Vec<u64> =
                ratios.iter().enumerate().map(|(i, &v)| integer_ratio(i, v)).collect::<Result<_>>()?;
            if r[0] != 1 {
                return Err(Error::InvalidLadder(format!("r_0 must be 1, got {}", r[0])));
            }
            if gammas[0] != 1.0 {
                return Err(Error::InvalidLadder(format!("gamma_0 must be 1, got {}", gammas[0])));
            }
            let steps: Vec<f64> = gammas.windows(2).map(|w| w[1] / w[0]).collect();
            ScaleLadder::from_parts(r, steps)
        }
        LadderRule::SelfSimilar { rho, gamma, levels } => {
            let rho = integer_ratio(1, *rho)?;
            if *levels < 1 {
                return Err(Error::InvalidLadder("P must be at least 1".into()));
            }
            let mut r = vec![1u64];
            r.extend(std::iter::repeat_n(rho, *levels));
            ScaleLadder::from_parts(r, vec![*gamma; *levels])
        }
        LadderRule::FastSeparation { rho, alpha, gamma, levels } => {
            if *levels < 1 {
                return Err(Error::InvalidLadder("P must be at least 1".into()));
            }
            if !(*rho > 1.0) || !(*alpha >= 1.0) {
                return Err(Error::InvalidLadder(format!("need rho > 1 and alpha >= 1, got {rho}, {alpha}")));
            }
            let mut r = vec![1u64];
            let mut big_r = 1u64;
            for n in 1..=*levels {
                let target = rho.powf((n as f64).powf(*alpha));
                if !target.is_finite() || target > EXACT_LIMIT {
                    return Err(Error::LadderOverflow { index: n });
                }
                let q = (target / big_r as f64).floor();
                let rn = integer_ratio(n, q)?;
                big_r = big_r.checked_mul(rn).ok_or(Error::LadderOverflow { index: n })?;
                r.push(rn);
            }
            ScaleLadder::from_parts(r, vec![*gamma; *levels])
        }
    }
}

impl ScaleLadder {
    /// `ratios = r_0..r_P` (`r_0 = 1`), `gamma_steps[n-1] = γ_n / γ_{n-1}`.
    pub fn from_parts(ratios: Vec<u64>, gamma_steps: Vec<f64>) -> Result<ScaleLadder> {
        if ratios.len() < 2 || gamma_steps.len() + 1 != ratios.len() {
            return Err(Error::InvalidLadder("need P >= 1 and one gamma step per ratio".into()));
        }
        if ratios[0] != 1 {
            return Err(Error::InvalidLadder(format!("r_0 must be 1, got {}", ratios[0])));
        }
        for (i, &r) in ratios.iter().enumerate().skip(1) {
            if r < 2 {
                return Err(Error::RatioTooSmall { index: i, value: r });
            }
        }
        for (i, &q) in gamma_steps.iter().enumerate() {
            if !q.is_finite() || q <= 1.0 {
                return Err(Error::GammaRatioTooSmall { index: i + 1, value: q });
            }
        }
        let mut radii = Vec::with_capacity(ratios.len());
        let mut acc = 1u64;
        for (i, &r) in ratios.iter().enumerate() {
            acc = acc.checked_mul(r).ok_or(Error::LadderOverflow { index: i })?;
            if acc as f64 > EXACT_LIMIT {
                return Err(Error::LadderOverflow { index: i });
            }
            radii.push(acc);
        }
        let mut gammas = vec![1.0];
        for q in &gamma_steps {
            gammas.push(gammas.last().unwrap() * q);
        }
        if gammas.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidLadder("gamma overflow".into()));
        }
        let rho_min = *ratios[1..].iter().min().unwrap();
        let rho_max = *ratios[1..].iter().max().unwrap();
        let gamma_min = gamma_steps.iter().cloned().fold(f64::INFINITY, f64::min);
        let gamma_max = gamma_steps.iter().cloned().fold(0.0, f64::max);
        Ok(ScaleLadder { ratios, gamma_steps, gammas, radii, rho_min, rho_max, gamma_min, gamma_max })
    }

    /// Index of the last scale, `P`.
    pub fn top(&self) -> usize {
        self.ratios.len() - 1
    }

    pub fn ratios(&self) -> &[u64] {
        &self.ratios
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn gamma_steps(&self) -> &[f64] {
        &self.gamma_steps
    }

    pub fn radii(&self) -> &[u64] {
        &self.radii
    }

    pub fn gamma(&self, n: usize) -> f64 {
        self.gammas[n]
    }

    pub fn radius(&self, n: usize) -> u64 {
        self.radii[n]
    }

    pub fn rho_min(&self) -> u64 {
        self.rho_min
    }

    pub fn rho_max(&self) -> u64 {
        self.rho_max
    }

    pub fn gamma_min(&self) -> f64 {
        self.gamma_min
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    /// `γ_{n}` extended to `n = -1` by `γ_{-1} := γ_0 / γ_min`.
    pub fn gamma_ext(&self, n: isize) -> f64 {
        if n < 0 {
            self.gammas[0] / self.gamma_min
        } else {
            self.gammas[n as usize]
        }
    }
}

/// Half-open range of scale indices `start..end`; empty when equal.
///
/// Serialized as the inclusive pair `[k, p]`, or `[]` when empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ScaleRange {
    pub start: usize,
    pub end: usize,
}

impl ScaleRange {
    pub const EMPTY: ScaleRange = ScaleRange { start: 0, end: 0 };

    /// Scales `k..=p`.
    pub fn inclusive(k: usize, p: usize) -> ScaleRange {
        assert!(k <= p, "inclusive range needs k <= p");
        ScaleRange { start: k, end: p + 1 }
    }

    /// Scales `0..=p`.
    pub fn upto(p: usize) -> ScaleRange {
        ScaleRange { start: 0, end: p + 1 }
    }

    /// Scales `0..=p-1`, empty for `p = 0`.
    pub fn below(p: usize) -> ScaleRange {
        ScaleRange { start: 0, end: p }
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn last(&self) -> Option<usize> {
        (!self.is_empty()).then(|| self.end - 1)
    }

    pub fn iter(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl TryFrom<Vec<usize>> for ScaleRange {
    type Error = String;

    fn try_from(v: Vec<usize>) -> std::result::Result<Self, String> {
        match v.as_slice() {
            [] => Ok(ScaleRange::EMPTY),
            [k, p] if k <= p => Ok(ScaleRange::inclusive(*k, *p)),
            _ => Err(format!("scale range must be [] or [k, p] with k <= p, got {v:?}")),
        }
    }
}

impl From<ScaleRange> for Vec<usize> {
    fn from(r: ScaleRange) -> Self {
        r.last().map_or(Vec::new(), |p| vec![r.start, p])
    }
}

impl fmt::Display for ScaleRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.last() {
            Some(p) => write!(f, "{}..={}", self.start, p),
            None => write!(f, "empty"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConstants {
    /// `max_n Osc(h_n)`.
    pub k0: f64,
    /// `max_n ‖h_n'‖∞`.
    pub k1: f64,
    /// `max_n ‖h_n''‖∞`.
    pub k2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleField {
    ladder: ScaleLadder,
    profiles: Vec<FourierProfile>,
    constants: FieldConstants,
}

impl MultiscaleField {
    pub fn new(ladder: ScaleLadder, profiles: Vec<FourierProfile>) -> Result<MultiscaleField> {
        if profiles.len() != ladder.top() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} profiles for {} scales",
                profiles.len(),
                ladder.top() + 1
            )));
        }
        let mut constants = FieldConstants { k0: 0.0, k1: 0.0, k2: 0.0 };
        for p in &profiles {
            let c = p.constants();
            constants.k0 = constants.k0.max(c.osc);
            constants.k1 = constants.k1.max(c.sup_d1);
            constants.k2 = constants.k2.max(c.sup_d2);
        }
        Ok(MultiscaleField { ladder, profiles, constants })
    }

    /// Same profile at every scale.
    pub fn uniform(ladder: ScaleLadder, profile: FourierProfile) -> Result<MultiscaleField> {
        let profiles = vec![profile; ladder.top() + 1];
        Self::new(ladder, profiles)
    }

    pub fn ladder(&self) -> &ScaleLadder {
        &self.ladder
    }

    pub fn profiles(&self) -> &[FourierProfile] {
        &self.profiles
    }

    pub fn profile(&self, n: usize) -> &FourierProfile {
        &self.profiles[n]
    }

    pub fn constants(&self) -> FieldConstants {
        self.constants
    }

    pub fn top(&self) -> usize {
        self.ladder.top()
    }

    pub fn full_range(&self) -> ScaleRange {
        ScaleRange::upto(self.top())
    }

    pub fn check_range(&self, range: ScaleRange) -> Result<()> {
        if !range.is_empty() && range.end > self.top() + 1 {
            return Err(Error::RangeOutOfBounds { start: range.start, end: range.end, top: self.top() });
        }
        Ok(())
    }

    /// Period of `H^{k,p}`: `R_p`, or 1 for an empty range.
    pub fn period(&self, range: ScaleRange) -> u64 {
        range.last().map_or(1, |p| self.ladder.radius(p))
    }
}

/// `Σ_{n∈range} γ_n h_n^{(order)}(x/R_n) R_n^{-order}`.
pub fn eval_field(field: &MultiscaleField, x: f64, range: ScaleRange, order: u32) -> Result<f64> {
    field.check_range(range)?;
    Ok(range
        .iter()
        .map(|n| {
            let r = field.ladder.radius(n) as f64;
            field.ladder.gamma(n) * field.profiles[n].eval(x / r, order) * r.powi(-(order as i32))
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub h1_holds: bool,
    pub h2_holds: bool,
    pub epsilon: f64,
    /// `K_1 (1 − γ_max/ρ_min)^{-1}`: `|h(x)| ≤ bound·|x|` under the first hypothesis.
    pub bound_h1: Option<f64>,
    /// `K_2 (1 − γ_max/ρ_min²)^{-1}`: `|h(x)| ≤ bound·x²` under the second.
    pub bound_h2: Option<f64>,
    pub violations: Vec<String>,
}

pub fn validate_hypotheses(field: &MultiscaleField) -> HypothesisReport {
    let l = field.ladder();
    let c = field.constants();
    let rho_min = l.rho_min() as f64;
    let mut violations = Vec::new();

    let h1 = rho_min > l.gamma_max();
    if !h1 {
        violations.push(format!("h1: rho_min = {rho_min} <= gamma_max = {}", l.gamma_max()));
    }
    let rho_ok = rho_min > l.gamma_max().sqrt();
    if !rho_ok {
        violations.push(format!("h2: rho_min = {rho_min} <= gamma_max^(1/2) = {}", l.gamma_max().sqrt()));
    }
    let mut flat = true;
    for (n, p) in field.profiles().iter().enumerate() {
        let d = p.eval(0.0, 1);
        let scale = p.poly().derivative_l2_norm(1).max(1.0);
        if d.abs() > 1e-12 * scale {
            flat = false;
            violations.push(format!("h2: h_{n}'(0) = {d:e} != 0"));
        }
    }
    let k2_finite = c.k2.is_finite();
    if !k2_finite {
        violations.push("h2: K2 not finite".into());
    }
    for (n, p) in field.profiles().iter().enumerate() {
        if !p.is_normalized() {
            violations.push(format!("normalization: Var(h_{n}) = {} != 1", p.variance()));
        }
    }
    let h2 = rho_ok && flat && k2_finite;
    let epsilon = 4.0 * c.k1 / (rho_min * (l.gamma_min() - 1.0));
    HypothesisReport {
        h1_holds: h1,
        h2_holds: h2,
        epsilon,
        bound_h1: h1.then(|| c.k1 / (1.0 - l.gamma_max() / rho_min)),
        bound_h2: h2.then(|| c.k2 / (1.0 - l.gamma_max() / (rho_min * rho_min))),
        violations,
    }
}

/// Self-similar field with `ρ = 16`, `γ = 16^{4/3}` and cosine-valley profiles.
pub fn kolmogorov_preset(levels: usize) -> Result<MultiscaleField> {
    let ladder =
        build_ladder(&LadderRule::SelfSimilar { rho: 16.0, gamma: 16f64.powf(4.0 / 3.0), levels })?;
    MultiscaleField::uniform(ladder, FourierProfile::cosine_valley())
}

/// Self-similar field with `√2 sin` profiles.
pub fn self_similar_sine(rho: u64, gamma: f64, levels: usize) -> Result<MultiscaleField> {
    let ladder = build_ladder(&LadderRule::SelfSimilar { rho: rho as f64, gamma, levels })?;
    MultiscaleField::uniform(ladder, FourierProfile::sine())
}

// ---------------------------------------------------------------------------
// field specification files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub ladder: LadderRule,
    pub profiles: ProfileSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub family: ProfileFamily,
    /// Raw coefficients for `family = "custom"`: one entry per scale, or a
    /// single entry shared by all scales.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub custom: Vec<RawProfile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFamily {
    Sine,
    CosineValley,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProfile {
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FieldSpec {
    pub fn build(&self) -> Result<MultiscaleField> {
        let ladder = build_ladder(&self.ladder)?;
        let n = ladder.top() + 1;
        let profiles = match self.profiles.family {
            ProfileFamily::Sine => vec![FourierProfile::sine(); n],
            ProfileFamily::CosineValley => vec![FourierProfile::cosine_valley(); n],
            ProfileFamily::Custom => {
                let raw = &self.profiles.custom;
                let built: Vec<FourierProfile> =
                    raw.iter().map(|p| normalize_profile(&p.cos, &p.sin)).collect::<Result<_>>()?;
                match built.len() {
                    1 => vec![built[0].clone(); n],
                    m if m == n => built,
                    m => {
                        return Err(Error::Config(format!("{m} custom profiles for {n} scales")));
                    }
                }
            }
        };
        if self.profiles.family != ProfileFamily::Custom && !self.profiles.custom.is_empty() {
            return Err(Error::Config("profiles.custom given for a non-custom family".into()));
        }
        MultiscaleField::new(ladder, profiles)
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<FieldSpec> {
        parse_config(text)
    }

    pub fn load(path: &Path) -> Result<FieldSpec> {
        load_config(path)
    }
}

pub(crate) fn parse_config<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

pub(crate) fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
