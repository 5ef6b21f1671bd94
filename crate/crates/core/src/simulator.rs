//! Monte Carlo for `dy = dω − ∇Γ(y) dt` with the shear stream matrix.
//!
//! The drift is `(0, ∂₁H(y·e₁))`, so `y·e₁ = b` is a Brownian motion and
//! `y·e₂ = ω·e₂ + ∫₀ᵗ ∂₁H(b_s) ds`. The default scheme simulates only `b` and
//! integrates the drift with the trapezoidal rule; a plain 2-D Euler–Maruyama
//! scheme sharing the same noise is kept as a cross-check.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogenization::field_spectrum;
use crate::profiles::{MultiscaleField, ScaleRange};
use crate::rng::{derive_seed, Component, NormalStream};
use crate::trig::Harmonics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ExactRepresentation,
    EulerMaruyama2d,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ExactRepresentation => "exact_representation",
            Scheme::EulerMaruyama2d => "euler_maruyama_2d",
        }
    }
}

/// Step-size policy: `dt = min(base_dt, period_fraction · R_k²)` with `R_k`
/// the smallest included period, then halved until a coupled pilot shows
/// that halving changes the MSD by less than `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubstepRule {
    pub period_fraction: f64,
    /// Pilot size; 0 disables the check.
    pub pilot_paths: usize,
    pub tolerance: f64,
    pub max_refinements: u32,
}

impl Default for SubstepRule {
    fn default() -> Self {
        Self { period_fraction: 1e-2, pilot_paths: 256, tolerance: 5e-3, max_refinements: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub checkpoints: Vec<f64>,
    pub base_dt: f64,
    #[serde(default)]
    pub substep: SubstepRule,
    pub n_paths: usize,
    pub seed: u64,
    /// Scales included in the drift; all scales of the field when absent,
    /// none (zero drift) when `[]`.
    #[serde(default)]
    pub scale_range: Option<ScaleRange>,
    #[serde(default)]
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.is_empty() {
            return Err(Error::Config("no checkpoints".into()));
        }
        let mut prev = 0.0;
        for &t in &self.checkpoints {
            if !(t > prev) || !t.is_finite() {
                return Err(Error::Config("checkpoints must be positive and strictly increasing".into()));
            }
            prev = t;
        }
        if !(self.base_dt > 0.0 && self.base_dt.is_finite()) {
            return Err(Error::Config(format!("base_dt must be positive, got {}", self.base_dt)));
        }
        if !(self.substep.period_fraction > 0.0) || !(self.substep.tolerance > 0.0) {
            return Err(Error::Config("substep period_fraction and tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn range_for(&self, field: &MultiscaleField) -> ScaleRange {
        self.scale_range.unwrap_or_else(|| field.full_range())
    }
}

/// `∂₁H^{k,p}` as a sum of per-scale harmonic blocks.
#[derive(Debug, Clone)]
pub struct DriftTable {
    scales: Vec<(f64, Harmonics)>,
    finest_period: Option<f64>,
}

impl DriftTable {
    pub fn new(field: &MultiscaleField, range: ScaleRange) -> Result<Self> {
        field.check_range(range)?;
        let l = field.ladder();
        let scales = range
            .iter()
            .map(|n| {
                let r = l.radius(n) as f64;
                let d = field.profile(n).poly().derivative_poly(1);
                (1.0 / r, Harmonics::from_poly(&d, l.gamma(n) / r))
            })
            .collect();
        let finest_period = (!range.is_empty()).then(|| l.radius(range.start) as f64);
        Ok(Self { scales, finest_period })
    }

    pub fn zero() -> Self {
        Self { scales: Vec::new(), finest_period: None }
    }

    pub fn is_zero(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn finest_period(&self) -> Option<f64> {
        self.finest_period
    }

    #[inline(always)]
    fn accumulate<const L: usize>(&self, b: &[f64; L], out: &mut [f64; L]) {
        for (inv, h) in &self.scales {
            let mut x = [0.0; L];
            for l in 0..L {
                x[l] = b[l] * inv;
            }
            h.accumulate(&x, out);
        }
    }

    pub fn eval(&self, b: f64) -> f64 {
        let mut out = [0.0];
        self.accumulate(&[b], &mut out);
        out[0]
    }

    /// Step prescribed by the rule before any pilot refinement.
    pub fn rule_dt(&self, config: &SimConfig) -> f64 {
        match self.finest_period {
            Some(r) => config.base_dt.min(config.substep.period_fraction * r * r),
            None => config.base_dt,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    len: f64,
    steps: u64,
    h: f64,
    sd: f64,
}

/// Each checkpoint interval split into `ceil(len/dt)` equal substeps; a
/// prefix of checkpoints yields a prefix of the grid, hence of the draws.
fn build_grid(checkpoints: &[f64], dt: f64) -> Vec<Segment> {
    let mut prev = 0.0;
    checkpoints
        .iter()
        .map(|&t| {
            let len = t - prev;
            prev = t;
            let steps = ((len / dt).ceil() as u64).max(1);
            let h = len / steps as f64;
            Segment { len, steps, h, sd: h.sqrt() }
        })
        .collect()
}

fn refined(grid: &[Segment], factor: u64) -> Vec<Segment> {
    grid.iter()
        .map(|s| {
            let steps = s.steps * factor;
            let h = s.len / steps as f64;
            Segment { len: s.len, steps, h, sd: h.sqrt() }
        })
        .collect()
}

/// Values of `ω·e₂` at the checkpoints.
fn longitudinal(seed: u64, path_id: u64, grid: &[Segment]) -> Vec<f64> {
    let mut s = NormalStream::new(seed, path_id, Component::Longitudinal);
    let mut w = 0.0;
    grid.iter()
        .map(|seg| {
            w += seg.len.sqrt() * s.next();
            w
        })
        .collect()
}

#[derive(Debug, Clone)]
struct DriftPath {
    integral: Vec<f64>,
    b: Vec<f64>,
}

const LANES: usize = 8;

/// Drift integrals for `L` consecutive paths starting at `first`.
fn drift_lanes<const L: usize>(
    drift: &DriftTable,
    grid: &[Segment],
    seed: u64,
    first: u64,
) -> Result<[DriftPath; L]> {
    let mut out: [DriftPath; L] = std::array::from_fn(|_| DriftPath {
        integral: Vec::with_capacity(grid.len()),
        b: Vec::with_capacity(grid.len()),
    });
    if drift.is_zero() {
        for o in out.iter_mut() {
            o.integral = vec![0.0; grid.len()];
            o.b = vec![f64::NAN; grid.len()];
        }
        return Ok(out);
    }
    let mut streams: [NormalStream; L] =
        std::array::from_fn(|l| NormalStream::new(seed, first + l as u64, Component::Transverse));
    let mut b = [0.0; L];
    let mut prev = [0.0; L];
    drift.accumulate(&b, &mut prev);
    let mut acc = [0.0; L];
    let mut t = 0.0;
    for seg in grid {
        let half_h = 0.5 * seg.h;
        for _ in 0..seg.steps {
            for l in 0..L {
                b[l] += seg.sd * streams[l].next();
            }
            let mut cur = [0.0; L];
            drift.accumulate(&b, &mut cur);
            for l in 0..L {
                acc[l] += half_h * (prev[l] + cur[l]);
            }
            prev = cur;
        }
        t += seg.len;
        for l in 0..L {
            if !acc[l].is_finite() || !b[l].is_finite() {
                return Err(Error::NonFinite { path_id: first + l as u64, t });
            }
            out[l].integral.push(acc[l]);
            out[l].b.push(b[l]);
        }
    }
    Ok(out)
}

/// Same fine path, trapezoid on the fine grid and on every other point.
fn pilot_lanes<const L: usize>(
    drift: &DriftTable,
    fine: &[Segment],
    seed: u64,
    first: u64,
) -> Result<[(Vec<f64>, Vec<f64>); L]> {
    let mut out: [(Vec<f64>, Vec<f64>); L] = std::array::from_fn(|_| (Vec::new(), Vec::new()));
    let mut streams: [NormalStream; L] =
        std::array::from_fn(|l| NormalStream::new(seed, first + l as u64, Component::Transverse));
    let mut b = [0.0; L];
    let mut prev = [0.0; L];
    drift.accumulate(&b, &mut prev);
    let mut anchor = prev;
    let mut acc_f = [0.0; L];
    let mut acc_c = [0.0; L];
    let mut t = 0.0;
    for seg in fine {
        let half_h = 0.5 * seg.h;
        for i in 0..seg.steps {
            for l in 0..L {
                b[l] += seg.sd * streams[l].next();
            }
            let mut cur = [0.0; L];
            drift.accumulate(&b, &mut cur);
            for l in 0..L {
                acc_f[l] += half_h * (prev[l] + cur[l]);
            }
            if i % 2 == 1 {
                for l in 0..L {
                    acc_c[l] += seg.h * (anchor[l] + cur[l]);
                }
                anchor = cur;
            }
            prev = cur;
        }
        t += seg.len;
        for l in 0..L {
            if !acc_f[l].is_finite() || !acc_c[l].is_finite() {
                return Err(Error::NonFinite { path_id: first + l as u64, t });
            }
            out[l].0.push(acc_f[l]);
            out[l].1.push(acc_c[l]);
        }
    }
    Ok(out)
}

/// Summation by recursive halving; the result depends only on the order of
/// `v`, never on how the values were produced.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Exact Gaussian increments `b(t_{i+1}) − b(t_i)` of the transverse
/// Brownian motion of path `path_id` on the grid `t_grid` (starting at 0).
pub fn brownian_increments(seed: u64, path_id: u64, t_grid: &[f64]) -> Result<Vec<f64>> {
    if t_grid.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    let mut s = NormalStream::new(seed, path_id, Component::Transverse);
    t_grid
        .windows(2)
        .map(|w| {
            let dt = w[1] - w[0];
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
            }
            Ok(dt.sqrt() * s.next())
        })
        .collect()
}

/// A sampled Brownian path `b(t_i)` with `t_0 = 0`, `b(0) = 0`.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl BrownianPath {
    pub fn sample(seed: u64, path_id: u64, t_grid: &[f64]) -> Result<Self> {
        let inc = brownian_increments(seed, path_id, t_grid)?;
        let mut values = Vec::with_capacity(t_grid.len());
        let mut b = 0.0;
        values.push(b);
        for d in inc {
            b += d;
            values.push(b);
        }
        Ok(Self { times: t_grid.to_vec(), values })
    }

    /// Uniform grid of `n` steps on `[0, t]`.
    pub fn uniform(seed: u64, path_id: u64, t: f64, n: usize) -> Result<Self> {
        let grid: Vec<f64> = (0..=n).map(|i| t * i as f64 / n as f64).collect();
        Self::sample(seed, path_id, &grid)
    }
}

/// `y·e₂` at each checkpoint, split into its two independent parts.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub y: Vec<f64>,
    /// `∫₀ᵗ ∂₁H(b_s) ds`.
    pub drift: Vec<f64>,
    /// `ω_t·e₂`.
    pub noise: Vec<f64>,
    /// `b_t = ω_t·e₁`; NaN when the drift is zero and `b` is not simulated.
    pub b: Vec<f64>,
}

fn drift_for(field: &MultiscaleField, config: &SimConfig) -> Result<DriftTable> {
    config.validate()?;
    DriftTable::new(field, config.range_for(field))
}

/// One path of the exact representation at the rule step size.
pub fn sample_displacement(field: &MultiscaleField, config: &SimConfig, path_id: u64) -> Result<PathSample> {
    if config.scheme != Scheme::ExactRepresentation {
        return Err(Error::Config("sample_displacement needs scheme = exact_representation".into()));
    }
    let drift = drift_for(field, config)?;
    sample_with(&drift, config, drift.rule_dt(config), path_id)
}

fn sample_with(drift: &DriftTable, config: &SimConfig, dt: f64, path_id: u64) -> Result<PathSample> {
    let grid = build_grid(&config.checkpoints, dt);
    let [d] = drift_lanes::<1>(drift, &grid, config.seed, path_id)?;
    let noise = longitudinal(config.seed, path_id, &grid);
    let y = d.integral.iter().zip(&noise).map(|(a, w)| a + w).collect();
    Ok(PathSample { y, drift: d.integral, noise, b: d.b })
}

/// Euler–Maruyama for the 2-D system with drift `(0, ∂₁H(y·e₁))`.
///
/// `y·e₁` is driven by the same transverse stream as the exact
/// representation; `ω·e₂` is filled in between checkpoint values by a
/// Brownian bridge, so both schemes see identical noise at the checkpoints.
pub fn euler_maruyama_2d(field: &MultiscaleField, config: &SimConfig, path_id: u64) -> Result<Vec<[f64; 2]>> {
    if config.scheme != Scheme::EulerMaruyama2d {
        return Err(Error::Config("euler_maruyama_2d needs scheme = euler_maruyama_2d".into()));
    }
    let drift = drift_for(field, config)?;
    em_with(&drift, config, drift.rule_dt(config), path_id)
}

fn em_with(drift: &DriftTable, config: &SimConfig, dt: f64, path_id: u64) -> Result<Vec<[f64; 2]>> {
    let grid = build_grid(&config.checkpoints, dt);
    let ends = longitudinal(config.seed, path_id, &grid);
    let mut e1 = NormalStream::new(config.seed, path_id, Component::Transverse);
    let mut bridge = NormalStream::new(config.seed, path_id, Component::Bridge);
    let (mut y1, mut y2, mut w) = (0.0f64, 0.0f64, 0.0f64);
    let mut out = Vec::with_capacity(grid.len());
    let mut t = 0.0;
    for (seg, &w_end) in grid.iter().zip(&ends) {
        for i in 0..seg.steps {
            let remaining = (seg.steps - i) as f64;
            let w_next = if remaining == 1.0 {
                w_end
            } else {
                w + (w_end - w) / remaining + (seg.h * (remaining - 1.0) / remaining).sqrt() * bridge.next()
            };
            if remaining == 1.0 {
                bridge.next();
            }
            let drift2 = drift.eval(y1);
            y2 += drift2 * seg.h + (w_next - w);
            w = w_next;
            y1 += seg.sd * e1.next();
        }
        t += seg.len;
        if !y1.is_finite() || !y2.is_finite() {
            return Err(Error::NonFinite { path_id, t });
        }
        out.push([y1, y2]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotReport {
    pub paths: usize,
    /// Step that passed (or the last one tried).
    pub dt: f64,
    /// Largest relative MSD change between `dt` and `dt/2` over checkpoints.
    pub relative_change: f64,
    pub change_stderr: f64,
    pub refinements: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub t: f64,
    pub msd: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub mean: f64,
    pub drift_mean: f64,
    pub drift_msd: f64,
    pub drift_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub scheme: Scheme,
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    pub pilot: Option<PilotReport>,
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleStats {
    /// `t,msd,stderr,n_paths,scheme,seed`, shortest round-trip float format.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,msd,stderr,n_paths,scheme,seed")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{}", r.t, r.msd, r.stderr, r.n_paths, self.scheme.as_str(), self.seed)?;
        }
        Ok(())
    }
}

/// Mean of `v²` and its standard error from the sample fourth moment.
fn second_moment(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
    let m2 = pairwise_sum(&sq) / n;
    let q: Vec<f64> = sq.iter().map(|s| s * s).collect();
    let m4 = pairwise_sum(&q) / n;
    let var = (m4 - m2 * m2).max(0.0) * n / (n - 1.0);
    (m2, (var / n).sqrt())
}

const BATCH: usize = 64;

fn run_paths(drift: &DriftTable, config: &SimConfig, dt: f64) -> Result<Vec<PathSample>> {
    let grid = build_grid(&config.checkpoints, dt);
    let n = config.n_paths;
    let batches = n.div_ceil(BATCH);
    let chunks: Vec<Vec<PathSample>> = (0..batches)
        .into_par_iter()
        .map(|bi| -> Result<Vec<PathSample>> {
            let lo = bi * BATCH;
            let hi = (lo + BATCH).min(n);
            let mut out = Vec::with_capacity(hi - lo);
            match config.scheme {
                Scheme::ExactRepresentation => {
                    let mut id = lo;
                    while id < hi {
                        let lanes = drift_lanes::<LANES>(drift, &grid, config.seed, id as u64)?;
                        for (l, d) in lanes.into_iter().enumerate() {
                            let pid = (id + l) as u64;
                            if pid as usize >= hi {
                                break;
                            }
                            let noise = longitudinal(config.seed, pid, &grid);
                            let y = d.integral.iter().zip(&noise).map(|(a, w)| a + w).collect();
                            out.push(PathSample { y, drift: d.integral, noise, b: d.b });
                        }
                        id += LANES;
                    }
                }
                Scheme::EulerMaruyama2d => {
                    for pid in lo..hi {
                        let traj = em_with(drift, config, dt, pid as u64)?;
                        let noise = longitudinal(config.seed, pid as u64, &grid);
                        let y: Vec<f64> = traj.iter().map(|p| p[1]).collect();
                        let dr = y.iter().zip(&noise).map(|(a, w)| a - w).collect();
                        out.push(PathSample { y, drift: dr, noise, b: traj.iter().map(|p| p[0]).collect() });
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Largest relative MSD change between the step and its half over the
/// checkpoints, with its standard error at the same checkpoint; the
/// checkpoint is the one where the change exceeds `tol` most significantly.
fn pilot(drift: &DriftTable, config: &SimConfig, dt: f64, tol: f64) -> Result<(f64, f64)> {
    let paths = config.substep.pilot_paths;
    let seed = derive_seed(config.seed, 0x70_696c_6f74);
    let fine = refined(&build_grid(&config.checkpoints, dt), 2);
    let groups = paths.div_ceil(LANES);
    let per: Vec<(Vec<f64>, Vec<f64>)> = (0..groups)
        .into_par_iter()
        .map(|g| pilot_lanes::<LANES>(drift, &fine, seed, (g * LANES) as u64))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .take(paths)
        .collect();
    // ω·e₂ is independent of the drift and identical on both grids, so it
    // enters the change only as noise; its second moment t is added exactly
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut t = 0.0;
    for (i, seg) in fine.iter().enumerate() {
        t += seg.len;
        let df: Vec<f64> = per.iter().map(|p| p.0[i] * p.0[i]).collect();
        let diff: Vec<f64> = per.iter().map(|p| p.0[i] * p.0[i] - p.1[i] * p.1[i]).collect();
        let n = per.len() as f64;
        let mf = pairwise_sum(&df) / n + t;
        let md = pairwise_sum(&diff) / n;
        let sq: Vec<f64> = diff.iter().map(|d| (d - md) * (d - md)).collect();
        let se = (pairwise_sum(&sq) / (n - 1.0) / n).sqrt() / mf;
        let change = md.abs() / mf;
        let z = if se > 0.0 { (change - tol) / se } else { (change - tol).signum() * f64::INFINITY };
        if z > worst.0 {
            worst = (z, change, se);
        }
    }
    Ok((worst.1, worst.2))
}

/// Step after the pilot refinement loop.
///
/// With a few hundred pilot paths the estimated change carries a standard
/// error comparable to the tolerance, so the step is halved only when the
/// change exceeds the tolerance by more than two standard errors.
pub fn resolve_dt(drift: &DriftTable, config: &SimConfig) -> Result<(f64, Option<PilotReport>)> {
    let mut dt = drift.rule_dt(config);
    if drift.is_zero() || config.substep.pilot_paths == 0 {
        return Ok((dt, None));
    }
    if config.substep.pilot_paths < 2 {
        return Err(Error::Config("pilot_paths must be 0 or at least 2".into()));
    }
    let paths = config.substep.pilot_paths;
    let tol = config.substep.tolerance;
    for k in 0..=config.substep.max_refinements {
        let (change, se) = pilot(drift, config, dt, tol)?;
        if change - tol <= 2.0 * se {
            return Ok((dt, Some(PilotReport { paths, dt, relative_change: change, change_stderr: se, refinements: k })));
        }
        if k == config.substep.max_refinements {
            return Err(Error::RefinementFailed { change, dt });
        }
        dt *= 0.5;
    }
    unreachable!()
}

/// Ensemble statistics of `y·e₂` at the checkpoints, in the current rayon
/// pool. Results are bit-identical for any number of workers.
pub fn msd_ensemble(field: &MultiscaleField, config: &SimConfig) -> Result<EnsembleStats> {
    let drift = drift_for(field, config)?;
    msd_ensemble_with(&drift, config)
}

pub fn msd_ensemble_with(drift: &DriftTable, config: &SimConfig) -> Result<EnsembleStats> {
    config.validate()?;
    if config.n_paths < 2 {
        return Err(Error::Config("n_paths must be at least 2".into()));
    }
    let (dt, pilot) = resolve_dt(drift, config)?;
    let paths = run_paths(drift, config, dt)?;
    let rows = config
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let y: Vec<f64> = paths.iter().map(|p| p.y[i]).collect();
            let d: Vec<f64> = paths.iter().map(|p| p.drift[i]).collect();
            let (msd, stderr) = second_moment(&y);
            let (drift_msd, drift_stderr) = second_moment(&d);
            let n = y.len() as f64;
            EnsembleRow {
                t,
                msd,
                stderr,
                n_paths: paths.len(),
                mean: pairwise_sum(&y) / n,
                drift_mean: pairwise_sum(&d) / n,
                drift_msd,
                drift_stderr,
            }
        })
        .collect();
    Ok(EnsembleStats { scheme: config.scheme, seed: config.seed, n_paths: config.n_paths, dt, pilot, rows })
}

/// Runs `f` in a dedicated pool of `threads` workers (or the global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// `|∫₀ᵗ ∂₁H(b)ds − [2A(b_t) − 2∫₀ᵗ(H−κ)(b) db]|` for `H = H^{0,p−1}` and
/// `A(x) = ∫₀ˣ (H − κ)`, both sides on the path's own grid (trapezoid for
/// the time integral, left point for the stochastic one).
pub fn ito_identity_residual(field: &MultiscaleField, p: usize, path: &BrownianPath) -> Result<f64> {
    let spec = field_spectrum(field, ScaleRange::below(p))?;
    if spec.coeffs().is_empty() {
        return Ok(0.0);
    }
    let kappa = spec.mean();
    let (ts, bs) = (&path.times, &path.values);
    let mut lhs = 0.0;
    let mut ito = 0.0;
    let mut d_prev = spec.eval_derivative(bs[0], 1);
    for i in 1..bs.len() {
        let h = ts[i] - ts[i - 1];
        let d = spec.eval_derivative(bs[i], 1);
        lhs += 0.5 * h * (d_prev + d);
        d_prev = d;
        ito += (spec.eval(bs[i - 1]) - kappa) * (bs[i] - bs[i - 1]);
    }
    let rhs = 2.0 * spec.antiderivative(*bs.last().unwrap()) - 2.0 * ito;
    Ok((lhs - rhs).abs())
}

/// `R_{p−1} K₀ γ_{p−1} (1 − 1/γ_min)^{-1}`, a bound on `|∫₀ˣ (H^{0,p−1} − κ)|`.
pub fn antiderivative_bound(field: &MultiscaleField, p: usize) -> Result<f64> {
    if p == 0 {
        return Ok(0.0);
    }
    field.check_range(ScaleRange::below(p))?;
    let l = field.ladder();
    Ok(l.radius(p - 1) as f64 * field.constants().k0 * l.gamma(p - 1) / (1.0 - 1.0 / l.gamma_min()))
}
