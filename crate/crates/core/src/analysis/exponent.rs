//! Growth exponent `ν` from `MSD(t) = t^{1+ν}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which checkpoints enter the windowed fit ending at checkpoint `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWindow {
    /// The last `n` checkpoints up to `i` (`n ≥ 4`).
    Count(usize),
    /// All checkpoints in `[t_i / factor, t_i]`, and at least 4.
    TimeFactor(f64),
}

pub const MIN_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub t: f64,
    /// `ln MSD / ln t − 1`; undefined for `t ≤ 1`.
    pub pointwise: Option<f64>,
    pub pointwise_stderr: Option<f64>,
    /// Least-squares slope of `ln MSD` against `ln t`, minus one.
    pub windowed: Option<f64>,
    pub windowed_stderr: Option<f64>,
    /// Number of checkpoints in the window.
    pub window_len: usize,
}

fn check_table(t: &[f64], msd: &[f64], stderr: &[f64]) -> Result<()> {
    if t.len() != msd.len() || t.len() != stderr.len() {
        return Err(Error::InvalidArgument("t, msd and stderr must have equal length".into()));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) || t.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument("times must be positive and increasing".into()));
    }
    if let Some(m) = msd.iter().find(|&&m| !(m > 0.0)) {
        return Err(Error::InvalidArgument(format!("MSD must be positive, got {m}")));
    }
    Ok(())
}

fn window_start(t: &[f64], i: usize, window: FitWindow) -> Option<usize> {
    let start = match window {
        FitWindow::Count(n) => (i + 1).checked_sub(n.max(MIN_WINDOW))?,
        FitWindow::TimeFactor(f) => {
            let lo = t[i] / f;
            let s = t[..=i].iter().position(|&x| x >= lo * (1.0 - 1e-12)).unwrap_or(i);
            s.min((i + 1).checked_sub(MIN_WINDOW)?)
        }
    };
    Some(start)
}

/// Slope and its standard error for `y = ln msd` against `x = ln t`, treating
/// the relative errors of the points as independent.
fn loglog_slope(t: &[f64], msd: &[f64], stderr: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = msd.iter().map(|v| v.ln()).collect();
    let xm = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let mut slope = 0.0;
    let mut var = 0.0;
    for i in 0..x.len() {
        let w = (x[i] - xm) / sxx;
        slope += w * y[i];
        var += (w * stderr[i] / msd[i]).powi(2);
    }
    (slope, var.sqrt())
}

pub fn fit_exponent(t: &[f64], msd: &[f64], stderr: &[f64], window: FitWindow) -> Result<Vec<ExponentRow>> {
    check_table(t, msd, stderr)?;
    Ok((0..t.len())
        .map(|i| {
            let (pointwise, pointwise_stderr) = if t[i] > 1.0 {
                let lt = t[i].ln();
                (Some(msd[i].ln() / lt - 1.0), Some(stderr[i] / msd[i] / lt))
            } else {
                (None, None)
            };
            let (windowed, windowed_stderr, window_len) = match window_start(t, i, window) {
                Some(s) => {
                    let (b, se) = loglog_slope(&t[s..=i], &msd[s..=i], &stderr[s..=i]);
                    (Some(b - 1.0), Some(se), i + 1 - s)
                }
                None => (None, None, 0),
            };
            ExponentRow { t: t[i], pointwise, pointwise_stderr, windowed, windowed_stderr, window_len }
        })
        .collect())
}

/// `ln(MSD/curve)` per checkpoint and its spread `max − min`; a spread
/// near zero means the data follow the curve up to a constant factor.
pub fn compare_to_curve(t: &[f64], msd: &[f64], curve: impl Fn(f64) -> f64) -> Result<(Vec<f64>, f64)> {
    check_table(t, msd, msd)?;
    let r: Vec<f64> = t.iter().zip(msd).map(|(&t, &m)| (m / curve(t)).ln()).collect();
    let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok((r, hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t0: f64, t1: f64) -> Vec<f64> {
        (0..n).map(|i| t0 * (t1 / t0).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn diffusive_law_gives_zero() {
        let t = grid(8, 2.0, 1e4);
        let rows = fit_exponent(&t, &t, &[0.0; 8], FitWindow::Count(4)).unwrap();
        for r in &rows {
            assert!(r.pointwise.unwrap().abs() < 1e-14);
        }
        assert!(rows[3].windowed.unwrap().abs() < 1e-12);
        assert_eq!(rows[2].windowed, None);
    }

    #[test]
    fn power_law_recovered() {
        let t = grid(9, 0.5, 3e4);
        let m: Vec<f64> = t.iter().map(|x| 3.0 * x.powf(7.0 / 3.0)).collect();
        let se: Vec<f64> = m.iter().map(|x| 0.01 * x).collect();
        let rows = fit_exponent(&t, &m, &se, FitWindow::TimeFactor(100.0)).unwrap();
        let last = rows.last().unwrap();
        assert!((last.windowed.unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!(last.window_len >= 4);
        assert!(last.windowed_stderr.unwrap() > 0.0);
        assert_eq!(rows[0].pointwise, None);
    }

    #[test]
    fn time_factor_window_size() {
        let t = grid(9, 1.0, 1e8);
        // one decade per checkpoint: factor 1e4 covers 5 points
        let rows = fit_exponent(&t, &t, &[0.0; 9], FitWindow::TimeFactor(1e4)).unwrap();
        assert_eq!(rows[8].window_len, 5);
        assert_eq!(rows[3].window_len, 4);
    }

    #[test]
    fn stderr_propagates_through_slope() {
        // two points at each end, relative error σ = 0.1: slope error σ/Δx
        let t = vec![1.0, 1.0 + 1e-9, 10.0, 10.0 + 1e-8];
        let m = vec![1.0, 1.0, 10.0, 10.0];
        let se = vec![0.1, 0.1, 1.0, 1.0];
        let rows = fit_exponent(&t, &m, &se, FitWindow::Count(4)).unwrap();
        let expect = 0.1 / 10f64.ln();
        assert!((rows[3].windowed_stderr.unwrap() - expect).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(fit_exponent(&[1.0, 2.0], &[1.0], &[0.0, 0.0], FitWindow::Count(4)).is_err());
        assert!(fit_exponent(&[2.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], FitWindow::Count(4)).is_err());
        assert!(fit_exponent(&[1.0, 2.0], &[1.0, -1.0], &[0.0, 0.0], FitWindow::Count(4)).is_err());
    }

    #[test]
    fn curve_comparison() {
        let t = grid(6, 10.0, 1e5);
        let m: Vec<f64> = t.iter().map(|x| 2.0 * x * x).collect();
        let (r, spread) = compare_to_curve(&t, &m, |x| x * x).unwrap();
        assert!(spread < 1e-12);
        assert!((r[0] - 2f64.ln()).abs() < 1e-12);
    }
}
