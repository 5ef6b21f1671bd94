//! Adaptive Simpson quadrature.

/// `∫_a^b f` to relative tolerance `rel_tol`, starting from `panels` equal
/// panels so that kinks (e.g. of `|f|`) are localized early.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut coarse = 0.0;
    let mut pieces = Vec::with_capacity(panels);
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == panels { b } else { lo + h };
        let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let s = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        coarse += s.abs();
        pieces.push((lo, hi, flo, fmid, fhi, s));
    }
    let tol = rel_tol * coarse.max(f64::MIN_POSITIVE) / panels as f64;
    pieces
        .into_iter()
        .map(|(lo, hi, flo, fmid, fhi, s)| refine(&f, lo, hi, flo, fmid, fhi, s, tol, 48))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_abs_sine() {
        let v = adaptive_simpson(|x| (2.0 * PI * x).sin().abs(), 0.0, 1.0, 1e-10, 7);
        assert!((v - 2.0 / PI).abs() < 1e-9);
    }

    #[test]
    fn integrates_polynomial_exactly() {
        let v = adaptive_simpson(|x| x * x * x - x, -1.0, 2.0, 1e-12, 1);
        assert!((v - (4.0 - 2.0 - 0.25 + 0.5)).abs() < 1e-12);
    }
}
