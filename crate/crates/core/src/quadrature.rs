//! One-dimensional quadrature in time.

use crate::math::sqrt;

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson on `[a, b]` with relative tolerance `rel_tol`
/// (an absolute floor of `rel_tol * 1e-300` keeps zero integrands cheap).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Seed a coarse absolute scale from a 5-point pass so the tolerance is relative.
    let q1 = f(0.5 * (a + m));
    let q3 = f(0.5 * (m + b));
    let coarse = (b - a) / 12.0 * (fa + 4.0 * q1 + 2.0 * fm + 4.0 * q3 + fb);
    let scale = coarse.abs().max(whole.abs());
    let tol = (rel_tol * scale).max(1e-300);
    simpson_rec(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
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
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Three-point Gauss–Legendre rule on `[a, b]`; exact for polynomials of degree 5.
pub fn gauss_legendre3<T, F>(f: F, a: f64, b: f64) -> T
where
    F: Fn(f64) -> T,
    T: core::ops::Mul<f64, Output = T> + core::ops::Add<Output = T>,
{
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let x = sqrt(0.6) * h;
    let w0 = 8.0 / 9.0;
    let w1 = 5.0 / 9.0;
    f(c) * (w0 * h) + f(c - x) * (w1 * h) + f(c + x) * (w1 * h)
}

/// Trapezoid rule for samples on a (possibly non-uniform) time axis.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Integral of uniformly spaced samples with spacing `h`: composite Simpson,
/// closing with a 3/8 panel when the interval count is odd. Two samples fall
/// back to the trapezoid rule.
pub fn uniform_integral(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail) = if intervals.is_multiple_of(2) { (n - 1, false) } else { (n - 4, true) };
            let mut s = values[0] + values[simpson_end];
            for (i, v) in values.iter().enumerate().take(simpson_end).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = if simpson_end > 0 { h / 3.0 * s } else { 0.0 };
            if tail {
                let v = &values[n - 4..];
                total += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}
