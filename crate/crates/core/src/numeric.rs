//! Small numerical building blocks shared across the crate: accurate
//! trigonometry at multiples of pi, compensated summation, quadrature rules,
//! finite-difference stencils, root bracketing, and least-squares line fits.

use std::f64::consts::PI;

/// Distance from `t` to the nearest integer, in `[0, 1/2]`.
#[inline]
pub fn dist_to_int(t: f64) -> f64 {
    (t - t.round()).abs()
}

/// `(sin(pi t), cos(pi t))` computed from the reduced argument so that the
/// result stays accurate for large `|t|` and is exactly symmetric in `t`.
#[inline]
pub fn sin_cos_pi(t: f64) -> (f64, f64) {
    let k = t.round();
    let r = t - k;
    let (s, c) = (PI * r).sin_cos();
    if (k as i64) & 1 == 0 {
        (s, c)
    } else {
        (-s, -c)
    }
}

/// Neumaier-compensated sum; deterministic left-to-right order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `n` equally spaced points from `a` to `b` inclusive (`n >= 2`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (b - a) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| a + step * i as f64).collect();
    out[n - 1] = b;
    out
}

/// Trapezoid rule for samples at uniform spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner = compensated_sum(values[1..values.len() - 1].iter().copied());
    h * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

/// Composite Simpson rule with `n` subintervals (`n` even, `n >= 2`).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n % 2 == 0, "simpson needs an even subinterval count");
    let h = (b - a) / n as f64;
    let terms = (0..=n).map(|i| {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * f(a + h * i as f64)
    });
    compensated_sum(terms) * h / 3.0
}

/// Bisection for a root of `f` in `[lo, hi]`; the endpoints must bracket a
/// sign change. Returns the midpoint after `iters` halvings.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let flo = f(lo);
    debug_assert!(flo * f(hi) <= 0.0, "bisect endpoints must bracket a root");
    let positive_left = flo > 0.0;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == positive_left {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Central finite difference of derivative `order` (1..=4), fourth-order
/// accurate, with step `h`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, t: f64, order: usize, h: f64) -> f64 {
    match order {
        1 => (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h),
        2 => {
            (-f(t - 2.0 * h) + 16.0 * f(t - h) - 30.0 * f(t) + 16.0 * f(t + h) - f(t + 2.0 * h))
                / (12.0 * h * h)
        }
        3 => {
            (f(t - 3.0 * h) - 8.0 * f(t - 2.0 * h) + 13.0 * f(t - h) - 13.0 * f(t + h)
                + 8.0 * f(t + 2.0 * h)
                - f(t + 3.0 * h))
                / (8.0 * h * h * h)
        }
        4 => {
            (-f(t - 3.0 * h) + 12.0 * f(t - 2.0 * h) - 39.0 * f(t - h) + 56.0 * f(t)
                - 39.0 * f(t + h)
                + 12.0 * f(t + 2.0 * h)
                - f(t + 3.0 * h))
                / (6.0 * h * h * h * h)
        }
        _ => panic!("central_diff supports orders 1..=4"),
    }
}

/// Least-squares straight line `y ~ b0 + b1 x`.
/// Returns `(b0, b1, max_abs_residual)`.
pub fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "line_fit needs at least two points");
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxx = compensated_sum(xs.iter().map(|&x| (x - mx) * (x - mx)));
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)));
    let b1 = sxy / sxx;
    let b0 = my - b1 * mx;
    let max_res = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (y - b0 - b1 * x).abs())
        .fold(0.0f64, f64::max);
    (b0, b1, max_res)
}
