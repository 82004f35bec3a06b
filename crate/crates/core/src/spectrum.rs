//! Fourier transform of the generator by quadrature, periodization over the
//! integer shifts, and the agreement between the two (the periodized
//! generator equals its Fourier series with the transform as coefficients).
//!
//! Everything funnels through one precomputed cosine-sum kernel so that
//! single-point evaluation, grid evaluation, and design-matrix assembly are
//! bitwise identical and cheap.

use crate::error::{Error, Result};
use crate::generator::{Envelope, Generator};
use crate::numeric::{compensated_sum, line_fit};
use rayon::prelude::*;

/// Number of recurrence steps between fresh trigonometric anchors in the
/// cosine/sine sums; keeps the accumulated recurrence error near 1e-13 over
/// a thousand nodes.
const REANCHOR_EVERY: usize = 32;

/// Quadrature layout for the transform integral: a truncated trapezoid rule
/// on `[-half_width, half_width]`, folded to `[0, half_width]` by evenness.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    /// Truncation point of the integral.
    pub half_width: f64,
    /// Node spacing.
    pub step: f64,
    /// Absolute accuracy the layout is expected to deliver.
    pub error_budget: f64,
    /// Safety margin subtracted from the Nyquist frequency when reporting
    /// the usable band.
    pub band_margin: f64,
}

impl QuadratureSpec {
    /// Default layout for a generator of width `a`: truncate where the
    /// Gaussian factor alone is far below the budget, sample at 0.01.
    pub fn for_generator(gen: &Generator) -> Self {
        QuadratureSpec {
            half_width: 6.0 + (36.0 / gen.a()).sqrt(),
            step: 0.01,
            error_budget: 1e-9,
            band_margin: 4.0,
        }
    }

    /// Largest frequency, in absolute value, at which the transform is
    /// trusted to the error budget.
    pub fn band_limit(&self) -> f64 {
        0.5 / self.step - self.band_margin
    }

    fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidParameter {
                name: "half_width",
                reason: format!("must be positive, got {}", self.half_width),
            });
        }
        if !(self.step > 0.0) || self.step > self.half_width {
            return Err(Error::InvalidParameter {
                name: "step",
                reason: format!("must lie in (0, half_width], got {}", self.step),
            });
        }
        if !(self.error_budget > 0.0) {
            return Err(Error::InvalidParameter {
                name: "error_budget",
                reason: format!("must be positive, got {}", self.error_budget),
            });
        }
        if self.band_limit() <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "band_margin",
                reason: format!(
                    "band limit {} is not positive; decrease the step or the margin",
                    self.band_limit()
                ),
            });
        }
        Ok(())
    }
}

/// The generator together with precomputed quadrature weights for its
/// Fourier transform `phi(x) = integral of F(t) exp(-2 pi i t x) dt`
/// (real and even, since `F` is real and even).
#[derive(Clone, Debug)]
pub struct Spectrum {
    gen: Generator,
    quad: QuadratureSpec,
    /// `weights[k] = step * F(k * step)`, halved at both ends of `[0, T]`.
    weights: Vec<f64>,
    /// `t_weights[k] = step * (k * step) * F(k * step)`, halved at the ends;
    /// drives the derivative sine sum.
    t_weights: Vec<f64>,
}

impl Spectrum {
    pub fn new(gen: Generator, quad: QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        // Tail control: what the integrand loses beyond the truncation point
        // must sit far below the budget. The bound integrates the Gaussian
        // factor's tail; the flatness factor only helps.
        let t = quad.half_width;
        let tail = {
            let gaussian = (-gen.a() * t * t).exp();
            gaussian * (1.0 + 1.0 / (2.0 * gen.a() * t))
        };
        if tail > 0.25 * quad.error_budget {
            return Err(Error::InvalidParameter {
                name: "half_width",
                reason: format!(
                    "truncation tail {tail:.3e} exceeds a quarter of the error budget {:.3e}",
                    quad.error_budget
                ),
            });
        }
        let n = (quad.half_width / quad.step).round() as usize;
        let mut weights = Vec::with_capacity(n + 1);
        let mut t_weights = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let tk = k as f64 * quad.step;
            let end = k == 0 || k == n;
            let w = quad.step * gen.eval(tk) * if end { 0.5 } else { 1.0 };
            weights.push(w);
            t_weights.push(w * tk);
        }
        Ok(Self {
            gen,
            quad,
            weights,
            t_weights,
        })
    }

    /// Convenience constructor with the default quadrature layout.
    pub fn with_defaults(gen: Generator) -> Result<Self> {
        Self::new(gen, QuadratureSpec::for_generator(&gen))
    }

    pub fn generator(&self) -> &Generator {
        self.gen_ref()
    }

    fn gen_ref(&self) -> &Generator {
        &self.gen
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    /// Cosine sum `2 * sum_k w_k cos(k * theta)` with `theta = 2 pi h |x|`:
    /// the trapezoid approximation of the transform. Exactly even in `x` by
    /// construction. A three-term recurrence generates the cosines, with a
    /// fresh `cos` anchor every few dozen steps to pin down round-off.
    pub fn eval(&self, x: f64) -> f64 {
        2.0 * cos_sum(&self.weights, 2.0 * std::f64::consts::PI * self.quad.step * x.abs())
    }

    /// Derivative of the transform:
    /// `phi'(x) = -4 pi * integral of t F(t) sin(2 pi t x) dt` on `[0, T]`.
    /// Exactly odd in `x`.
    pub fn deriv(&self, x: f64) -> f64 {
        let theta = 2.0 * std::f64::consts::PI * self.quad.step * x.abs();
        let raw = -4.0 * std::f64::consts::PI * sin_sum(&self.t_weights, theta);
        if x < 0.0 {
            -raw
        } else {
            raw
        }
    }

    /// Transform on a whole grid; parallel, order-preserving, and bitwise
    /// identical to pointwise [`Spectrum::eval`].
    pub fn eval_grid(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.eval(x)).collect()
    }

    /// Periodization `P(t) = sum over |k| <= k_max of F(t + k)`.
    pub fn periodize(&self, t: f64, k_max: usize) -> f64 {
        let terms = (-(k_max as i64)..=k_max as i64).map(|k| self.gen.eval(t + k as f64));
        compensated_sum(terms)
    }

    /// Upper bound for what periodization truncation discards, derived from
    /// an envelope that dominates the generator:
    /// `sum over |k| > k_max of c1 exp(-c2 |t+k|) <= 2 c1 e^(-c2 k_max) / (1 - e^(-c2))`
    /// for `t` in `[0, 1)`.
    pub fn periodization_tail_bound(envelope: &Envelope, k_max: usize) -> f64 {
        2.0 * envelope.amplitude * (-envelope.rate * k_max as f64).exp()
            / (1.0 - (-envelope.rate).exp())
    }

    /// Partial Fourier series of the periodization at `t`:
    /// `phi(0) + 2 * sum_{n=1..n_max} phi(n) cos(2 pi n t)`.
    pub fn fourier_partial_sum(&self, t: f64, n_max: usize) -> f64 {
        let terms = (1..=n_max).map(|n| {
            2.0 * self.eval(n as f64) * (2.0 * std::f64::consts::PI * n as f64 * t).cos()
        });
        self.eval(0.0) + compensated_sum(terms)
    }

    /// Absolute gap between the periodization and its partial Fourier
    /// series at `t`, using `k_max` shifts and `n_max` frequencies.
    pub fn poisson_discrepancy(&self, t: f64, k_max: usize, n_max: usize) -> f64 {
        (self.periodize(t, k_max) - self.fourier_partial_sum(t, n_max)).abs()
    }

    /// Series tail mass `2 * sum_{n = n_max+1 .. band} |phi(n)|`: the
    /// dominant contribution to the Poisson discrepancy once quadrature and
    /// periodization truncation are below budget.
    pub fn fourier_tail_estimate(&self, n_max: usize) -> f64 {
        let band = self.quad.band_limit().floor() as usize;
        let terms = (n_max + 1..=band).map(|n| 2.0 * self.eval(n as f64).abs());
        compensated_sum(terms)
    }

    /// Slope of `ln |phi|` against `ln x` over the probe frequencies;
    /// quantifies the polynomial-type decay of the transform along the
    /// real axis.
    pub fn log_log_slope(&self, xs: &[f64]) -> Result<f64> {
        if xs.len() < 2 {
            return Err(Error::InsufficientData(
                "log-log slope needs at least two probe frequencies".into(),
            ));
        }
        let mut lx = Vec::with_capacity(xs.len());
        let mut ly = Vec::with_capacity(xs.len());
        for &x in xs {
            if !(x > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "xs",
                    reason: format!("probe frequencies must be positive, got {x}"),
                });
            }
            let v = self.eval(x).abs().max(1e-300);
            lx.push(x.ln());
            ly.push(v.ln());
        }
        let (_, slope, _) = line_fit(&lx, &ly);
        Ok(slope)
    }
}

/// `sum_k w_k cos(k theta)` via an anchored three-term recurrence
/// (`cos((k+1)t) = 2 cos t cos(kt) - cos((k-1)t)`).
fn cos_sum(weights: &[f64], theta: f64) -> f64 {
    let two_cos = 2.0 * theta.cos();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut prev = 0.0f64; // cos((k-1) theta)
    let mut cur = 0.0f64; // cos(k theta)
    for (k, &w) in weights.iter().enumerate() {
        if k % REANCHOR_EVERY == 0 {
            cur = (k as f64 * theta).cos();
            prev = if k == 0 {
                // cos(-theta) = cos(theta)
                theta.cos()
            } else {
                ((k - 1) as f64 * theta).cos()
            };
        }
        let v = w * cur;
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        let next = two_cos * cur - prev;
        prev = cur;
        cur = next;
    }
    sum + comp
}

/// `sum_k w_k sin(k theta)`, same scheme as [`cos_sum`].
fn sin_sum(weights: &[f64], theta: f64) -> f64 {
    let two_cos = 2.0 * theta.cos();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut prev = 0.0f64;
    let mut cur = 0.0f64;
    for (k, &w) in weights.iter().enumerate() {
        if k % REANCHOR_EVERY == 0 {
            cur = (k as f64 * theta).sin();
            prev = if k == 0 {
                -theta.sin()
            } else {
                ((k - 1) as f64 * theta).sin()
            };
        }
        let v = w * cur;
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        let next = two_cos * cur - prev;
        prev = cur;
        cur = next;
    }
    sum + comp
}

/// Closed-form transform of the pure Gaussian `exp(-a t^2)`:
/// `sqrt(pi/a) * exp(-pi^2 x^2 / a)`.
pub fn gaussian_transform(a: f64, x: f64) -> f64 {
    (std::f64::consts::PI / a).sqrt()
        * (-(std::f64::consts::PI * std::f64::consts::PI) * x * x / a).exp()
}
