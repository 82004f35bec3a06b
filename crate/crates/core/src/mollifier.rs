//! Sinc-power frequency multipliers and their compactly supported B-spline
//! kernels, flat bump test functions, the smoothing inequality connecting
//! them, and modulated pairing experiments against transform-side elements.

use crate::error::{Error, Result};
use crate::lattice::{decay_fit, DecayFit};
use crate::numeric::{compensated_sum, line_fit, linspace, simpson, sin_cos_pi};
use crate::spectrum::Spectrum;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Largest supported B-spline order; beyond this the alternating
/// truncated-power form starts losing digits to cancellation.
pub const MAX_SPLINE_ORDER: usize = 12;

/// Uniform step of the modulated pairing quadrature.
const PAIRING_STEP: f64 = 0.005;

/// Pairing magnitudes below this fraction of the largest one are treated as
/// quadrature noise and excluded from decay fits.
const PAIRING_FLOOR: f64 = 1e-13;

/// `sin(pi y) / (pi y)` with the removable singularity evaluated as 1 and
/// exact zeros at nonzero integers.
fn sinc(y: f64) -> f64 {
    let z = PI * y;
    if z.abs() < 1e-8 {
        // Two series terms already reach full precision in this range.
        1.0 - z * z / 6.0
    } else {
        sin_cos_pi(y).0 / z
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Cardinal B-spline of order `n` (degree `n - 1`), supported on `[0, n]`,
/// via the alternating truncated-power closed form. Evaluation is reflected
/// onto `u <= n/2` first so the largest retained term stays moderate, and
/// the alternating terms are combined with compensated summation.
fn cardinal_bspline(n: usize, u: f64) -> f64 {
    if !(u > 0.0 && u < n as f64) {
        return 0.0;
    }
    let u = if u > n as f64 / 2.0 { n as f64 - u } else { u };
    let terms = (0..=u.floor() as usize).map(|k| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * binomial(n, k) * (u - k as f64).powi(n as i32 - 1)
    });
    compensated_sum(terms) / factorial(n - 1)
}

/// A frequency-side sinc-power multiplier together with its time-side
/// kernel: the `order`-fold self-convolution of the normalized indicator of
/// `[-width, width]`, i.e. a rescaled cardinal B-spline of unit mass.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MollifierPair {
    order: usize,
    width: f64,
}

impl MollifierPair {
    /// Requires an even `order` in `2..=12` (evenness keeps the multiplier
    /// nonnegative) and a positive finite `width`.
    pub fn new(order: usize, width: f64) -> Result<Self> {
        if order == 0 || order % 2 != 0 || order > MAX_SPLINE_ORDER {
            return Err(Error::InvalidParameter {
                name: "order",
                reason: format!("must be even and in 2..={MAX_SPLINE_ORDER}, got {order}"),
            });
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "width",
                reason: format!("must be positive and finite, got {width}"),
            });
        }
        Ok(Self { order, width })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Radius of the kernel's support: `order * width`.
    pub fn support_radius(&self) -> f64 {
        self.order as f64 * self.width
    }

    /// The multiplier `(sin(2 pi width x) / (2 pi width x))^order`: equals 1
    /// at the origin, lies in `[0, 1]` everywhere (even power), and vanishes
    /// exactly at nonzero multiples of `1 / (2 width)`.
    pub fn multiplier(&self, x: f64) -> f64 {
        sinc(2.0 * self.width * x).powi(self.order as i32)
    }

    /// The time-side kernel: nonnegative, even, supported on
    /// `[-order * width, order * width]`, unit mass.
    pub fn kernel(&self, t: f64) -> f64 {
        let u = (t + self.support_radius()) / (2.0 * self.width);
        cardinal_bspline(self.order, u) / (2.0 * self.width)
    }

    /// Mass of the kernel by composite Simpson on each polynomial piece
    /// (between consecutive knots the kernel is a single polynomial, so the
    /// quadrature error is driven far below the 1e-10 certification band).
    pub fn kernel_mass(&self) -> f64 {
        let pieces = (0..self.order).map(|j| {
            let a = -self.support_radius() + 2.0 * self.width * j as f64;
            let b = a + 2.0 * self.width;
            simpson(|t| self.kernel(t), a, b, 200)
        });
        compensated_sum(pieces)
    }

    /// Fourier transform of the kernel at `x`, computed by per-piece Simpson
    /// of `kernel(t) cos(2 pi x t)` (the kernel is even, so the transform is
    /// a pure cosine integral over the right half, doubled).
    pub fn kernel_transform(&self, x: f64) -> f64 {
        let pieces = (self.order / 2..self.order).map(|j| {
            let a = -self.support_radius() + 2.0 * self.width * j as f64;
            let b = a + 2.0 * self.width;
            simpson(
                |t| self.kernel(t) * (2.0 * PI * x * t).cos(),
                a,
                b,
                256,
            )
        });
        2.0 * compensated_sum(pieces)
    }

    /// Largest discrepancy over `grid` between the quadrature transform of
    /// the kernel and the closed-form multiplier; the two are a Fourier pair,
    /// so this measures quadrature error only.
    pub fn duality_gap(&self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&x| (self.kernel_transform(x) - self.multiplier(x)).abs())
            .fold(0.0, f64::max)
    }
}

/// Smooth test function supported on `(-radius, radius)`, infinitely flat at
/// the endpoints: `exp(-radius^2 / (radius^2 - t^2))` inside, 0 outside.
/// Derivative sup norms up to order 2 are computed at construction.
#[derive(Clone, Debug, Serialize)]
pub struct Bump {
    radius: f64,
    sup_norms: [f64; 3],
}

impl Bump {
    /// Highest derivative order with a closed-form evaluator.
    pub const MAX_ORDER: usize = 2;

    /// Requires `radius` in `(0, 1/2)` so a bump always fits strictly inside
    /// one unit cell.
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < 0.5) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("must lie strictly inside (0, 1/2), got {radius}"),
            });
        }
        let mut bump = Self {
            radius,
            sup_norms: [(-1.0f64).exp(), 0.0, 0.0],
        };
        bump.sup_norms[1] = bump.refined_sup(1);
        bump.sup_norms[2] = bump.refined_sup(2);
        Ok(bump)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.derivative_unchecked(t, 0)
    }

    /// `k`-th derivative, closed form for `k <= 2`.
    pub fn derivative(&self, t: f64, k: usize) -> Result<f64> {
        if k > Self::MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                requested: k,
                max: Self::MAX_ORDER,
            });
        }
        Ok(self.derivative_unchecked(t, k))
    }

    fn derivative_unchecked(&self, t: f64, k: usize) -> f64 {
        let d2 = self.radius * self.radius;
        let w = d2 - t * t;
        // Outside the support, and within the sliver where the value has
        // underflowed anyway, everything is exactly zero; the early return
        // also keeps the rational prefactors from overflowing as w -> 0.
        if t.abs() >= self.radius || d2 / w > 700.0 {
            return 0.0;
        }
        let value = (-d2 / w).exp();
        match k {
            0 => value,
            1 => {
                let q = -2.0 * d2 * t / (w * w);
                q * value
            }
            _ => {
                let q = -2.0 * d2 * t / (w * w);
                let qp = -2.0 * d2 * (w + 4.0 * t * t) / (w * w * w);
                (q * q + qp) * value
            }
        }
    }

    /// Sup norm of the `k`-th derivative over the real line. Order 0 is the
    /// closed-form center value; orders 1 and 2 come from a dense scan of
    /// the half-support refined by ternary search (recorded at build time).
    pub fn sup_norm(&self, k: usize) -> Result<f64> {
        if k > Self::MAX_ORDER {
            return Err(Error::UnsupportedOrder {
                requested: k,
                max: Self::MAX_ORDER,
            });
        }
        Ok(self.sup_norms[k])
    }

    fn refined_sup(&self, k: usize) -> f64 {
        let g = |t: f64| self.derivative_unchecked(t, k).abs();
        let ts = linspace(0.0, self.radius, 4001);
        let (mut best_i, mut best) = (0, 0.0f64);
        for (i, &t) in ts.iter().enumerate() {
            let v = g(t);
            if v > best {
                best_i = i;
                best = v;
            }
        }
        let mut lo = ts[best_i.saturating_sub(1)];
        let mut hi = ts[(best_i + 1).min(ts.len() - 1)];
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if g(m1) < g(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        best.max(g(0.5 * (lo + hi)))
    }

    /// Cosine transform `2 * integral_0^radius eval(t) cos(2 pi x t) dt`:
    /// the bump is even, so this is its full Fourier transform.
    pub fn cosine_transform(&self, x: f64) -> f64 {
        2.0 * simpson(
            |t| self.eval(t) * (2.0 * PI * x * t).cos(),
            0.0,
            self.radius,
            512,
        )
    }
}

/// How well the convolution of a bump with a mollifier kernel obeys the
/// derivative bound `sup |(bump * kernel)^(k)| <= sup |bump^(k)| * mass`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SmoothingReport {
    pub order: usize,
    /// Largest `|(bump * kernel)^(k)|` seen on the evaluation grid.
    pub sup_smoothed: f64,
    /// `sup |bump^(k)| * kernel mass`.
    pub sup_bound: f64,
    /// Radius outside which the convolution must vanish identically.
    pub support_radius: f64,
    pub support_ok: bool,
    pub pass: bool,
}

/// `k`-th derivative of `bump * kernel` at `x`: the derivative falls on the
/// bump factor under the integral. Exactly zero outside the summed support.
pub fn smoothed_bump_derivative(
    mp: &MollifierPair,
    bump: &Bump,
    x: f64,
    k: usize,
) -> Result<f64> {
    if k > Bump::MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            requested: k,
            max: Bump::MAX_ORDER,
        });
    }
    let reach = bump.radius() + mp.support_radius();
    if x.abs() >= reach {
        return Ok(0.0);
    }
    let pieces: Vec<f64> = (0..mp.order())
        .map(|j| {
            let a = -mp.support_radius() + 2.0 * mp.width() * j as f64;
            let b = a + 2.0 * mp.width();
            simpson(
                |t| mp.kernel(t) * bump.derivative_unchecked(x - t, k),
                a,
                b,
                128,
            )
        })
        .collect();
    Ok(compensated_sum(pieces))
}

/// Verifies the smoothing inequality for derivative order `k` on a dense
/// grid, along with the support statement for the convolution. Requires the
/// combined support `bump radius + kernel radius` to stay below 1/2.
pub fn smoothing_inequality_check(
    mp: &MollifierPair,
    bump: &Bump,
    k: usize,
) -> Result<SmoothingReport> {
    let reach = bump.radius() + mp.support_radius();
    if !(reach < 0.5) {
        return Err(Error::InvalidParameter {
            name: "bump",
            reason: format!(
                "combined support radius {reach} must stay below 1/2 \
                 (bump {} + kernel {})",
                bump.radius(),
                mp.support_radius()
            ),
        });
    }
    let sup_bound = bump.sup_norm(k)? * mp.kernel_mass();
    let grid = linspace(-reach, reach, 1201);
    let mut sup_smoothed = 0.0f64;
    for &x in &grid {
        sup_smoothed = sup_smoothed.max(smoothed_bump_derivative(mp, bump, x, k)?.abs());
    }
    let support_ok = smoothed_bump_derivative(mp, bump, reach + 0.01, k)? == 0.0
        && smoothed_bump_derivative(mp, bump, -(reach + 0.01), k)? == 0.0;
    Ok(SmoothingReport {
        order: k,
        sup_smoothed,
        sup_bound,
        support_radius: reach,
        support_ok,
        pass: support_ok && sup_smoothed <= sup_bound * (1.0 + 1e-6),
    })
}

/// One summand of a transform-side element: `coefficient * (2 pi i x)^order`
/// times the transform owned by `spectrum`.
#[derive(Clone, Debug)]
pub struct KHatTerm {
    pub order: usize,
    pub coefficient: f64,
    pub spectrum: Spectrum,
}

/// Finite sum `sum_j coefficient_j (2 pi i x)^(order_j) transform_j(x)`:
/// the transform-side form of finite derivative combinations of deep-zero
/// generators.
#[derive(Clone, Debug)]
pub struct KHatElement {
    terms: Vec<KHatTerm>,
}

impl KHatElement {
    /// Requires at least one term.
    pub fn new(terms: Vec<KHatTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter {
                name: "terms",
                reason: "element needs at least one term".into(),
            });
        }
        Ok(Self { terms })
    }

    /// The plain transform as a one-term element.
    pub fn single(spectrum: Spectrum) -> Self {
        Self::modulated(spectrum, 0)
    }

    /// `(2 pi i x)^order` times the transform, unit coefficient.
    pub fn modulated(spectrum: Spectrum, order: usize) -> Self {
        Self {
            terms: vec![KHatTerm {
                order,
                coefficient: 1.0,
                spectrum,
            }],
        }
    }

    pub fn terms(&self) -> &[KHatTerm] {
        &self.terms
    }

    /// Multiplies every coefficient by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        for term in &mut self.terms {
            term.coefficient *= s;
        }
        self
    }

    /// Concatenates the terms of two elements.
    pub fn sum(mut self, other: KHatElement) -> Self {
        self.terms.extend(other.terms);
        self
    }

    /// Largest |x| at which every constituent transform is still certified
    /// by its quadrature layout.
    pub fn band_limit(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.spectrum.quadrature().band_limit())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let base = Complex64::new(0.0, 2.0 * PI * x).powu(term.order as u32);
            acc += base * (term.coefficient * term.spectrum.eval(x));
        }
        acc
    }
}

/// Smallest even kernel order, at least 4, for which the damped element
/// decays visibly faster than `|x|^-2` (so that it is integrable in the
/// band). The multiplier is replaced by its monotone envelope
/// `min(1, (2 pi width x)^-order)` to avoid sampling its zeros.
pub fn integrable_order(f: &KHatElement, width: f64) -> Result<usize> {
    let xs = [2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0];
    let band = f.band_limit();
    if band < xs[xs.len() - 1] {
        return Err(Error::DegenerateGrid(format!(
            "band limit {band} too small for the decay probe"
        )));
    }
    for order in [4usize, 6, 8, 10, 12] {
        let mut lx = Vec::with_capacity(xs.len());
        let mut lv = Vec::with_capacity(xs.len());
        for &x in &xs {
            let envelope = (2.0 * PI * width * x).recip().min(1.0).powi(order as i32);
            let mag = f.eval(x).norm() * envelope;
            if mag > 0.0 {
                lx.push(x.ln());
                lv.push(mag.ln());
            }
        }
        if lx.len() < 4 {
            continue;
        }
        let (_, slope, _) = line_fit(&lx, &lv);
        if slope < -2.0 {
            return Ok(order);
        }
    }
    Err(Error::InsufficientData(
        "no kernel order up to 12 makes the damped element decay below |x|^-2".into(),
    ))
}

/// Sampled product `f(x) multiplier(x) cosine_transform(x)` on a uniform
/// grid over the shared certification band, reused across modulation
/// frequencies.
struct PairingGrid {
    step: f64,
    xs: Vec<f64>,
    values: Vec<Complex64>,
}

fn pairing_grid(f: &KHatElement, mp: &MollifierPair, bump: &Bump) -> PairingGrid {
    let half_steps = (f.band_limit() / PAIRING_STEP).floor() as i64;
    let xs: Vec<f64> = (-half_steps..=half_steps)
        .map(|i| i as f64 * PAIRING_STEP)
        .collect();
    let values: Vec<Complex64> = xs
        .par_iter()
        .map(|&x| f.eval(x) * (mp.multiplier(x) * bump.cosine_transform(x)))
        .collect();
    PairingGrid {
        step: PAIRING_STEP,
        xs,
        values,
    }
}

/// Trapezoid rule for `integral grid_product(x) e^(-2 pi i n x) dx`.
fn modulated_trapezoid(grid: &PairingGrid, n: i64) -> Complex64 {
    let last = grid.xs.len() - 1;
    let mut re = Vec::with_capacity(grid.xs.len());
    let mut im = Vec::with_capacity(grid.xs.len());
    for (i, (&x, v)) in grid.xs.iter().zip(&grid.values).enumerate() {
        let (s, c) = sin_cos_pi(2.0 * n as f64 * x);
        let w = if i == 0 || i == last { 0.5 } else { 1.0 };
        re.push(w * (v.re * c + v.im * s));
        im.push(w * (v.im * c - v.re * s));
    }
    Complex64::new(compensated_sum(re), compensated_sum(im)) * grid.step
}

/// Pairings of the damped element against modulated bump transforms for all
/// listed frequencies, sharing one sampled grid.
pub fn pairing_integrals(
    f: &KHatElement,
    mp: &MollifierPair,
    bump: &Bump,
    ns: &[i64],
) -> Vec<Complex64> {
    let grid = pairing_grid(f, mp, bump);
    ns.iter().map(|&n| modulated_trapezoid(&grid, n)).collect()
}

/// Single pairing at frequency `n`.
pub fn pairing_integral(
    f: &KHatElement,
    mp: &MollifierPair,
    bump: &Bump,
    n: i64,
) -> Complex64 {
    pairing_integrals(f, mp, bump, &[n])[0]
}

/// Exponential-decay summary of pairing magnitudes across frequencies.
#[derive(Clone, Debug, Serialize)]
pub struct PairingDecay {
    /// `(n, |pairing(n)|)` for every computed frequency, ascending in `n`.
    pub samples: Vec<(i64, f64)>,
    /// Log-linear fit of the kept samples against `|n|`.
    pub fit: DecayFit,
    /// `-ln(ratio)`: positive when the pairings decay.
    pub rate: f64,
    /// Smallest `|n|` whose samples fell below the quadrature noise floor
    /// and were excluded from the fit, if any.
    pub truncated_at: Option<i64>,
}

/// Computes pairings for `|n| <= n_max`, drops frequencies drowned by
/// quadrature noise (recording where truncation began), and fits an
/// exponential decay law to the rest.
pub fn pairing_decay_experiment(
    f: &KHatElement,
    mp: &MollifierPair,
    bump: &Bump,
    n_max: i64,
) -> Result<PairingDecay> {
    if n_max < 2 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            reason: format!("need at least frequencies up to 2, got {n_max}"),
        });
    }
    let ns: Vec<i64> = (-n_max..=n_max).collect();
    let mags: Vec<f64> = pairing_integrals(f, mp, bump, &ns)
        .iter()
        .map(|v| v.norm())
        .collect();
    let samples: Vec<(i64, f64)> = ns.iter().copied().zip(mags.iter().copied()).collect();
    let peak = mags.iter().copied().fold(0.0f64, f64::max);
    let floor = PAIRING_FLOOR * peak;
    let mut truncated_at = None;
    for a in 0..=n_max {
        let below = samples
            .iter()
            .filter(|(n, _)| n.abs() == a)
            .any(|&(_, m)| m < floor);
        if below {
            truncated_at = Some(a);
            break;
        }
    }
    let kept: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(n, _)| truncated_at.map_or(true, |a| n.abs() < a))
        .map(|&(n, m)| (n as f64, m))
        .collect();
    let fit = decay_fit(&kept)?;
    Ok(PairingDecay {
        samples,
        rate: -fit.ratio_hat.ln(),
        fit,
        truncated_at,
    })
}

/// Magnitude of the frequency-periodized pairing
/// `sum over |n| <= n_max of pairing(n)`, accumulated in ascending `|n|`
/// with the negative frequency first at each magnitude.
pub fn periodized_pairing(
    f: &KHatElement,
    mp: &MollifierPair,
    bump: &Bump,
    n_max: i64,
) -> f64 {
    let grid = pairing_grid(f, mp, bump);
    let mut acc = modulated_trapezoid(&grid, 0);
    for a in 1..=n_max {
        acc += modulated_trapezoid(&grid, -a);
        acc += modulated_trapezoid(&grid, a);
    }
    acc.norm()
}

/// One bump radius in a shrinking-support sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RadiusSweepPoint {
    pub radius: f64,
    pub inverse_radius: f64,
    /// Periodized pairing magnitude at this radius.
    pub magnitude: f64,
}

/// Log-linear summary of periodized pairings against inverse bump radius.
#[derive(Clone, Debug, Serialize)]
pub struct RadiusSweep {
    pub points: Vec<RadiusSweepPoint>,
    /// Slope of `ln magnitude` against `1 / radius`; decay of the
    /// periodized pairing in shrinking support shows up as a negative slope.
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
}

/// Runs `periodized_pairing` across shrinking bump radii and fits
/// `ln magnitude ~ intercept + slope / radius`.
pub fn radius_sweep(
    f: &KHatElement,
    mp: &MollifierPair,
    radii: &[f64],
    n_max: i64,
) -> Result<RadiusSweep> {
    if radii.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "radius sweep needs at least 2 radii, got {}",
            radii.len()
        )));
    }
    let mut points = Vec::with_capacity(radii.len());
    for &radius in radii {
        let bump = Bump::new(radius)?;
        if !(radius + mp.support_radius() < 0.5) {
            return Err(Error::InvalidParameter {
                name: "radii",
                reason: format!(
                    "combined support {} must stay below 1/2",
                    radius + mp.support_radius()
                ),
            });
        }
        let magnitude = periodized_pairing(f, mp, &bump, n_max);
        if !(magnitude > 0.0) {
            return Err(Error::InsufficientData(format!(
                "periodized pairing vanished at radius {radius}; nothing to fit"
            )));
        }
        points.push(RadiusSweepPoint {
            radius,
            inverse_radius: 1.0 / radius,
            magnitude,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.inverse_radius).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.magnitude.ln()).collect();
    let (intercept, slope, max_residual) = line_fit(&xs, &ys);
    Ok(RadiusSweep {
        points,
        slope,
        intercept,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Generator;
    use proptest::prelude::*;

    fn standard_spectrum() -> Spectrum {
        Spectrum::with_defaults(Generator::standard()).unwrap()
    }

    #[test]
    fn multiplier_is_one_at_the_origin_and_bounded() {
        for (order, width) in [(2, 0.05), (4, 0.05), (6, 0.02)] {
            let mp = MollifierPair::new(order, width).unwrap();
            assert_eq!(mp.multiplier(0.0), 1.0);
            for &x in &linspace(-40.0, 40.0, 1601) {
                let v = mp.multiplier(x);
                assert!((0.0..=1.0).contains(&v), "h({x}) = {v}");
            }
        }
    }

    #[test]
    fn multiplier_zeros_and_half_lobe_value_are_exact() {
        let mp = MollifierPair::new(4, 0.05).unwrap();
        // Zeros at nonzero multiples of 1/(2 width) = 10.
        for k in 1..=4 {
            assert_eq!(mp.multiplier(10.0 * k as f64), 0.0);
            assert_eq!(mp.multiplier(-10.0 * k as f64), 0.0);
        }
        // At a quarter of the period the sinc equals 2/pi.
        let want = (2.0 / PI).powi(4);
        assert!((mp.multiplier(5.0) - want).abs() < 1e-15);
    }

    #[test]
    fn order_two_kernel_is_the_triangle() {
        let mp = MollifierPair::new(2, 0.05).unwrap();
        assert!((mp.kernel(0.0) - 10.0).abs() < 1e-12);
        for &t in &linspace(-0.12, 0.12, 961) {
            let tri = (10.0 * (1.0 - t.abs() / 0.1)).max(0.0);
            assert!(
                (mp.kernel(t) - tri).abs() < 1e-12,
                "kernel({t}) = {} vs {}",
                mp.kernel(t),
                tri
            );
        }
        assert_eq!(mp.kernel(0.1), 0.0);
        assert_eq!(mp.kernel(-0.11), 0.0);
    }

    #[test]
    fn order_four_kernel_center_matches_the_cubic_spline_value() {
        // The order-4 cardinal B-spline equals 2/3 at its center.
        let mp = MollifierPair::new(4, 0.05).unwrap();
        assert!((mp.kernel(0.0) - (2.0 / 3.0) / 0.1).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_nonnegative_even_and_unit_mass() {
        for order in [2usize, 4, 6] {
            for width in [0.05, 0.02] {
                let mp = MollifierPair::new(order, width).unwrap();
                let reach = mp.support_radius();
                for &t in &linspace(0.0, reach * 1.1, 700) {
                    let v = mp.kernel(t);
                    assert!(v >= 0.0);
                    assert!((v - mp.kernel(-t)).abs() < 1e-11 * (v.abs() + 1.0));
                }
                assert!(
                    (mp.kernel_mass() - 1.0).abs() < 1e-10,
                    "mass({order}, {width}) = {}",
                    mp.kernel_mass()
                );
            }
        }
    }

    #[test]
    fn kernel_transform_recovers_the_multiplier() {
        for order in [2usize, 4, 6] {
            for width in [0.05, 0.02] {
                let mp = MollifierPair::new(order, width).unwrap();
                let gap = mp.duality_gap(&linspace(-10.0, 10.0, 401));
                assert!(gap <= 1e-8, "duality gap({order}, {width}) = {gap:e}");
                assert!((mp.kernel_transform(0.0) - mp.kernel_mass()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mollifier_parameters_are_validated() {
        assert!(MollifierPair::new(3, 0.05).is_err());
        assert!(MollifierPair::new(0, 0.05).is_err());
        assert!(MollifierPair::new(14, 0.05).is_err());
        assert!(MollifierPair::new(4, 0.0).is_err());
        assert!(MollifierPair::new(4, -0.1).is_err());
        assert!(MollifierPair::new(12, 0.01).is_ok());
    }

    #[test]
    fn bump_center_value_and_sup_norms_match_reference() {
        let bump = Bump::new(0.3).unwrap();
        assert!((bump.eval(0.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(bump.sup_norm(0).unwrap(), (-1.0f64).exp());
        // Unit-radius extrema of the profile, rescaled by 1/d^k. The first
        // derivative peaks mid-support (t ~ 0.760); the second derivative's
        // largest hump sits close to the boundary (t ~ 0.895).
        let sup1 = 0.7984297518335995 / 0.3;
        let sup2 = 7.749704941694145 / (0.3 * 0.3);
        assert!(
            (bump.sup_norm(1).unwrap() - sup1).abs() < 1e-9 * sup1,
            "sup1 {}",
            bump.sup_norm(1).unwrap()
        );
        assert!(
            (bump.sup_norm(2).unwrap() - sup2).abs() < 1e-9 * sup2,
            "sup2 {}",
            bump.sup_norm(2).unwrap()
        );
        assert!(matches!(
            bump.sup_norm(3),
            Err(Error::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn bump_vanishes_flatly_at_the_support_boundary() {
        let bump = Bump::new(0.25).unwrap();
        for k in 0..=Bump::MAX_ORDER {
            assert_eq!(bump.derivative(0.25, k).unwrap(), 0.0);
            assert_eq!(bump.derivative(-0.25, k).unwrap(), 0.0);
            assert_eq!(bump.derivative(0.3, k).unwrap(), 0.0);
            // Just inside the boundary the value has underflowed smoothly.
            assert!(bump.derivative(0.2499999, k).unwrap().abs() < 1e-100);
        }
        assert!(bump.derivative(0.2, 1).unwrap() < 0.0);
        assert!((bump.derivative(0.1, 1).unwrap() + bump.derivative(-0.1, 1).unwrap()).abs() < 1e-18);
        assert!(Bump::new(0.5).is_err());
        assert!(Bump::new(0.0).is_err());
    }

    #[test]
    fn smoothing_inequality_holds_with_sharp_support() {
        let mp = MollifierPair::new(2, 0.02).unwrap();
        let bump = Bump::new(0.3).unwrap();
        for k in 0..=2 {
            let report = smoothing_inequality_check(&mp, &bump, k).unwrap();
            assert!(
                report.pass,
                "order {k}: sup {} vs bound {}",
                report.sup_smoothed, report.sup_bound
            );
            assert!(report.support_ok);
            assert!(report.sup_smoothed > 0.0);
        }
        // Averaging against a unit-mass kernel cannot raise the sup norm.
        let r0 = smoothing_inequality_check(&mp, &bump, 0).unwrap();
        assert!(r0.sup_smoothed <= (-1.0f64).exp() * (1.0 + 1e-6));
    }

    #[test]
    fn smoothing_check_rejects_oversized_supports() {
        let mp = MollifierPair::new(4, 0.02).unwrap();
        let bump = Bump::new(0.45).unwrap();
        assert!(matches!(
            smoothing_inequality_check(&mp, &bump, 0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn pairing_is_largest_at_zero_frequency_for_symmetric_data() {
        let f = KHatElement::single(standard_spectrum());
        let mp = MollifierPair::new(4, 0.05).unwrap();
        let bump = Bump::new(0.3).unwrap();
        let vals = pairing_integrals(&f, &mp, &bump, &[0, 1, 2, -1]);
        assert!(vals[0].norm() > vals[1].norm());
        assert!(vals[0].norm() > vals[2].norm());
        // Even real data: opposite frequencies pair to conjugates.
        assert!((vals[1] - vals[3].conj()).norm() < 1e-15 * vals[1].norm().max(1e-300));
        // The zero-frequency pairing of real data is real.
        assert!(vals[0].im.abs() < 1e-18);
    }

    #[test]
    fn pairings_are_linear_in_the_element() {
        let sp = standard_spectrum();
        let mp = MollifierPair::new(4, 0.05).unwrap();
        let bump = Bump::new(0.3).unwrap();
        let plain = KHatElement::single(sp.clone());
        let modulated = KHatElement::modulated(sp.clone(), 2);
        let both = plain.clone().sum(modulated.clone());
        let a = pairing_integral(&plain, &mp, &bump, 1);
        let b = pairing_integral(&modulated, &mp, &bump, 1);
        let c = pairing_integral(&both, &mp, &bump, 1);
        assert!((c - (a + b)).norm() <= 1e-12 * (a.norm() + b.norm()));
        // Doubling a coefficient doubles every product term exactly.
        let doubled = pairing_integral(&plain.clone().scaled(2.0), &mp, &bump, 1);
        assert_eq!(doubled, a * 2.0);
        // Zero scaling collapses the pairing to exactly zero.
        let zeroed = KHatElement::single(sp).scaled(0.0);
        assert_eq!(periodized_pairing(&zeroed, &mp, &bump, 2), 0.0);
    }

    #[test]
    fn default_kernel_order_keeps_elements_integrable() {
        let sp = standard_spectrum();
        assert_eq!(
            integrable_order(&KHatElement::single(sp.clone()), 0.05).unwrap(),
            4
        );
        let high = KHatElement::modulated(sp, 8);
        let order = integrable_order(&high, 0.05).unwrap();
        assert!(order >= 4 && order % 2 == 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn kernels_stay_nonnegative_with_exact_support(
            half_order in 1usize..=6,
            width in 0.005f64..0.2,
            u in -1.5f64..1.5,
        ) {
            let mp = MollifierPair::new(2 * half_order, width).unwrap();
            let t = u * mp.support_radius();
            let v = mp.kernel(t);
            prop_assert!(v >= 0.0);
            if t.abs() >= mp.support_radius() {
                prop_assert_eq!(v, 0.0);
            }
            let h = mp.multiplier(u * 30.0);
            prop_assert!((0.0..=1.0).contains(&h));
        }
    }
}
