//! Exponentially perturbed integer lattices `lambda_n = n + a_n` with
//! `|a_n| <= (C/2) r^|n|`, their text serialization, decay-rate recovery
//! from samples, and mean-value checks that connect transform gaps at the
//! perturbed points back to the perturbation size.

use crate::error::{Error, Result};
use crate::numeric::line_fit;
use crate::spectrum::Spectrum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

/// Samples whose magnitude falls below this are dropped before taking
/// logarithms in decay fits; they carry no usable information about a rate.
const LOG_FLOOR: f64 = 1e-300;

/// How the perturbation signs/magnitudes are laid out along the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// `a_n = (-1)^n (C/2) r^|n|`.
    Alternating,
    /// `|a_n|` uniform in `[(C/4) r^|n|, (C/2) r^|n|]`, sign a fair coin;
    /// both drawn from a stream seeded by the lattice seed.
    Random,
    /// `a_n = (C/2) r^|n|`.
    Constant,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::Alternating => "alternating",
            Scheme::Random => "random",
            Scheme::Constant => "constant",
        };
        f.write_str(s)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alternating" => Ok(Scheme::Alternating),
            "random" => Ok(Scheme::Random),
            "constant" => Ok(Scheme::Constant),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

/// A strictly increasing perturbation of the integers `-M..=M`.
#[derive(Clone, Debug)]
pub struct PerturbedLattice {
    half_count: usize,
    amplitude: f64,
    ratio: f64,
    scheme: Scheme,
    seed: u64,
    points: Vec<f64>,
}

impl PerturbedLattice {
    /// Builds `lambda_n = n + a_n` for `|n| <= half_count` under `scheme`.
    ///
    /// Requires `ratio` in `(0, 1)` and `0 < amplitude < 1`: every
    /// perturbation then stays below `amplitude/2 < 1/2`, so consecutive
    /// points cannot collide; strict increase is re-checked after
    /// construction as a defensive measure.
    pub fn new(
        half_count: usize,
        amplitude: f64,
        ratio: f64,
        scheme: Scheme,
        seed: u64,
    ) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter {
                name: "ratio",
                reason: format!("must lie strictly inside (0, 1), got {ratio}"),
            });
        }
        if !(amplitude > 0.0 && amplitude < 1.0) {
            return Err(Error::InvalidParameter {
                name: "amplitude",
                reason: format!(
                    "must lie strictly inside (0, 1) so perturbations stay below 1/2, got {amplitude}"
                ),
            });
        }
        let mut points = Vec::with_capacity(2 * half_count + 1);
        for n in -(half_count as i64)..=half_count as i64 {
            let bound = 0.5 * amplitude * ratio.powi(n.unsigned_abs() as i32);
            let a_n = match scheme {
                Scheme::Alternating => {
                    if n & 1 == 0 {
                        bound
                    } else {
                        -bound
                    }
                }
                Scheme::Constant => bound,
                Scheme::Random => {
                    // One independent stream per index: the draw for a given
                    // (seed, n) never depends on half_count, so lattices with
                    // the same parameters nest as half_count grows.
                    let mut rng = ChaCha12Rng::seed_from_u64(seed);
                    rng.set_stream(n as u64);
                    let mag = rng.gen_range(0.5 * bound..=bound);
                    if rng.gen::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                }
            };
            points.push(n as f64 + a_n);
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::NotIncreasing {
                    index: i as i64 - half_count as i64,
                });
            }
        }
        Ok(Self {
            half_count,
            amplitude,
            ratio,
            scheme,
            seed,
            points,
        })
    }

    /// Wraps externally produced points (indices `-M..=M` in order) with the
    /// given decay metadata, enforcing every lattice invariant: an odd point
    /// count, strict increase, non-zero perturbations, and
    /// `|a_n| < amplitude * ratio^|n|`.
    pub fn from_points(
        points: Vec<f64>,
        amplitude: f64,
        ratio: f64,
        scheme: Scheme,
        seed: u64,
    ) -> Result<Self> {
        if points.is_empty() || points.len() % 2 == 0 {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: format!(
                    "need an odd number of points covering -M..=M, got {}",
                    points.len()
                ),
            });
        }
        let lat = Self {
            half_count: points.len() / 2,
            amplitude,
            ratio,
            scheme,
            seed,
            points,
        };
        match lat.validate() {
            None => Ok(lat),
            Some(index) => Err(Error::InvalidParameter {
                name: "points",
                reason: format!("lattice invariant violated first at index {index}"),
            }),
        }
    }

    /// Checks every stored invariant (strict increase, `a_n != 0`,
    /// `|a_n| < amplitude * ratio^|n|`), returning the first offending
    /// index, or `None` when the lattice is valid.
    pub fn validate(&self) -> Option<i64> {
        for n in self.indices() {
            let a = self.perturbation(n);
            let bound = self.amplitude * self.ratio.powi(n.unsigned_abs() as i32);
            if a == 0.0 || !(a.abs() < bound) {
                return Some(n);
            }
        }
        for (i, w) in self.points.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Some(i as i64 - self.half_count as i64);
            }
        }
        None
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The points in increasing order (`lambda_{-M} .. lambda_{M}`).
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// The lattice indices, aligned with [`PerturbedLattice::points`].
    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        -(self.half_count as i64)..=self.half_count as i64
    }

    /// `lambda_n` for an index in `-half_count..=half_count`.
    pub fn point(&self, n: i64) -> f64 {
        self.points[(n + self.half_count as i64) as usize]
    }

    /// Perturbation `a_n = lambda_n - n`.
    pub fn perturbation(&self, n: i64) -> f64 {
        self.point(n) - n as f64
    }

    /// Writes the lattice in its line-oriented text form: one header, then
    /// one `index point` pair per line at full double precision.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "lattice v1 M={} C={:.16e} r={:.16e} scheme={} seed={}",
            self.half_count, self.amplitude, self.ratio, self.scheme, self.seed
        )?;
        for (n, &p) in self.indices().zip(&self.points) {
            writeln!(w, "{n} {p:.16e}")?;
        }
        Ok(())
    }

    /// Parses the text form produced by [`PerturbedLattice::write_text`]
    /// and re-validates separation.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Parse(format!("bad value `{value}` for header key `{key}`")))
        }

        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty lattice file".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("lattice") || fields.next() != Some("v1") {
            return Err(Error::Parse("expected `lattice v1` header".into()));
        }
        let mut half_count: Option<usize> = None;
        let mut amplitude: Option<f64> = None;
        let mut ratio: Option<f64> = None;
        let mut scheme: Option<Scheme> = None;
        let mut seed: Option<u64> = None;
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header field `{field}`")))?;
            match key {
                "M" => half_count = Some(parse(key, value)?),
                "C" => amplitude = Some(parse(key, value)?),
                "r" => ratio = Some(parse(key, value)?),
                "scheme" => scheme = Some(value.parse()?),
                "seed" => seed = Some(parse(key, value)?),
                other => return Err(Error::Parse(format!("unknown header key `{other}`"))),
            }
        }
        let missing = |name: &str| Error::Parse(format!("missing header key `{name}`"));
        let half_count = half_count.ok_or_else(|| missing("M"))?;
        let amplitude = amplitude.ok_or_else(|| missing("C"))?;
        let ratio = ratio.ok_or_else(|| missing("r"))?;
        let scheme = scheme.ok_or_else(|| missing("scheme"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;

        let expected = 2 * half_count + 1;
        let mut points = Vec::with_capacity(expected);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (idx, val) = line
                .split_once(' ')
                .ok_or_else(|| Error::Parse(format!("malformed point line {}", i + 2)))?;
            let n: i64 = parse("index", idx)?;
            let want = i as i64 - half_count as i64;
            if n != want {
                return Err(Error::Parse(format!(
                    "point line {} has index {n}, expected {want}",
                    i + 2
                )));
            }
            points.push(parse::<f64>("point", val)?);
        }
        if points.len() != expected {
            return Err(Error::Parse(format!(
                "expected {expected} points, found {}",
                points.len()
            )));
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::NotIncreasing {
                    index: i as i64 - half_count as i64,
                });
            }
        }
        Ok(Self {
            half_count,
            amplitude,
            ratio,
            scheme,
            seed,
            points,
        })
    }
}

/// Result of fitting `value ~ c r^|n|` by least squares on logarithms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    /// Fitted leading constant.
    pub amplitude_hat: f64,
    /// Fitted ratio per unit index.
    pub ratio_hat: f64,
    /// Largest absolute residual of the log-domain fit.
    pub max_residual: f64,
}

/// Fits a geometric decay `|value| ~ c * r^|x|` to `(x, value)` samples by
/// least squares on `(|x|, ln |value|)`. Samples whose magnitude is below
/// the underflow floor are dropped first; at least four must survive, with
/// at least two distinct `|x|`, or the data is reported as degenerate.
pub fn decay_fit(samples: &[(f64, f64)]) -> Result<DecayFit> {
    let kept: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, v)| v.abs() >= LOG_FLOOR)
        .map(|&(x, v)| (x.abs(), v.abs().ln()))
        .collect();
    if kept.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least 4 samples above the underflow floor, got {}",
            kept.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|&(x, _)| x).collect();
    let first = xs[0];
    if xs.iter().all(|&x| x == first) {
        return Err(Error::InsufficientData(
            "decay fit needs at least two distinct abscissas".into(),
        ));
    }
    let ys: Vec<f64> = kept.iter().map(|&(_, l)| l).collect();
    let (b0, b1, max_residual) = line_fit(&xs, &ys);
    let ratio_hat = b1.exp();
    if !(ratio_hat < 1.0) {
        return Err(Error::InsufficientData(format!(
            "samples do not decay: fitted ratio {ratio_hat}"
        )));
    }
    Ok(DecayFit {
        amplitude_hat: b0.exp(),
        ratio_hat,
        max_residual,
    })
}

/// One lattice index in a mean-value gap check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapSample {
    pub index: i64,
    /// `|phi(n) - phi(lambda_n)|`.
    pub gap: f64,
    /// `bound * |a_n| + slack`: what the mean-value inequality allows.
    pub allowance: f64,
}

/// Outcome of checking `|phi(n) - phi(lambda_n)| <= bound * |a_n| + slack`
/// across the lattice.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub samples: Vec<GapSample>,
    /// Largest `gap / allowance` ratio seen.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Mean-value control of transform gaps: on each `[n, lambda_n]` interval
/// the transform moves at most `deriv_bound` per unit, so the gap at the
/// perturbed point is at most `deriv_bound * |a_n|`, plus twice the
/// quadrature budget to absorb the two evaluations' own error.
pub fn mean_value_gap_check(
    spectrum: &Spectrum,
    lattice: &PerturbedLattice,
    deriv_bound: f64,
) -> Result<GapReport> {
    if !(deriv_bound >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "deriv_bound",
            reason: format!("must be finite and non-negative, got {deriv_bound}"),
        });
    }
    let slack = 2.0 * spectrum.quadrature().error_budget;
    let mut samples = Vec::with_capacity(lattice.points().len());
    let mut worst: f64 = 0.0;
    for n in lattice.indices() {
        let gap = (spectrum.eval(n as f64) - spectrum.eval(lattice.point(n))).abs();
        let allowance = deriv_bound * lattice.perturbation(n).abs() + slack;
        worst = worst.max(gap / allowance);
        samples.push(GapSample {
            index: n,
            gap,
            allowance,
        });
    }
    Ok(GapReport {
        samples,
        worst_ratio: worst,
        pass: worst <= 1.0,
    })
}

/// Critical point located in one lattice interval, when found.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RollePoint {
    pub index: i64,
    /// A point strictly between `n` and `lambda_n` where `f'` vanishes;
    /// absent when no sign change of `f'` could be bracketed there.
    pub abscissa: Option<f64>,
}

/// Critical points of `f` between each integer and its perturbed partner.
#[derive(Clone, Debug, Serialize)]
pub struct RolleReport {
    pub points: Vec<RollePoint>,
    /// Indices whose interval yielded no bracketable sign change.
    pub misses: Vec<i64>,
    /// When every interval produced a point: the critical points assembled
    /// into a lattice inheriting the source decay parameters (each new
    /// perturbation is trapped inside the old one), fully re-validated.
    #[serde(skip)]
    pub derived: Option<PerturbedLattice>,
}

/// For a function `f` vanishing on both the integers and the lattice, finds
/// a zero of `f'` strictly inside each interval between `n` and `lambda_n`
/// (Rolle's theorem guarantees one) by probing for a sign change of
/// `f_prime` and bisecting it to an abscissa tolerance of 1e-12.
///
/// The vanishing hypothesis is checked up front (to 1e-9 absolute) and its
/// failure is an argument error; intervals where no sign change can be
/// bracketed are recorded as misses rather than errors.
pub fn rolle_points<F, G>(f: F, f_prime: G, lattice: &PerturbedLattice) -> Result<RolleReport>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    for n in lattice.indices() {
        for x in [n as f64, lattice.point(n)] {
            let v = f(x).abs();
            if !(v <= 1e-9) {
                return Err(Error::InvalidParameter {
                    name: "f",
                    reason: format!("must vanish on both point sets; |f({x})| = {v:e}"),
                });
            }
        }
    }
    let mut points = Vec::with_capacity(lattice.points().len());
    let mut misses = Vec::new();
    for n in lattice.indices() {
        let a = n as f64;
        let b = lattice.point(n);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let width = hi - lo;
        // Probe strictly inside the open interval for a sign change of f'.
        let probes = 64usize;
        let mut bracket = None;
        let mut prev_x = lo + width * 1e-6;
        let mut prev_v = f_prime(prev_x);
        for i in 1..=probes {
            let x = lo + width * (1e-6 + (1.0 - 2e-6) * i as f64 / probes as f64);
            let v = f_prime(x);
            if prev_v == 0.0 {
                bracket = Some((prev_x, prev_x));
                break;
            }
            if prev_v * v <= 0.0 {
                bracket = Some((prev_x, x));
                break;
            }
            prev_x = x;
            prev_v = v;
        }
        let abscissa = bracket.map(|(mut blo, mut bhi)| {
            while bhi - blo > 1e-12 {
                let mid = 0.5 * (blo + bhi);
                if f_prime(blo) * f_prime(mid) <= 0.0 {
                    bhi = mid;
                } else {
                    blo = mid;
                }
            }
            0.5 * (blo + bhi)
        });
        if abscissa.is_none() {
            misses.push(n);
        }
        points.push(RollePoint { index: n, abscissa });
    }
    let derived = if misses.is_empty() {
        PerturbedLattice::from_points(
            points.iter().map(|p| p.abscissa.unwrap()).collect(),
            lattice.amplitude(),
            lattice.ratio(),
            lattice.scheme(),
            lattice.seed(),
        )
        .ok()
    } else {
        None
    };
    Ok(RolleReport {
        points,
        misses,
        derived,
    })
}
