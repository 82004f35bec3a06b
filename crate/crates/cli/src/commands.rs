//! The three subcommands. Each builds its objects from the run
//! configuration, writes CSV/JSON artifacts plus a manifest echoing the
//! resolved configuration, and reports an exit status: 0 when every gated
//! check passes, 3 when a check fails, 4 when a solver did not converge.
//! Errors returned from here map to exit status 2 (configuration or
//! precondition) or 3 (internal machinery), see [`exit_code`].

use crate::config::{self, RunConfig};
use crate::output::{float, write_json, Csv};
use deepzero::approx::{
    annihilator_probe, completeness_curve, dual_exponent, integer_lattice_contrast, CurveSpec,
    Target,
};
use deepzero::lattice::{decay_fit, mean_value_gap_check, DecayFit, PerturbedLattice, Scheme};
use deepzero::mollifier::{pairing_decay_experiment, radius_sweep, Bump, KHatElement, MollifierPair};
use deepzero::numeric::{line_fit, linspace};
use deepzero::{
    fit_envelope, gaussian_transform, verify_deep_zero, Envelope, Error, Generator,
    QuadratureSpec, Spectrum,
};
use serde::Serialize;
use std::fmt;
use std::fs;
use std::path::Path;

const BAND_MARGIN: f64 = 4.0;
const ENVELOPE_GRID_POINTS: usize = 2000;
const FREQ_TABLE_EXTENT: f64 = 12.0;
const FREQ_TABLE_STEP: f64 = 0.05;
const STRIP_XS: [f64; 9] = [2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0];
const FLAT_ZERO_TS: [f64; 4] = [0.3, 0.1, 0.05, 0.02];
const PERIODIZE_KMAX: usize = 8;
const POISSON_NMAX: usize = 32;
const POISSON_POINTS: usize = 50;
const PAIRING_NMAX: i64 = 32;
const SWEEP_RADII: [f64; 5] = [0.4, 0.3, 0.2, 0.15, 0.1];
const ANNIHILATOR_DIM: usize = 64;

/// Anything that stops a subcommand before its checks complete.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Io(std::io::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Configuration and precondition problems map to 2; failures inside the
/// check machinery itself (lost roots, refused factorizations) map to 3.
pub fn exit_code(failure: &Failure) -> u8 {
    match failure {
        Failure::Core(Error::NoConvergence(_)) | Failure::Core(Error::SingularSystem(_)) => 3,
        _ => 2,
    }
}

fn spectrum_from(config: &RunConfig) -> Result<Spectrum, Failure> {
    let gen = Generator::new(config.generator.a, config.generator.b)?;
    let quad = QuadratureSpec {
        half_width: config.generator.half_width,
        step: config.generator.step,
        error_budget: config.generator.budget,
        band_margin: BAND_MARGIN,
    };
    Ok(Spectrum::new(gen, quad)?)
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'static str,
    config: &'a RunConfig,
    summary: T,
}

fn write_manifest<T: Serialize>(
    dir: &Path,
    command: &'static str,
    config: &RunConfig,
    summary: T,
) -> Result<(), Failure> {
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            command,
            config,
            summary,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct EnvelopeEcho {
    amplitude: f64,
    rate: f64,
    /// True when the configuration pinned the envelope instead of fitting it.
    forced: bool,
}

#[derive(Serialize)]
struct DeepZeroSection {
    max_ratio_per_order: Vec<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct StripSection {
    xs: Vec<f64>,
    slope: f64,
    threshold: f64,
    pass: bool,
}

#[derive(Serialize)]
struct FlatZeroPoint {
    t: f64,
    value: f64,
}

#[derive(Serialize)]
struct FlatZeroSection {
    points: Vec<FlatZeroPoint>,
    c2_hat: f64,
    amplitude_hat: f64,
    pass: bool,
}

#[derive(Serialize)]
struct GaussianSection {
    max_error: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct GeneratorReport {
    envelope: Option<EnvelopeEcho>,
    deep_zero: Option<DeepZeroSection>,
    strip_decay: Option<StripSection>,
    flat_zero: Option<FlatZeroSection>,
    gaussian_check: Option<GaussianSection>,
    pass: bool,
}

/// Tabulates the generator and its transform and checks the deep-zero
/// envelope, the polynomial strip decay of the transform, and the flat zero
/// of the periodization. With `b = 0` those checks are replaced by the
/// closed-form Gaussian cross-check.
pub fn generator(config: &RunConfig) -> Result<u8, Failure> {
    let spectrum = spectrum_from(config)?;
    let gen = spectrum.generator().clone();
    fs::create_dir_all(&config.out)?;

    let mut time = Csv::new(&["t", "phi", "dphi", "d2phi"]);
    let half_steps = (config.generator.half_width / config.generator.step).round() as i64;
    for i in -half_steps..=half_steps {
        let t = i as f64 * config.generator.step;
        time.row(&[
            float(t),
            float(gen.derivative(t, 0)?),
            float(gen.derivative(t, 1)?),
            float(gen.derivative(t, 2)?),
        ]);
    }
    time.write(&config.out.join("phi_time.csv"))?;

    let count = (2.0 * FREQ_TABLE_EXTENT / FREQ_TABLE_STEP).round() as usize + 1;
    let xs = linspace(-FREQ_TABLE_EXTENT, FREQ_TABLE_EXTENT, count);
    let values = spectrum.eval_grid(&xs);
    let mut freq = Csv::new(&["x", "phi_hat", "dphi_hat"]);
    for (&x, &v) in xs.iter().zip(&values) {
        freq.row(&[float(x), float(v), float(spectrum.deriv(x))]);
    }
    freq.write(&config.out.join("phi_freq.csv"))?;

    let grid = linspace(-8.0, 8.0, ENVELOPE_GRID_POINTS);
    let flat = gen.has_flat_zeros();
    let (envelope_echo, deep_zero, strip_decay, flat_zero, gaussian_check) = if flat {
        let fitted = fit_envelope(&gen, &grid)?;
        let forced = config.generator.envelope_rate.is_some()
            || config.generator.envelope_amplitude.is_some();
        let envelope = if forced {
            Envelope {
                amplitude: config
                    .generator
                    .envelope_amplitude
                    .unwrap_or(fitted.amplitude),
                rate: config.generator.envelope_rate.unwrap_or(fitted.rate),
            }
        } else {
            // The fit calibrates the amplitude against the function itself;
            // raising it to cover the first two derivatives keeps one
            // envelope valid for every verified order.
            fitted.cover_orders(&gen, &grid, 2)?
        };
        let report = verify_deep_zero(&gen, &grid, &envelope, 2)?;
        let deep = DeepZeroSection {
            pass: report.passes(),
            max_ratio_per_order: report.max_ratio_per_order,
        };

        let slope = spectrum.log_log_slope(&STRIP_XS)?;
        let strip = StripSection {
            xs: STRIP_XS.to_vec(),
            slope,
            threshold: -2.0,
            pass: slope < -2.0,
        };

        // The periodization's value at t is governed by exp(-c2 / d(t, Z));
        // a log-linear fit against 1/t over small t estimates c2.
        let mut points = Vec::new();
        let (mut inv_t, mut log_v) = (Vec::new(), Vec::new());
        for &t in &FLAT_ZERO_TS {
            let value = spectrum.periodize(t, PERIODIZE_KMAX);
            points.push(FlatZeroPoint { t, value });
            inv_t.push(1.0 / t);
            log_v.push(value.ln());
        }
        let (intercept, slope, _) = line_fit(&inv_t, &log_v);
        let c2_hat = -slope;
        let flat_section = FlatZeroSection {
            points,
            c2_hat,
            amplitude_hat: intercept.exp(),
            pass: c2_hat > 0.0,
        };
        (
            Some(EnvelopeEcho {
                amplitude: envelope.amplitude,
                rate: envelope.rate,
                forced,
            }),
            Some(deep),
            Some(strip),
            Some(flat_section),
            None,
        )
    } else {
        let mut worst = 0.0f64;
        for &x in &linspace(-10.0, 10.0, 2001) {
            worst = worst.max((spectrum.eval(x) - gaussian_transform(config.generator.a, x)).abs());
        }
        let section = GaussianSection {
            max_error: worst,
            tolerance: 1e-9,
            pass: worst <= 1e-9,
        };
        (None, None, None, None, Some(section))
    };

    let pass = deep_zero.as_ref().map_or(true, |s| s.pass)
        && strip_decay.as_ref().map_or(true, |s| s.pass)
        && flat_zero.as_ref().map_or(true, |s| s.pass)
        && gaussian_check.as_ref().map_or(true, |s| s.pass);
    let report = GeneratorReport {
        envelope: envelope_echo,
        deep_zero,
        strip_decay,
        flat_zero,
        gaussian_check,
        pass,
    };
    write_json(&config.out.join("envelope_report.json"), &report)?;
    write_manifest(&config.out, "generator", config, &report)?;
    Ok(if pass { 0 } else { 3 })
}

#[derive(Serialize)]
struct PoissonSection {
    worst_gap: f64,
    tail_estimate: f64,
    budget: f64,
    pass: bool,
}

#[derive(Serialize)]
struct GapSection {
    deriv_bound: f64,
    worst_ratio: f64,
    pass: bool,
}

#[derive(Serialize)]
struct GapDecaySection {
    fit: DecayFit,
    threshold: f64,
    pass: bool,
}

#[derive(Serialize)]
struct PairingSection {
    rate: f64,
    truncated_at: Option<i64>,
    fit: DecayFit,
    pass: bool,
}

#[derive(Serialize)]
struct SweepSection {
    slope: f64,
    intercept: f64,
    max_residual: f64,
    pass: bool,
}

#[derive(Serialize)]
struct UniquenessReport {
    poisson: PoissonSection,
    perturbations: DecayFit,
    gap_check: GapSection,
    gap_decay: GapDecaySection,
    pairing: PairingSection,
    radius_sweep: SweepSection,
    pass: bool,
}

/// Periodization-versus-Fourier-sum agreement, perturbation and gap decay
/// fits, the mean-value gap check, pairing decay across frequencies, and the
/// shrinking-support sweep.
pub fn uniqueness(config: &RunConfig) -> Result<u8, Failure> {
    let spectrum = spectrum_from(config)?;
    let scheme: Scheme = config.lattice.scheme.parse()?;
    let lattice = PerturbedLattice::new(
        config.lattice.half_count,
        config.lattice.amplitude,
        config.lattice.ratio,
        scheme,
        config.lattice.seed,
    )?;
    fs::create_dir_all(&config.out)?;

    let mut text = Vec::new();
    lattice.write_text(&mut text)?;
    fs::write(config.out.join("lattice.txt"), text)?;

    let mut poisson = Csv::new(&["t", "periodization", "partial_sum", "discrepancy"]);
    let mut worst_gap = 0.0f64;
    for i in 0..POISSON_POINTS {
        let t = i as f64 / POISSON_POINTS as f64;
        let p = spectrum.periodize(t, PERIODIZE_KMAX);
        let s = spectrum.fourier_partial_sum(t, POISSON_NMAX);
        let d = (p - s).abs();
        worst_gap = worst_gap.max(d);
        poisson.row(&[float(t), float(p), float(s), float(d)]);
    }
    poisson.write(&config.out.join("poisson.csv"))?;
    let tail = spectrum.fourier_tail_estimate(POISSON_NMAX);
    let poisson_section = PoissonSection {
        worst_gap,
        tail_estimate: tail,
        budget: config.generator.budget,
        pass: worst_gap <= tail + config.generator.budget,
    };

    let perturbation_samples: Vec<(f64, f64)> = lattice
        .indices()
        .map(|n| (n as f64, lattice.perturbation(n)))
        .collect();
    let perturbations = decay_fit(&perturbation_samples)?;

    // Numerical sup of |transform'| (it decays fast; the peak sits well
    // inside [0, 5]), with a small headroom for the scan resolution.
    let mut deriv_bound = 0.0f64;
    for &x in &linspace(0.0, 5.0, 2001) {
        deriv_bound = deriv_bound.max(spectrum.deriv(x).abs());
    }
    deriv_bound *= 1.001;
    let gap_report = mean_value_gap_check(&spectrum, &lattice, deriv_bound)?;
    let gap_samples: Vec<(f64, f64)> = gap_report
        .samples
        .iter()
        .map(|s| (s.index as f64, s.gap))
        .collect();
    let gap_fit = decay_fit(&gap_samples)?;
    let gap_decay = GapDecaySection {
        fit: gap_fit,
        threshold: config.lattice.ratio + 0.05,
        pass: gap_fit.ratio_hat <= config.lattice.ratio + 0.05,
    };
    let gap_section = GapSection {
        deriv_bound,
        worst_ratio: gap_report.worst_ratio,
        pass: gap_report.pass,
    };

    let mp = MollifierPair::new(config.mollifier.order, config.mollifier.width)?;
    let bump = Bump::new(config.mollifier.bump_radius)?;
    let element = KHatElement::single(spectrum.clone());
    let pairing = pairing_decay_experiment(&element, &mp, &bump, PAIRING_NMAX)?;
    let mut pairing_csv = Csv::new(&["n", "pairing", "fit_envelope"]);
    for &(n, magnitude) in &pairing.samples {
        let envelope = pairing.fit.amplitude_hat * pairing.fit.ratio_hat.powi(n.abs() as i32);
        pairing_csv.row(&[n.to_string(), float(magnitude), float(envelope)]);
    }
    pairing_csv.write(&config.out.join("pairing.csv"))?;
    let pairing_section = PairingSection {
        rate: pairing.rate,
        truncated_at: pairing.truncated_at,
        fit: pairing.fit,
        pass: pairing.rate > 0.0,
    };

    let sweep = radius_sweep(&element, &mp, &SWEEP_RADII, PAIRING_NMAX)?;
    let mut sweep_csv = Csv::new(&["radius", "inverse_radius", "magnitude"]);
    for p in &sweep.points {
        sweep_csv.row(&[float(p.radius), float(p.inverse_radius), float(p.magnitude)]);
    }
    sweep_csv.write(&config.out.join("dsweep.csv"))?;
    let sweep_section = SweepSection {
        slope: sweep.slope,
        intercept: sweep.intercept,
        max_residual: sweep.max_residual,
        pass: sweep.slope < 0.0,
    };

    let pass = poisson_section.pass
        && gap_section.pass
        && gap_decay.pass
        && pairing_section.pass
        && sweep_section.pass;
    let report = UniquenessReport {
        poisson: poisson_section,
        perturbations,
        gap_check: gap_section,
        gap_decay,
        pairing: pairing_section,
        radius_sweep: sweep_section,
        pass,
    };
    write_json(&config.out.join("decay_fit.json"), &report)?;
    write_manifest(&config.out, "uniqueness", config, &report)?;
    Ok(if pass { 0 } else { 3 })
}

#[derive(Serialize)]
struct AnnihilatorSummary {
    minimum: f64,
    q: f64,
    converged: bool,
}

#[derive(Serialize)]
struct ApproxSummary {
    /// Quadrature step actually used (refined automatically when the grid
    /// needs transform values beyond the configured band).
    quadrature_step: f64,
    curve_converged: bool,
    annihilator: Option<AnnihilatorSummary>,
}

/// Completeness curve over the configured lattice sizes, the
/// integer-versus-perturbed contrast at the configured size, and the
/// annihilator probe in the dual exponent.
pub fn approx(config: &RunConfig) -> Result<u8, Failure> {
    let scheme: Scheme = config.lattice.scheme.parse()?;
    let target: Target = config.approx.target.parse()?;
    let weight_kind =
        config::parse_weight(&config.approx.weight).map_err(|m| Failure::Core(Error::Parse(m)))?;
    let largest = *config.approx.m_list.last().expect("validated nonempty");
    let probe = PerturbedLattice::new(
        largest,
        config.lattice.amplitude,
        config.lattice.ratio,
        scheme,
        config.lattice.seed,
    )?;
    let reach = probe.points().iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let extent = config.approx.extent.unwrap_or((reach + 3.0).max(12.0));

    // The design matrix needs the transform out to extent + reach; refine
    // the quadrature step when the configured band is too narrow.
    let mut quad = QuadratureSpec {
        half_width: config.generator.half_width,
        step: config.generator.step,
        error_budget: config.generator.budget,
        band_margin: BAND_MARGIN,
    };
    let needed = extent + reach + 1.0;
    if quad.band_limit() < needed {
        quad.step = 0.5 / (needed + BAND_MARGIN);
    }
    let gen = Generator::new(config.generator.a, config.generator.b)?;
    let spectrum = Spectrum::new(gen, quad)?;
    fs::create_dir_all(&config.out)?;

    let target_fn = move |x: f64| target.eval(x);
    let weight_fn = weight_kind.function();
    let weight: Option<&dyn Fn(f64) -> f64> =
        weight_fn.as_ref().map(|f| f as &dyn Fn(f64) -> f64);
    let curve_spec = CurveSpec {
        spectrum: &spectrum,
        amplitude: config.lattice.amplitude,
        ratio: config.lattice.ratio,
        scheme,
        seed: config.lattice.seed,
        step: config.approx.step,
        p: config.approx.p,
        target: &target_fn,
        weight,
        tau: config.approx.tau,
        smoothing: config.approx.delta,
        extent: config.approx.extent,
    };
    let curve = completeness_curve(&curve_spec, &config.approx.m_list)?;
    let mut curve_csv = Csv::new(&[
        "M",
        "p",
        "residual",
        "iterations",
        "condition_estimate",
        "tau",
        "delta",
    ]);
    for point in &curve {
        curve_csv.row(&[
            point.half_count.to_string(),
            float(point.p),
            float(point.residual_norm),
            point.iterations.to_string(),
            float(point.condition_estimate),
            float(point.tau),
            float(point.delta),
        ]);
    }
    curve_csv.write(&config.out.join("completeness_curve.csv"))?;
    let curve_converged = curve.iter().all(|p| p.converged);

    let lattice = PerturbedLattice::new(
        config.lattice.half_count,
        config.lattice.amplitude,
        config.lattice.ratio,
        scheme,
        config.lattice.seed,
    )?;
    let contrast = integer_lattice_contrast(&spectrum, &lattice, config.approx.step, &target_fn)?;
    let mut contrast_csv = Csv::new(&["M", "integer_residual", "perturbed_residual", "tau"]);
    contrast_csv.row(&[
        contrast.half_count.to_string(),
        float(contrast.integer_residual),
        float(contrast.perturbed_residual),
        float(contrast.tau),
    ]);
    contrast_csv.write(&config.out.join("contrast.csv"))?;

    // The dual exponent is finite only for p > 1; the probe is skipped at
    // p = 1 (weighted mode), where no finite-q constraint set is posed.
    let annihilator = if config.approx.p > 1.0 {
        let probe = annihilator_probe(
            &spectrum,
            &lattice,
            dual_exponent(config.approx.p),
            ANNIHILATOR_DIM,
            config.lattice.seed,
        )?;
        let mut csv = Csv::new(&["x", "h"]);
        for (&x, &h) in probe.h_grid.iter().zip(&probe.h) {
            csv.row(&[float(x), float(h)]);
        }
        csv.write(&config.out.join("annihilator.csv"))?;
        Some(AnnihilatorSummary {
            minimum: probe.minimum,
            q: probe.q,
            converged: probe.converged,
        })
    } else {
        None
    };

    write_manifest(
        &config.out,
        "approx",
        config,
        ApproxSummary {
            quadrature_step: spectrum.quadrature().step,
            curve_converged,
            annihilator,
        },
    )?;
    Ok(if curve_converged { 0 } else { 4 })
}
