//! End-to-end acceptance checks for the whole toolkit, one per numbered
//! test. Each prints a single summary line with the measured values and the
//! pinned tolerance before asserting, so a red run still reports what was
//! seen.

use deepzero::approx::{
    annihilator_probe, completeness_curve, weighted_ridge_solve, ApproxProblem, CurveSpec, Target,
};
use deepzero::lattice::{decay_fit, mean_value_gap_check, PerturbedLattice, Scheme};
use deepzero::mollifier::{
    pairing_decay_experiment, radius_sweep, smoothing_inequality_check, Bump, KHatElement,
    MollifierPair,
};
use deepzero::numeric::{line_fit, linspace};
use deepzero::{
    fit_envelope, gaussian_transform, verify_deep_zero, Generator, QuadratureSpec, Spectrum,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn standard_spectrum() -> Spectrum {
    Spectrum::with_defaults(Generator::standard()).unwrap()
}

/// A transform certified out to |x| = 58.5, wide enough for design matrices
/// on lattices reaching |lambda| = 24 and change.
fn fine_spectrum() -> Spectrum {
    Spectrum::new(
        Generator::standard(),
        QuadratureSpec {
            half_width: 12.0,
            step: 0.008,
            error_budget: 1e-9,
            band_margin: 4.0,
        },
    )
    .unwrap()
}

#[test]
fn criterion_01_deep_zero_envelope_covers_orders_up_to_two() {
    let started = Instant::now();
    let gen = Generator::standard();
    let grid = linspace(-8.0, 8.0, 2000);
    let fitted = fit_envelope(&gen, &grid).unwrap();
    let covered = fitted.cover_orders(&gen, &grid, 2).unwrap();
    let report = verify_deep_zero(&gen, &grid, &covered, 2).unwrap();
    let worst = report
        .max_ratio_per_order
        .iter()
        .fold(0.0f64, |a, &r| a.max(r));
    let elapsed = started.elapsed().as_secs_f64();
    let pass = fitted.rate >= 0.19 && report.passes() && elapsed < 5.0;
    eprintln!(
        "criterion 01 deep-zero envelope: {} (fitted rate {:.6} >= 0.19, worst ratio {:.6} <= 1, {:.2} s < 5 s)",
        if pass { "PASS" } else { "FAIL" },
        fitted.rate,
        worst,
        elapsed
    );
    assert!(fitted.rate >= 0.19, "fitted rate {}", fitted.rate);
    assert!(report.passes(), "ratios {:?}", report.max_ratio_per_order);
    assert!(elapsed < 5.0, "took {elapsed} s");
}

#[test]
fn criterion_02_pure_gaussian_mode_matches_the_closed_form() {
    let sp = Spectrum::with_defaults(Generator::gaussian_mode(1.0).unwrap()).unwrap();
    let mut worst = 0.0f64;
    for &x in &linspace(-10.0, 10.0, 2001) {
        worst = worst.max((sp.eval(x) - gaussian_transform(1.0, x)).abs());
    }
    let pass = worst <= 1e-9;
    eprintln!(
        "criterion 02 Gaussian oracle: {} (max quadrature error {:.3e} <= 1e-9)",
        if pass { "PASS" } else { "FAIL" },
        worst
    );
    assert!(worst <= 1e-9, "max error {worst:e}");
}

#[test]
fn criterion_03_periodization_matches_its_fourier_sum() {
    // Flat-zero generator: periodization against the truncated Fourier sum.
    let sp = standard_spectrum();
    let mut worst = 0.0f64;
    for i in 0..50 {
        let t = i as f64 / 50.0;
        worst = worst.max(sp.poisson_discrepancy(t, 8, 32));
    }
    // Pure Gaussian mode: the same identity, where both sides are theta
    // sums with closed-form terms.
    let gauss = Spectrum::with_defaults(Generator::gaussian_mode(1.0).unwrap()).unwrap();
    let mut worst_theta = 0.0f64;
    for i in 0..50 {
        let t = i as f64 / 50.0;
        worst_theta = worst_theta.max(gauss.poisson_discrepancy(t, 8, 32));
    }
    let pass = worst <= 1e-8 && worst_theta <= 1e-10;
    eprintln!(
        "criterion 03 periodization identity: {} (flat-zero gap {:.3e} vs 1e-8; theta gap {:.3e} vs 1e-10)",
        if pass { "PASS" } else { "FAIL" },
        worst,
        worst_theta
    );
    assert!(worst_theta <= 1e-10, "theta gap {worst_theta:e}");
    // The truncated Fourier sum carries a tail near 7e-8 at this truncation
    // depth (the transform decays polynomially, not exponentially); the
    // strict gate is kept and currently measures above it.
    assert!(worst <= 1e-8, "flat-zero gap {worst:e} exceeds 1e-8");
}

#[test]
fn criterion_04_periodization_has_a_flat_zero_at_the_integers() {
    let sp = standard_spectrum();
    let ts = [0.3, 0.1, 0.05, 0.02];
    let values: Vec<f64> = ts.iter().map(|&t| sp.periodize(t, 8)).collect();
    let inv_t: Vec<f64> = ts.iter().map(|&t| 1.0 / t).collect();
    let log_v: Vec<f64> = values.iter().map(|&v| v.ln()).collect();
    let (_, slope, _) = line_fit(&inv_t, &log_v);
    let c2_hat = -slope;
    // Raise the amplitude until the envelope dominates every sample, then
    // confirm it actually does.
    let c_hat = ts
        .iter()
        .zip(&values)
        .map(|(&t, &v)| v * (c2_hat / t).exp())
        .fold(0.0f64, f64::max);
    let holds = ts
        .iter()
        .zip(&values)
        .all(|(&t, &v)| v <= c_hat * (-c2_hat / t).exp() * (1.0 + 1e-12));
    let pass = c2_hat > 0.0 && holds;
    eprintln!(
        "criterion 04 flat zero of the periodization: {} (fitted rate {:.4} > 0, envelope holds at {:?})",
        if pass { "PASS" } else { "FAIL" },
        c2_hat,
        ts
    );
    assert!(c2_hat > 0.0, "fitted rate {c2_hat}");
    assert!(holds);
}

#[test]
fn criterion_05_mollifier_normalization_and_duality() {
    let grid = linspace(-10.0, 10.0, 401);
    let mut worst_mass = 0.0f64;
    let mut worst_duality = 0.0f64;
    for order in [2usize, 4, 6] {
        for width in [0.05, 0.02] {
            let mp = MollifierPair::new(order, width).unwrap();
            assert_eq!(mp.multiplier(0.0), 1.0, "multiplier at 0 must be exact");
            worst_mass = worst_mass.max((mp.kernel_mass() - 1.0).abs());
            worst_duality = worst_duality.max(mp.duality_gap(&grid));
        }
    }
    let pass = worst_mass <= 1e-10 && worst_duality <= 1e-8;
    eprintln!(
        "criterion 05 mollifier identities: {} (multiplier(0) exact; |mass - 1| {:.3e} <= 1e-10; duality gap {:.3e} <= 1e-8)",
        if pass { "PASS" } else { "FAIL" },
        worst_mass,
        worst_duality
    );
    assert!(worst_mass <= 1e-10, "mass defect {worst_mass:e}");
    assert!(worst_duality <= 1e-8, "duality gap {worst_duality:e}");
}

#[test]
fn criterion_06_smoothing_contracts_derivatives_with_sharp_support() {
    let mp = MollifierPair::new(4, 0.02).unwrap();
    let bump = Bump::new(0.3).unwrap();
    let mut lines = Vec::new();
    let mut all = true;
    for k in 0..=2 {
        let report = smoothing_inequality_check(&mp, &bump, k).unwrap();
        all = all && report.pass && report.support_ok;
        lines.push(format!(
            "k={k}: sup {:.4} <= bound {:.4}, support ok {}",
            report.sup_smoothed, report.sup_bound, report.support_ok
        ));
        assert!(report.support_ok, "smoothed bump leaked outside its support");
        assert!(
            report.pass,
            "order {k}: sup {} exceeds {}",
            report.sup_smoothed, report.sup_bound
        );
    }
    eprintln!(
        "criterion 06 smoothing inequality: {} ({})",
        if all { "PASS" } else { "FAIL" },
        lines.join("; ")
    );
}

#[test]
fn criterion_07_transform_gaps_obey_the_mean_value_bound() {
    let sp = standard_spectrum();
    // Numerical sup of |transform'| is 0.75874; 0.7588 is that plus margin.
    let deriv_bound = 0.7588;
    let mut worst_ratio = 0.0f64;
    let mut worst_fit = 0.0f64;
    for scheme in [Scheme::Alternating, Scheme::Random, Scheme::Constant] {
        for seed in 0..20u64 {
            let lattice = PerturbedLattice::new(24, 0.5, 0.5, scheme, seed).unwrap();
            let report = mean_value_gap_check(&sp, &lattice, deriv_bound).unwrap();
            worst_ratio = worst_ratio.max(report.worst_ratio);
            assert!(
                report.pass,
                "{scheme:?} seed {seed}: worst gap ratio {}",
                report.worst_ratio
            );
            let gaps: Vec<(f64, f64)> = report
                .samples
                .iter()
                .map(|s| (s.index as f64, s.gap))
                .collect();
            let fit = decay_fit(&gaps).unwrap();
            worst_fit = worst_fit.max(fit.ratio_hat);
            assert!(
                fit.ratio_hat <= 0.55,
                "{scheme:?} seed {seed}: gap decay ratio {}",
                fit.ratio_hat
            );
        }
    }
    eprintln!(
        "criterion 07 mean-value gaps: PASS (60 lattices, |n| <= 24; worst gap/allowance {:.4} <= 1; worst fitted ratio {:.4} <= 0.55)",
        worst_ratio, worst_fit
    );
}

#[test]
fn criterion_08_pairings_decay_in_frequency_and_in_support() {
    let sp = standard_spectrum();
    let mp = MollifierPair::new(4, 0.02).unwrap();
    let bump = Bump::new(0.3).unwrap();
    let plain = KHatElement::single(sp.clone());
    let modulated = KHatElement::modulated(sp.clone(), 2);
    let decay_plain = pairing_decay_experiment(&plain, &mp, &bump, 32).unwrap();
    let decay_mod = pairing_decay_experiment(&modulated, &mp, &bump, 32).unwrap();
    let sweep = radius_sweep(&plain, &mp, &[0.4, 0.3, 0.2, 0.15, 0.1], 32).unwrap();
    let pass = decay_plain.rate > 0.0 && decay_mod.rate > 0.0 && sweep.slope < 0.0;
    eprintln!(
        "criterion 08 pairing decay: {} (rates {:.4} and {:.4} > 0; support-sweep slope {:.4} < 0)",
        if pass { "PASS" } else { "FAIL" },
        decay_plain.rate,
        decay_mod.rate,
        sweep.slope
    );
    assert!(decay_plain.rate > 0.0, "rate {}", decay_plain.rate);
    assert!(decay_mod.rate > 0.0, "rate {}", decay_mod.rate);
    assert!(sweep.slope < 0.0, "slope {}", sweep.slope);
}

#[test]
fn criterion_09_completeness_curves_never_rise() {
    let started = Instant::now();
    let sp = fine_spectrum();
    let m_list = [4usize, 8, 16, 24];
    let mut curves = 0;
    for target in Target::ALL {
        let f = move |x: f64| target.eval(x);
        for p in [1.2, 1.5, 2.0, 3.0] {
            let spec = CurveSpec {
                spectrum: &sp,
                amplitude: 0.5,
                ratio: 0.5,
                scheme: Scheme::Alternating,
                seed: 0,
                step: 0.05,
                p,
                target: &f,
                weight: None,
                tau: None,
                smoothing: None,
                extent: None,
            };
            let curve = completeness_curve(&spec, &m_list).unwrap();
            for w in curve.windows(2) {
                assert!(
                    w[1].residual_norm <= w[0].residual_norm + 1e-10,
                    "{target} p={p}: residual rose {} -> {}",
                    w[0].residual_norm,
                    w[1].residual_norm
                );
            }
            curves += 1;
        }
    }

    // A target that lies in the span of every lattice in the family is
    // recovered to working precision.
    let translate = sp.clone();
    let center = PerturbedLattice::new(4, 0.5, 0.5, Scheme::Alternating, 0)
        .unwrap()
        .point(0);
    let in_span = move |x: f64| translate.eval(x - center);
    let spec = CurveSpec {
        spectrum: &sp,
        amplitude: 0.5,
        ratio: 0.5,
        scheme: Scheme::Alternating,
        seed: 0,
        step: 0.05,
        p: 2.0,
        target: &in_span,
        weight: None,
        tau: None,
        smoothing: None,
        extent: None,
    };
    let curve = completeness_curve(&spec, &m_list).unwrap();
    let in_span_worst = curve
        .iter()
        .map(|p| p.residual_norm)
        .fold(0.0f64, f64::max);
    assert!(
        in_span_worst <= 1e-6,
        "in-span residuals {:?}",
        curve.iter().map(|p| p.residual_norm).collect::<Vec<_>>()
    );

    // Per-iteration residual monotonicity of the reweighted solver.
    let lattice = PerturbedLattice::new(8, 0.5, 0.5, Scheme::Alternating, 0).unwrap();
    for target in Target::ALL {
        let f = move |x: f64| target.eval(x);
        for p in [1.2, 1.5, 3.0] {
            let problem =
                ApproxProblem::new(sp.clone(), lattice.clone(), 0.05, p, &f, None).unwrap();
            let result = problem.solve_best_approx().unwrap();
            for w in result.residual_history.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "{target} p={p}: history rose {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass = elapsed < 120.0;
    eprintln!(
        "criterion 09 completeness curves: {} ({} curves nonincreasing over M={:?}; in-span residual {:.2e} <= 1e-6; 12 reweighted histories monotone within 1e-12; {:.1} s < 120 s)",
        if pass { "PASS" } else { "FAIL" },
        curves,
        m_list,
        in_span_worst,
        elapsed
    );
    assert!(elapsed < 120.0, "took {elapsed} s");
}

#[test]
fn criterion_10_solvers_match_independent_oracles() {
    // Ridge-regularized weighted least squares against a plain SVD solve.
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    let mut worst_rel = 0.0f64;
    for _ in 0..100 {
        let a = DMatrix::from_fn(30, 10, |_, _| rng.gen_range(-1.0..=1.0));
        let weights: Vec<f64> = (0..30).map(|_| rng.gen_range(0.5..=2.0)).collect();
        let target: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let ours = weighted_ridge_solve(&a, &weights, &target, None).unwrap();
        let mut b = a.clone();
        let mut y = DVector::from_column_slice(&target);
        for (i, &w) in weights.iter().enumerate() {
            b.row_mut(i).scale_mut(w.sqrt());
            y[i] *= w.sqrt();
        }
        let oracle = b.svd(true, true).solve(&y, 0.0).unwrap();
        let diff: f64 = ours
            .coefficients
            .iter()
            .zip(oracle.iter())
            .map(|(&c, &o)| (c - o) * (c - o))
            .sum::<f64>()
            .sqrt();
        worst_rel = worst_rel.max(diff / oracle.norm());
    }
    assert!(worst_rel <= 1e-8, "worst relative gap {worst_rel:e}");

    // Subgradient annihilator hunt against a dense sphere search in three
    // dimensions: same discrete constraint rows, minimum over the unit
    // 2-norm sphere.
    let sp = standard_spectrum();
    let lattice = PerturbedLattice::new(6, 0.5, 0.5, Scheme::Alternating, 0).unwrap();
    let probe = annihilator_probe(&sp, &lattice, 2.0, 3, 123).unwrap();

    let h_grid = linspace(-1.0, 1.0, 3);
    let step = h_grid[1] - h_grid[0];
    let rows: Vec<[f64; 3]> = lattice
        .points()
        .iter()
        .map(|&l| {
            let mut row = [0.0; 3];
            for (i, &x) in h_grid.iter().enumerate() {
                let w = if i == 0 || i == 2 { 0.5 } else { 1.0 };
                row[i] = w * step * sp.eval(l - x);
            }
            row
        })
        .collect();
    let objective = |h: &[f64; 3]| -> f64 {
        rows.iter()
            .map(|r| (r[0] * h[0] + r[1] * h[1] + r[2] * h[2]).abs())
            .fold(0.0f64, f64::max)
    };
    // Stage 1: Fibonacci sphere sweep.
    let n = 200_000;
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut best = [0.0f64; 3];
    let mut best_val = f64::INFINITY;
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let th = golden * i as f64;
        let h = [r * th.cos(), r * th.sin(), z];
        let v = objective(&h);
        if v < best_val {
            best_val = v;
            best = h;
        }
    }
    // Stage 2: two rounds of tangent-plane refinement around the best
    // direction, shrinking the patch a hundredfold between rounds.
    for radius in [1e-2, 1e-4] {
        let axis = if best[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let mut u = [
            best[1] * axis[2] - best[2] * axis[1],
            best[2] * axis[0] - best[0] * axis[2],
            best[0] * axis[1] - best[1] * axis[0],
        ];
        let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        u = [u[0] / un, u[1] / un, u[2] / un];
        let v = [
            best[1] * u[2] - best[2] * u[1],
            best[2] * u[0] - best[0] * u[2],
            best[0] * u[1] - best[1] * u[0],
        ];
        let mut improved = best;
        for si in -50i32..=50 {
            for ti in -50i32..=50 {
                let s = radius * si as f64 / 50.0;
                let t = radius * ti as f64 / 50.0;
                let mut h = [
                    best[0] + s * u[0] + t * v[0],
                    best[1] + s * u[1] + t * v[1],
                    best[2] + s * u[2] + t * v[2],
                ];
                let hn = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
                h = [h[0] / hn, h[1] / hn, h[2] / hn];
                let val = objective(&h);
                if val < best_val {
                    best_val = val;
                    improved = h;
                }
            }
        }
        best = improved;
    }
    let gap = (probe.minimum - best_val).abs();
    let pass = worst_rel <= 1e-8 && gap <= 1e-4;
    eprintln!(
        "criterion 10 solver oracles: {} (100 ridge solves within {:.2e} of SVD, tol 1e-8; annihilator {:.6e} vs sphere search {:.6e}, gap {:.2e} <= 1e-4)",
        if pass { "PASS" } else { "FAIL" },
        worst_rel,
        probe.minimum,
        best_val,
        gap
    );
    assert!(
        gap <= 1e-4,
        "probe {} vs dense search {}",
        probe.minimum,
        best_val
    );
}

#[test]
fn criterion_11_outputs_are_byte_identical_across_runs_and_threads() {
    use std::collections::BTreeMap;
    use std::process::Command;

    let binary = env!("CARGO_BIN_EXE_deepzero");
    let mut checked = Vec::new();
    for subcommand in ["generator", "uniqueness", "approx"] {
        let mut captures: Vec<BTreeMap<String, Vec<u8>>> = Vec::new();
        for threads in ["1", "4"] {
            for _rep in 0..2 {
                // Identical inputs must give identical bytes. The manifest
                // echoes the output path, so every run names it the same way
                // and uniqueness comes from the working directory instead.
                let dir = tempfile::TempDir::new().unwrap();
                let status = Command::new(binary)
                    .args([subcommand, "--out", "out", "--threads", threads])
                    .current_dir(dir.path())
                    .status()
                    .unwrap();
                assert!(
                    status.success(),
                    "{subcommand} with {threads} threads exited with {status}"
                );
                let mut files = BTreeMap::new();
                for entry in std::fs::read_dir(dir.path().join("out")).unwrap() {
                    let path = entry.unwrap().path();
                    files.insert(
                        path.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(&path).unwrap(),
                    );
                }
                assert!(!files.is_empty(), "{subcommand} wrote nothing");
                captures.push(files);
            }
        }
        for other in &captures[1..] {
            assert_eq!(
                captures[0].keys().collect::<Vec<_>>(),
                other.keys().collect::<Vec<_>>(),
                "{subcommand}: file sets differ"
            );
            for (name, bytes) in &captures[0] {
                assert_eq!(
                    bytes, &other[name],
                    "{subcommand}/{name} differs between runs"
                );
            }
        }
        checked.push(format!("{subcommand} ({} files x 4 runs)", captures[0].len()));
    }
    eprintln!(
        "criterion 11 reproducibility: PASS (byte-identical at 1 and 4 threads: {})",
        checked.join(", ")
    );
}
