//! Best approximation of grid-sampled targets by finite combinations of
//! transform translates along a perturbed lattice: weighted-Lp residuals on
//! a uniform grid, a ridge-regularized p = 2 solver, IRLS with a monotone
//! line search for other p, completeness curves over growing lattices, an
//! integer-versus-perturbed contrast, and a dual annihilator probe.

use crate::error::{Error, Result};
use crate::lattice::{PerturbedLattice, Scheme};
use crate::numeric::{compensated_sum, linspace};
use crate::spectrum::Spectrum;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Iteration cap for the reweighted solver.
const MAX_IRLS_ITERATIONS: usize = 200;

/// Relative residual-change threshold at which IRLS is declared converged.
const IRLS_RELATIVE_TOLERANCE: f64 = 1e-8;

/// Default ridge size relative to the largest normal-matrix eigenvalue.
const RIDGE_FRACTION: f64 = 1e-10;

/// Grid-sampled targets shipped with the solver, chosen for varied spectral
/// content.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// `exp(-(x - 0.37)^2)`.
    ShiftedGaussian,
    /// `exp(-(x - 1.1)^2) - exp(-2 (x + 0.7)^2)`.
    GaussianDifference,
    /// `(tanh(4 (x + 1)) - tanh(4 (x - 1))) / 2`.
    SmoothedIndicator,
    /// `cos(5 x) exp(-x^2 / 2)`.
    ModulatedGaussian,
}

impl Target {
    pub const ALL: [Target; 4] = [
        Target::ShiftedGaussian,
        Target::GaussianDifference,
        Target::SmoothedIndicator,
        Target::ModulatedGaussian,
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Target::ShiftedGaussian => (-(x - 0.37) * (x - 0.37)).exp(),
            Target::GaussianDifference => {
                (-(x - 1.1) * (x - 1.1)).exp() - (-2.0 * (x + 0.7) * (x + 0.7)).exp()
            }
            Target::SmoothedIndicator => {
                0.5 * ((4.0 * (x + 1.0)).tanh() - (4.0 * (x - 1.0)).tanh())
            }
            Target::ModulatedGaussian => (5.0 * x).cos() * (-0.5 * x * x).exp(),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Target::ShiftedGaussian => "gaussian",
            Target::GaussianDifference => "gaussian-difference",
            Target::SmoothedIndicator => "smoothed-indicator",
            Target::ModulatedGaussian => "modulated-gaussian",
        };
        f.write_str(s)
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Target::ShiftedGaussian),
            "gaussian-difference" => Ok(Target::GaussianDifference),
            "smoothed-indicator" => Ok(Target::SmoothedIndicator),
            "modulated-gaussian" => Ok(Target::ModulatedGaussian),
            other => Err(Error::Parse(format!("unknown target `{other}`"))),
        }
    }
}

/// Conjugate exponent `p / (p - 1)`.
pub fn dual_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Matrix of translate samples: entry `(i, j)` is `transform(t_i - point_j)`.
/// Every difference must stay inside the transform's certified band.
pub fn design_matrix_points(
    spectrum: &Spectrum,
    grid: &[f64],
    points: &[f64],
) -> Result<DMatrix<f64>> {
    if grid.is_empty() || points.is_empty() {
        return Err(Error::DegenerateGrid(
            "design matrix needs nonempty grid and point sets".into(),
        ));
    }
    let band = spectrum.quadrature().band_limit();
    let (t_min, t_max) = grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
            (lo.min(t), hi.max(t))
        });
    let (l_min, l_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
            (lo.min(l), hi.max(l))
        });
    let worst = (t_max - l_min).max(l_max - t_min);
    if worst > band {
        return Err(Error::DegenerateGrid(format!(
            "largest |t - lambda| = {worst:.3} exceeds the certified band {band:.3}; \
             rebuild the transform with a finer quadrature step"
        )));
    }
    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&t| points.iter().map(|&l| spectrum.eval(t - l)).collect())
        .collect();
    Ok(DMatrix::from_row_iterator(
        grid.len(),
        points.len(),
        rows.into_iter().flatten(),
    ))
}

/// Output of one ridge-regularized weighted least-squares solve.
#[derive(Clone, Debug, Serialize)]
pub struct RidgeSolution {
    pub coefficients: Vec<f64>,
    /// Ridge actually applied (after any retries).
    pub tau: f64,
    /// Largest-to-smallest eigenvalue ratio of the regularized normal
    /// matrix, estimated by forward and inverse power iterations.
    pub condition_estimate: f64,
    /// How many times the ridge had to be enlarged before the factorization
    /// succeeded.
    pub retries: usize,
}

fn power_iteration(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = m * &v;
        lambda = w.norm();
        if lambda == 0.0 {
            return 0.0;
        }
        v = w / lambda;
    }
    lambda
}

fn smallest_eigen_estimate(chol: &Cholesky<f64, Dyn>, n: usize) -> f64 {
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut mu = 0.0;
    for _ in 0..60 {
        let w = chol.solve(&v);
        mu = w.norm();
        if mu == 0.0 {
            return f64::INFINITY;
        }
        v = w / mu;
    }
    1.0 / mu
}

/// Solves `min_c sum_i row_weights[i] (target[i] - (A c)[i])^2 + tau |c|^2`
/// through the normal equations and a Cholesky factorization. With `tau`
/// absent, the ridge defaults to a small fraction of the largest eigenvalue
/// of the weighted normal matrix; a failed factorization retries with a
/// hundredfold larger ridge (recorded in the result).
pub fn weighted_ridge_solve(
    a: &DMatrix<f64>,
    row_weights: &[f64],
    target: &[f64],
    tau: Option<f64>,
) -> Result<RidgeSolution> {
    let (n, m) = a.shape();
    if row_weights.len() != n || target.len() != n {
        return Err(Error::InvalidParameter {
            name: "row_weights",
            reason: format!(
                "matrix has {n} rows but got {} weights and {} target values",
                row_weights.len(),
                target.len()
            ),
        });
    }
    if row_weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "row_weights",
            reason: "all row weights must be positive and finite".into(),
        });
    }
    let mut weighted = a.clone();
    for (i, &w) in row_weights.iter().enumerate() {
        weighted.row_mut(i).scale_mut(w);
    }
    let normal = a.transpose() * &weighted;
    let rhs = weighted.transpose() * DVector::from_column_slice(target);
    let lambda_max = power_iteration(&normal);
    if lambda_max == 0.0 {
        return Ok(RidgeSolution {
            coefficients: vec![0.0; m],
            tau: tau.unwrap_or(0.0),
            condition_estimate: 1.0,
            retries: 0,
        });
    }
    let mut ridge = tau.unwrap_or(RIDGE_FRACTION * lambda_max);
    let mut retries = 0usize;
    let chol = loop {
        let shifted = &normal + DMatrix::identity(m, m) * ridge;
        match Cholesky::new(shifted) {
            Some(c) => break c,
            None => {
                retries += 1;
                if retries > 3 {
                    return Err(Error::SingularSystem(format!(
                        "normal matrix refused Cholesky even with ridge {ridge:e}"
                    )));
                }
                ridge = if ridge > 0.0 {
                    ridge * 100.0
                } else {
                    RIDGE_FRACTION * lambda_max
                };
            }
        }
    };
    let coefficients = chol.solve(&rhs).iter().copied().collect();
    let lambda_min = smallest_eigen_estimate(&chol, m);
    Ok(RidgeSolution {
        coefficients,
        tau: ridge,
        condition_estimate: if lambda_min > 0.0 {
            lambda_max / lambda_min
        } else {
            f64::INFINITY
        },
        retries,
    })
}

/// A discretized best-approximation problem: minimize the weighted grid-Lp
/// norm of `target - sum_j c_j transform(t - lambda_j)` over coefficients.
pub struct ApproxProblem {
    spectrum: Spectrum,
    lattice: PerturbedLattice,
    grid: Vec<f64>,
    step: f64,
    p: f64,
    weight: Option<Vec<f64>>,
    target: Vec<f64>,
    smoothing: Option<f64>,
}

/// Solution of an [`ApproxProblem`], with solver diagnostics attached.
#[derive(Clone, Debug, Serialize)]
pub struct ApproxResult {
    /// One coefficient per lattice point, ascending in the index.
    pub coefficients: Vec<f64>,
    /// `(sum_i w_i step |r_i|^p)^(1/p)` at the returned coefficients.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub condition_estimate: f64,
    pub tau: f64,
    /// Residual smoothing floor used by the reweighting (0 for p = 2).
    pub delta: f64,
    /// Ridge enlargements that were needed across all inner solves.
    pub tau_retries: usize,
    /// Residual norm after the initialization and after every accepted
    /// iteration; nonincreasing by construction.
    pub residual_history: Vec<f64>,
}

impl ApproxProblem {
    /// Builds the problem on an automatically sized symmetric grid: extent
    /// `max(12, max |lambda| + 3)` with the given step. `p` must be at least
    /// 1, and plain `p = 1` is refused without a weight — only the weighted
    /// problem is posed there.
    pub fn new(
        spectrum: Spectrum,
        lattice: PerturbedLattice,
        step: f64,
        p: f64,
        target: &dyn Fn(f64) -> f64,
        weight: Option<&dyn Fn(f64) -> f64>,
    ) -> Result<Self> {
        let reach = lattice
            .points()
            .iter()
            .fold(0.0f64, |acc, &x| acc.max(x.abs()));
        let extent = (reach + 3.0).max(12.0);
        Self::with_extent(spectrum, lattice, extent, step, p, target, weight)
    }

    /// Same as [`ApproxProblem::new`] with an explicit grid extent, which
    /// must still cover every lattice point with margin at least 3.
    pub fn with_extent(
        spectrum: Spectrum,
        lattice: PerturbedLattice,
        extent: f64,
        step: f64,
        p: f64,
        target: &dyn Fn(f64) -> f64,
        weight: Option<&dyn Fn(f64) -> f64>,
    ) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter {
                name: "step",
                reason: format!("must be positive and finite, got {step}"),
            });
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("exponent must be finite and at least 1, got {p}"),
            });
        }
        if p == 1.0 && weight.is_none() {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: "p = 1 needs a weight; the unweighted problem is not posed here".into(),
            });
        }
        let reach = lattice
            .points()
            .iter()
            .fold(0.0f64, |acc, &x| acc.max(x.abs()));
        if !(extent >= reach + 3.0) || !extent.is_finite() {
            return Err(Error::InvalidParameter {
                name: "extent",
                reason: format!(
                    "grid extent {extent} must cover the lattice reach {reach} with margin 3"
                ),
            });
        }
        let half_steps = (extent / step).ceil() as i64;
        let grid: Vec<f64> = (-half_steps..=half_steps)
            .map(|i| i as f64 * step)
            .collect();
        let target: Vec<f64> = grid.iter().map(|&t| target(t)).collect();
        let weight: Option<Vec<f64>> = weight.map(|w| grid.iter().map(|&t| w(t)).collect());
        if let Some(ws) = &weight {
            if ws.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "weight",
                    reason: "weights must be positive and finite on the whole grid".into(),
                });
            }
        }
        Ok(Self {
            spectrum,
            lattice,
            grid,
            step,
            p,
            weight,
            target,
            smoothing: None,
        })
    }

    /// Overrides the residual smoothing floor used by the reweighted solver
    /// (default: a small fraction of the target's sup norm).
    pub fn set_smoothing(&mut self, delta: f64) -> Result<()> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("smoothing floor must be positive and finite, got {delta}"),
            });
        }
        self.smoothing = Some(delta);
        Ok(())
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn lattice(&self) -> &PerturbedLattice {
        &self.lattice
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// `(sum_i w_i step |values_i|^p)^(1/p)` — the discretized norm this
    /// problem minimizes.
    pub fn grid_norm(&self, values: &[f64]) -> f64 {
        let terms = values.iter().enumerate().map(|(i, &v)| {
            let w = self.weight.as_ref().map_or(1.0, |ws| ws[i]);
            w * self.step * v.abs().powf(self.p)
        });
        compensated_sum(terms).powf(1.0 / self.p)
    }

    /// Sampled translates along the lattice.
    pub fn design_matrix(&self) -> Result<DMatrix<f64>> {
        design_matrix_points(&self.spectrum, &self.grid, self.lattice.points())
    }

    /// Best approximation with this problem's exponent: a single ridge
    /// solve at p = 2, IRLS with a residual-nonincreasing line search
    /// otherwise.
    pub fn solve_best_approx(&self) -> Result<ApproxResult> {
        let a = self.design_matrix()?;
        self.solve_with(&a, None, None)
    }

    fn residuals(&self, a: &DMatrix<f64>, coefficients: &[f64]) -> Vec<f64> {
        let fit = a * DVector::from_column_slice(coefficients);
        self.target
            .iter()
            .zip(fit.iter())
            .map(|(&g, &v)| g - v)
            .collect()
    }

    /// Core solver, reusable with a prebuilt matrix, a shared ridge, and a
    /// warm-start coefficient vector.
    pub fn solve_with(
        &self,
        a: &DMatrix<f64>,
        shared_tau: Option<f64>,
        warm: Option<&[f64]>,
    ) -> Result<ApproxResult> {
        let base_weights: Vec<f64> = (0..self.grid.len())
            .map(|i| self.weight.as_ref().map_or(1.0, |ws| ws[i]) * self.step)
            .collect();
        if self.p == 2.0 {
            let sol = weighted_ridge_solve(a, &base_weights, &self.target, shared_tau)?;
            let mut coefficients = sol.coefficients;
            let mut residual_norm = self.grid_norm(&self.residuals(a, &coefficients));
            if let Some(w) = warm {
                let warm_norm = self.grid_norm(&self.residuals(a, w));
                if warm_norm < residual_norm {
                    coefficients = w.to_vec();
                    residual_norm = warm_norm;
                }
            }
            return Ok(ApproxResult {
                residual_norm,
                coefficients,
                iterations: 1,
                converged: true,
                condition_estimate: sol.condition_estimate,
                tau: sol.tau,
                delta: 0.0,
                tau_retries: sol.retries,
                residual_history: vec![residual_norm],
            });
        }

        let sup_target = self.target.iter().fold(0.0f64, |acc, &g| acc.max(g.abs()));
        if sup_target == 0.0 {
            return Ok(ApproxResult {
                coefficients: vec![0.0; self.lattice.points().len()],
                residual_norm: 0.0,
                iterations: 0,
                converged: true,
                condition_estimate: 1.0,
                tau: 0.0,
                delta: 0.0,
                tau_retries: 0,
                residual_history: vec![0.0],
            });
        }
        let delta = self.smoothing.unwrap_or(1e-8 * sup_target);
        let mut tau_retries = 0usize;
        let mut last_tau = 0.0;
        let mut last_condition = 1.0;
        let mut coefficients = match warm {
            Some(w) => w.to_vec(),
            None => {
                let init = weighted_ridge_solve(a, &base_weights, &self.target, shared_tau)?;
                tau_retries += init.retries;
                last_tau = init.tau;
                last_condition = init.condition_estimate;
                init.coefficients
            }
        };
        let mut residuals = self.residuals(a, &coefficients);
        let mut current = self.grid_norm(&residuals);
        let mut history = vec![current];
        let mut converged = false;
        let mut iterations = 0;
        for k in 1..=MAX_IRLS_ITERATIONS {
            iterations = k;
            let reweighted: Vec<f64> = base_weights
                .iter()
                .zip(&residuals)
                .map(|(&w, &r)| w * (r * r + delta * delta).powf(0.5 * self.p - 1.0))
                .collect();
            let inner = weighted_ridge_solve(a, &reweighted, &self.target, shared_tau)?;
            tau_retries += inner.retries;
            last_tau = inner.tau;
            last_condition = inner.condition_estimate;
            // Step-halving line search: only residual-nonincreasing iterates
            // are accepted, which keeps the recorded history monotone for
            // every exponent.
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha >= 1e-10 {
                let trial: Vec<f64> = coefficients
                    .iter()
                    .zip(&inner.coefficients)
                    .map(|(&c, &d)| c + alpha * (d - c))
                    .collect();
                let trial_res = self.residuals(a, &trial);
                let trial_norm = self.grid_norm(&trial_res);
                if trial_norm <= current {
                    accepted = Some((trial, trial_res, trial_norm));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                None => {
                    // No direction of decrease left at line-search resolution.
                    converged = true;
                    break;
                }
                Some((trial, trial_res, trial_norm)) => {
                    let previous = current;
                    coefficients = trial;
                    residuals = trial_res;
                    current = trial_norm;
                    history.push(current);
                    if previous - current <= IRLS_RELATIVE_TOLERANCE * previous.max(1e-300) {
                        converged = true;
                        break;
                    }
                }
            }
        }
        Ok(ApproxResult {
            coefficients,
            residual_norm: current,
            iterations,
            converged,
            condition_estimate: last_condition,
            tau: last_tau,
            delta,
            tau_retries,
            residual_history: history,
        })
    }
}

/// Everything a completeness curve needs besides the lattice sizes.
pub struct CurveSpec<'a> {
    pub spectrum: &'a Spectrum,
    pub amplitude: f64,
    pub ratio: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub step: f64,
    pub p: f64,
    pub target: &'a dyn Fn(f64) -> f64,
    pub weight: Option<&'a dyn Fn(f64) -> f64>,
    /// Ridge shared by every solve on the curve; computed from the largest
    /// p = 2 system when absent.
    pub tau: Option<f64>,
    /// Residual smoothing floor for the reweighted solver, when overridden.
    pub smoothing: Option<f64>,
    /// Grid extent override; sized for the largest lattice when absent.
    pub extent: Option<f64>,
}

/// One lattice size on a completeness curve.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    pub half_count: usize,
    pub p: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub condition_estimate: f64,
    pub tau: f64,
    pub delta: f64,
    pub converged: bool,
}

/// Best-approximation residuals over nested lattices `|n| <= M` for each M
/// in ascending `m_list`, on one fixed grid sized for the largest lattice.
/// Every solve is warm-started from the previous (smaller) solution padded
/// with zeros, and p = 2 shares one ridge across sizes, so the reported
/// residuals never increase.
pub fn completeness_curve(spec: &CurveSpec<'_>, m_list: &[usize]) -> Result<Vec<CurvePoint>> {
    if m_list.is_empty() || m_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "m_list",
            reason: "lattice sizes must be nonempty and strictly ascending".into(),
        });
    }
    let largest = *m_list.last().unwrap();
    let top_lattice =
        PerturbedLattice::new(largest, spec.amplitude, spec.ratio, spec.scheme, spec.seed)?;
    let reach = top_lattice
        .points()
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let extent = spec.extent.unwrap_or_else(|| (reach + 3.0).max(12.0));
    let top_problem = ApproxProblem::with_extent(
        spec.spectrum.clone(),
        top_lattice,
        extent,
        spec.step,
        spec.p,
        spec.target,
        spec.weight,
    )?;
    let top_matrix = top_problem.design_matrix()?;
    // One ridge for every size, taken from the largest system, keeps the
    // p = 2 solves comparable across the curve.
    let shared_tau = if spec.tau.is_some() {
        spec.tau
    } else if spec.p == 2.0 {
        let weights: Vec<f64> = top_problem
            .grid()
            .iter()
            .enumerate()
            .map(|(i, _)| {
                top_problem
                    .weight
                    .as_ref()
                    .map_or(1.0, |ws| ws[i])
                    * spec.step
            })
            .collect();
        let mut scaled = top_matrix.clone();
        for (i, &w) in weights.iter().enumerate() {
            scaled.row_mut(i).scale_mut(w);
        }
        Some(RIDGE_FRACTION * power_iteration(&(top_matrix.transpose() * &scaled)))
    } else {
        None
    };
    let mut curve = Vec::with_capacity(m_list.len());
    let mut previous: Option<(usize, Vec<f64>)> = None;
    for &m in m_list {
        let lattice =
            PerturbedLattice::new(m, spec.amplitude, spec.ratio, spec.scheme, spec.seed)?;
        let mut problem = ApproxProblem::with_extent(
            spec.spectrum.clone(),
            lattice,
            extent,
            spec.step,
            spec.p,
            spec.target,
            spec.weight,
        )?;
        if let Some(delta) = spec.smoothing {
            problem.set_smoothing(delta)?;
        }
        let matrix = if m == largest {
            top_matrix.clone()
        } else {
            problem.design_matrix()?
        };
        let warm: Option<Vec<f64>> = previous.as_ref().map(|(pm, pc)| {
            let mut padded = vec![0.0; 2 * m + 1];
            let offset = m - pm;
            padded[offset..offset + pc.len()].copy_from_slice(pc);
            padded
        });
        let result = problem.solve_with(&matrix, shared_tau, warm.as_deref())?;
        curve.push(CurvePoint {
            half_count: m,
            p: spec.p,
            residual_norm: result.residual_norm,
            iterations: result.iterations,
            condition_estimate: result.condition_estimate,
            tau: result.tau,
            delta: result.delta,
            converged: result.converged,
        });
        previous = Some((m, result.coefficients));
    }
    Ok(curve)
}

/// Paired p = 2 residuals for the same target over the plain integers and
/// over a perturbed lattice of the same size — a report, not a verdict.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ContrastReport {
    pub half_count: usize,
    pub integer_residual: f64,
    pub perturbed_residual: f64,
    /// Ridge shared by the two solves.
    pub tau: f64,
}

/// Solves the p = 2 problem twice at equal size and settings: once on the
/// integers `-M..=M`, once on the perturbed points, sharing one grid and
/// one ridge.
pub fn integer_lattice_contrast(
    spectrum: &Spectrum,
    lattice: &PerturbedLattice,
    step: f64,
    target: &dyn Fn(f64) -> f64,
) -> Result<ContrastReport> {
    let problem = ApproxProblem::new(spectrum.clone(), lattice.clone(), step, 2.0, target, None)?;
    let integer_points: Vec<f64> = lattice.indices().map(|n| n as f64).collect();
    let a_perturbed = problem.design_matrix()?;
    let a_integer = design_matrix_points(spectrum, problem.grid(), &integer_points)?;
    let weights: Vec<f64> = vec![step; problem.grid().len()];
    let scale = |m: &DMatrix<f64>| {
        let mut s = m.clone();
        for (i, &w) in weights.iter().enumerate() {
            s.row_mut(i).scale_mut(w);
        }
        power_iteration(&(m.transpose() * &s))
    };
    let tau = RIDGE_FRACTION * scale(&a_perturbed).max(scale(&a_integer));
    let solve = |a: &DMatrix<f64>| -> Result<f64> {
        let sol = weighted_ridge_solve(a, &weights, problem.target(), Some(tau))?;
        Ok(problem.grid_norm(&problem.residuals(a, &sol.coefficients)))
    };
    Ok(ContrastReport {
        half_count: lattice.half_count(),
        integer_residual: solve(&a_integer)?,
        perturbed_residual: solve(&a_perturbed)?,
        tau,
    })
}

/// Convolution of the transform with grid-sampled values, read off at the
/// given points: trapezoid rule for `integral transform(point - x) h(x) dx`.
pub fn convolve_on_lattice(
    spectrum: &Spectrum,
    h: &[f64],
    h_grid: &[f64],
    points: &[f64],
) -> Result<Vec<f64>> {
    if h.len() != h_grid.len() || h.len() < 2 {
        return Err(Error::DegenerateGrid(format!(
            "need matching value/grid lengths of at least 2, got {} and {}",
            h.len(),
            h_grid.len()
        )));
    }
    let step = h_grid[1] - h_grid[0];
    if !(step > 0.0)
        || h_grid
            .windows(2)
            .any(|w| (w[1] - w[0] - step).abs() > 1e-12 * step.max(1.0))
    {
        return Err(Error::DegenerateGrid(
            "convolution grid must be uniform and increasing".into(),
        ));
    }
    let band = spectrum.quadrature().band_limit();
    let reach_x = h_grid[0].abs().max(h_grid[h_grid.len() - 1].abs());
    let reach_p = points.iter().fold(0.0f64, |acc, &p| acc.max(p.abs()));
    if reach_x + reach_p > band {
        return Err(Error::DegenerateGrid(format!(
            "convolution needs the transform out to {}, beyond the certified band {band:.3}",
            reach_x + reach_p
        )));
    }
    let last = h.len() - 1;
    Ok(points
        .iter()
        .map(|&p| {
            compensated_sum(h_grid.iter().zip(h).enumerate().map(|(i, (&x, &v))| {
                let w = if i == 0 || i == last { 0.5 } else { 1.0 };
                w * step * v * spectrum.eval(p - x)
            }))
        })
        .collect())
}

/// Best value found when hunting for a discrete annihilator.
#[derive(Clone, Debug, Serialize)]
pub struct AnnihilatorProbe {
    /// Smallest `max_lambda |(transform * h)(lambda)|` found over unit-norm
    /// candidates.
    pub minimum: f64,
    /// Candidate attaining it.
    pub h: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub q: f64,
    /// Whether the winning descent had stopped improving well before its
    /// iteration budget ran out.
    pub converged: bool,
}

/// Minimizes `max_lambda |(transform * h)(lambda)|` over vectors `h` on a
/// uniform grid in `[-1, 1]` with discrete l^q norm 1, by projected Polyak
/// subgradient descent from a fixed set of multi-starts plus seeded random
/// ones. The best value found is reported, never asserted to be the global
/// minimum.
pub fn annihilator_probe(
    spectrum: &Spectrum,
    lattice: &PerturbedLattice,
    q: f64,
    h_dim: usize,
    seed: u64,
) -> Result<AnnihilatorProbe> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: format!("dual exponent must be finite and at least 1, got {q}"),
        });
    }
    if h_dim < 2 {
        return Err(Error::InvalidParameter {
            name: "h_dim",
            reason: format!("need at least 2 grid values, got {h_dim}"),
        });
    }
    let h_grid = linspace(-1.0, 1.0, h_dim);
    let step = h_grid[1] - h_grid[0];
    let rows: Vec<Vec<f64>> = lattice
        .points()
        .iter()
        .map(|&l| {
            h_grid
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let w = if i == 0 || i == h_dim - 1 { 0.5 } else { 1.0 };
                    w * step * spectrum.eval(l - x)
                })
                .collect()
        })
        .collect();
    let norm_q = |h: &[f64]| -> f64 {
        compensated_sum(h.iter().map(|&v| v.abs().powf(q))).powf(1.0 / q)
    };
    let objective = |h: &[f64]| -> (f64, usize, f64) {
        let mut best = (0.0f64, 0usize, 1.0f64);
        for (j, row) in rows.iter().enumerate() {
            let dot: f64 = row.iter().zip(h).map(|(&a, &b)| a * b).sum();
            if dot.abs() >= best.0 {
                best = (dot.abs(), j, dot.signum());
            }
        }
        best
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for i in 0..h_dim.min(4) {
        let mut e = vec![0.0; h_dim];
        e[i] = 1.0;
        starts.push(e);
    }
    starts.push(vec![1.0; h_dim]);
    starts.push((0..h_dim).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..20 {
        starts.push((0..h_dim).map(|_| rng.gen_range(-1.0..=1.0)).collect());
    }

    let iterations = 600;
    let mut best_value = f64::INFINITY;
    let mut best_vec = vec![0.0; h_dim];
    let mut best_last_improvement = 0usize;
    for start in &mut starts {
        let nq = norm_q(start);
        if nq == 0.0 {
            continue;
        }
        start.iter_mut().for_each(|v| *v /= nq);
        let mut h = start.clone();
        let mut local_best = f64::INFINITY;
        let mut local_vec = h.clone();
        let mut last_improvement = 0usize;
        for it in 0..iterations {
            let (value, j, sign) = objective(&h);
            if value < local_best {
                local_best = value;
                local_vec = h.clone();
                last_improvement = it;
            }
            let g = &rows[j];
            let g_sq: f64 = g.iter().map(|&v| v * v).sum();
            if g_sq == 0.0 {
                break;
            }
            let step_len = value / g_sq;
            for (hv, &gv) in h.iter_mut().zip(g) {
                *hv -= step_len * sign * gv;
            }
            let nq = norm_q(&h);
            if nq < 1e-300 {
                break;
            }
            h.iter_mut().for_each(|v| *v /= nq);
        }
        if local_best < best_value {
            best_value = local_best;
            best_vec = local_vec;
            best_last_improvement = last_improvement;
        }
    }
    Ok(AnnihilatorProbe {
        minimum: best_value,
        h: best_vec,
        h_grid,
        q,
        converged: best_last_improvement + 50 <= iterations,
    })
}
