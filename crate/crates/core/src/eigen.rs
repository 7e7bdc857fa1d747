//! First eigenpair of `F(D²u) = −Λu` by continuation in the family
//! `F(D²u) = 1 − λu`, blow-up extrapolation and inverse power refinement.
//!
//! The sup-norm of `u_λ` blows up as `λ ↗ Λ₁`. A linear fit of `1/‖u_λ‖_∞`
//! near the pole gives a first estimate; the refinement then iterates
//! `F(D²w) = −v`, `v ← w / ‖w‖_∞`, whose fixed points are eigenfunctions by
//! degree-one homogeneity.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{laplace_mu1, Grid, GridField};
use crate::newton::{
    default_initializer, first_inadmissible, newton_solve, operator_values, solve_family, NewtonOptions, RhsSpec,
};
use crate::operators::HessianOperator;
use crate::verify::PropertyReport;

/// Slack on the Laplace upper bound that absorbs discretization error.
pub const BRACKET_SLACK: f64 = 0.02;

/// Nodes with `|u₁| ≤ EIGEN_RESIDUAL_CUTOFF` are left out of the eigen residual.
pub const EIGEN_RESIDUAL_CUTOFF: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub lambda: f64,
    pub sup_norm: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ContinuationTrace {
    pub records: Vec<TraceRecord>,
    /// Sup-norms are nondecreasing within `10·tol`.
    pub monotone: bool,
}

impl ContinuationTrace {
    fn push(&mut self, rec: TraceRecord, tol: f64) {
        if let Some(last) = self.records.last() {
            if rec.sup_norm < last.sup_norm - 10.0 * tol {
                self.monotone = false;
            }
        } else {
            self.monotone = true;
        }
        self.records.push(rec);
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// Explicit increasing list of λ values, starting at 0.
    Fixed(Vec<f64>),
    /// Step doubling on easy solves and halving on hard ones, never stepping
    /// more than halfway to the root predicted from the last two records.
    Adaptive { initial_step: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Relative tolerance on successive eigenvalue estimates.
    pub tol_eig: f64,
    /// Newton tolerance of the inner solves of the refinement.
    pub inner_tol: f64,
    pub max_refine: usize,
    pub blowup_cap: f64,
    /// Continuation stops after this many accepted λ values.
    pub max_continuation: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol_eig: 1e-9, inner_tol: 1e-11, max_refine: 200, blowup_cap: 1e4, max_continuation: 200 }
    }
}

impl EigenOptions {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.tol_eig > 0.0) {
            errs.push(format!("eigen.tol_eig must be > 0, got {}", self.tol_eig));
        }
        if !(self.inner_tol > 0.0) {
            errs.push(format!("eigen.inner_tol must be > 0, got {}", self.inner_tol));
        }
        if self.max_refine == 0 {
            errs.push("eigen.max_refine must be >= 1".into());
        }
        if !(self.blowup_cap > 10.0) {
            errs.push(format!("eigen.blowup_cap must be > 10, got {}", self.blowup_cap));
        }
        if self.max_continuation < 4 {
            errs.push("eigen.max_continuation must be >= 4".into());
        }
        errs
    }
}

/// Output of [`run_continuation`].
#[derive(Debug, Clone)]
pub struct Continuation {
    pub trace: ContinuationTrace,
    /// The λ = 0 solution `u₀`.
    pub base: GridField,
    /// The last accepted solution.
    pub last: GridField,
}

pub fn run_continuation(
    op: &HessianOperator,
    grid: &Arc<Grid>,
    schedule: &Schedule,
    opts: &NewtonOptions,
    eig: &EigenOptions,
) -> Result<Continuation> {
    let mut trace = ContinuationTrace::default();
    let (base, rep) = solve_family(op, grid, 0.0, None, opts)?;
    trace.push(
        TraceRecord { lambda: 0.0, sup_norm: base.sup_norm(), iterations: rep.iterations, residual: rep.residual },
        opts.tol,
    );
    let mut last = base.clone();

    match schedule {
        Schedule::Fixed(lambdas) => {
            if lambdas.first().copied() != Some(0.0) {
                return Err(Error::Contract("fixed schedule must start at lambda = 0".into()));
            }
            for &lambda in &lambdas[1..] {
                let prev = trace.last().expect("non-empty").lambda;
                if !(lambda > prev) {
                    return Err(Error::Contract("schedule must be strictly increasing".into()));
                }
                let (u, rep) = solve_family(op, grid, lambda, Some(&last), &scaled_tol(opts, &last))?;
                trace.push(
                    TraceRecord { lambda, sup_norm: u.sup_norm(), iterations: rep.iterations, residual: rep.residual },
                    opts.tol,
                );
                last = u;
                if trace.last().unwrap().sup_norm > eig.blowup_cap {
                    break;
                }
            }
        }
        Schedule::Adaptive { initial_step } => {
            // ‖u₀‖⁻¹ is a lower bound for Λ₁, so half of it is a safe first step.
            let mut step = initial_step.unwrap_or(0.5 / base.sup_norm());
            let min_step = 1e-12 / base.sup_norm();
            let mut failures_at_min = 0;
            while trace.last().unwrap().sup_norm <= eig.blowup_cap && trace.records.len() < eig.max_continuation {
                let cur = *trace.last().unwrap();
                let predicted = predicted_pole(&trace.records);
                let mut target = cur.lambda + step;
                let mut warm = last.clone();
                if let Some(root) = predicted {
                    target = target.min(cur.lambda + 0.5 * (root - cur.lambda));
                    // Rescale the warm start by the predicted growth of the sup-norm.
                    warm = warm.scaled((root - cur.lambda) / (root - target));
                }
                match solve_family(op, grid, target, Some(&warm), &scaled_tol(opts, &warm)) {
                    Ok((u, rep)) if u.sup_norm() >= cur.sup_norm - 10.0 * opts.tol => {
                        trace.push(
                            TraceRecord {
                                lambda: target,
                                sup_norm: u.sup_norm(),
                                iterations: rep.iterations,
                                residual: rep.residual,
                            },
                            opts.tol,
                        );
                        last = u;
                        if rep.iterations <= 3 {
                            step *= 2.0;
                        } else if rep.iterations >= 8 {
                            step *= 0.5;
                        }
                        failures_at_min = 0;
                    }
                    _ => {
                        if step <= min_step {
                            failures_at_min += 1;
                            if failures_at_min >= 2 {
                                break;
                            }
                        }
                        step = (step * 0.5).max(min_step);
                        // Do not let the predictor keep proposing the same failed point.
                        if predicted.is_some() && target - cur.lambda <= step {
                            step = 0.5 * (target - cur.lambda);
                        }
                    }
                }
            }
        }
    }
    Ok(Continuation { trace, base, last })
}

/// Residual tolerance relative to the size of the right-hand side `1 − λu`;
/// an absolute tolerance stalls at round-off once `‖u‖∞` reaches ~10³.
fn scaled_tol(opts: &NewtonOptions, warm: &GridField) -> NewtonOptions {
    NewtonOptions { tol: opts.tol * warm.sup_norm().max(1.0), ..*opts }
}

/// Root of the secant through the last two reciprocal sup-norms, if it lies ahead.
fn predicted_pole(records: &[TraceRecord]) -> Option<f64> {
    let [a, b] = records.get(records.len().checked_sub(2)?..)? else { return None };
    let (ya, yb) = (1.0 / a.sup_norm, 1.0 / b.sup_norm);
    if !(yb < ya) {
        return None;
    }
    let root = b.lambda + yb * (b.lambda - a.lambda) / (ya - yb);
    (root > b.lambda && root.is_finite()).then_some(root)
}

/// Least-squares fit of `1/‖u_λ‖_∞` over the last 4–8 records with sup-norm above 10;
/// returns the λ where the fit vanishes.
pub fn estimate_lambda1(trace: &ContinuationTrace) -> Result<f64> {
    let usable: Vec<&TraceRecord> = trace.records.iter().filter(|r| r.sup_norm > 10.0).collect();
    if usable.len() < 4 {
        return Err(Error::Estimation(format!("need at least 4 records with sup-norm > 10, have {}", usable.len())));
    }
    let tail = &usable[usable.len().saturating_sub(8)..];
    let m = tail.len() as f64;
    let (sx, sy) = tail.iter().fold((0.0, 0.0), |(sx, sy), r| (sx + r.lambda, sy + 1.0 / r.sup_norm));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = tail.iter().fold((0.0, 0.0), |(sxy, sxx), r| {
        let dx = r.lambda - mx;
        (sxy + dx * (1.0 / r.sup_norm - my), sxx + dx * dx)
    });
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Estimation(format!("reciprocal sup-norm does not decrease (slope {slope:e})")));
    }
    let root = mx - my / slope;
    let last = tail.last().unwrap().lambda;
    if !(root > last) {
        return Err(Error::Estimation(format!("fitted pole {root} does not exceed last solved lambda {last}")));
    }
    Ok(root)
}

/// Bracket `‖u₀‖⁻¹ ≤ Λ₁ ≤ μ₁/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn compute(op: &HessianOperator, grid: &Grid, u0: &GridField) -> Result<Self> {
        Ok(Self { lower: 1.0 / u0.sup_norm(), upper: laplace_mu1(grid)? / op.dim() as f64 })
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Normalized so that `min u₁ = −1`.
    pub eigenfunction: GridField,
    /// Sup of `|F(D²u₁) + Λ₁u₁|` over interior nodes with `|u₁| > 0.01`.
    pub residual: f64,
    pub bracket: Option<Bracket>,
    pub iterations: usize,
}

/// Sup of `|F(D²u) + Λu|` over interior nodes where `|u| > cutoff`.
pub fn eigen_residual(op: &HessianOperator, u: &GridField, lambda: f64, cutoff: f64) -> Result<f64> {
    let f = operator_values(op, u)?;
    let grid = u.grid();
    Ok(grid
        .interior_nodes()
        .iter()
        .enumerate()
        .filter(|(_, &n)| u.value(n).abs() > cutoff)
        .map(|(k, &n)| (f[k] + lambda * u.value(n)).abs())
        .fold(0.0, f64::max))
}

fn normalized(v: &GridField) -> GridField {
    v.scaled(1.0 / v.sup_norm())
}

/// Inverse power iteration `F(D²w) = max(−v, δ)`, `Λ ← 1/‖w‖_∞`, `v ← Λw`.
///
/// Stops once both the eigenvalue (relative) and the normalized eigenfunction
/// (sup-norm) change by less than `tol_eig`.
pub fn inverse_power_refine(
    op: &HessianOperator,
    grid: &Arc<Grid>,
    v0: &GridField,
    lambda0: f64,
    opts: &NewtonOptions,
    eig: &EigenOptions,
) -> Result<EigenResult> {
    if v0.max_value() > 0.0 {
        return Err(Error::Contract("initial eigenfunction guess must be <= 0".into()));
    }
    if !(lambda0 > 0.0) {
        return Err(Error::Contract(format!("initial eigenvalue guess must be positive, got {lambda0}")));
    }
    let mut v = normalized(v0);
    let mut lambda = lambda0;
    let inner = NewtonOptions { tol: eig.inner_tol.min(opts.tol), ..*opts };
    let delta = opts.delta_reg;
    for it in 1..=eig.max_refine {
        let rhs_vals: Arc<Vec<f64>> = Arc::new(v.interior_values().iter().map(|x| (-x).max(delta)).collect());
        let rhs = RhsSpec::custom(move |k, _, _| (rhs_vals[k], 0.0));
        // A rough start (e.g. a randomized one) can stall Newton; the scaled
        // subsolution is always a safe fallback iterate.
        let (w, _) = match newton_solve(op, grid, &rhs, &v.scaled(1.0 / lambda), &inner) {
            Ok(sol) => sol,
            Err(_) => newton_solve(op, grid, &rhs, &default_initializer(op, grid, &rhs, &inner)?, &inner)?,
        };
        let next_lambda = 1.0 / w.sup_norm();
        let next_v = w.scaled(next_lambda);
        let dl = (next_lambda - lambda).abs();
        let dv = next_v.sup_distance(&v);
        lambda = next_lambda;
        v = next_v;
        if dl <= eig.tol_eig * lambda && dv <= eig.tol_eig {
            let residual = eigen_residual(op, &v, lambda, EIGEN_RESIDUAL_CUTOFF)?;
            return Ok(EigenResult { lambda1: lambda, eigenfunction: v, residual, bracket: None, iterations: it });
        }
    }
    let residual = eigen_residual(op, &v, lambda, EIGEN_RESIDUAL_CUTOFF)?;
    Err(Error::EigenNonconvergence(Box::new(EigenResult {
        lambda1: lambda,
        eigenfunction: v,
        residual,
        bracket: None,
        iterations: eig.max_refine,
    })))
}

/// Everything the eigen pipeline produces.
#[derive(Debug, Clone)]
pub struct EigenRun {
    pub result: EigenResult,
    pub trace: ContinuationTrace,
    pub estimate: f64,
    pub u0: GridField,
}

/// Continuation to blow-up, extrapolation, then refinement.
pub fn compute_eigenpair(
    op: &HessianOperator,
    grid: &Arc<Grid>,
    opts: &NewtonOptions,
    eig: &EigenOptions,
) -> Result<EigenRun> {
    let errs: Vec<String> = opts.validate().into_iter().chain(eig.validate()).collect();
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let cont = run_continuation(op, grid, &Schedule::Adaptive { initial_step: None }, opts, eig)?;
    let estimate = estimate_lambda1(&cont.trace)?;
    let mut result = inverse_power_refine(op, grid, &cont.last, estimate, opts, eig)?;
    result.bracket = Some(Bracket::compute(op, grid, &cont.base)?);
    Ok(EigenRun { result, trace: cont.trace, estimate, u0: cont.base })
}

/// Checks `‖u₀‖⁻¹ ≤ Λ₁ ≤ (μ₁/n)(1 + 2%)`; the margin is the smaller gap.
pub fn verify_bounds(
    op: &HessianOperator,
    grid: &Grid,
    result: &EigenResult,
    u0: &GridField,
) -> Result<PropertyReport> {
    let b = Bracket::compute(op, grid, u0)?;
    let l = result.lambda1;
    let margin = (l - b.lower).min(b.upper * (1.0 + BRACKET_SLACK) - l);
    Ok(PropertyReport::from_margins("eigen_bracket", op.to_string(), 0, [(margin, vec![b.lower, l, b.upper])], 0.0))
}

/// Admissible starting field: the default initializer with a random scale and
/// a few random interior Gaussian bumps, shrunk until the sum stays admissible.
pub fn randomized_start(
    op: &HessianOperator,
    grid: &Arc<Grid>,
    opts: &NewtonOptions,
    rng: &mut ChaCha8Rng,
) -> Result<GridField> {
    let base = default_initializer(op, grid, &RhsSpec::family(0.0), opts)?;
    let base = base.scaled(rng.random_range(0.5..2.0));
    let amp = base.sup_norm();
    let nodes = grid.interior_nodes();
    let bumps: Vec<([f64; 2], f64, f64)> = (0..3)
        .map(|_| {
            let c = grid.position(nodes[rng.random_range(0..nodes.len())]);
            (c, rng.random_range(0.1..0.3), rng.random_range(-0.3..0.3))
        })
        .collect();
    let bump = GridField::from_interior(
        grid,
        &nodes
            .iter()
            .map(|&n| {
                let p = grid.position(n);
                bumps
                    .iter()
                    .map(|(c, w, a)| a * amp * (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (w * w)).exp())
                    .sum::<f64>()
            })
            .collect::<Vec<_>>(),
    )?;
    let mut scale = 1.0;
    for _ in 0..40 {
        let trial = base.axpy(scale, &bump);
        if trial.max_value() < 0.0 && first_inadmissible(op, &trial, 2.0 * opts.cone_margin).is_none() {
            return Ok(trial);
        }
        scale *= 0.5;
    }
    Ok(base)
}

/// Reruns the refinement from `trials` randomized admissible starts and
/// compares the normalized eigenpairs with each other and with `result`.
///
/// Passes iff every pairwise eigenfunction distance is `≤ 50·tol_eig` and the
/// eigenvalue spread is `≤ 10·tol_eig·Λ₁`. A nonconvergent rerun yields a
/// failing (inconclusive) report with a NaN margin.
pub fn verify_uniqueness(
    op: &HessianOperator,
    grid: &Arc<Grid>,
    result: &EigenResult,
    trials: usize,
    seed: u64,
    opts: &NewtonOptions,
    eig: &EigenOptions,
) -> Result<PropertyReport> {
    if trials < 2 {
        return Err(Error::Contract(format!("uniqueness needs at least 2 trials, got {trials}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = (0..trials).map(|_| randomized_start(op, grid, opts, &mut rng)).collect::<Result<Vec<_>>>()?;
    let runs: Vec<Result<EigenResult>> =
        starts.par_iter().map(|s| inverse_power_refine(op, grid, s, 1.0, opts, eig)).collect();
    let mut pairs: Vec<(f64, f64)> = vec![(result.lambda1, 0.0)];
    let mut fields = vec![&result.eigenfunction];
    for run in &runs {
        match run {
            Ok(r) => {
                pairs.push((r.lambda1, 0.0));
                fields.push(&r.eigenfunction);
            }
            Err(_) => {
                return Ok(PropertyReport {
                    property: "eigen_uniqueness".into(),
                    operator: op.to_string(),
                    seed,
                    samples: trials,
                    worst_margin: f64::NAN,
                    witness: vec![],
                    pass: false,
                })
            }
        }
    }
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (lo, hi) = lambdas.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(*l), hi.max(*l)));
    let spread_margin = 10.0 * eig.tol_eig * result.lambda1 - (hi - lo);
    let mut dist_margin = f64::INFINITY;
    for i in 0..fields.len() {
        for j in (i + 1)..fields.len() {
            dist_margin = dist_margin.min(50.0 * eig.tol_eig - fields[i].sup_distance(fields[j]));
        }
    }
    let margin = spread_margin.min(dist_margin);
    Ok(PropertyReport::from_margins("eigen_uniqueness", op.to_string(), seed, [(margin, lambdas)], 0.0)
        .with_samples(trials))
}

impl PropertyReport {
    fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }
}
