//! Damped Newton solver for `F(D²u) = ψ(x, u)` with zero Dirichlet data.
//!
//! The Jacobian is the exact derivative of the discrete residual: each row
//! combines the node's line stencils with the linearization coefficients
//! `F^{ij}` of the operator at the current nodal Hessian, minus `ψ_u` on the
//! diagonal. Steps are backtracked until the trial iterate stays inside the
//! cone and the residual sup-norm decreases.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{barrier_subsolution, DomainSpec, Grid, GridField, Neighbor};
use crate::linalg::{sym_eigenvalues, SymMatrix};
use crate::operators::HessianOperator;
use crate::sparse::TripletMatrix;

/// Barrier parameter used by the default initializer.
pub const INIT_BARRIER_R: f64 = 1.0;

/// `(unknown index, position, u) ↦ (ψ, ∂ψ/∂u)`.
pub type RhsFn = dyn Fn(usize, [f64; 2], f64) -> (f64, f64) + Send + Sync;

#[derive(Clone)]
pub enum RhsSpec {
    /// `ψ = 1 − λu`.
    Family {
        lambda: f64,
    },
    Custom(Arc<RhsFn>),
}

impl RhsSpec {
    pub fn family(lambda: f64) -> Self {
        RhsSpec::Family { lambda }
    }

    pub fn custom(f: impl Fn(usize, [f64; 2], f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        RhsSpec::Custom(Arc::new(f))
    }

    pub fn eval(&self, unknown: usize, x: [f64; 2], u: f64) -> (f64, f64) {
        match self {
            RhsSpec::Family { lambda } => (1.0 - lambda * u, -lambda),
            RhsSpec::Custom(f) => f(unknown, x, u),
        }
    }
}

impl fmt::Debug for RhsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsSpec::Family { lambda } => write!(f, "Family {{ lambda: {lambda} }}"),
            RhsSpec::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Sup-norm residual tolerance.
    pub tol: f64,
    pub max_iterations: usize,
    /// Backtracking factor.
    pub shrink: f64,
    /// Required cone slack of the initial iterate; accepted iterates keep half of it.
    pub cone_margin: f64,
    /// Floor applied to `ψ`.
    pub delta_reg: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iterations: 60, shrink: 0.5, cone_margin: 1e-8, delta_reg: 1e-10 }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.tol > 0.0) {
            errs.push(format!("solver.tol must be > 0, got {}", self.tol));
        }
        if self.max_iterations == 0 {
            errs.push("solver.max_iterations must be >= 1".into());
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            errs.push(format!("solver.shrink must lie in (0, 1), got {}", self.shrink));
        }
        if !(self.cone_margin >= 0.0) {
            errs.push(format!("solver.cone_margin must be >= 0, got {}", self.cone_margin));
        }
        if !(self.delta_reg > 0.0) {
            errs.push(format!("solver.delta_reg must be > 0, got {}", self.delta_reg));
        }
        errs
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Final sup-norm residual over interior nodes.
    pub residual: f64,
    /// Newton steps that were shortened.
    pub damping_events: usize,
    /// Trial steps rejected because some node left the cone.
    pub admissibility_shrinks: usize,
}

/// Residual and linearization data at every unknown.
struct Evaluation {
    residual: Vec<f64>,
    /// `(F^{xx}, F^{xy}, F^{yy}, ψ_u)` per unknown.
    coeffs: Vec<[f64; 4]>,
}

impl Evaluation {
    fn sup(&self) -> f64 {
        self.residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }
}

fn clamped_rhs(rhs: &RhsSpec, unknown: usize, x: [f64; 2], u: f64, delta_reg: f64) -> (f64, f64) {
    let (psi, psi_u) = rhs.eval(unknown, x, u);
    if psi < delta_reg {
        (delta_reg, 0.0)
    } else {
        (psi, psi_u)
    }
}

/// Evaluates the residual; `Err(unknown)` names a node whose spectrum misses the cone by `margin`.
fn evaluate(
    op: &HessianOperator,
    grid: &Grid,
    values: &[f64],
    rhs: &RhsSpec,
    margin: f64,
    delta_reg: f64,
) -> std::result::Result<Evaluation, usize> {
    let local: Vec<std::result::Result<(f64, [f64; 4]), usize>> = (0..grid.interior_count())
        .into_par_iter()
        .map(|k| {
            let [a, b, c] = grid.hessian_entries(values, k);
            let (f, df) = op.linearization_with_value(&SymMatrix::sym2(a, b, c), margin).map_err(|_| k)?;
            let node = grid.interior_nodes()[k];
            let (psi, psi_u) = clamped_rhs(rhs, k, grid.position(node), values[node], delta_reg);
            Ok((f - psi, [df.get(0, 0), df.get(0, 1), df.get(1, 1), psi_u]))
        })
        .collect();
    let mut residual = Vec::with_capacity(local.len());
    let mut coeffs = Vec::with_capacity(local.len());
    for item in local {
        let (r, c) = item?;
        residual.push(r);
        coeffs.push(c);
    }
    Ok(Evaluation { residual, coeffs })
}

fn assemble_jacobian(grid: &Grid, ev: &Evaluation) -> TripletMatrix {
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..grid.interior_count())
        .into_par_iter()
        .map(|k| {
            let [fxx, fxy, fyy, psi_u] = ev.coeffs[k];
            let weights = [fxx, fyy, fxy, -fxy];
            let st = grid.stencil(k);
            let mut row = Vec::with_capacity(9);
            let mut diag = -psi_u;
            for (line, w) in st.lines.iter().zip(weights) {
                diag += w * line.center;
                for (c, nb) in [line.minus, line.plus] {
                    if let Neighbor::Node(q) = nb {
                        if let Some(col) = grid.unknown_of(q) {
                            row.push((k, col, w * c));
                        }
                    }
                }
            }
            row.push((k, k, diag));
            row
        })
        .collect();
    let mut m = TripletMatrix::new(grid.interior_count());
    for row in rows {
        m.extend(row);
    }
    m
}

/// Index of the first interior node whose discrete Hessian misses the cone by `margin`.
pub fn first_inadmissible(op: &HessianOperator, field: &GridField, margin: f64) -> Option<usize> {
    let grid = field.grid();
    (0..grid.interior_count()).find(|&k| {
        let [a, b, c] = grid.hessian_entries(field.values(), k);
        let lam = sym_eigenvalues(&SymMatrix::sym2(a, b, c));
        !op.cone_contains(&lam, margin).unwrap_or(false)
    })
}

/// `F(D²u)` at every interior node, in unknown order.
pub fn operator_values(op: &HessianOperator, field: &GridField) -> Result<Vec<f64>> {
    let grid = field.grid();
    (0..grid.interior_count())
        .into_par_iter()
        .map(|k| {
            let [a, b, c] = grid.hessian_entries(field.values(), k);
            op.eval_matrix(&SymMatrix::sym2(a, b, c))
        })
        .collect()
}

pub fn newton_solve(
    op: &HessianOperator,
    grid: &Arc<Grid>,
    rhs: &RhsSpec,
    u_init: &GridField,
    opts: &NewtonOptions,
) -> Result<(GridField, NewtonReport)> {
    if op.dim() != 2 {
        return Err(Error::Contract(format!("grid solvers need a 2-D operator, got {op}")));
    }
    if !Arc::ptr_eq(u_init.grid(), grid) {
        return Err(Error::Contract("initial field lives on a different grid".into()));
    }
    let errs = opts.validate();
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let mut report = NewtonReport::default();
    // Boundary data is pinned to zero whatever the caller passed.
    let mut u = GridField::from_interior(grid, &u_init.interior_values())?;
    if let Some(node) = first_inadmissible(op, &u, opts.cone_margin) {
        return Err(Error::Admissibility { node: grid.interior_nodes()[node], report: Box::new(report) });
    }
    let keep = 0.5 * opts.cone_margin;
    let mut ev = evaluate(op, grid, u.values(), rhs, keep, opts.delta_reg)
        .map_err(|k| Error::Admissibility { node: grid.interior_nodes()[k], report: Box::new(report.clone()) })?;
    let mut res = ev.sup();
    report.residual = res;
    loop {
        if res <= opts.tol {
            return Ok((u, report));
        }
        if report.iterations >= opts.max_iterations {
            return Err(Error::NewtonNonconvergence(Box::new(report)));
        }
        let jac = assemble_jacobian(grid, &ev);
        let neg: Vec<f64> = ev.residual.iter().map(|r| -r).collect();
        let step = jac.solve(&neg)?;
        let base = u.interior_values();

        let mut alpha = 1.0;
        let mut last_inadmissible = None;
        let accepted = loop {
            let trial_vals: Vec<f64> = base.iter().zip(&step).map(|(b, s)| b + alpha * s).collect();
            let trial = GridField::from_interior(grid, &trial_vals)?;
            match evaluate(op, grid, trial.values(), rhs, keep, opts.delta_reg) {
                Ok(ev_t) if ev_t.sup() < res => break Some((trial, ev_t)),
                Ok(_) => {}
                Err(k) => {
                    report.admissibility_shrinks += 1;
                    last_inadmissible = Some(grid.interior_nodes()[k]);
                }
            }
            alpha *= opts.shrink;
            if alpha < 1e-12 {
                break None;
            }
        };
        report.iterations += 1;
        match accepted {
            Some((trial, ev_t)) => {
                if alpha < 1.0 {
                    report.damping_events += 1;
                }
                u = trial;
                ev = ev_t;
                res = ev.sup();
                report.residual = res;
            }
            None => {
                return Err(match last_inadmissible {
                    Some(node) => Error::Admissibility { node, report: Box::new(report) },
                    None => Error::NewtonNonconvergence(Box::new(report)),
                });
            }
        }
    }
}

/// Strictly convex profile vanishing on the boundary, used when the barrier
/// alone is degenerate (flat sides of a rectangle).
fn convex_profile(grid: &Arc<Grid>) -> GridField {
    let domain = *grid.domain();
    let mut field = GridField::zeros(grid);
    for (k, &node) in grid.interior_nodes().iter().enumerate() {
        let [x, y] = grid.position(node);
        let v = match domain {
            DomainSpec::Rectangle { width, height } => {
                -((x * (width - x)).max(0.0) * (y * (height - y)).max(0.0)).sqrt()
            }
            DomainSpec::Disk { radius } => 0.5 * (x * x + y * y - radius * radius).min(0.0),
        };
        field.set_interior(k, v);
    }
    field
}

/// Admissible starting field: the boundary barrier (or, where its sampled
/// kinks leave the cone, the convex profile), scaled by `c` until
/// `F(D²(c·v)) ≥ ψ(x, c·v)` holds at every node (or a doubling cap is hit).
pub fn default_initializer(
    op: &HessianOperator,
    grid: &Arc<Grid>,
    rhs: &RhsSpec,
    opts: &NewtonOptions,
) -> Result<GridField> {
    let barrier = barrier_subsolution(grid, INIT_BARRIER_R)?;
    let margin = 2.0 * opts.cone_margin;
    let base = if first_inadmissible(op, &barrier, margin).is_none() {
        barrier
    } else {
        let profile = convex_profile(grid);
        let blended = barrier.axpy(barrier.sup_norm() / profile.sup_norm(), &profile);
        match (first_inadmissible(op, &profile, margin), first_inadmissible(op, &blended, margin)) {
            (None, _) => profile,
            (_, None) => blended,
            (Some(k), Some(_)) => {
                return Err(Error::Admissibility {
                    node: grid.interior_nodes()[k],
                    report: Box::new(NewtonReport::default()),
                })
            }
        }
    };
    let fvals = operator_values(op, &base)?;
    let positions: Vec<[f64; 2]> = grid.interior_nodes().iter().map(|&n| grid.position(n)).collect();
    let base_vals = base.interior_values();
    let psi = |k: usize, u: f64| clamped_rhs(rhs, k, positions[k], u, opts.delta_reg).0;
    let c0 = (0..fvals.len()).map(|k| psi(k, 0.0) / fvals[k]).fold(0.0_f64, f64::max).max(1e-12);
    let mut c = c0;
    let mut found = false;
    for _ in 0..24 {
        if (0..fvals.len()).all(|k| c * fvals[k] >= psi(k, c * base_vals[k])) {
            found = true;
            break;
        }
        c *= 2.0;
    }
    Ok(base.scaled(if found { c } else { c0 }))
}

/// Solves `F(D²u) = 1 − λu`.
pub fn solve_family(
    op: &HessianOperator,
    grid: &Arc<Grid>,
    lambda: f64,
    warm_start: Option<&GridField>,
    opts: &NewtonOptions,
) -> Result<(GridField, NewtonReport)> {
    if !(lambda >= 0.0) {
        return Err(Error::Contract(format!("family parameter must be >= 0, got {lambda}")));
    }
    let rhs = RhsSpec::family(lambda);
    let init = match warm_start {
        Some(w) => w.clone(),
        None => default_initializer(op, grid, &rhs, opts)?,
    };
    newton_solve(op, grid, &rhs, &init, opts)
}

/// Parameters of the homotopy path.
#[derive(Debug, Clone, Copy)]
pub struct HomotopyParams {
    /// `Λ₀` with `ψ_u ≥ −Λ₀`.
    pub lambda0: f64,
    /// Family parameter of the subsolution, in `(Λ₀, Λ₁)`.
    pub lambda_pick: f64,
    /// Scale `N > sup ψ(·, 0)` of the subsolution.
    pub scale: f64,
    pub steps: usize,
}

/// Solves `F(D²u) = ψ(x, u)` along `F(D²u_t) = tψ(x, u_t) + (1 − t)F(D²u_N)`,
/// starting from `u_N = N·u_{λ_pick}` at `t = 0`.
pub fn homotopy_solve(
    op: &HessianOperator,
    grid: &Arc<Grid>,
    psi: &RhsSpec,
    params: HomotopyParams,
    opts: &NewtonOptions,
) -> Result<GridField> {
    let HomotopyParams { lambda0, lambda_pick, scale, steps } = params;
    if steps == 0 {
        return Err(Error::Contract("homotopy needs at least one step".into()));
    }
    if !(lambda_pick > lambda0) {
        return Err(Error::Contract(format!("lambda_pick {lambda_pick} must exceed lambda0 {lambda0}")));
    }
    let positions: Vec<[f64; 2]> = grid.interior_nodes().iter().map(|&n| grid.position(n)).collect();
    let sup_psi0 = (0..positions.len()).map(|k| psi.eval(k, positions[k], 0.0).0).fold(f64::NEG_INFINITY, f64::max);
    if !(scale > sup_psi0) {
        return Err(Error::Contract(format!("scale N = {scale} must exceed sup psi(x, 0) = {sup_psi0}")));
    }

    let (u_pick, _) = solve_family(op, grid, lambda_pick, None, opts)?;
    let u_n = u_pick.scaled(scale);
    let g: Arc<Vec<f64>> = Arc::new(operator_values(op, &u_n)?);

    let mut u = u_n;
    let mut last_good_t = 0.0;
    for s in 1..=steps {
        let t = s as f64 / steps as f64;
        let (psi_s, g_s) = (psi.clone(), Arc::clone(&g));
        let rhs_t = RhsSpec::custom(move |k, x, v| {
            let (p, p_u) = psi_s.eval(k, x, v);
            (t * p + (1.0 - t) * g_s[k], t * p_u)
        });
        match newton_solve(op, grid, &rhs_t, &u, opts) {
            Ok((next, _)) => {
                u = next;
                last_good_t = t;
            }
            Err(e) => return Err(Error::Homotopy { last_good_t, source: Box::new(e) }),
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1() -> HessianOperator {
        HessianOperator::k_hessian(1, 2).unwrap()
    }

    fn ma() -> HessianOperator {
        HessianOperator::k_hessian(2, 2).unwrap()
    }

    #[test]
    fn torsion_problem_on_square_is_one_newton_step() {
        let g = Grid::build(DomainSpec::unit_square(), 1.0 / 32.0).unwrap();
        let (u, rep) = solve_family(&k1(), &g, 0.0, None, &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.residual <= 1e-9);
        // 2 × torsion maximum 0.0736713…, up to O(h²).
        assert!((u.sup_norm() - 0.147_343).abs() < 1e-3, "{}", u.sup_norm());
        assert!(u.max_value() <= 0.0);
    }

    #[test]
    fn exact_start_needs_no_iterations() {
        let g = Grid::build(DomainSpec::unit_square(), 1.0 / 16.0).unwrap();
        let opts = NewtonOptions::default();
        let (u, _) = solve_family(&k1(), &g, 0.0, None, &opts).unwrap();
        let (_, rep) = solve_family(&k1(), &g, 0.0, Some(&u), &opts).unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn monge_ampere_on_disk_matches_radial_quadratic() {
        let g = Grid::build(DomainSpec::unit_disk(), 1.0 / 16.0).unwrap();
        let (u, rep) = solve_family(&ma(), &g, 0.0, None, &NewtonOptions::default()).unwrap();
        assert!(rep.residual <= 1e-9);
        let exact = GridField::from_fn(&g, |x, y| 0.5 * (x * x + y * y - 1.0));
        // Quadratic data is reproduced exactly up to the snapped boundary ring.
        let center = g.node_at(16, 16);
        assert!((u.value(center) + 0.5).abs() < 5e-3, "{}", u.value(center));
        let err = g.interior_nodes().iter().map(|&n| (u.value(n) - exact.value(n)).abs()).fold(0.0, f64::max);
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn inadmissible_start_is_rejected() {
        let g = Grid::build(DomainSpec::unit_square(), 0.125).unwrap();
        let concave = GridField::from_fn(&g, |x, y| x * (1.0 - x) * y * (1.0 - y));
        let r = newton_solve(&k1(), &g, &RhsSpec::family(0.0), &concave, &NewtonOptions::default());
        assert!(matches!(r, Err(Error::Admissibility { .. })));
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let g = Grid::build(DomainSpec::unit_disk(), 0.125).unwrap();
        let opts = NewtonOptions { max_iterations: 1, tol: 1e-14, ..Default::default() };
        let r = solve_family(&ma(), &g, 0.0, None, &opts);
        assert!(matches!(r, Err(Error::NewtonNonconvergence(_))), "{r:?}");
    }

    #[test]
    fn rejects_bad_options() {
        let g = Grid::build(DomainSpec::unit_square(), 0.125).unwrap();
        let opts = NewtonOptions { shrink: 1.5, tol: 0.0, ..Default::default() };
        match solve_family(&k1(), &g, 0.0, None, &opts) {
            Err(Error::Validation(errs)) => assert_eq!(errs.len(), 2),
            other => panic!("{other:?}"),
        }
        assert!(solve_family(&k1(), &g, -1.0, None, &NewtonOptions::default()).is_err());
    }

    #[test]
    fn default_initializer_is_subsolution_on_rectangle_for_monge_ampere() {
        let g = Grid::build(DomainSpec::unit_square(), 1.0 / 16.0).unwrap();
        let opts = NewtonOptions::default();
        let init = default_initializer(&ma(), &g, &RhsSpec::family(0.0), &opts).unwrap();
        assert!(first_inadmissible(&ma(), &init, opts.cone_margin).is_none());
        let f = operator_values(&ma(), &init).unwrap();
        assert!(f.iter().all(|v| *v >= 1.0 - 1e-12));
    }
}
