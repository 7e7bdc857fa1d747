//! Radial shooting for the first eigenvalue on a ball.
//!
//! For `u(x) = φ(|x|)` the Hessian spectrum is `(φ'', φ'/r, …, φ'/r)`, so the
//! eigen equation becomes an ODE in `r`. Starting from `φ(0) = −1` the first
//! eigenvalue is the Λ at which `φ(R) = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::HessianOperator;

/// First positive zero of the Bessel function `J₀`.
pub const BESSEL_J01: f64 = 2.404825557695773;

const DELTA_REG: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProblem {
    pub operator: HessianOperator,
    pub radius: f64,
    pub mesh: usize,
}

impl RadialProblem {
    pub fn new(operator: HessianOperator, radius: f64, mesh: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Contract(format!("radius must be positive, got {radius}")));
        }
        if mesh < 1000 {
            return Err(Error::Contract(format!("mesh must be >= 1000, got {mesh}")));
        }
        if !(2..=3).contains(&operator.dim()) {
            return Err(Error::Contract(format!("radial oracle supports n = 2, 3; got n = {}", operator.dim())));
        }
        Ok(Self { operator, radius, mesh })
    }

    /// First Dirichlet eigenvalue of `−Δ` on the ball of this radius.
    pub fn laplace_mu1(&self) -> f64 {
        let z = if self.operator.dim() == 2 { BESSEL_J01 } else { std::f64::consts::PI };
        (z / self.radius).powi(2)
    }
}

fn radial_spectrum(n: usize, upp: f64, s: f64) -> Vec<f64> {
    let mut lam = vec![s; n];
    lam[0] = upp;
    lam
}

/// `f(upp, s, …, s)`.
pub fn radial_f(op: &HessianOperator, upp: f64, s: f64) -> Result<f64> {
    op.eval_f(&radial_spectrum(op.dim(), upp, s))
}

/// Solves `radial_f(a, s) = target` for `a`, starting near `guess`.
/// `f` is increasing in `a`; points outside the cone count as below target.
fn solve_upp(op: &HessianOperator, s: f64, target: f64, guess: f64) -> Result<f64> {
    let n = op.dim();
    let g = |a: f64| -> Option<(f64, f64)> {
        op.eval_with_grad(&radial_spectrum(n, a, s)).ok().map(|(f, grad)| (f - target, grad[0]))
    };
    let below = |a: f64| g(a).is_none_or(|(v, _)| v < 0.0);

    // g is concave and increasing, so Newton iterates from an admissible point
    // land left of the root and then climb to it monotonically.
    let mut a = guess;
    for _ in 0..50 {
        let Some((v, slope)) = g(a) else { break };
        if v.abs() <= 1e-15 * target.max(1.0) {
            return Ok(a);
        }
        let next = a - v / slope;
        if !(slope > 0.0) || !next.is_finite() {
            break;
        }
        if (next - a).abs() <= 4.0 * f64::EPSILON * next.abs().max(s.abs()) {
            return Ok(next);
        }
        a = next;
    }

    let scale = guess.abs().max(s.abs()).max(target).max(f64::MIN_POSITIVE);
    let mut d = 1e-3 * scale;
    let (mut lo, mut hi);
    if below(guess) {
        lo = guess;
        hi = guess + d;
        while below(hi) {
            lo = hi;
            d *= 2.0;
            hi = guess + d;
            if !hi.is_finite() || d > 1e300 {
                return Err(Error::Oracle(format!("cannot bracket u'' above {guess} (s = {s}, target = {target})")));
            }
        }
    } else {
        hi = guess;
        lo = guess - d;
        while !below(lo) {
            hi = lo;
            d *= 2.0;
            lo = guess - d;
            if !lo.is_finite() || d > 1e300 {
                return Err(Error::Oracle(format!("cannot bracket u'' below {guess} (s = {s}, target = {target})")));
            }
        }
    }

    // Safeguarded Newton inside [lo, hi].
    a = 0.5 * (lo + hi);
    for _ in 0..200 {
        match g(a) {
            Some((v, slope)) => {
                if v.abs() <= 1e-15 * target.max(1.0) {
                    return Ok(a);
                }
                if v < 0.0 {
                    lo = a;
                } else {
                    hi = a;
                }
                let next = a - v / slope;
                a = if slope > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            }
            None => {
                lo = a;
                a = 0.5 * (lo + hi);
            }
        }
        if hi - lo <= 4.0 * f64::EPSILON * a.abs().max(scale) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(a)
}

/// Radial profile `φ(r)` on the mesh points, returned as `(r, φ)` pairs.
pub fn shoot_profile(problem: &RadialProblem, lambda: f64) -> Result<Vec<(f64, f64)>> {
    if !(lambda > 0.0) {
        return Err(Error::Contract(format!("shoot needs lambda > 0, got {lambda}")));
    }
    let op = &problem.operator;
    let dr = problem.radius / problem.mesh as f64;
    let mut last_upp = lambda;
    let mut rhs = |r: f64, u: f64, up: f64| -> Result<f64> {
        let a = solve_upp(op, up / r, (-lambda * u).max(DELTA_REG), last_upp)?;
        last_upp = a;
        Ok(a)
    };

    // Series start: near the origin u'' = u'/r = Λ.
    let mut r = dr;
    let mut u = -1.0 + 0.5 * lambda * dr * dr;
    let mut up = lambda * dr;
    let mut out = Vec::with_capacity(problem.mesh + 1);
    out.push((0.0, -1.0));
    out.push((r, u));
    for _ in 1..problem.mesh {
        let k1 = (up, rhs(r, u, up)?);
        let k2 = (up + 0.5 * dr * k1.1, rhs(r + 0.5 * dr, u + 0.5 * dr * k1.0, up + 0.5 * dr * k1.1)?);
        let k3 = (up + 0.5 * dr * k2.1, rhs(r + 0.5 * dr, u + 0.5 * dr * k2.0, up + 0.5 * dr * k2.1)?);
        let k4 = (up + dr * k3.1, rhs(r + dr, u + dr * k3.0, up + dr * k3.1)?);
        u += dr / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        up += dr / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        r += dr;
        out.push((r, u));
    }
    Ok(out)
}

/// `φ(R)` for the given Λ.
pub fn shoot(problem: &RadialProblem, lambda: f64) -> Result<f64> {
    Ok(shoot_profile(problem, lambda)?.last().expect("non-empty profile").1)
}

/// Bisection on Λ for `φ(R) = 0` over `(μ₁/n · 1e−3, μ₁/n · 1.5)` to relative width 1e−8.
pub fn oracle_lambda1(problem: &RadialProblem) -> Result<f64> {
    let cap = problem.laplace_mu1() / problem.operator.dim() as f64;
    let (mut lo, mut hi) = (1e-3 * cap, 1.5 * cap);
    let (flo, fhi) = (shoot(problem, lo)?, shoot(problem, hi)?);
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::Oracle(format!("no sign change of u(R) on [{lo}, {hi}]: u(R) = {flo}, {fhi}")));
    }
    while hi - lo > 1e-8 * lo {
        let mid = 0.5 * (lo + hi);
        if shoot(problem, mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Oracle values at `mesh` and `2·mesh` with their relative difference.
pub fn oracle_with_cauchy(problem: &RadialProblem) -> Result<(f64, f64, f64)> {
    let doubled = RadialProblem { mesh: 2 * problem.mesh, ..problem.clone() };
    let (coarse, fine) = rayon::join(|| oracle_lambda1(problem), || oracle_lambda1(&doubled));
    let (coarse, fine) = (coarse?, fine?);
    Ok((coarse, fine, (fine - coarse).abs() / fine))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(op: HessianOperator, r: f64) -> RadialProblem {
        RadialProblem::new(op, r, 4000).unwrap()
    }

    #[test]
    fn radial_f_examples() {
        let ma = HessianOperator::k_hessian(2, 2).unwrap();
        assert!((radial_f(&ma, 4.0, 9.0).unwrap() - 6.0).abs() < 1e-14);
        assert!((radial_f(&ma, 1.7, 1.7).unwrap() - 1.7).abs() < 1e-14);
        let lap = HessianOperator::k_hessian(1, 2).unwrap();
        assert!((radial_f(&lap, -0.5, 3.0).unwrap() - 1.25).abs() < 1e-14);
        assert!(radial_f(&ma, -1.0, 1.0).is_err());
    }

    #[test]
    fn upp_inversion() {
        let ma = HessianOperator::k_hessian(2, 3).unwrap();
        for (s, t, guess) in [(1.0, 2.0, 1.0), (2.0, 0.5, 10.0), (0.3, 0.3, -1.0)] {
            let a = solve_upp(&ma, s, t, guess).unwrap();
            assert!((radial_f(&ma, a, s).unwrap() - t).abs() < 1e-13, "{s} {t}");
        }
    }

    #[test]
    fn small_lambda_stays_negative() {
        let p = problem(HessianOperator::k_hessian(2, 2).unwrap(), 1.0);
        assert!(shoot(&p, 1e-3).unwrap() < 0.0);
    }

    #[test]
    fn laplacian_on_disk_matches_bessel() {
        let p = problem(HessianOperator::k_hessian(1, 2).unwrap(), 1.0);
        let l = oracle_lambda1(&p).unwrap();
        let exact = BESSEL_J01 * BESSEL_J01 / 2.0;
        assert!((l - exact).abs() < 1e-6 * exact, "{l} vs {exact}");
    }

    #[test]
    fn laplacian_on_ball_matches_sine() {
        let p = problem(HessianOperator::k_hessian(1, 3).unwrap(), 1.0);
        let l = oracle_lambda1(&p).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 3.0;
        assert!((l - exact).abs() < 1e-6 * exact, "{l} vs {exact}");
    }

    #[test]
    fn shoot_is_increasing_in_lambda() {
        let p = problem(HessianOperator::k_hessian(2, 2).unwrap(), 1.0);
        let vals: Vec<f64> = (1..=12).map(|i| shoot(&p, 0.3 * i as f64).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }

    #[test]
    fn monge_ampere_scaling_and_bracket() {
        let op = HessianOperator::k_hessian(2, 2).unwrap();
        let l1 = oracle_lambda1(&problem(op.clone(), 1.0)).unwrap();
        let l2 = oracle_lambda1(&problem(op, 2.0)).unwrap();
        assert!(l1 > 0.0 && l1 < BESSEL_J01 * BESSEL_J01 / 2.0);
        assert!((l2 - l1 / 4.0).abs() < 1e-6 * l1, "{l1} {l2}");
    }
}
