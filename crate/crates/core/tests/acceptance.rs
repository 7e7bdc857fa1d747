//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use garding_eigen::eigen::{compute_eigenpair, verify_bounds, verify_uniqueness, EigenOptions, EigenRun};
use garding_eigen::grid::{laplace_mu1, DomainSpec, Grid};
use garding_eigen::newton::{homotopy_solve, solve_family, HomotopyParams, NewtonOptions, RhsSpec};
use garding_eigen::operators::HessianOperator;
use garding_eigen::radial::{oracle_with_cauchy, RadialProblem};
use garding_eigen::verify::{
    check_garding_equivalence, falsify_quotient_t, sample_cone, verify_operator, SampleStrategy,
};

const SEED: u64 = 20240531;

struct Line {
    id: u32,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn report(lines: &mut Vec<Line>, id: u32, start: Instant, pass: bool, detail: String) {
    let line = Line { id, pass, detail, elapsed: start.elapsed() };
    println!(
        "criterion {}: {} ({:.1} s) {}",
        line.id,
        if line.pass { "PASS" } else { "FAIL" },
        line.elapsed.as_secs_f64(),
        line.detail
    );
    lines.push(line);
}

fn op(token: &str) -> HessianOperator {
    token.parse().expect("operator token")
}

/// Smallest eigenvalue of the 5-point `−Δ_h` on the unit square.
fn discrete_square_mu1(h: f64) -> f64 {
    8.0 / (h * h) * (PI * h / 2.0).sin().powi(2)
}

struct Case {
    op: HessianOperator,
    domain: DomainSpec,
    grid: Arc<Grid>,
    run: EigenRun,
}

fn matrix_cases(opts: &NewtonOptions, eig: &EigenOptions) -> Vec<Case> {
    let mut cases = Vec::new();
    for token in ["k-hessian:k=1,n=2", "k-hessian:k=2,n=2", "p-ma:p=1,n=2"] {
        for domain in [DomainSpec::unit_square(), DomainSpec::unit_disk()] {
            let grid = Grid::build(domain, 1.0 / 32.0).unwrap();
            let o = op(token);
            let run = compute_eigenpair(&o, &grid, opts, eig).unwrap_or_else(|e| panic!("{token} on {domain}: {e}"));
            cases.push(Case { op: o, domain, grid, run });
        }
    }
    cases
}

fn main() {
    let opts = NewtonOptions::default();
    let eig = EigenOptions::default();
    let mut lines = Vec::new();

    // 1. Linear anchor on the square.
    let t = Instant::now();
    let h = 1.0 / 64.0;
    let grid = Grid::build(DomainSpec::unit_square(), h).unwrap();
    let k1 = op("k-hessian:k=1,n=2");
    let run = compute_eigenpair(&k1, &grid, &opts, &eig).unwrap();
    let l = run.result.lambda1;
    let rel_pi = (l - PI * PI).abs() / (PI * PI);
    let half_mu = laplace_mu1(&grid).unwrap() / 2.0;
    let rel_mu = (l - half_mu).abs() / half_mu;
    let closed = discrete_square_mu1(h) / 2.0;
    let rel_closed = (l - closed).abs() / closed;
    let pass = rel_pi <= 0.01 && rel_mu <= 1e-6 && rel_closed <= 1e-6 && t.elapsed() <= Duration::from_secs(30);
    report(
        &mut lines,
        1,
        t,
        pass,
        format!("lambda1 = {l:.10}, |.-pi^2|/pi^2 = {rel_pi:.2e}, vs mu1_h/2 = {rel_mu:.2e}, vs closed-form mu1_h/2 = {rel_closed:.2e}"),
    );

    // 2. Monge-Ampere on the disk against radial shooting.
    let t = Instant::now();
    let ma = op("k-hessian:k=2,n=2");
    let (oracle, oracle_fine, cauchy) =
        oracle_with_cauchy(&RadialProblem::new(ma.clone(), 1.0, 100_000).unwrap()).unwrap();
    let grid = Grid::build(DomainSpec::unit_disk(), 1.0 / 64.0).unwrap();
    let run = compute_eigenpair(&ma, &grid, &opts, &eig).unwrap();
    let rel = (run.result.lambda1 - oracle).abs() / oracle;
    let pass = rel <= 0.02 && cauchy <= 1e-6 && t.elapsed() <= Duration::from_secs(300);
    report(
        &mut lines,
        2,
        t,
        pass,
        format!(
            "grid {:.8} vs oracle {oracle:.8} (rel {rel:.2e}); oracle at doubled mesh {oracle_fine:.10}, Cauchy {cauchy:.2e}",
            run.result.lambda1
        ),
    );

    // 3. Bracket over the test matrix.
    let t = Instant::now();
    let cases = matrix_cases(&opts, &eig);
    let mut detail = Vec::new();
    let mut pass = true;
    for c in &cases {
        let b = verify_bounds(&c.op, &c.grid, &c.run.result, &c.run.u0).unwrap();
        pass &= b.pass;
        detail
            .push(format!("{} {}: {:.3} <= {:.6} <= {:.3}", c.op, c.domain, b.witness[0], b.witness[1], b.witness[2]));
    }
    let elapsed_matrix = t.elapsed();
    report(&mut lines, 3, t, pass, detail.join("; "));

    // 4. Uniqueness from randomized starts.
    let t = Instant::now();
    let mut detail = Vec::new();
    let mut pass = true;
    for (i, c) in cases.iter().enumerate() {
        let r = verify_uniqueness(&c.op, &c.grid, &c.run.result, 3, SEED + i as u64, &opts, &eig).unwrap();
        let lambdas = &r.witness;
        let (lo, hi) = lambdas.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        let spread = (hi - lo) / c.run.result.lambda1;
        let ok = r.pass && spread <= 1e-6;
        pass &= ok;
        detail.push(format!("{} {}: spread {spread:.1e}, margin {:.1e}", c.op, c.domain, r.worst_margin));
    }
    report(&mut lines, 4, t, pass, detail.join("; "));

    // 5. Structural property suite, with closed-form Condition (T) products.
    let t = Instant::now();
    let mut failures = Vec::new();
    let mut ops = 0;
    let mut worst_t: f64 = 0.0;
    for o in HessianOperator::all_supported(&[2, 3]) {
        ops += 1;
        for r in verify_operator(&o, 10_000, SEED).unwrap() {
            if !r.pass {
                failures.push(format!("{} {} margin {:e}", o, r.property, r.worst_margin));
            }
        }
        // f = mean for k = 1 and p = n; f = det^{1/n} for k = n and p = 1.
        let n = o.dim();
        let closed = match (o.to_string().starts_with("k-"), o.index()) {
            (true, 1) => Some((n as f64).powi(-(n as i32))),
            (true, k) if k == n => Some((n as f64).powi(-(n as i32))),
            (false, 1) => Some((n as f64).powi(-(n as i32))),
            (false, p) if p == n => Some((n as f64).powi(-(n as i32))),
            _ => None,
        };
        if let Some(c) = closed {
            let cloud = sample_cone(&o, 10_000, SEED, SampleStrategy::Interior).unwrap();
            for lam in &cloud.points {
                let prod: f64 = o.grad_f(lam).unwrap().iter().product();
                worst_t = worst_t.max((prod - c).abs());
            }
        }
    }
    let pass = failures.is_empty() && worst_t <= 1e-10 && t.elapsed() <= Duration::from_secs(60);
    report(
        &mut lines,
        5,
        t,
        pass,
        format!("{ops} operators x 10^4 samples; max |prod f_i - closed form| = {worst_t:.1e}; failures: {failures:?}"),
    );

    // 6. Quotient falsification; along (t, 1) the normalized sigma_2/sigma_1 has prod f_i = 4t^2/(1+t)^4.
    let t = Instant::now();
    let r = falsify_quotient_t(2, 2, 1).unwrap();
    let tw = r.witness[0];
    let closed = 4.0 * tw * tw / (1.0 + tw).powi(4);
    let scanned = 1e-3 - r.worst_margin;
    let pass = r.pass && scanned < 1e-3 && (scanned - closed).abs() <= 1e-12 && t.elapsed() <= Duration::from_secs(5);
    report(&mut lines, 6, t, pass, format!("min prod f_i = {scanned:.3e} at t = {tw:e} (closed form {closed:.3e})"));

    // 7. Garding equivalence on 200 x 200 pairs, c = (1/4)^{1/2}.
    let t = Instant::now();
    let lam = sample_cone(&ma, 200, SEED, SampleStrategy::Interior).unwrap();
    let tau = sample_cone(&ma, 200, SEED + 1, SampleStrategy::Interior).unwrap();
    let tau_positive = tau.points.iter().all(|p| p.iter().all(|v| *v > 0.0));
    let r = check_garding_equivalence(&ma, &lam, &tau).unwrap();
    let f = |v: &[f64]| (v[0] * v[1]).sqrt();
    let mut worst = f64::INFINITY;
    for l in &lam.points {
        for tv in &tau.points {
            let sum = [l[0] + tv[0], l[1] + tv[1]];
            worst = worst.min(f(&sum) - f(l) - 0.5 * (tv[0] * tv[1]).sqrt());
        }
    }
    let pass = tau_positive && r.pass && r.samples == 40_000 && worst >= -1e-9;
    report(
        &mut lines,
        7,
        t,
        pass,
        format!("{} pairs, library margin {:.3e}, direct margin {worst:.3e}", r.samples, r.worst_margin),
    );

    // 8. Continuation monotonicity on every matrix trace.
    let t = Instant::now();
    let mut detail = Vec::new();
    let mut pass = true;
    for c in &cases {
        let cap = laplace_mu1(&c.grid).unwrap() / 2.0 * 1.02;
        let recs = &c.run.trace.records;
        let mono = recs.windows(2).all(|w| w[1].sup_norm >= w[0].sup_norm - 10.0 * opts.tol);
        let increasing = recs.windows(2).all(|w| w[1].lambda > w[0].lambda);
        let below = recs.iter().all(|r| r.lambda < cap);
        let ok = mono && increasing && below && c.run.trace.monotone;
        pass &= ok;
        detail.push(format!(
            "{} {}: {} records, last lambda {:.6} < {:.6}",
            c.op,
            c.domain,
            recs.len(),
            recs.last().unwrap().lambda,
            cap
        ));
    }
    report(
        &mut lines,
        8,
        t,
        pass,
        format!("{} (matrix solved in {:.1} s)", detail.join("; "), elapsed_matrix.as_secs_f64()),
    );

    // 9. Homotopy against the direct family solve.
    let t = Instant::now();
    let mut detail = Vec::new();
    let mut pass = true;
    for c in cases.iter().filter(|c| c.op == ma || c.op.index() == 1 && c.op.to_string().starts_with("k-")) {
        let l1 = c.run.result.lambda1;
        let half = 0.5 * l1;
        let psi = RhsSpec::custom(move |_, _, u| (1.0 - half * u, -half));
        let (direct, _) = solve_family(&c.op, &c.grid, half, None, &opts).unwrap();
        let params = |steps| HomotopyParams { lambda0: half, lambda_pick: 0.75 * l1, scale: 2.0, steps };
        let one = homotopy_solve(&c.op, &c.grid, &psi, params(1), &opts).unwrap();
        let sixteen = homotopy_solve(&c.op, &c.grid, &psi, params(16), &opts).unwrap();
        let (d1, d16, d_steps) = (one.sup_distance(&direct), sixteen.sup_distance(&direct), one.sup_distance(&sixteen));
        let ok = d1 <= 10.0 * opts.tol && d16 <= 10.0 * opts.tol && d_steps <= 10.0 * opts.tol;
        pass &= ok;
        detail.push(format!(
            "{} {}: |1-step - direct| {d1:.1e}, |16-step - direct| {d16:.1e}, |1 - 16| {d_steps:.1e}",
            c.op, c.domain
        ));
    }
    report(&mut lines, 9, t, pass, detail.join("; "));

    let failed: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", lines.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
