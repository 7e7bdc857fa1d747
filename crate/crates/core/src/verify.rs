//! Sampling-based checks of the structural hypotheses on `f`.
//!
//! Every check evaluates a margin per sample (in parallel, order preserved)
//! and reduces by minimum, so reports are bit-for-bit reproducible from the
//! operator, the seed and the sample count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{HessianOperator, HessianQuotient, Spectrum};

const MAX_DRAWS: usize = 1_000_000;

/// Half-width of the box (relative to `|λ|_∞`) that interior samples keep inside the cone.
const INTERIOR_BOX: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStrategy {
    Interior,
    BoundaryApproach,
    Ray,
}

#[derive(Debug, Clone)]
pub struct SampleCloud {
    pub points: Vec<Spectrum>,
    pub seed: u64,
    pub strategy: SampleStrategy,
}

impl SampleCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub operator: String,
    pub seed: u64,
    pub samples: usize,
    pub worst_margin: f64,
    pub witness: Vec<f64>,
    pub pass: bool,
}

impl PropertyReport {
    /// Builds a report from per-sample margins; passes iff the minimum is `>= threshold`.
    pub fn from_margins(
        property: &str,
        operator: String,
        seed: u64,
        margins: impl IntoIterator<Item = (f64, Vec<f64>)>,
        threshold: f64,
    ) -> Self {
        let mut samples = 0;
        let mut worst = f64::INFINITY;
        let mut witness = Vec::new();
        for (m, w) in margins {
            samples += 1;
            // NaN margins count as failures.
            if m < worst || m.is_nan() && !worst.is_nan() {
                worst = m;
                witness = w;
            }
        }
        Self {
            property: property.to_string(),
            operator,
            seed,
            samples,
            worst_margin: worst,
            witness,
            pass: worst >= threshold,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `μ·𝟙 + ν·d` with `d ∈ [−1, 1]^n`, kept if a small box around it lies in the cone.
fn draw_interior(op: &HessianOperator, rng: &mut ChaCha8Rng, draws: &mut usize) -> Result<Vec<f64>> {
    let n = op.dim();
    loop {
        *draws += 1;
        if *draws > MAX_DRAWS {
            return Err(Error::SamplingExhausted { draws: MAX_DRAWS });
        }
        let mu: f64 = rng.random_range(0.1..2.0);
        let nu: f64 = rng.random_range(0.0..2.0) * mu;
        let lam: Vec<f64> = (0..n).map(|_| mu + nu * rng.random_range(-1.0..=1.0)).collect();
        let eta = INTERIOR_BOX * sup_abs(&lam);
        // The cone is convex, so the box is inside iff all its corners are.
        let inside = (0..1usize << n).all(|mask| {
            let corner: Vec<f64> =
                lam.iter().enumerate().map(|(i, v)| if mask >> i & 1 == 1 { v + eta } else { v - eta }).collect();
            op.cone_contains(&corner, 0.0).unwrap_or(false)
        });
        if inside {
            return Ok(lam);
        }
    }
}

/// Largest shift `s` with `λ − s𝟙` still in the cone (bisection, inner side).
fn exit_shift(op: &HessianOperator, lam: &[f64]) -> f64 {
    let mut lo = 0.0;
    let mut hi = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let shifted: Vec<f64> = lam.iter().map(|v| v - mid).collect();
        if op.cone_contains(&shifted, 0.0).unwrap_or(false) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    lo
}

pub fn sample_cone(op: &HessianOperator, count: usize, seed: u64, strategy: SampleStrategy) -> Result<SampleCloud> {
    if count == 0 {
        return Err(Error::Contract("sample count must be >= 1".into()));
    }
    let mut rng = rng_for(seed, 0);
    let mut draws = 0;
    let mut points = Vec::with_capacity(count);
    match strategy {
        SampleStrategy::Interior => {
            for _ in 0..count {
                points.push(draw_interior(op, &mut rng, &mut draws)?);
            }
        }
        SampleStrategy::BoundaryApproach => {
            while points.len() < count {
                let lam = draw_interior(op, &mut rng, &mut draws)?;
                let s = exit_shift(op, &lam);
                for j in 1..=6 {
                    if points.len() == count {
                        break;
                    }
                    let keep = 1.0 - 10f64.powi(-j);
                    points.push(lam.iter().map(|v| v - keep * s).collect());
                }
            }
        }
        SampleStrategy::Ray => {
            let base = draw_interior(op, &mut rng, &mut draws)?;
            for i in 0..count {
                let e = if count == 1 { 0.0 } else { -3.0 + 6.0 * i as f64 / (count - 1) as f64 };
                let t = 10f64.powf(e);
                points.push(base.iter().map(|v| t * v).collect());
            }
        }
    }
    let points = points
        .into_iter()
        .map(|p| {
            debug_assert!(op.cone_contains(&p, 0.0).unwrap_or(false));
            Spectrum::new(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleCloud { points, seed, strategy })
}

fn eval(op: &HessianOperator, lam: &[f64]) -> f64 {
    op.eval_f(lam).unwrap_or(f64::NAN)
}

fn grad_product(op: &HessianOperator, lam: &[f64]) -> f64 {
    op.grad_f(lam).map(|g| g.iter().product()).unwrap_or(f64::NAN)
}

/// Margins `∏ f_i − 𝒯` against the closed-form constant, or the raw products
/// when no closed form exists (then any positive infimum passes).
pub fn check_condition_t(op: &HessianOperator, cloud: &SampleCloud) -> PropertyReport {
    let reference = op.condition_t_constant();
    let margins: Vec<(f64, Vec<f64>)> =
        cloud.points.par_iter().map(|p| (grad_product(op, p) - reference.unwrap_or(0.0), p.to_vec())).collect();
    let threshold = if reference.is_some() { -1e-10 } else { f64::MIN_POSITIVE };
    PropertyReport::from_margins("condition_t", op.to_string(), cloud.seed, margins, threshold)
}

/// The Condition (T) constant used by the Gårding check: closed form when
/// known, otherwise the infimum of `∏ f_i` over the points `λ + τ` actually
/// visited (which is what the concavity argument consumes).
fn garding_constant(op: &HessianOperator, cloud_lam: &SampleCloud, cloud_tau: &SampleCloud) -> f64 {
    if let Some(t) = op.condition_t_constant() {
        return t;
    }
    cloud_lam
        .points
        .par_iter()
        .map(|l| {
            cloud_tau
                .points
                .iter()
                .map(|t| {
                    let sum: Vec<f64> = l.iter().zip(t.iter()).map(|(a, b)| a + b).collect();
                    grad_product(op, &sum)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// `f(λ+τ) − f(λ) ≥ 𝒯^{1/n} (∏τ_i)^{1/n}` over all pairs.
pub fn check_garding_equivalence(
    op: &HessianOperator,
    cloud_lam: &SampleCloud,
    cloud_tau: &SampleCloud,
) -> Result<PropertyReport> {
    if let Some(bad) = cloud_tau.points.iter().find(|t| t.iter().any(|v| *v <= 0.0)) {
        return Err(Error::Contract(format!("tau sample {:?} is not in the positive cone", bad.to_vec())));
    }
    let n = op.dim() as f64;
    let c = garding_constant(op, cloud_lam, cloud_tau).powf(1.0 / n);
    let margins: Vec<(f64, Vec<f64>)> = cloud_lam
        .points
        .par_iter()
        .flat_map_iter(|l| {
            let fl = eval(op, l);
            cloud_tau.points.iter().map(move |t| {
                let sum: Vec<f64> = l.iter().zip(t.iter()).map(|(a, b)| a + b).collect();
                let geo = t.iter().map(|v| v.ln()).sum::<f64>() / n;
                let margin = eval(op, &sum) - fl - c * geo.exp();
                let mut witness = l.to_vec();
                witness.extend(t.iter());
                (margin, witness)
            })
        })
        .collect();
    Ok(PropertyReport::from_margins("garding_equivalence", op.to_string(), cloud_lam.seed, margins, -1e-9))
}

/// `mean(λ) − f(λ) ≥ 0`.
pub fn check_urbas(op: &HessianOperator, cloud: &SampleCloud) -> PropertyReport {
    let margins: Vec<(f64, Vec<f64>)> =
        cloud.points.par_iter().map(|p| (p.iter().sum::<f64>() / p.len() as f64 - eval(op, p), p.to_vec())).collect();
    PropertyReport::from_margins("urbas", op.to_string(), cloud.seed, margins, -1e-10)
}

/// Midpoint concavity on random pairs of cloud points.
pub fn check_concavity(op: &HessianOperator, cloud: &SampleCloud) -> Result<PropertyReport> {
    let len = cloud.len();
    if len < 2 {
        return Err(Error::Contract("concavity check needs at least 2 samples".into()));
    }
    let mut rng = rng_for(cloud.seed, 1);
    let partners: Vec<usize> = (0..len)
        .map(|i| {
            let j = rng.random_range(0..len - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        })
        .collect();
    let margins: Vec<(f64, Vec<f64>)> = (0..len)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (&cloud.points[i], &cloud.points[partners[i]]);
            let mid: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            let margin = eval(op, &mid) - 0.5 * (eval(op, x) + eval(op, y));
            let mut witness = x.to_vec();
            witness.extend(y.iter());
            (margin, witness)
        })
        .collect();
    Ok(PropertyReport::from_margins("concavity", op.to_string(), cloud.seed, margins, -1e-10))
}

/// `−|f(1, …, 1) − 1|`.
pub fn check_normalization(op: &HessianOperator) -> PropertyReport {
    let ones = vec![1.0; op.dim()];
    let margin = -(eval(op, &ones) - 1.0).abs();
    PropertyReport::from_margins("normalization", op.to_string(), 0, [(margin, ones)], -1e-12)
}

/// `−|f(tλ) − t f(λ)| / t` for log-uniform `t ∈ (0.01, 100)`.
pub fn check_homogeneity(op: &HessianOperator, cloud: &SampleCloud) -> PropertyReport {
    let mut rng = rng_for(cloud.seed, 2);
    let ts: Vec<f64> = (0..cloud.len()).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
    let margins: Vec<(f64, Vec<f64>)> = cloud
        .points
        .par_iter()
        .zip(ts.par_iter())
        .map(|(p, &t)| {
            let scaled: Vec<f64> = p.iter().map(|v| t * v).collect();
            (-(eval(op, &scaled) - t * eval(op, p)).abs() / t, p.to_vec())
        })
        .collect();
    PropertyReport::from_margins("homogeneity", op.to_string(), cloud.seed, margins, -1e-10)
}

/// `−|f(πλ) − f(λ)|` for a random permutation `π` per sample.
pub fn check_permutation_symmetry(op: &HessianOperator, cloud: &SampleCloud) -> PropertyReport {
    let mut rng = rng_for(cloud.seed, 3);
    let perms: Vec<Vec<usize>> = (0..cloud.len())
        .map(|_| {
            let mut idx: Vec<usize> = (0..op.dim()).collect();
            idx.shuffle(&mut rng);
            idx
        })
        .collect();
    let margins: Vec<(f64, Vec<f64>)> = cloud
        .points
        .par_iter()
        .zip(perms.par_iter())
        .map(|(p, perm)| {
            let permuted: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            (-(eval(op, &permuted) - eval(op, p)).abs(), p.to_vec())
        })
        .collect();
    PropertyReport::from_margins("permutation_symmetry", op.to_string(), cloud.seed, margins, -1e-12)
}

/// `min_i f_i(λ)`; passes only if strictly positive everywhere.
pub fn check_ellipticity(op: &HessianOperator, cloud: &SampleCloud) -> PropertyReport {
    let margins: Vec<(f64, Vec<f64>)> = cloud
        .points
        .par_iter()
        .map(|p| {
            let g = op.grad_f(p).unwrap_or_else(|_| vec![f64::NAN]);
            (g.iter().copied().fold(f64::INFINITY, f64::min), p.to_vec())
        })
        .collect();
    PropertyReport::from_margins("ellipticity", op.to_string(), cloud.seed, margins, f64::MIN_POSITIVE)
}

/// Fourth-order central difference of `f` along coordinate `i`.
pub fn central_difference(op: &HessianOperator, lam: &[f64], i: usize, step: f64) -> f64 {
    let at = |s: f64| {
        let mut p = lam.to_vec();
        p[i] += s;
        eval(op, &p)
    };
    (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step)
}

/// `−max_i |FD_i − f_i| / |∇f|_∞` with step `1e−4·|λ|_∞`.
pub fn check_gradient(op: &HessianOperator, cloud: &SampleCloud) -> PropertyReport {
    let margins: Vec<(f64, Vec<f64>)> = cloud
        .points
        .par_iter()
        .map(|p| {
            let g = op.grad_f(p).unwrap_or_else(|_| vec![f64::NAN; p.len()]);
            let step = 1e-4 * sup_abs(p);
            let scale = sup_abs(&g);
            let err = (0..p.len()).map(|i| (central_difference(op, p, i, step) - g[i]).abs()).fold(0.0_f64, f64::max);
            (-err / scale, p.to_vec())
        })
        .collect();
    PropertyReport::from_margins("gradient_fd", op.to_string(), cloud.seed, margins, -1e-6)
}

/// Runs every structural check on one operator with a fixed seed.
pub fn verify_operator(op: &HessianOperator, samples: usize, seed: u64) -> Result<Vec<PropertyReport>> {
    let interior = sample_cone(op, samples, seed, SampleStrategy::Interior)?;
    let boundary = sample_cone(op, samples, seed, SampleStrategy::BoundaryApproach)?;
    let mut reports = vec![
        check_normalization(op),
        check_homogeneity(op, &interior),
        check_permutation_symmetry(op, &interior),
        check_ellipticity(op, &interior),
        check_gradient(op, &interior),
        check_concavity(op, &interior)?,
        check_urbas(op, &interior),
        check_condition_t(op, &interior),
    ];
    let mut urbas_boundary = check_urbas(op, &boundary);
    urbas_boundary.property = "urbas_boundary_approach".into();
    reports.push(urbas_boundary);
    let mut t_boundary = check_condition_t(op, &boundary);
    t_boundary.property = "condition_t_boundary_approach".into();
    reports.push(t_boundary);

    let pairs = (samples as f64).sqrt().ceil().clamp(2.0, 200.0) as usize;
    let lam = sample_cone(op, pairs, seed, SampleStrategy::Interior)?;
    let positive = HessianOperator::k_hessian(op.dim(), op.dim())?;
    let tau = sample_cone(&positive, pairs, seed.wrapping_add(1), SampleStrategy::Interior)?;
    reports.push(check_garding_equivalence(op, &lam, &tau)?);
    Ok(reports)
}

/// `∏ f_i` of the quotient along `λ(t) = (t, 1, …, 1)`.
pub fn quotient_ray_scan(n: usize, k: usize, l: usize, ts: &[f64]) -> Result<Vec<(f64, f64)>> {
    let q = HessianQuotient::new(n, k, l)?;
    ts.iter()
        .map(|&t| {
            let mut lam = vec![1.0; n];
            lam[0] = t;
            let (_, g) = q.eval_with_grad(&lam)?;
            Ok((t, g.iter().product()))
        })
        .collect()
}

/// Scans `t ∈ [1, 10⁶]` (61 log-spaced points) and passes if the smallest
/// `∏ f_i` drops below `1e−3`, i.e. no uniform Condition (T) constant exists.
pub fn falsify_quotient_t(n: usize, k: usize, l: usize) -> Result<PropertyReport> {
    let ts: Vec<f64> = (0..=60).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
    let scan = quotient_ray_scan(n, k, l, &ts)?;
    let (t_min, min_product) = scan.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).expect("scan is non-empty");
    let mut witness = vec![1.0; n];
    witness[0] = t_min;
    let worst_margin = 1e-3 - min_product;
    Ok(PropertyReport {
        property: "quotient_condition_t".into(),
        operator: format!("quotient:n={n},k={k},l={l}"),
        seed: 0,
        samples: scan.len(),
        worst_margin,
        witness,
        pass: worst_margin > 0.0,
    })
}
