//! Small dense symmetric matrices and their eigen-decomposition.
//!
//! 2×2 matrices use closed-form eigenpairs and 3×3 eigenvalues use the
//! trigonometric form of the cubic. Everything else (and 3×3 eigenvectors)
//! goes through cyclic Jacobi rotations.

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-14;

/// Real symmetric `n × n` matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Contract(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        let scale = data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Contract("matrix has non-finite entries".into()));
                }
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Contract(format!("matrix not symmetric at ({i},{j}): {a} vs {b}")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(n, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in d.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self { n, data }
    }

    /// 2×2 matrix `[[a, b], [b, c]]`; symmetric by construction.
    pub fn sym2(a: f64, b: f64, c: f64) -> Self {
        Self { n: 2, data: vec![a, b, b, c] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `Σ_ij self_ij · other_ij`.
    pub fn frobenius_dot(&self, other: &SymMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scaled_add(&self, t: f64, other: &SymMatrix) -> SymMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + t * b).collect();
        SymMatrix { n: self.n, data }
    }

    /// `Qᵀ A Q` for a square (row-major) `q`.
    pub fn conjugate(&self, q: &[f64]) -> SymMatrix {
        let n = self.n;
        let mut aq = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                aq[i * n + j] = (0..n).map(|m| self.data[i * n + m] * q[m * n + j]).sum();
            }
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|m| q[m * n + i] * aq[m * n + j]).sum();
            }
        }
        // Symmetrize away roundoff.
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (out[i * n + j] + out[j * n + i]);
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        SymMatrix { n, data: out }
    }
}

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors,
/// stored as the columns of a row-major `n × n` matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

pub fn sym_eigenvalues(a: &SymMatrix) -> Vec<f64> {
    match a.n {
        1 => vec![a.data[0]],
        2 => {
            let (l1, l2, _) = eig2(a.data[0], a.data[1], a.data[3]);
            vec![l1, l2]
        }
        3 => eigvals3(a),
        _ => jacobi(a).values,
    }
}

pub fn sym_eigen(a: &SymMatrix) -> SymEigen {
    match a.n {
        1 => SymEigen { values: vec![a.data[0]], vectors: vec![1.0] },
        2 => {
            let (l1, l2, theta) = eig2(a.data[0], a.data[1], a.data[3]);
            let (s, c) = theta.sin_cos();
            // Column 0 pairs with l1, column 1 with l2.
            SymEigen { values: vec![l1, l2], vectors: vec![-s, c, c, s] }
        }
        _ => jacobi(a),
    }
}

/// Closed-form eigenpair of `[[a, b], [b, c]]`: returns `(small, large, θ)`
/// with `(cos θ, sin θ)` the eigenvector of `large`.
fn eig2(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let mean = 0.5 * (a + c);
    let radius = (0.5 * (a - c)).hypot(b);
    let det = a * c - b * b;
    // Recover the smaller-magnitude root from the determinant to avoid
    // cancellation when the matrix is nearly singular.
    let (small, large) = if mean >= 0.0 {
        let large = mean + radius;
        let small = if large != 0.0 { det / large } else { mean - radius };
        (small, large)
    } else {
        let small = mean - radius;
        (small, det / small)
    };
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    (small, large, theta)
}

fn eigvals3(a: &SymMatrix) -> Vec<f64> {
    let m = |i: usize, j: usize| a.data[i * 3 + j];
    let p1 = m(0, 1).powi(2) + m(0, 2).powi(2) + m(1, 2).powi(2);
    let q = (m(0, 0) + m(1, 1) + m(2, 2)) / 3.0;
    if p1 == 0.0 {
        let mut v = vec![m(0, 0), m(1, 1), m(2, 2)];
        v.sort_by(f64::total_cmp);
        return v;
    }
    let p2 = (m(0, 0) - q).powi(2) + (m(1, 1) - q).powi(2) + (m(2, 2) - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = |i: usize, j: usize| (m(i, j) - if i == j { q } else { 0.0 }) / p;
    let det_b = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l_max = q + 2.0 * p * phi.cos();
    let l_min = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let l_mid = 3.0 * q - l_max - l_min;
    vec![l_min, l_mid, l_max]
}

fn jacobi(a: &SymMatrix) -> SymEigen {
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = m.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        if off <= f64::EPSILON.powi(2) * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    SymEigen { values, vectors }
}
