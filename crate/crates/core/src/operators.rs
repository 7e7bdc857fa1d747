//! The operator families `f : Γ → ℝ` and their matrix-level lift `F(A) = f(λ(A))`.
//!
//! Two families are supported, both normalized so that `f(1, …, 1) = 1`:
//!
//! * k-Hessian: `f = (σ_k(λ) / C(n,k))^{1/k}` on the Gårding cone `Γ_k`.
//! * p-Monge-Ampère: `f = M_p(λ)^{1/C(n,p)} / p` on `P_p`, where `M_p` is the
//!   product of all p-fold partial sums of `λ`.
//!
//! [`HessianQuotient`] is kept alongside for the Condition (T) counterexample;
//! it is not a solver operator.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, sym_eigenvalues, SymMatrix};

/// Eigenvalue vector of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::Contract(format!("spectrum needs at least 2 entries, got {}", entries.len())));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("spectrum has non-finite entries: {entries:?}")));
        }
        Ok(Self(entries))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Spectrum {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    KHessian,
    PMongeAmpere,
}

/// Descriptor for one member of an operator family.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianOperator {
    kind: OperatorKind,
    index: usize,
    dim: usize,
    norm_factor: f64,
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `σ_0, …, σ_k` of `lam`.
fn elementary_symmetric(lam: impl IntoIterator<Item = f64>, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for x in lam {
        for j in (1..=k).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `σ_j(λ | i)`: elementary symmetric polynomial of `lam` with entry `i` removed.
fn sigma_without(lam: &[f64], i: usize, j: usize) -> f64 {
    let rest = lam.iter().enumerate().filter(|&(m, _)| m != i).map(|(_, v)| *v);
    elementary_symmetric(rest, j)[j]
}

fn format_entries(lam: &[f64]) -> String {
    lam.iter().map(|v| format!("{v:e}")).join(", ")
}

impl HessianOperator {
    pub fn k_hessian(k: usize, n: usize) -> Result<Self> {
        Self::validate(k, n)?;
        Ok(Self { kind: OperatorKind::KHessian, index: k, dim: n, norm_factor: binomial(n, k).powf(1.0 / k as f64) })
    }

    pub fn p_monge_ampere(p: usize, n: usize) -> Result<Self> {
        Self::validate(p, n)?;
        Ok(Self { kind: OperatorKind::PMongeAmpere, index: p, dim: n, norm_factor: p as f64 })
    }

    fn validate(index: usize, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::Contract(format!("operator dimension must be >= 2, got {n}")));
        }
        if index < 1 || index > n {
            return Err(Error::Contract(format!("operator index {index} outside 1..={n}")));
        }
        Ok(())
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    fn check_dim(&self, lam: &[f64]) -> Result<()> {
        if lam.len() != self.dim {
            return Err(Error::Contract(format!(
                "spectrum of length {} given to a dimension-{} operator",
                lam.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// First violated defining inequality of the cone (with slack `margin`), if any.
    pub fn cone_violation(&self, lam: &[f64], margin: f64) -> Result<Option<String>> {
        self.check_dim(lam)?;
        match self.kind {
            OperatorKind::KHessian => {
                let sigma = elementary_symmetric(lam.iter().copied(), self.index);
                for (j, s) in sigma.iter().enumerate().skip(1) {
                    if !(*s > margin) {
                        return Ok(Some(format!("sigma_{j} = {s:e} <= {margin:e}")));
                    }
                }
            }
            OperatorKind::PMongeAmpere => {
                for subset in (0..self.dim).combinations(self.index) {
                    let s: f64 = subset.iter().map(|&i| lam[i]).sum();
                    if !(s > margin) {
                        let terms = subset.iter().map(|i| format!("lambda_{i}")).join(" + ");
                        return Ok(Some(format!("{terms} = {s:e} <= {margin:e}")));
                    }
                }
            }
        }
        Ok(None)
    }

    /// True iff every defining inequality of the cone holds with slack `> margin`.
    pub fn cone_contains(&self, lam: &[f64], margin: f64) -> Result<bool> {
        Ok(self.cone_violation(lam, margin)?.is_none())
    }

    fn require_in_cone(&self, lam: &[f64]) -> Result<()> {
        match self.cone_violation(lam, 0.0)? {
            None => Ok(()),
            Some(violated) => Err(Error::OutsideCone { spectrum: lam.to_vec(), violated }),
        }
    }

    pub fn eval_f(&self, lam: &[f64]) -> Result<f64> {
        self.require_in_cone(lam)?;
        Ok(self.value_unchecked(lam))
    }

    fn value_unchecked(&self, lam: &[f64]) -> f64 {
        match self.kind {
            OperatorKind::KHessian => {
                let sk = elementary_symmetric(lam.iter().copied(), self.index)[self.index];
                sk.powf(1.0 / self.index as f64) / self.norm_factor
            }
            OperatorKind::PMongeAmpere => {
                let count = binomial(self.dim, self.index);
                let mean_log: f64 = (0..self.dim)
                    .combinations(self.index)
                    .map(|s| s.iter().map(|&i| lam[i]).sum::<f64>().ln())
                    .sum::<f64>()
                    / count;
                mean_log.exp() / self.norm_factor
            }
        }
    }

    /// Analytic partials `∂f/∂λ_i` of the normalized operator.
    pub fn grad_f(&self, lam: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_with_grad(lam)?.1)
    }

    pub fn eval_with_grad(&self, lam: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.require_in_cone(lam)?;
        let n = self.dim;
        let k = self.index;
        match self.kind {
            OperatorKind::KHessian => {
                let sk = elementary_symmetric(lam.iter().copied(), k)[k];
                let f = sk.powf(1.0 / k as f64) / self.norm_factor;
                // f_i = f σ_{k-1}(λ|i) / (k σ_k)
                let scale = f / (k as f64 * sk);
                let grad = (0..n).map(|i| scale * sigma_without(lam, i, k - 1)).collect();
                Ok((f, grad))
            }
            OperatorKind::PMongeAmpere => {
                let count = binomial(n, k);
                let mut mean_log = 0.0;
                let mut inv_sums = vec![0.0; n];
                for subset in (0..n).combinations(k) {
                    let s: f64 = subset.iter().map(|&i| lam[i]).sum();
                    mean_log += s.ln();
                    for &i in &subset {
                        inv_sums[i] += 1.0 / s;
                    }
                }
                let f = (mean_log / count).exp() / self.norm_factor;
                let grad = inv_sums.into_iter().map(|w| f * w / count).collect();
                Ok((f, grad))
            }
        }
    }

    fn check_matrix(&self, a: &SymMatrix) -> Result<()> {
        if a.dim() != self.dim {
            return Err(Error::Contract(format!(
                "{}x{} matrix given to a dimension-{} operator",
                a.dim(),
                a.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `F(A) = f(λ(A))`.
    pub fn eval_matrix(&self, a: &SymMatrix) -> Result<f64> {
        self.check_matrix(a)?;
        self.eval_f(&sym_eigenvalues(a))
    }

    /// `F(A)` together with the coefficient matrix `F^{ij} = ∂F/∂a_ij`,
    /// expressed in ambient coordinates: `F^{ij} = Σ_m Q_im f_m(λ) Q_jm`.
    ///
    /// Requires the spectrum to clear the cone with slack `margin`.
    pub fn linearization_with_value(&self, a: &SymMatrix, margin: f64) -> Result<(f64, SymMatrix)> {
        self.check_matrix(a)?;
        let eig = sym_eigen(a);
        if let Some(violated) = self.cone_violation(&eig.values, margin)? {
            return Err(Error::DegenerateLinearization { spectrum: eig.values, violated });
        }
        let (f, grad) = self.eval_with_grad(&eig.values)?;
        let n = self.dim;
        let q = &eig.vectors;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|m| q[i * n + m] * grad[m] * q[j * n + m]).sum();
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok((f, SymMatrix::new(n, data)?))
    }

    pub fn linearization(&self, a: &SymMatrix, margin: f64) -> Result<SymMatrix> {
        Ok(self.linearization_with_value(a, margin)?.1)
    }

    /// Exact value of `∏ f_i` where it is constant over the whole cone.
    ///
    /// That happens for the normalized trace (`k = 1`, `p = n`) and for
    /// `det^{1/n}` (`k = n`, `p = 1`), where the product is `n^{-n}`.
    pub fn condition_t_constant(&self) -> Option<f64> {
        let n = self.dim;
        let exact = match self.kind {
            OperatorKind::KHessian => self.index == 1 || self.index == n,
            OperatorKind::PMongeAmpere => self.index == 1 || self.index == n,
        };
        exact.then(|| (n as f64).powi(-(n as i32)))
    }

    /// Every supported operator with dimension in `dims`.
    pub fn all_supported(dims: &[usize]) -> Vec<HessianOperator> {
        let mut ops = Vec::new();
        for &n in dims {
            for k in 1..=n {
                ops.push(Self::k_hessian(k, n).expect("valid index"));
            }
            for p in 1..=n {
                ops.push(Self::p_monge_ampere(p, n).expect("valid index"));
            }
        }
        ops
    }
}

impl fmt::Display for HessianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            OperatorKind::KHessian => write!(f, "k-hessian:k={},n={}", self.index, self.dim),
            OperatorKind::PMongeAmpere => write!(f, "p-ma:p={},n={}", self.index, self.dim),
        }
    }
}

impl FromStr for HessianOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad operator token '{s}' (expected k-hessian:k=K,n=N or p-ma:p=P,n=N)"));
        let (family, params) = s.trim().split_once(':').ok_or_else(bad)?;
        let index_key = match family {
            "k-hessian" => "k",
            "p-ma" => "p",
            _ => return Err(bad()),
        };
        let mut index = None;
        let mut dim = None;
        for part in params.split(',') {
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            let value: usize = value.trim().parse().map_err(|_| bad())?;
            match key.trim() {
                k if k == index_key => index = Some(value),
                "n" => dim = Some(value),
                _ => return Err(bad()),
            }
        }
        let (index, dim) = (index.ok_or_else(bad)?, dim.ok_or_else(bad)?);
        match family {
            "k-hessian" => Self::k_hessian(index, dim),
            _ => Self::p_monge_ampere(index, dim),
        }
    }
}

impl Serialize for HessianOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HessianOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Normalized Hessian quotient `((σ_k/C(n,k)) / (σ_l/C(n,l)))^{1/(k-l)}` on `Γ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HessianQuotient {
    pub n: usize,
    pub k: usize,
    pub l: usize,
}

impl HessianQuotient {
    pub fn new(n: usize, k: usize, l: usize) -> Result<Self> {
        if !(n >= k && k > l && l >= 1) {
            return Err(Error::Contract(format!("quotient needs n >= k > l >= 1, got n={n} k={k} l={l}")));
        }
        Ok(Self { n, k, l })
    }

    fn power(&self) -> f64 {
        1.0 / (self.k - self.l) as f64
    }

    fn norm(&self) -> f64 {
        (binomial(self.n, self.k) / binomial(self.n, self.l)).powf(self.power())
    }

    pub fn eval_with_grad(&self, lam: &[f64]) -> Result<(f64, Vec<f64>)> {
        if lam.len() != self.n {
            return Err(Error::Contract(format!("expected spectrum of length {}", self.n)));
        }
        let sigma = elementary_symmetric(lam.iter().copied(), self.k);
        if let Some(j) = (1..=self.k).find(|&j| !(sigma[j] > 0.0)) {
            return Err(Error::OutsideCone {
                spectrum: lam.to_vec(),
                violated: format!("sigma_{j} = {:e} <= 0 ({})", sigma[j], format_entries(lam)),
            });
        }
        let (sk, sl) = (sigma[self.k], sigma[self.l]);
        let f = (sk / sl).powf(self.power()) / self.norm();
        let grad = (0..self.n)
            .map(|i| {
                f * self.power() * (sigma_without(lam, i, self.k - 1) / sk - sigma_without(lam, i, self.l - 1) / sl)
            })
            .collect();
        Ok((f, grad))
    }
}
