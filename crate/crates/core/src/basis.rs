//! Multivariate Legendre polynomial-chaos basis over the canonical hypercube
//! `[-1, 1]^m` with the uniform probability density.
//!
//! Basis functions are products of standard (non-normalized) Legendre
//! polynomials, `L_n(1) = 1`. Their squared norms under the uniform density,
//! `<psi_k^2> = prod_i 1 / (2 n_i + 1)`, are carried separately and enter the
//! projection, moment, and sensitivity formulas explicitly.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DOMAIN_SLACK: f64 = 1e-12;

/// Standard Legendre polynomial `L_n(x)` by the three-term recurrence.
pub fn legendre_eval(n: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0 + DOMAIN_SLACK) {
        return Err(Error::Domain(format!("Legendre argument {x} outside [-1, 1]")));
    }
    Ok(legendre_unchecked(n, x))
}

#[inline]
fn legendre_unchecked(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for k in 1..n {
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Fills `out[0..=order]` with `L_0(x) ..= L_order(x)`.
#[inline]
fn legendre_table(order: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if order == 0 {
        return;
    }
    out[1] = x;
    for k in 1..order {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
}

/// Per-dimension polynomial degrees of one basis term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(degrees: Vec<u32>) -> Self {
        MultiIndex(degrees)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn degrees(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Dimensions with non-zero degree.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &d)| d > 0).map(|(i, _)| i)
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&d| d == 0)
    }

    /// `<psi^2>` under the uniform probability density on `[-1, 1]^m`.
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|&n| 1.0 / (2.0 * n as f64 + 1.0)).product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// Product of 1D Legendre polynomials at `xi`.
pub fn basis_eval(index: &MultiIndex, xi: &CanonicalPoint) -> Result<f64> {
    if index.dim() != xi.dim() {
        return Err(Error::DimensionMismatch { expected: index.dim(), got: xi.dim() });
    }
    Ok(index
        .degrees()
        .iter()
        .zip(xi.coords())
        .map(|(&n, &x)| legendre_unchecked(n as usize, x))
        .product())
}

pub fn basis_norm_sq(index: &MultiIndex) -> f64 {
    index.norm_sq()
}

/// Point of the canonical hypercube `[-1, 1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPoint(Vec<f64>);

impl CanonicalPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(x) = coords.iter().find(|x| !(x.abs() <= 1.0 + DOMAIN_SLACK)) {
            return Err(Error::Domain(format!("canonical coordinate {x} outside [-1, 1]")));
        }
        Ok(CanonicalPoint(coords))
    }

    pub fn origin(dim: usize) -> Self {
        CanonicalPoint(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Enumerates all multi-indices of total degree `<= order` in graded
/// lexicographic order: by total degree, then with larger leading degrees
/// first. For `(m = 2, p = 2)` this is `(0,0) (1,0) (0,1) (2,0) (1,1) (0,2)`.
pub fn total_order_indices(dim: usize, order: usize) -> Vec<MultiIndex> {
    fn fill(pos: usize, remaining: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if pos + 1 == cur.len() {
            cur[pos] = remaining;
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for d in (0..=remaining).rev() {
            cur[pos] = d;
            fill(pos + 1, remaining - d, cur, out);
        }
        cur[pos] = 0;
    }

    let mut out = Vec::with_capacity(binomial(dim + order, order));
    if dim == 0 {
        return out;
    }
    let mut cur = vec![0; dim];
    for total in 0..=order as u32 {
        fill(0, total, &mut cur, &mut out);
    }
    out
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Total-order Legendre basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PcBasis {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
}

impl PcBasis {
    pub fn total_order(dim: usize, order: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("basis dimension must be at least 1".into()));
        }
        Ok(PcBasis { dim, order, indices: total_order_indices(dim, order) })
    }

    /// Rebuilds a basis from an explicit index list, checking that it matches
    /// the canonical total-order enumeration.
    pub fn from_indices(dim: usize, order: usize, indices: Vec<MultiIndex>) -> Result<Self> {
        let expected = Self::total_order(dim, order)?;
        if expected.indices != indices {
            return Err(Error::Integrity(format!(
                "index list does not match the total-order basis for m={dim}, p={order}"
            )));
        }
        Ok(expected)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn norms_sq(&self) -> Vec<f64> {
        self.indices.iter().map(MultiIndex::norm_sq).collect()
    }

    /// Evaluates every basis function at `xi` into `out` (length `len()`).
    pub fn eval_into(&self, xi: &[f64], out: &mut [f64]) -> Result<()> {
        if xi.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: xi.len() });
        }
        if let Some(x) = xi.iter().find(|x| !(x.abs() <= 1.0 + DOMAIN_SLACK)) {
            return Err(Error::Domain(format!("canonical coordinate {x} outside [-1, 1]")));
        }
        let stride = self.order + 1;
        let mut table = vec![0.0; self.dim * stride];
        for (d, &x) in xi.iter().enumerate() {
            legendre_table(self.order, x, &mut table[d * stride..(d + 1) * stride]);
        }
        for (slot, idx) in out.iter_mut().zip(&self.indices) {
            *slot = idx
                .degrees()
                .iter()
                .enumerate()
                .map(|(d, &n)| table[d * stride + n as usize])
                .product();
        }
        Ok(())
    }

    pub fn eval(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(xi, &mut out)?;
        Ok(out)
    }

    /// Rows are basis evaluations at each point: an `S x (R+1)` matrix.
    pub fn design_matrix(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut psi = DMatrix::zeros(points.len(), self.len());
        let mut row = vec![0.0; self.len()];
        for (s, p) in points.iter().enumerate() {
            self.eval_into(p, &mut row)?;
            for (k, v) in row.iter().enumerate() {
                psi[(s, k)] = *v;
            }
        }
        Ok(psi)
    }
}

/// Identifies one surrogate output column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputLabel {
    pub gauge: String,
    pub step: usize,
    pub time_s: f64,
}

/// Sobol main and total effect indices of one dimension for one output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolIndex {
    pub main: f64,
    pub total: f64,
    /// Set when the output has zero variance; both indices are then 0.
    pub degenerate: bool,
}

/// Polynomial-chaos surrogate `G(xi) = sum_k g_k psi_k(xi)` for several
/// outputs at once. Coefficients are stored `(basis term) x (output)`.
#[derive(Debug, Clone)]
pub struct PcExpansion {
    basis: PcBasis,
    coefficients: DMatrix<f64>,
    labels: Vec<OutputLabel>,
}

impl PcExpansion {
    pub fn new(basis: PcBasis, coefficients: DMatrix<f64>, labels: Vec<OutputLabel>) -> Result<Self> {
        if coefficients.nrows() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), got: coefficients.nrows() });
        }
        if coefficients.ncols() != labels.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: coefficients.ncols() });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite PC coefficient".into()));
        }
        Ok(PcExpansion { basis, coefficients, labels })
    }

    /// Convenience constructor with anonymous labels, one per column.
    pub fn unlabeled(basis: PcBasis, coefficients: DMatrix<f64>) -> Result<Self> {
        let labels = (0..coefficients.ncols())
            .map(|j| OutputLabel { gauge: "out".into(), step: j, time_s: j as f64 })
            .collect();
        Self::new(basis, coefficients, labels)
    }

    pub fn basis(&self) -> &PcBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn labels(&self) -> &[OutputLabel] {
        &self.labels
    }

    pub fn n_outputs(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn eval(&self, xi: &CanonicalPoint) -> Result<Vec<f64>> {
        let psi = self.basis.eval(xi.coords())?;
        Ok(self.eval_with_basis_values(&psi))
    }

    /// Outputs given precomputed basis values at a point.
    pub fn eval_with_basis_values(&self, psi: &[f64]) -> Vec<f64> {
        let psi = DVector::from_column_slice(psi);
        (self.coefficients.tr_mul(&psi)).as_slice().to_vec()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.coefficients.row(0).iter().copied().collect()
    }

    pub fn variance(&self) -> Vec<f64> {
        let norms = self.basis.norms_sq();
        (0..self.n_outputs())
            .map(|j| {
                self.coefficients
                    .column(j)
                    .iter()
                    .zip(&norms)
                    .skip(1)
                    .map(|(g, n)| g * g * n)
                    .sum()
            })
            .collect()
    }

    /// Main and total Sobol indices of dimension `dim` for every output.
    pub fn sobol_indices(&self, dim: usize) -> Result<Vec<SobolIndex>> {
        if dim >= self.basis.dim() {
            return Err(Error::DimensionMismatch { expected: self.basis.dim(), got: dim + 1 });
        }
        let norms = self.basis.norms_sq();
        let variances = self.variance();
        let mut out = Vec::with_capacity(self.n_outputs());
        let degenerate = variances.iter().filter(|v| **v <= 0.0).count();
        if degenerate > 0 {
            log::debug!("{degenerate} zero-variance outputs: Sobol indices undefined, reporting 0");
        }
        for (j, &var) in variances.iter().enumerate() {
            if var <= 0.0 {
                out.push(SobolIndex { main: 0.0, total: 0.0, degenerate: true });
                continue;
            }
            let (mut main, mut total) = (0.0, 0.0);
            for (k, idx) in self.basis.indices().iter().enumerate().skip(1) {
                let degs = idx.degrees();
                if degs[dim] == 0 {
                    continue;
                }
                let part = self.coefficients[(k, j)].powi(2) * norms[k];
                total += part;
                if degs.iter().enumerate().all(|(i, &d)| i == dim || d == 0) {
                    main += part;
                }
            }
            out.push(SobolIndex { main: main / var, total: total / var, degenerate: false });
        }
        Ok(out)
    }
}

pub fn pce_eval(exp: &PcExpansion, xi: &CanonicalPoint) -> Result<Vec<f64>> {
    exp.eval(xi)
}

pub fn pce_mean(exp: &PcExpansion) -> Vec<f64> {
    exp.mean()
}

pub fn pce_variance(exp: &PcExpansion) -> Vec<f64> {
    exp.variance()
}

pub fn sobol_indices(exp: &PcExpansion, dim: usize) -> Result<Vec<SobolIndex>> {
    exp.sobol_indices(dim)
}
