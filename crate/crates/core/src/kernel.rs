//! Squared-exponential kernels, covariance assembly and matrix-free access.
//!
//! Two ways to reach a covariance matrix are provided behind the
//! [`Covariance`] trait: a dense [`SymmetricMatrix`], and a
//! [`KernelOperator`] that generates columns and block products on the fly
//! from the kernel and the point set.

use faer::{Mat, MatRef, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;

/// Mean Earth radius in kilometres used by the great-circle distance.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Largest `n` for which [`assemble_covariance`] builds a dense matrix.
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Row-block size of the matrix-free product.
pub const DEFAULT_BLOCK_SIZE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// Euclidean distance in coordinate units.
    #[serde(rename = "squared-exponential-euclidean")]
    SquaredExponential,
    /// Haversine distance in km between `(longitude, latitude)` pairs in degrees.
    #[serde(rename = "squared-exponential-great-circle")]
    GreatCircle,
}

/// Kernel family, signal standard deviation `sigma_f`, lengthscale `ell` and
/// observation-noise standard deviation `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub sigma_f: f64,
    pub ell: f64,
    pub eta: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma_f: f64, ell: f64, eta: f64) -> Result<Self> {
        let spec = KernelSpec { family, sigma_f, ell, eta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn squared_exponential(sigma_f: f64, ell: f64, eta: f64) -> Result<Self> {
        KernelSpec::new(KernelFamily::SquaredExponential, sigma_f, ell, eta)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.sigma_f.is_finite() && self.ell.is_finite() && self.eta.is_finite();
        if !finite || self.sigma_f <= 0.0 || self.ell <= 0.0 || self.eta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "kernel requires sigma_f > 0, ell > 0, eta >= 0 (all finite); got sigma_f={}, ell={}, eta={}",
                self.sigma_f, self.ell, self.eta
            )));
        }
        Ok(())
    }

    /// `sigma_f²`, the value on the diagonal of every covariance matrix.
    pub fn signal_variance(&self) -> f64 {
        self.sigma_f * self.sigma_f
    }

    /// Checks that points of dimension `dim` are valid inputs.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self.family {
            KernelFamily::GreatCircle if dim != 2 => {
                Err(Error::DimensionMismatch { expected: 2, actual: dim })
            }
            _ => Ok(()),
        }
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
        }
        self.check_dim(x.len())?;
        Ok(self.distance_sq_unchecked(x, y).sqrt())
    }

    /// κ(x, y) = σ_f² exp(−d(x, y)² / (2ℓ²)).
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
        }
        self.check_dim(x.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    fn distance_sq_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => {
                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
            }
            KernelFamily::GreatCircle => great_circle_km(x, y).powi(2),
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2 = self.distance_sq_unchecked(x, y);
        self.signal_variance() * (-d2 / (2.0 * self.ell * self.ell)).exp()
    }
}

/// Haversine distance in km between `(lon, lat)` points given in degrees.
pub fn great_circle_km(x: &[f64], y: &[f64]) -> f64 {
    let (lon1, lat1) = (x[0].to_radians(), x[1].to_radians());
    let (lon2, lat2) = (y[0].to_radians(), y[1].to_radians());
    let s_lat = ((lat2 - lat1) / 2.0).sin();
    let s_lon = ((lon2 - lon1) / 2.0).sin();
    let a = s_lat * s_lat + lat1.cos() * lat2.cos() * s_lon * s_lon;
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Dense symmetric matrix. Symmetry is exact: construction mirrors the lower
/// triangle onto the upper one.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(Mat<f64>);

impl SymmetricMatrix {
    /// Wraps `m` after checking it is square and symmetric to 1e-12 per entry.
    pub fn from_mat(mut m: Mat<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), actual: m.ncols() });
        }
        let n = m.nrows();
        for j in 0..n {
            for i in j + 1..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                m[(j, i)] = a;
            }
        }
        Ok(SymmetricMatrix(m))
    }

    /// Builds the matrix from a function evaluated on the lower triangle.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymmetricMatrix(m)
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymmetricMatrix::from_lower_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.0.as_ref()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.0
    }

    /// `K[rows, cols]` as a general matrix.
    pub fn cross(&self, rows: &[usize], cols: &[usize]) -> Result<Mat<f64>> {
        let n = self.dim();
        if let Some(&bad) = rows.iter().chain(cols).find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        Ok(Mat::from_fn(rows.len(), cols.len(), |i, j| self.0[(rows[i], cols[j])]))
    }

    /// Symmetric eigen check: min eigenvalue ≥ −1e−10·λ_max.
    pub fn is_spsd(&self) -> Result<bool> {
        let values = self
            .0
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
        let max = values.iter().cloned().fold(0.0, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(min >= -1e-10 * max)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)]).sum()
    }
}

/// Access pattern shared by dense matrices and matrix-free kernels: single
/// columns, the diagonal, principal submatrices and block products.
pub trait Covariance: Sync {
    /// Number of candidates `n`.
    fn dim(&self) -> usize;

    /// Column `j` of K.
    fn column(&self, j: usize) -> Result<Vec<f64>>;

    fn diagonal(&self) -> Vec<f64>;

    /// K[idx, idx].
    fn submatrix(&self, idx: &[usize]) -> Result<SymmetricMatrix>;

    /// K[rows, cols].
    fn cross(&self, rows: &[usize], cols: &[usize]) -> Result<Mat<f64>>;

    /// K·rhs for an `n × m` right-hand side.
    fn apply(&self, rhs: MatRef<'_, f64>) -> Result<Mat<f64>>;
}

fn check_indices(idx: &[usize], n: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= n) {
        Some(&bad) => Err(Error::IndexOutOfRange { index: bad, len: n }),
        None => Ok(()),
    }
}

impl Covariance for SymmetricMatrix {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn column(&self, j: usize) -> Result<Vec<f64>> {
        check_indices(&[j], self.dim())?;
        Ok(self.0.col(j).iter().copied().collect())
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    fn submatrix(&self, idx: &[usize]) -> Result<SymmetricMatrix> {
        check_indices(idx, self.dim())?;
        Ok(SymmetricMatrix::from_lower_fn(idx.len(), |i, j| self.0[(idx[i], idx[j])]))
    }

    fn cross(&self, rows: &[usize], cols: &[usize]) -> Result<Mat<f64>> {
        SymmetricMatrix::cross(self, rows, cols)
    }

    fn apply(&self, rhs: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if rhs.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: rhs.nrows() });
        }
        Ok(&self.0 * rhs)
    }
}

/// Matrix-free view of K built from a kernel and a point set.
#[derive(Debug, Clone, Copy)]
pub struct KernelOperator<'a> {
    spec: &'a KernelSpec,
    points: &'a PointSet,
    block_size: usize,
}

impl<'a> KernelOperator<'a> {
    pub fn new(spec: &'a KernelSpec, points: &'a PointSet) -> Result<Self> {
        spec.validate()?;
        spec.check_dim(points.dim())?;
        Ok(KernelOperator { spec, points, block_size: DEFAULT_BLOCK_SIZE })
    }

    /// Sets the row-block size of [`Covariance::apply`]. Results are
    /// bitwise-deterministic for a fixed block size.
    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size.max(1);
        self
    }

    pub fn spec(&self) -> &KernelSpec {
        self.spec
    }

    pub fn points(&self) -> &PointSet {
        self.points
    }
}

impl Covariance for KernelOperator<'_> {
    fn dim(&self) -> usize {
        self.points.len()
    }

    fn column(&self, j: usize) -> Result<Vec<f64>> {
        check_indices(&[j], self.dim())?;
        let xj = self.points.point(j);
        Ok(self.points.iter().map(|xi| self.spec.eval_unchecked(xi, xj)).collect())
    }

    fn diagonal(&self) -> Vec<f64> {
        vec![self.spec.signal_variance(); self.dim()]
    }

    fn submatrix(&self, idx: &[usize]) -> Result<SymmetricMatrix> {
        check_indices(idx, self.dim())?;
        Ok(SymmetricMatrix::from_lower_fn(idx.len(), |i, j| {
            self.spec.eval_unchecked(self.points.point(idx[i]), self.points.point(idx[j]))
        }))
    }

    fn cross(&self, rows: &[usize], cols: &[usize]) -> Result<Mat<f64>> {
        let n = self.points.len();
        check_indices(rows, n)?;
        check_indices(cols, n)?;
        Ok(Mat::from_fn(rows.len(), cols.len(), |i, j| {
            self.spec.eval_unchecked(self.points.point(rows[i]), self.points.point(cols[j]))
        }))
    }

    fn apply(&self, rhs: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let n = self.dim();
        if rhs.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: rhs.nrows() });
        }
        let starts: Vec<usize> = (0..n).step_by(self.block_size).collect();
        let blocks: Vec<Mat<f64>> = starts
            .par_iter()
            .map(|&r0| {
                let rows = self.block_size.min(n - r0);
                let kb = Mat::from_fn(rows, n, |i, j| {
                    self.spec.eval_unchecked(self.points.point(r0 + i), self.points.point(j))
                });
                &kb * rhs
            })
            .collect();
        let mut out = Mat::zeros(n, rhs.ncols());
        for (&r0, block) in starts.iter().zip(&blocks) {
            out.as_mut().subrows_mut(r0, block.nrows()).copy_from(block);
        }
        Ok(out)
    }
}

/// Dense K with `K[i][j] = κ(x_i, x_j)`, refusing `n` above [`DEFAULT_DENSE_CAP`].
pub fn assemble_covariance(spec: &KernelSpec, points: &PointSet) -> Result<SymmetricMatrix> {
    assemble_covariance_capped(spec, points, DEFAULT_DENSE_CAP)
}

pub fn assemble_covariance_capped(
    spec: &KernelSpec,
    points: &PointSet,
    cap: usize,
) -> Result<SymmetricMatrix> {
    spec.validate()?;
    spec.check_dim(points.dim())?;
    let n = points.len();
    if n > cap {
        return Err(Error::MemoryCap { n, cap });
    }
    Ok(SymmetricMatrix::from_lower_fn(n, |i, j| {
        if i == j {
            spec.signal_variance()
        } else {
            spec.eval_unchecked(points.point(i), points.point(j))
        }
    }))
}

/// Column `j` of K without assembling K.
pub fn covariance_column(spec: &KernelSpec, points: &PointSet, j: usize) -> Result<Vec<f64>> {
    KernelOperator::new(spec, points)?.column(j)
}

/// Diagonal of K; constant `σ_f²` for these stationary kernels.
pub fn covariance_diag(spec: &KernelSpec, points: &PointSet) -> Vec<f64> {
    vec![spec.signal_variance(); points.len()]
}

/// K·v for any covariance access.
pub fn matvec(k: &impl Covariance, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != k.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), actual: v.len() });
    }
    let rhs = MatRef::from_column_major_slice(v, v.len(), 1);
    let out = k.apply(rhs)?;
    Ok(out.col(0).iter().copied().collect())
}
