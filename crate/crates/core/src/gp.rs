//! Gaussian-process scoring and prediction.
//!
//! All SPD solves go through Cholesky factors; log-determinants are sums of
//! logs of the factor diagonal.

use std::f64::consts::PI;

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    assemble_covariance_capped, Covariance, KernelFamily, KernelOperator, KernelSpec,
    SymmetricMatrix,
};
use crate::linalg::{cholesky, forward_substitute};
use crate::nystrom::cholesky_rp;
use crate::points::PointSet;

/// Above this many candidates the sweep switches to a low-rank likelihood.
pub const DEFAULT_LML_DENSE_CAP: usize = 4000;

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level eta must be positive, got {eta}")));
    }
    Ok(())
}

/// φ_D = logdet(I + η⁻² K₁₁).
pub fn d_optimality(k11: &SymmetricMatrix, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let k = k11.dim();
    if k == 0 {
        return Ok(0.0);
    }
    let inv = 1.0 / (eta * eta);
    let a = Mat::from_fn(k, k, |i, j| {
        let v = inv * k11.get(i, j);
        if i == j {
            1.0 + v
        } else {
            v
        }
    });
    let l = cholesky(a.as_ref())?;
    Ok((0..k).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// φ_D of the candidates at `indices`.
pub fn score(k: &impl Covariance, indices: &[usize], eta: f64) -> Result<f64> {
    d_optimality(&k.submatrix(indices)?, eta)
}

#[derive(Debug, Clone)]
pub enum PosteriorCovariance {
    Full(Mat<f64>),
    Diagonal(Vec<f64>),
}

impl PosteriorCovariance {
    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            PosteriorCovariance::Full(m) => (0..m.nrows()).map(|i| m[(i, i)]).collect(),
            PosteriorCovariance::Diagonal(d) => d.clone(),
        }
    }
}

/// Posterior of the unobserved values given noisy observations at the
/// selected candidates.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    /// Posterior mean at `target_indices`.
    pub mean: Vec<f64>,
    pub cov: PosteriorCovariance,
    /// Unselected candidates in increasing order.
    pub target_indices: Vec<usize>,
}

impl GpPosterior {
    /// Expands the target mean into a length-`n` field, filling observed
    /// positions with `observed`.
    pub fn full_field(&self, selected: &[usize], observed: &[f64]) -> Vec<f64> {
        let n = self.target_indices.len() + selected.len();
        let mut out = vec![0.0; n];
        for (&i, &m) in self.target_indices.iter().zip(&self.mean) {
            out[i] = m;
        }
        for (&i, &y) in selected.iter().zip(observed) {
            out[i] = y;
        }
        out
    }
}

/// `m_p = K₂₁(K₁₁ + η²I)⁻¹y`, `Σ_p = K₂₂ − K₂₁(K₁₁ + η²I)⁻¹K₂₁ᵀ`.
pub fn posterior(
    k: &impl Covariance,
    selected: &[usize],
    y: &[f64],
    eta: f64,
    want_full_cov: bool,
) -> Result<GpPosterior> {
    check_eta(eta)?;
    let n = k.dim();
    if y.len() != selected.len() {
        return Err(Error::DimensionMismatch { expected: selected.len(), actual: y.len() });
    }
    let mut seen = vec![false; n];
    for &i in selected {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument(format!("candidate {i} selected twice")));
        }
    }
    let targets: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();

    let k11 = k.submatrix(selected)?;
    let ks = selected.len();
    let shifted = Mat::from_fn(ks, ks, |i, j| k11.get(i, j) + if i == j { eta * eta } else { 0.0 });
    let l = cholesky(shifted.as_ref())?;
    let k12 = k.cross(selected, &targets)?; // k × (n − k)

    // α = (K₁₁ + η²I)⁻¹ y
    let z = forward_substitute(l.as_ref(), y);
    let alpha = backward_substitute_transposed(l.as_ref(), &z);
    let mean: Vec<f64> = (0..targets.len())
        .map(|t| (0..ks).map(|i| k12[(i, t)] * alpha[i]).sum())
        .collect();

    // W = L⁻¹ K₁₂, Σ_p = K₂₂ − WᵀW
    let mut w = k12;
    l.solve_lower_triangular_in_place(w.as_mut());
    let cov = if want_full_cov {
        let k22 = k.submatrix(&targets)?;
        let wtw = w.transpose() * &w;
        let m = targets.len();
        let mut sigma = Mat::from_fn(m, m, |i, j| k22.get(i, j) - wtw[(i, j)]);
        for j in 0..m {
            for i in j + 1..m {
                sigma[(j, i)] = sigma[(i, j)];
            }
        }
        PosteriorCovariance::Full(sigma)
    } else {
        let prior = k.diagonal();
        PosteriorCovariance::Diagonal(
            targets
                .iter()
                .enumerate()
                .map(|(t, &i)| prior[i] - w.col(t).squared_norm_l2())
                .collect(),
        )
    };
    Ok(GpPosterior { mean, cov, target_indices: targets })
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
fn backward_substitute_transposed(l: MatRef<'_, f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= l[(j, i)] * x[j];
        }
        x[i] = acc / l[(i, i)];
    }
    x
}

fn norm2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖predicted − truth‖ / ‖truth‖`.
pub fn relative_error(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    relative_error_unnormalized(predicted, truth, &vec![0.0; truth.len()])
}

/// `‖predicted − truth‖ / ‖truth − mu‖`.
pub fn relative_error_unnormalized(predicted: &[f64], truth: &[f64], mu: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: predicted.len() });
    }
    if mu.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: mu.len() });
    }
    let den = norm2(truth.iter().zip(mu).map(|(t, m)| t - m));
    if den == 0.0 {
        return Err(Error::InvalidArgument("relative error denominator is zero".into()));
    }
    Ok(norm2(predicted.iter().zip(truth).map(|(p, t)| p - t)) / den)
}

/// Log marginal likelihood of `y` under `N(0, K + η²I)`.
pub fn log_marginal_likelihood_dense(k: &SymmetricMatrix, y: &[f64], eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let n = k.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: y.len() });
    }
    let shifted = Mat::from_fn(n, n, |i, j| k.get(i, j) + if i == j { eta * eta } else { 0.0 });
    let l = cholesky(shifted.as_ref())?;
    let alpha = forward_substitute(l.as_ref(), y);
    let quad: f64 = alpha.iter().map(|a| a * a).sum();
    let logdet: f64 = (0..n).map(|i| 2.0 * l[(i, i)].ln()).sum();
    Ok(-0.5 * quad - 0.5 * logdet - 0.5 * n as f64 * (2.0 * PI).ln())
}

/// Log marginal likelihood with `K ≈ F·Fᵀ`, using the Woodbury identity and
/// the matrix determinant lemma. Costs O(n r²).
pub fn log_marginal_likelihood_lowrank(factor: MatRef<'_, f64>, y: &[f64], eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let (n, r) = (factor.nrows(), factor.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: y.len() });
    }
    let eta2 = eta * eta;
    // M = η² I_r + FᵀF
    let mut m = factor.transpose() * factor;
    for i in 0..r {
        m[(i, i)] += eta2;
    }
    let l = cholesky(m.as_ref())?;
    let y_col = MatRef::from_column_major_slice(y, n, 1);
    let fty = factor.transpose() * y_col;
    let fty: Vec<f64> = fty.col(0).iter().copied().collect();
    let z = forward_substitute(l.as_ref(), &fty);
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let quad = (yy - z.iter().map(|v| v * v).sum::<f64>()) / eta2;
    // logdet(FFᵀ + η²I) = 2n log η + logdet(I_r + η⁻²FᵀF) = 2(n − r) log η + logdet M
    let logdet_m: f64 = (0..r).map(|i| 2.0 * l[(i, i)].ln()).sum();
    let logdet = 2.0 * (n - r) as f64 * eta.ln() + logdet_m;
    Ok(-0.5 * quad - 0.5 * logdet - 0.5 * n as f64 * (2.0 * PI).ln())
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Use an RPCholesky factor of this rank instead of the dense likelihood.
    pub approx_rank: Option<usize>,
    pub seed: u64,
    /// Largest `n` evaluated densely when `approx_rank` is absent.
    pub dense_cap: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { approx_rank: None, seed: 0, dense_cap: DEFAULT_LML_DENSE_CAP }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub best: KernelSpec,
    pub best_lml: f64,
    pub sigma_grid: Vec<f64>,
    pub ell_grid: Vec<f64>,
    /// `table[i][j]` is the likelihood at `(sigma_grid[i], ell_grid[j])`.
    pub table: Vec<Vec<f64>>,
    /// Rank of the low-rank factor when the approximate path was used.
    pub approx_rank: Option<usize>,
}

/// Grid search of `(σ_f, ℓ)` by log marginal likelihood. Ties keep the
/// first cell in row-major order.
#[allow(clippy::too_many_arguments)]
pub fn hyperparameter_sweep(
    points: &PointSet,
    y: &[f64],
    family: KernelFamily,
    sigma_grid: &[f64],
    ell_grid: &[f64],
    eta: f64,
    opts: SweepOptions,
) -> Result<SweepResult> {
    check_eta(eta)?;
    if sigma_grid.is_empty() || ell_grid.is_empty() {
        return Err(Error::InvalidArgument("hyperparameter grids must be non-empty".into()));
    }
    if y.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), actual: y.len() });
    }
    let n = points.len();
    let rank = match opts.approx_rank {
        Some(r) => Some(r),
        None if n > opts.dense_cap => Some(opts.dense_cap.min(n)),
        None => None,
    };

    let cells: Vec<(usize, usize)> = (0..sigma_grid.len())
        .flat_map(|i| (0..ell_grid.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .enumerate()
        .map(|(c, &(i, j))| -> Result<f64> {
            let spec = KernelSpec::new(family, sigma_grid[i], ell_grid[j], eta)?;
            match rank {
                None => {
                    let k = assemble_covariance_capped(&spec, points, usize::MAX)?;
                    log_marginal_likelihood_dense(&k, y, eta)
                }
                Some(r) => {
                    let op = KernelOperator::new(&spec, points)?;
                    let f = cholesky_rp(&op, r, opts.seed.wrapping_add(c as u64))?;
                    log_marginal_likelihood_lowrank(f.factor.as_ref(), y, eta)
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (c, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = c;
        }
    }
    let (bi, bj) = cells[best];
    let table = values.chunks(ell_grid.len()).map(<[f64]>::to_vec).collect();
    Ok(SweepResult {
        best: KernelSpec::new(family, sigma_grid[bi], ell_grid[bj], eta)?,
        best_lml: values[best],
        sigma_grid: sigma_grid.to_vec(),
        ell_grid: ell_grid.to_vec(),
        table,
        approx_rank: rank,
    })
}
