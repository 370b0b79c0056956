//! Low-rank Nyström factors `K ≈ F·Fᵀ`.
//!
//! Three routes are available:
//!
//! * [`nystrom_randomized`] sketches K with an orthonormalized Gaussian test
//!   matrix and returns an orthonormal basis for the approximation, using a
//!   small diagonal shift ν = c·√n (c = 1e-6 by default) to keep the inner
//!   Cholesky factorization stable. [`nystrom_from_sketch`] evaluates the
//!   unshifted formula `(KΩ)(ΩᵀKΩ)†(KΩ)ᵀ` in factored form.
//! * [`cholesky_greedy`] runs pivoted Cholesky with complete pivoting.
//! * [`cholesky_rp`] samples each pivot proportionally to the residual
//!   diagonal (RPCholesky).
//!
//! The Cholesky routes only touch one column of K per step.

use faer::{Mat, MatRef, Side};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Covariance, SymmetricMatrix};
use crate::linalg::thin_svd;
use crate::rng;

/// Default scale `c` of the stability shift `ν = c·√n`.
pub const DEFAULT_SHIFT_SCALE: f64 = 1e-6;

/// Pivoted Cholesky stops once the largest residual diagonal entry drops
/// below this fraction of the largest diagonal entry of K.
pub const EARLY_STOP_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorMethod {
    Randomized,
    GreedyCholesky,
    RpCholesky,
}

/// Tall factor `F` (`n × r`) with `K ≈ F·Fᵀ`.
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    pub factor: Mat<f64>,
    /// Pivot indices in selection order (Cholesky routes only).
    pub pivots: Option<Vec<usize>>,
    pub method: FactorMethod,
}

impl LowRankFactor {
    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// `F·Fᵀ` as a dense matrix.
    pub fn approximation(&self) -> SymmetricMatrix {
        let kh = &self.factor * self.factor.transpose();
        SymmetricMatrix::from_lower_fn(kh.nrows(), |i, j| kh[(i, j)])
    }

    /// `K − F·Fᵀ` for a dense K.
    pub fn residual(&self, k: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        if k.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: k.dim(), actual: self.dim() });
        }
        let kh = &self.factor * self.factor.transpose();
        Ok(SymmetricMatrix::from_lower_fn(k.dim(), |i, j| k.get(i, j) - kh[(i, j)]))
    }
}

/// Randomized Nyström output: an orthonormal basis ordered by
/// non-increasing singular values of the shifted factor.
#[derive(Debug, Clone)]
pub struct RandomizedNystrom {
    /// `Û`, `n × (k + p)` with orthonormal columns.
    pub basis: Mat<f64>,
    /// Singular values of `B = Y_ν C⁻¹`; their squares are the eigenvalues
    /// of the shifted approximation.
    pub singular_values: Vec<f64>,
    /// The shift ν that was applied.
    pub shift: f64,
    /// Number of eigenvalues of the shifted approximation exceeding ν.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct NystromOptions {
    pub oversampling: usize,
    pub shift_scale: f64,
}

impl Default for NystromOptions {
    fn default() -> Self {
        NystromOptions { oversampling: 10, shift_scale: DEFAULT_SHIFT_SCALE }
    }
}

/// Randomized Nyström approximation of rank `k + p` with the default shift.
pub fn nystrom_randomized(
    k_op: &impl Covariance,
    k: usize,
    p: usize,
    seed: u64,
) -> Result<RandomizedNystrom> {
    nystrom_randomized_with(
        k_op,
        k,
        NystromOptions { oversampling: p, shift_scale: DEFAULT_SHIFT_SCALE },
        seed,
    )
}

pub fn nystrom_randomized_with(
    k_op: &impl Covariance,
    k: usize,
    opts: NystromOptions,
    seed: u64,
) -> Result<RandomizedNystrom> {
    let n = k_op.dim();
    let l = k + opts.oversampling;
    if k == 0 || l > n {
        return Err(Error::InvalidArgument(format!(
            "sketch size k + p = {l} must be in 1..={n}"
        )));
    }
    // Gaussian test matrix, orthonormalized.
    let omega = rng::gaussian_matrix(n, l, seed);
    let omega = omega.qr().compute_thin_Q();

    let y = k_op.apply(omega.as_ref())?;
    let shift = (n as f64).sqrt() * opts.shift_scale;
    let y_shift = &y + &omega * faer::Scale(shift);

    let mut inner = omega.transpose() * &y_shift;
    symmetrize(&mut inner);
    let llt = inner.llt(Side::Lower).map_err(|e| {
        Error::NotPositiveDefinite(format!("shifted sketch core ΩᵀY_ν: {e:?}"))
    })?;
    // B = Y_ν C⁻¹ with C = Lᵀ, i.e. Bᵀ = L⁻¹ Y_νᵀ.
    let mut bt = y_shift.transpose().to_owned();
    llt.L().solve_lower_triangular_in_place(bt.as_mut());
    let svd = thin_svd(bt.transpose())?;
    let rank = svd.s.iter().filter(|&&s| s * s > shift).count();
    Ok(RandomizedNystrom { basis: svd.u, singular_values: svd.s, shift, rank })
}

fn symmetrize(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        for i in j + 1..m.nrows() {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Unshifted Nyström factor `F` with `F·Fᵀ = (KΩ)(ΩᵀKΩ)†(KΩ)ᵀ`.
///
/// The pseudo-inverse drops eigenvalues of ΩᵀKΩ below `1e-12` times the
/// largest one.
pub fn nystrom_from_sketch(k_op: &impl Covariance, omega: MatRef<'_, f64>) -> Result<LowRankFactor> {
    let y = k_op.apply(omega)?;
    let mut core = omega.transpose() * &y;
    symmetrize(&mut core);
    let evd = core
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("Nyström core: {e:?}")))?;
    let theta = evd.S().column_vector();
    let w = evd.U();
    let top = theta.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..theta.nrows())
        .rev()
        .filter(|&i| theta[i] > 1e-12 * top)
        .collect();
    let scaled = Mat::from_fn(w.nrows(), keep.len(), |i, j| w[(i, keep[j])] / theta[keep[j]].sqrt());
    Ok(LowRankFactor { factor: &y * scaled, pivots: None, method: FactorMethod::Randomized })
}

/// Nyström factor from a Gaussian test matrix with `l` columns.
pub fn nystrom_gaussian(k_op: &impl Covariance, l: usize, seed: u64) -> Result<LowRankFactor> {
    let n = k_op.dim();
    if l == 0 || l > n {
        return Err(Error::InvalidArgument(format!("sketch size {l} must be in 1..={n}")));
    }
    nystrom_from_sketch(k_op, rng::gaussian_matrix(n, l, seed).as_ref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pivoting {
    Greedy,
    Random,
}

/// Pivoted Cholesky with complete pivoting: each step takes the largest
/// residual diagonal entry (smallest index on ties).
pub fn cholesky_greedy(k_op: &impl Covariance, k: usize) -> Result<LowRankFactor> {
    pivoted_cholesky(k_op, k, PivotRule::Greedy)
}

/// RPCholesky: each pivot is drawn with probability proportional to the
/// residual diagonal.
pub fn cholesky_rp(k_op: &impl Covariance, k: usize, seed: u64) -> Result<LowRankFactor> {
    pivoted_cholesky(k_op, k, PivotRule::Random(Box::new(rng::seeded(seed))))
}

pub fn pivoted_cholesky_with(
    k_op: &impl Covariance,
    k: usize,
    pivoting: Pivoting,
    seed: u64,
) -> Result<LowRankFactor> {
    match pivoting {
        Pivoting::Greedy => cholesky_greedy(k_op, k),
        Pivoting::Random => cholesky_rp(k_op, k, seed),
    }
}

enum PivotRule {
    Greedy,
    Random(Box<rng::SeededRng>),
}

impl PivotRule {
    fn pick(&mut self, d: &[f64]) -> usize {
        match self {
            PivotRule::Greedy => argmax(d),
            PivotRule::Random(rng) => {
                let total: f64 = d.iter().map(|&x| x.max(0.0)).sum();
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut last_positive = argmax(d);
                for (i, &x) in d.iter().enumerate() {
                    if x > 0.0 {
                        acc += x;
                        last_positive = i;
                        if acc > target {
                            return i;
                        }
                    }
                }
                last_positive
            }
        }
    }
}

/// Index of the largest entry, first on ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn pivoted_cholesky(k_op: &impl Covariance, k: usize, mut rule: PivotRule) -> Result<LowRankFactor> {
    let n = k_op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("rank {k} must be in 1..={n}")));
    }
    let method = match rule {
        PivotRule::Greedy => FactorMethod::GreedyCholesky,
        PivotRule::Random(_) => FactorMethod::RpCholesky,
    };
    let mut d = k_op.diagonal();
    let tol = EARLY_STOP_RATIO * d.iter().cloned().fold(0.0, f64::max);
    let mut f = Mat::<f64>::zeros(n, k);
    let mut pivots = Vec::with_capacity(k);

    for j in 0..k {
        if d[argmax(&d)] <= tol {
            break;
        }
        let s = rule.pick(&d);
        let mut w = k_op.column(s)?;
        for t in 0..j {
            let fs = f[(s, t)];
            if fs != 0.0 {
                let col = f.col_as_slice(t);
                w.iter_mut().zip(col).for_each(|(wi, ci)| *wi -= ci * fs);
            }
        }
        let pivot = w[s];
        if !(pivot > tol) {
            break;
        }
        let scale = pivot.sqrt().recip();
        let col = f.col_as_slice_mut(j);
        for (i, (ci, wi)) in col.iter_mut().zip(&w).enumerate() {
            *ci = wi * scale;
            d[i] -= *ci * *ci;
        }
        d[s] = 0.0;
        pivots.push(s);
    }
    let r = pivots.len();
    let factor = f.as_ref().subcols(0, r).to_owned();
    Ok(LowRankFactor { factor, pivots: Some(pivots), method })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{assemble_covariance, KernelOperator, KernelSpec};
    use crate::linalg::{eigh, frobenius};
    use crate::points::latin_hypercube;

    fn rel(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
        frobenius((a - b).as_ref()) / frobenius(a)
    }

    fn kernel_instance(n: usize, seed: u64) -> SymmetricMatrix {
        let pts = latin_hypercube(n, 2, seed).unwrap();
        assemble_covariance(&KernelSpec::squared_exponential(1.0, 0.3, 0.0).unwrap(), &pts).unwrap()
    }

    #[test]
    fn greedy_on_diagonal() {
        let k = SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let f = cholesky_greedy(&k, 3).unwrap();
        assert_eq!(f.pivots.as_deref(), Some(&[0, 2, 1][..]));
        assert!(rel(k.as_ref(), f.approximation().as_ref()) < 1e-15);
    }

    #[test]
    fn full_rank_factorization_is_exact() {
        let g = rng::gaussian_matrix(30, 40, 1);
        let k = SymmetricMatrix::from_mat(&g * g.transpose()).unwrap();
        let f = cholesky_greedy(&k, 30).unwrap();
        assert_eq!(f.rank(), 30);
        assert!(rel(k.as_ref(), f.approximation().as_ref()) < 1e-10);
        let f = cholesky_rp(&k, 30, 4).unwrap();
        assert!(f.residual(&k).unwrap().trace().abs() < 1e-8 * k.trace());
    }

    #[test]
    fn greedy_residual_matches_dense() {
        let pts = latin_hypercube(100, 2, 12).unwrap();
        let spec = KernelSpec::squared_exponential(1.2, 0.25, 0.0).unwrap();
        let op = KernelOperator::new(&spec, &pts).unwrap();
        let k = assemble_covariance(&spec, &pts).unwrap();
        let f = cholesky_greedy(&op, 10).unwrap();
        let resid = f.residual(&k).unwrap();
        let fro2: f64 = f.factor.col_iter().map(|c| c.squared_norm_l2()).sum();
        assert!((resid.trace() - (k.trace() - fro2)).abs() < 1e-10 * k.trace());
        assert!(resid.trace() >= 0.0);
        // residual diagonal matches the one maintained inside the loop
        let dense_diag: Vec<f64> = (0..100).map(|i| resid.get(i, i)).collect();
        assert!(dense_diag.iter().all(|&x| x >= -1e-10 * 1.44));
    }

    #[test]
    fn greedy_pivot_values_non_increasing() {
        let k = kernel_instance(150, 3);
        let f = cholesky_greedy(&k, 40).unwrap();
        let piv = f.pivots.as_ref().unwrap();
        let selected: Vec<f64> = piv.iter().enumerate().map(|(j, &s)| f.factor[(s, j)].powi(2)).collect();
        assert!(selected.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-10)));
        let mut uniq = piv.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), piv.len());
    }

    #[test]
    fn early_stop_on_low_rank() {
        let g = rng::gaussian_matrix(50, 4, 2);
        let k = SymmetricMatrix::from_mat(&g * g.transpose()).unwrap();
        let f = cholesky_greedy(&k, 10).unwrap();
        assert_eq!(f.rank(), 4);
        let f = cholesky_rp(&k, 10, 3).unwrap();
        assert_eq!(f.rank(), 4);
    }

    #[test]
    fn rp_is_deterministic() {
        let k = kernel_instance(80, 1);
        let a = cholesky_rp(&k, 12, 77).unwrap();
        let b = cholesky_rp(&k, 12, 77).unwrap();
        assert_eq!(a.pivots, b.pivots);
        assert_ne!(a.pivots, cholesky_rp(&k, 12, 78).unwrap().pivots);
    }

    #[test]
    fn randomized_identity() {
        let n = 40;
        let k = SymmetricMatrix::from_diagonal(&vec![1.0; n]);
        let r = nystrom_randomized(&k, 5, 5, 9).unwrap();
        let nu = (n as f64).sqrt() * 1e-6;
        for s in &r.singular_values {
            assert!((s - (1.0 + nu).sqrt()).abs() < 1e-12);
        }
        let utu = r.basis.transpose() * &r.basis;
        assert!(frobenius((&utu - Mat::<f64>::identity(10, 10)).as_ref()) < 1e-12);
        assert_eq!(r.rank, 10);
    }

    #[test]
    fn randomized_recovers_low_rank_eigenspace() {
        let g = rng::gaussian_matrix(120, 6, 21);
        let k = SymmetricMatrix::from_mat(&g * g.transpose()).unwrap();
        let r = nystrom_randomized(&k, 6, 4, 5).unwrap();
        let e = eigh(&k).unwrap();
        let v = e.leading_vectors(6);
        let u = r.basis.as_ref().subcols(0, 6);
        // cosines of principal angles are the singular values of VᵀU
        let cos = crate::linalg::singular_values((v.transpose() * u).as_ref()).unwrap();
        assert!(cos.iter().all(|&c| c > 1.0 - 1e-12), "{cos:?}");
    }

    #[test]
    fn randomized_is_deterministic() {
        let k = kernel_instance(100, 2);
        let a = nystrom_randomized(&k, 8, 10, 3).unwrap();
        let b = nystrom_randomized(&k, 8, 10, 3).unwrap();
        assert_eq!(a.basis, b.basis);
        assert!(nystrom_randomized(&k, 95, 10, 3).is_err());
    }

    #[test]
    fn loewner_ordering_all_routes() {
        for seed in 0..6 {
            let k = kernel_instance(120 + 20 * seed as usize, seed);
            let lam1 = eigh(&k).unwrap().values[0];
            for f in [
                nystrom_gaussian(&k, 20, seed).unwrap(),
                cholesky_greedy(&k, 20).unwrap(),
                cholesky_rp(&k, 20, seed).unwrap(),
            ] {
                let e = eigh(&f.residual(&k).unwrap()).unwrap();
                assert!(*e.values.last().unwrap() >= -1e-8 * lam1, "{:?}", f.method);
            }
        }
    }
}
