//! Dense factorizations used by the selection algorithms.
//!
//! QR with column pivoting is implemented here directly because the pivot
//! order, including tie-breaks, is part of the selection output. Symmetric
//! eigendecomposition, thin SVD and Cholesky delegate to `faer`.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::kernel::SymmetricMatrix;

/// `A[:, pivots] = Q·R` with `Q` orthogonal (`m × m`) and `R` upper
/// trapezoidal (`m × n`).
#[derive(Debug, Clone)]
pub struct PivotedQr {
    pub q: Mat<f64>,
    pub r: Mat<f64>,
    /// Column permutation; the first `min(m, n)` entries are the pivot columns.
    pub pivots: Vec<usize>,
}

/// Businger–Golub QR with column pivoting.
///
/// At step `s` the trailing column with the largest residual 2-norm is
/// moved to position `s`; ties go to the smallest original column index.
/// Residual norms are recomputed at every step rather than downdated.
pub fn qr_column_pivoted(a: MatRef<'_, f64>) -> PivotedQr {
    let (m, n) = (a.nrows(), a.ncols());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j).iter().copied().collect()).collect();
    let mut pivots: Vec<usize> = (0..n).collect();
    let steps = m.min(n);
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(steps);

    for s in 0..steps {
        let mut best = s;
        let mut best_norm = -1.0;
        for (j, col) in cols.iter().enumerate().skip(s) {
            let norm: f64 = col[s..].iter().map(|x| x * x).sum();
            if norm > best_norm || (norm == best_norm && pivots[j] < pivots[best]) {
                best = j;
                best_norm = norm;
            }
        }
        cols.swap(s, best);
        pivots.swap(s, best);

        let x = &cols[s][s..];
        let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            reflectors.push((vec![0.0; m - s], 0.0));
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm_x } else { norm_x };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|t| t * t).sum();
        let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };

        cols[s][s] = alpha;
        cols[s][s + 1..].iter_mut().for_each(|t| *t = 0.0);
        for col in cols.iter_mut().skip(s + 1) {
            let tail = &mut col[s..];
            let w: f64 = v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum::<f64>() * beta;
            tail.iter_mut().zip(&v).for_each(|(t, vi)| *t -= w * vi);
        }
        reflectors.push((v, beta));
    }

    // Q = H_0 H_1 ... H_{steps-1}, applied right to left onto the identity.
    let mut q = Mat::<f64>::identity(m, m);
    for (s, (v, beta)) in reflectors.iter().enumerate().rev() {
        if *beta == 0.0 {
            continue;
        }
        for j in 0..m {
            let col = &mut q.col_as_slice_mut(j)[s..];
            let w: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>() * beta;
            col.iter_mut().zip(v).for_each(|(t, vi)| *t -= w * vi);
        }
    }
    let r = Mat::from_fn(m, n, |i, j| cols[j][i]);
    PivotedQr { q, r, pivots }
}

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `i` paired with `values[i]`.
    pub vectors: Mat<f64>,
}

impl EigDecomposition {
    /// First `k` eigenvectors, the dominant eigenspace.
    pub fn leading_vectors(&self, k: usize) -> MatRef<'_, f64> {
        self.vectors.as_ref().subcols(0, k)
    }

    pub fn trailing_vectors(&self, k: usize) -> MatRef<'_, f64> {
        let n = self.vectors.ncols();
        self.vectors.as_ref().subcols(k, n - k)
    }
}

/// Symmetric eigendecomposition. Small negative eigenvalues from rounding
/// are returned unchanged.
pub fn eigh(k: &SymmetricMatrix) -> Result<EigDecomposition> {
    let evd = k
        .as_ref()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("symmetric eigensolver: {e:?}")))?;
    let n = k.dim();
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).map(|i| s[n - 1 - i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok(EigDecomposition { values, vectors })
}

/// `F = U·diag(s)·Vᵀ` with `U` of size `n × r`, `r = min(n, cols)`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat<f64>,
    /// Singular values, non-increasing.
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn thin_svd(f: MatRef<'_, f64>) -> Result<ThinSvd> {
    if f.nrows() == 0 || f.ncols() == 0 {
        return Ok(ThinSvd {
            u: Mat::zeros(f.nrows(), 0),
            s: Vec::new(),
            v: Mat::zeros(f.ncols(), 0),
        });
    }
    if f.col_iter().any(|c| c.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidArgument("non-finite entry in SVD input".into()));
    }
    let svd = f
        .thin_svd()
        .map_err(|e| Error::NoConvergence(format!("thin SVD: {e:?}")))?;
    let s = svd.S().column_vector().iter().copied().collect();
    Ok(ThinSvd { u: svd.U().to_owned(), s, v: svd.V().to_owned() })
}

/// Singular values, non-increasing.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .map_err(|e| Error::NoConvergence(format!("singular values: {e:?}")))
}

/// Largest singular value.
pub fn spectral_norm(a: MatRef<'_, f64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::NotPositiveDefinite(format!("{e:?}")))?;
    Ok(llt.L().to_owned())
}

/// `log det A` from the Cholesky diagonal.
pub fn logdet_spd(a: MatRef<'_, f64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let l = cholesky(a)?;
    Ok((0..l.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn forward_substitute(l: MatRef<'_, f64>, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..x.len() {
        let mut acc = x[i];
        for (j, xj) in x.iter().enumerate().take(i) {
            acc -= l[(i, j)] * xj;
        }
        x[i] = acc / l[(i, i)];
    }
    x
}

/// Extends the Cholesky factor `lc` of an SPD matrix by one row and column.
///
/// `cross` holds the covariances between the existing entries and the new
/// one, `k_new` the new diagonal entry. Fails when the Schur complement
/// `k_new − ‖L⁻¹ cross‖²` is not positive.
pub fn chol_append(lc: MatRef<'_, f64>, cross: &[f64], k_new: f64) -> Result<Mat<f64>> {
    let j = lc.nrows();
    if cross.len() != j {
        return Err(Error::DimensionMismatch { expected: j, actual: cross.len() });
    }
    let w = forward_substitute(lc, cross);
    let schur = k_new - w.iter().map(|x| x * x).sum::<f64>();
    if !(schur > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "Schur complement {schur:e} is not positive"
        )));
    }
    Ok(Mat::from_fn(j + 1, j + 1, |r, c| match (r < j, c < j) {
        (true, true) => lc[(r, c)],
        (false, true) => w[c],
        (false, false) => schur.sqrt(),
        (true, false) => 0.0,
    }))
}

/// Frobenius norm.
pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::gaussian_matrix;

    fn rel_err(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
        frobenius((a - b).as_ref()) / frobenius(a)
    }

    fn permuted(a: MatRef<'_, f64>, piv: &[usize]) -> Mat<f64> {
        Mat::from_fn(a.nrows(), piv.len(), |i, j| a[(i, piv[j])])
    }

    fn check_qr_invariants(a: MatRef<'_, f64>, qr: &PivotedQr) {
        let (m, n) = (a.nrows(), a.ncols());
        let ap = permuted(a, &qr.pivots);
        assert!(rel_err(ap.as_ref(), (&qr.q * &qr.r).as_ref()) < 1e-10);
        let qtq = qr.q.transpose() * &qr.q;
        assert!(frobenius((&qtq - Mat::<f64>::identity(m, m)).as_ref()) < 1e-12);
        let steps = m.min(n);
        for s in 0..steps {
            for i in s + 1..m {
                assert_eq!(qr.r[(i, s)], 0.0);
            }
            if s + 1 < steps {
                assert!(qr.r[(s, s)].abs() >= qr.r[(s + 1, s + 1)].abs() - 1e-12);
            }
            for j in s + 1..n {
                let tail: f64 = (s..m).map(|i| qr.r[(i, j)].powi(2)).sum::<f64>().sqrt();
                assert!(tail <= qr.r[(s, s)].abs() * (1.0 + 1e-12) + 1e-14);
            }
        }
        let mut sorted = qr.pivots.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn qr_picks_identity_columns() {
        let a = Mat::from_fn(3, 7, |i, j| if j >= 2 && j - 2 == i { 1.0 } else { 0.0 });
        let qr = qr_column_pivoted(a.as_ref());
        let mut first: Vec<usize> = qr.pivots[..3].to_vec();
        first.sort_unstable();
        assert_eq!(first, vec![2, 3, 4]);
        check_qr_invariants(a.as_ref(), &qr);
    }

    #[test]
    fn qr_greedy_first_pivot() {
        // column norms 3, 1, 2; column 2 is parallel to column 0, so its
        // residual vanishes after the first step and column 1 goes next
        let a = Mat::from_fn(2, 3, |i, j| match (i, j) {
            (0, 0) => 3.0,
            (1, 1) => 1.0,
            (0, 2) => 2.0,
            _ => 0.0,
        });
        let qr = qr_column_pivoted(a.as_ref());
        assert_eq!(qr.pivots[0], 0);
        assert_eq!(qr.pivots[1], 1);
    }

    #[test]
    fn qr_ties_go_to_smallest_index() {
        let a = Mat::from_fn(2, 4, |_, _| 1.0);
        assert_eq!(qr_column_pivoted(a.as_ref()).pivots[0], 0);
    }

    #[test]
    fn qr_random_reconstruction() {
        for seed in 0..20 {
            let a = gaussian_matrix(4, 8, seed);
            check_qr_invariants(a.as_ref(), &qr_column_pivoted(a.as_ref()));
        }
        let tall = gaussian_matrix(9, 5, 99);
        check_qr_invariants(tall.as_ref(), &qr_column_pivoted(tall.as_ref()));
    }

    #[test]
    fn qrcp_singular_value_sandwich() {
        for seed in 0..200u64 {
            let k = 1 + (seed % 6) as usize;
            let n = k + 1 + (seed % 10) as usize;
            let a = gaussian_matrix(k, n, 1000 + seed);
            let qr = qr_column_pivoted(a.as_ref());
            let r11 = qr.r.as_ref().subcols(0, k).to_owned();
            let sa = singular_values(a.as_ref()).unwrap();
            let sr = singular_values(r11.as_ref()).unwrap();
            let p = ((n - k) as f64).sqrt() * 2f64.powi(k as i32);
            for i in 0..k {
                assert!(sa[i] >= sr[i] * (1.0 - 1e-12));
                assert!(sr[i] >= sa[i] / p * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn eigh_of_diagonal() {
        let k = SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let e = eigh(&k).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 2.0).abs() < 1e-14);
        assert!((e.values[2] - 1.0).abs() < 1e-14);
        for (col, row) in [(0, 0), (1, 2), (2, 1)] {
            assert!((e.vectors[(row, col)].abs() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eigh_random_spsd_reconstruction() {
        let g = gaussian_matrix(50, 30, 5);
        let k = SymmetricMatrix::from_mat(&g * g.transpose()).unwrap();
        let e = eigh(&k).unwrap();
        let lam = Mat::from_fn(50, 50, |i, j| if i == j { e.values[i] } else { 0.0 });
        let rec = &e.vectors * &lam * e.vectors.transpose();
        assert!(rel_err(k.as_ref(), rec.as_ref()) < 1e-10);
        let vtv = e.vectors.transpose() * &e.vectors;
        assert!(frobenius((&vtv - Mat::<f64>::identity(50, 50)).as_ref()) < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let resid = k.as_ref() * &e.vectors - &e.vectors * &lam;
        assert!(frobenius(resid.as_ref()) <= 1e-8 * e.values[0]);
    }

    #[test]
    fn svd_of_rank_one() {
        let u = [1.0, 2.0, 2.0];
        let v = [3.0, 4.0];
        let f = Mat::from_fn(3, 2, |i, j| u[i] * v[j]);
        let svd = thin_svd(f.as_ref()).unwrap();
        assert!((svd.s[0] - 15.0).abs() < 1e-12);
        assert!(svd.s[1].abs() < 1e-12);
        assert_eq!(svd.u.ncols(), 2);
        assert!(thin_svd(Mat::from_fn(2, 2, |_, _| f64::NAN).as_ref()).is_err());
    }

    #[test]
    fn chol_append_builds_factor() {
        let l1 = chol_append(Mat::<f64>::zeros(0, 0).as_ref(), &[], 4.0).unwrap();
        assert_eq!(l1[(0, 0)], 2.0);
        let l2 = chol_append(l1.as_ref(), &[2.0], 5.0).unwrap();
        let expected = [[2.0, 0.0], [1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((l2[(i, j)] - expected[i][j]).abs() < 1e-15);
            }
        }
        // duplicate column → zero Schur complement
        assert!(matches!(
            chol_append(l1.as_ref(), &[4.0], 4.0),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn chol_append_matches_one_shot() {
        let g = gaussian_matrix(8, 12, 3);
        let a = &g * g.transpose();
        let mut l = Mat::<f64>::zeros(0, 0);
        for j in 0..8 {
            let cross: Vec<f64> = (0..j).map(|i| a[(i, j)]).collect();
            l = chol_append(l.as_ref(), &cross, a[(j, j)]).unwrap();
        }
        let direct = cholesky(a.as_ref()).unwrap();
        assert!(rel_err(direct.as_ref(), l.as_ref()) < 1e-12);
    }

    #[test]
    fn logdet_matches_eigenvalues() {
        let g = gaussian_matrix(6, 10, 8);
        let a = SymmetricMatrix::from_mat(&g * g.transpose()).unwrap();
        let ld = logdet_spd(a.as_ref()).unwrap();
        let ev: f64 = eigh(&a).unwrap().values.iter().map(|v| v.ln()).sum();
        assert!((ld - ev).abs() < 1e-10);
        assert!(logdet_spd(Mat::from_fn(2, 2, |_, _| 1.0).as_ref()).is_err());
    }
}
