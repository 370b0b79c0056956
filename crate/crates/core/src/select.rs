//! Sensor-selection algorithms.
//!
//! Every selector returns a [`SelectionResult`]; scores are filled in through
//! [`crate::gp::score`] so all methods share one evaluation path.

use std::time::Instant;

use faer::{Mat, MatRef};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp;
use crate::kernel::{Covariance, SymmetricMatrix};
use crate::linalg::{eigh, qr_column_pivoted, thin_svd};
use crate::nystrom::{nystrom_randomized_with, pivoted_cholesky_with, NystromOptions, Pivoting};
use crate::rng;

/// Largest number of subsets the exhaustive search will visit.
pub const BRUTE_FORCE_BUDGET: u128 = 1_000_000;

const ORTHONORMAL_TOL: f64 = 1e-8;

/// Greedy scores closer than this (relative to φ_D) count as ties, so round-off
/// cannot reorder candidates whose gains agree to working precision.
pub const GREEDY_TIE_TOL: f64 = 1e-10;

fn beats(v: f64, best: f64) -> bool {
    v > best + GREEDY_TIE_TOL * best.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Method {
    ConceptualGks,
    Nysgks { oversampling: usize },
    Cholgks { pivoting: Pivoting },
    Greedy,
    GreedyNaive,
    BruteForce,
    Random,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::ConceptualGks => "conceptual-gks".into(),
            Method::Nysgks { oversampling } => format!("nysgks-p{oversampling}"),
            Method::Cholgks { pivoting: Pivoting::Greedy } => "cholgks-greedy".into(),
            Method::Cholgks { pivoting: Pivoting::Random } => "cholgks-random".into(),
            Method::Greedy => "greedy".into(),
            Method::GreedyNaive => "greedy-naive".into(),
            Method::BruteForce => "brute-force".into(),
            Method::Random => "random".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected candidates in selection order.
    pub indices: Vec<usize>,
    pub method: Method,
    /// φ_D of `indices`; `None` until scored.
    pub d_optimality: Option<f64>,
    pub seed: Option<u64>,
    /// Seconds spent selecting (scoring excluded).
    pub wall_time: f64,
    /// Pivots of the Cholesky factor before the GKS step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_pivots: Option<Vec<usize>>,
    /// Set when a Cholesky route stopped before `k` steps; holds the rank reached.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early_stop_rank: Option<usize>,
}

impl SelectionResult {
    fn new(indices: Vec<usize>, method: Method, seed: Option<u64>, start: Instant) -> Self {
        SelectionResult {
            indices,
            method,
            d_optimality: None,
            seed,
            wall_time: start.elapsed().as_secs_f64(),
            raw_pivots: None,
            early_stop_rank: None,
        }
    }

    /// Fills `d_optimality`.
    pub fn scored(mut self, k: &impl Covariance, eta: f64) -> Result<Self> {
        self.d_optimality = Some(gp::score(k, &self.indices, eta)?);
        Ok(self)
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must be in 1..={n}")));
    }
    Ok(())
}

/// Rows chosen by QR with column pivoting on `basisᵀ`.
pub fn gks_core(basis: MatRef<'_, f64>) -> Result<Vec<usize>> {
    let (n, k) = (basis.nrows(), basis.ncols());
    check_k(k, n)?;
    let gram = basis.transpose() * basis;
    let mut worst = 0.0f64;
    for j in 0..k {
        for i in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    if !(worst <= ORTHONORMAL_TOL) {
        return Err(Error::InvalidArgument(format!(
            "basis columns are not orthonormal (max |UᵀU − I| = {worst:e})"
        )));
    }
    let qr = qr_column_pivoted(basis.transpose());
    Ok(qr.pivots[..k].to_vec())
}

/// GKS on the exact dominant eigenvectors of a dense K.
pub fn select_conceptual_gks(k_mat: &SymmetricMatrix, k: usize) -> Result<SelectionResult> {
    let start = Instant::now();
    check_k(k, k_mat.dim())?;
    let evd = eigh(k_mat)?;
    let idx = gks_core(evd.leading_vectors(k))?;
    Ok(SelectionResult::new(idx, Method::ConceptualGks, None, start))
}

/// GKS on the leading `k` vectors of a rank `k + p` randomized Nyström basis.
pub fn select_nysgks(k_op: &impl Covariance, k: usize, p: usize, seed: u64) -> Result<SelectionResult> {
    select_nysgks_with(k_op, k, NystromOptions { oversampling: p, ..Default::default() }, seed)
}

pub fn select_nysgks_with(
    k_op: &impl Covariance,
    k: usize,
    opts: NystromOptions,
    seed: u64,
) -> Result<SelectionResult> {
    let start = Instant::now();
    check_k(k, k_op.dim())?;
    let nys = nystrom_randomized_with(k_op, k, opts, seed)?;
    let idx = gks_core(nys.basis.as_ref().subcols(0, k))?;
    let method = Method::Nysgks { oversampling: opts.oversampling };
    Ok(SelectionResult::new(idx, method, Some(seed), start))
}

/// GKS on the left singular vectors of a rank-`k` pivoted Cholesky factor.
pub fn select_cholesky_gks(
    k_op: &impl Covariance,
    k: usize,
    pivoting: Pivoting,
    seed: Option<u64>,
) -> Result<SelectionResult> {
    let start = Instant::now();
    check_k(k, k_op.dim())?;
    let s = seed.unwrap_or(0);
    let f = pivoted_cholesky_with(k_op, k, pivoting, s)?;
    let svd = thin_svd(f.factor.as_ref())?;
    let idx = gks_core(svd.u.as_ref())?;
    let seed = match pivoting {
        Pivoting::Greedy => None,
        Pivoting::Random => Some(s),
    };
    let mut res = SelectionResult::new(idx, Method::Cholgks { pivoting }, seed, start);
    res.early_stop_rank = (f.rank() < k).then_some(f.rank());
    res.raw_pivots = f.pivots;
    Ok(res)
}

/// Greedy D-optimal selection with incremental Cholesky vectors on
/// `A = I + η⁻²K`. O(n k²) time, O(n k) memory.
pub fn select_greedy_efficient(k_op: &impl Covariance, k: usize, eta: f64) -> Result<SelectionResult> {
    let start = Instant::now();
    let n = k_op.dim();
    check_k(k, n)?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level eta must be positive, got {eta}")));
    }
    let inv = 1.0 / (eta * eta);
    // c[t][i]: t-th Cholesky coordinate of candidate i.
    let mut c: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut d2: Vec<f64> = k_op.diagonal().iter().map(|x| 1.0 + inv * x).collect();
    let mut chosen = vec![false; n];
    let mut idx = Vec::with_capacity(k);
    let mut phi = 0.0;
    for _ in 0..k {
        let j = argmax_unchosen(&d2, &chosen, phi);
        if !(d2[j] > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "greedy Schur complement {} at candidate {j}",
                d2[j]
            )));
        }
        idx.push(j);
        chosen[j] = true;
        phi += d2[j].ln();
        let dj = d2[j].sqrt();
        let col = k_op.column(j)?;
        let e: Vec<f64> = (0..n)
            .map(|i| {
                let a_ji = inv * col[i] + if i == j { 1.0 } else { 0.0 };
                let proj: f64 = c.iter().map(|ct| ct[j] * ct[i]).sum();
                (a_ji - proj) / dj
            })
            .collect();
        for (d, ei) in d2.iter_mut().zip(&e) {
            *d -= ei * ei;
        }
        c.push(e);
    }
    Ok(SelectionResult::new(idx, Method::Greedy, None, start))
}

/// First unchosen candidate whose augmented score `phi + log d²` is not
/// beaten by a later one.
fn argmax_unchosen(d2: &[f64], chosen: &[bool], phi: f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in d2.iter().enumerate() {
        if chosen[i] {
            continue;
        }
        let v = if x > 0.0 { phi + x.ln() } else { f64::NEG_INFINITY };
        if best.is_none_or(|(_, b)| beats(v, b)) {
            best = Some((i, v));
        }
    }
    best.expect("k ≤ n leaves a candidate").0
}

/// Greedy selection by direct log-determinant evaluation of every
/// augmented set. Test oracle for [`select_greedy_efficient`].
pub fn select_greedy_naive(k_mat: &SymmetricMatrix, k: usize, eta: f64) -> Result<SelectionResult> {
    let start = Instant::now();
    let n = k_mat.dim();
    check_k(k, n)?;
    let mut idx: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for cand in 0..n {
            if idx.contains(&cand) {
                continue;
            }
            idx.push(cand);
            let v = gp::score(k_mat, &idx, eta)?;
            idx.pop();
            if best.is_none_or(|(_, b)| beats(v, b)) {
                best = Some((cand, v));
            }
        }
        idx.push(best.expect("candidate available").0);
    }
    Ok(SelectionResult::new(idx, Method::GreedyNaive, None, start))
}

/// Binomial coefficient, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exhaustive maximization over all k-subsets, visited in lexicographic
/// order; the first maximizer wins.
pub fn select_brute_force(k_mat: &SymmetricMatrix, k: usize, eta: f64) -> Result<SelectionResult> {
    let start = Instant::now();
    let n = k_mat.dim();
    check_k(k, n)?;
    let subsets = binomial(n, k);
    if subsets > BRUTE_FORCE_BUDGET {
        return Err(Error::CombinatorialBudget { subsets, budget: BRUTE_FORCE_BUDGET });
    }
    let mut cur: Vec<usize> = (0..k).collect();
    let mut best = (cur.clone(), gp::score(k_mat, &cur, eta)?);
    while next_combination(&mut cur, n) {
        let v = gp::score(k_mat, &cur, eta)?;
        if v > best.1 {
            best = (cur.clone(), v);
        }
    }
    Ok(SelectionResult::new(best.0, Method::BruteForce, None, start))
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
        return false;
    };
    c[i] += 1;
    for j in i + 1..k {
        c[j] = c[j - 1] + 1;
    }
    true
}

/// Uniform k-subset without replacement.
pub fn select_random(n: usize, k: usize, seed: u64) -> Result<SelectionResult> {
    let start = Instant::now();
    check_k(k, n)?;
    let idx = sample(&mut rng::seeded(seed), n, k).into_vec();
    Ok(SelectionResult::new(idx, Method::Random, Some(seed), start))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreHistogram {
    /// φ_D per trial; trial `t` uses seed `seed + t`.
    pub scores: Vec<f64>,
    pub seed: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// φ_D of `trials` independent uniform selections.
pub fn random_baseline(
    k_op: &impl Covariance,
    k: usize,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<ScoreHistogram> {
    if trials == 0 {
        return Err(Error::InvalidArgument("baseline needs at least one trial".into()));
    }
    let n = k_op.dim();
    check_k(k, n)?;
    let scores: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let idx = sample(&mut rng::seeded(seed.wrapping_add(t as u64)), n, k).into_vec();
            gp::score(k_op, &idx, eta)
        })
        .collect::<Result<_>>()?;
    let m = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / m;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / m;
    Ok(ScoreHistogram {
        min: scores.iter().cloned().fold(f64::INFINITY, f64::min),
        max: scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std: var.sqrt(),
        scores,
        seed,
    })
}

/// Prefix scores `φ_D(S[..1]), φ_D(S[..2]), …` of an ordered selection.
pub fn prefix_scores(k_op: &impl Covariance, indices: &[usize], eta: f64) -> Result<Vec<f64>> {
    (1..=indices.len()).map(|m| gp::score(k_op, &indices[..m], eta)).collect()
}

/// Identity-or-permutation basis helper used by tests and examples: the
/// `n × k` matrix whose column `j` is `e_{rows[j]}`.
pub fn coordinate_basis(n: usize, rows: &[usize]) -> Mat<f64> {
    Mat::from_fn(n, rows.len(), |i, j| if rows[j] == i { 1.0 } else { 0.0 })
}
