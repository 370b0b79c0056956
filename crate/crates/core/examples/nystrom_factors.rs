//! The three low-rank factorizations of a kernel matrix side by side:
//! randomized Nyström, greedy pivoted Cholesky and RPCholesky.
//!
//! For each rank the example prints the trace error tr(K − FFᵀ) and the
//! smallest eigenvalue of the residual, which never goes below zero.

use doptk::kernel::assemble_covariance;
use doptk::linalg::eigh;
use doptk::nystrom::{cholesky_greedy, cholesky_rp, nystrom_gaussian, nystrom_randomized};
use doptk::points::latin_hypercube;
use doptk::{KernelSpec, LowRankFactor, SymmetricMatrix};

fn report(name: &str, k: &SymmetricMatrix, f: &LowRankFactor) -> doptk::Result<()> {
    let res = f.residual(k)?;
    let min = *eigh(&res)?.values.last().unwrap();
    println!("  {name:<18} rank {:>3}  trace error {:10.3e}  min residual eig {:+.1e}", f.rank(), res.trace(), min);
    Ok(())
}

fn main() -> doptk::Result<()> {
    let pts = latin_hypercube(400, 2, 1)?;
    let spec = KernelSpec::squared_exponential(1.0, 0.15, 0.01)?;
    let k = assemble_covariance(&spec, &pts)?;
    println!("n = 400, tr K = {:.1}", k.trace());
    for r in [10, 25, 50, 100] {
        println!("rank {r}:");
        report("nystrom-gaussian", &k, &nystrom_gaussian(&k, r, 7)?)?;
        report("greedy-cholesky", &k, &cholesky_greedy(&k, r)?)?;
        report("rp-cholesky", &k, &cholesky_rp(&k, r, 7)?)?;
    }

    // The shifted sketch used by NysGKS exposes its basis and spectrum directly.
    let nys = nystrom_randomized(&k, 20, 10, 3)?;
    let exact = eigh(&k)?.values;
    println!("shift ν = {:.2e}, effective rank {}", nys.shift, nys.rank);
    for i in [0, 4, 9, 19] {
        println!("  λ_{:<2} exact {:10.4e}  sketch {:10.4e}", i + 1, exact[i], nys.singular_values[i].powi(2) - nys.shift);
    }
    Ok(())
}
