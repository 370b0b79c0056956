//! Greedy D-optimal selection against CholeskyGKS, with and without the GKS
//! step on top of the Cholesky pivots.

use doptk::gp::score;
use doptk::kernel::assemble_covariance;
use doptk::points::latin_hypercube;
use doptk::select::{prefix_scores, select_cholesky_gks, select_greedy_efficient};
use doptk::{KernelSpec, Pivoting};

fn main() -> doptk::Result<()> {
    let eta = 0.05;
    let k = 20;
    println!("{:>4} {:>10} {:>12} {:>12} {:>12} {:>12}", "seed", "greedy", "chol-raw", "chol+gks", "rp-raw", "rp+gks");
    for seed in 0..8u64 {
        let pts = latin_hypercube(500, 2, seed)?;
        let kmat = assemble_covariance(&KernelSpec::squared_exponential(1.0, 0.2, eta)?, &pts)?;
        let greedy = select_greedy_efficient(&kmat, k, eta)?;
        let chol = select_cholesky_gks(&kmat, k, Pivoting::Greedy, None)?;
        let rp = select_cholesky_gks(&kmat, k, Pivoting::Random, Some(seed))?;
        let phi = |idx: &[usize]| score(&kmat, idx, eta);
        println!(
            "{seed:>4} {:>10.3} {:>12.3} {:>12.3} {:>12.3} {:>12.3}",
            phi(&greedy.indices)?,
            phi(chol.raw_pivots.as_ref().unwrap())?,
            phi(&chol.indices)?,
            phi(rp.raw_pivots.as_ref().unwrap())?,
            phi(&rp.indices)?,
        );
        if seed == 0 {
            let gains: Vec<f64> = prefix_scores(&kmat, &greedy.indices, eta)?
                .windows(2)
                .map(|w| w[1] - w[0])
                .collect();
            println!("     greedy marginal gains shrink: {:.3?}", &gains[..6]);
        }
    }
    Ok(())
}
