//! Surrogate modeling of the 4D Zhou function: CholeskyGKS chooses where to
//! sample, the GP posterior interpolates everywhere else.

use doptk::gp::{posterior, relative_error, score};
use doptk::points::{latin_hypercube, zhou_function};
use doptk::select::{random_baseline, select_cholesky_gks};
use doptk::{KernelOperator, KernelSpec, Pivoting};

fn main() -> doptk::Result<()> {
    let (n, k) = (2000, 300);
    let pts = latin_hypercube(n, 4, 10)?;
    let spec = KernelSpec::squared_exponential(6.5, 0.16, 0.2845)?;
    let op = KernelOperator::new(&spec, &pts)?;
    let truth = zhou_function(&pts, 1.0 / 3.0, 2.0 / 3.0);

    for (name, piv, seed) in [("rpcholesky+gks", Pivoting::Random, Some(0)), ("greedy-cholesky+gks", Pivoting::Greedy, None)] {
        let sel = select_cholesky_gks(&op, k, piv, seed)?.indices;
        let y: Vec<f64> = sel.iter().map(|&i| truth[i]).collect();
        let post = posterior(&op, &sel, &y, spec.eta, false)?;
        let err = relative_error(&post.full_field(&sel, &y), &truth)?;
        println!("{name:<20} φ_D = {:8.2}  relative error {:.2}%", score(&op, &sel, spec.eta)?, 100.0 * err);
    }
    let h = random_baseline(&op, k, spec.eta, 200, 0)?;
    println!("{:<20} φ_D max {:.2}, mean {:.2} over 200 draws", "random", h.max, h.mean);
    Ok(())
}
