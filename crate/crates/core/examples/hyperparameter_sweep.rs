//! Recovers kernel hyperparameters of a synthetic GP draw by maximizing the
//! log marginal likelihood over a grid, densely and with a rank-r
//! RPCholesky factor through the Woodbury identity.

use doptk::gp::{hyperparameter_sweep, SweepOptions};
use doptk::kernel::assemble_covariance;
use doptk::linalg::cholesky;
use doptk::points::latin_hypercube;
use doptk::rng::{seeded, standard_normals};
use doptk::{KernelFamily, KernelSpec};
use faer::Mat;

fn main() -> doptk::Result<()> {
    let n = 400;
    let eta = 0.05;
    let pts = latin_hypercube(n, 2, 4)?;
    let truth = KernelSpec::squared_exponential(1.0, 0.2, eta)?;
    let k = assemble_covariance(&truth, &pts)?;
    let l = cholesky(Mat::from_fn(n, n, |i, j| k.get(i, j) + if i == j { eta * eta } else { 0.0 }).as_ref())?;
    let z = standard_normals(n, &mut seeded(0));
    let y: Vec<f64> = (0..n).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect();

    let sigma = [0.5, 0.75, 1.0, 1.5, 2.0];
    let ell = [0.1, 0.15, 0.2, 0.3, 0.4];
    let dense = hyperparameter_sweep(&pts, &y, KernelFamily::SquaredExponential, &sigma, &ell, eta, SweepOptions::default())?;
    let low_opts = SweepOptions { approx_rank: Some(150), seed: 1, ..Default::default() };
    let low = hyperparameter_sweep(&pts, &y, KernelFamily::SquaredExponential, &sigma, &ell, eta, low_opts)?;

    println!("generator: sigma_f = 1.0, ell = 0.2");
    println!("dense:     sigma_f = {}, ell = {}, lml = {:.3}", dense.best.sigma_f, dense.best.ell, dense.best_lml);
    println!("rank 150:  sigma_f = {}, ell = {}, lml = {:.3}", low.best.sigma_f, low.best.ell, low.best_lml);
    println!("dense table (rows sigma_f, columns ell):");
    for (s, row) in sigma.iter().zip(&dense.table) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:9.2}")).collect();
        println!("  {s:>5} {}", cells.join(" "));
    }
    Ok(())
}
