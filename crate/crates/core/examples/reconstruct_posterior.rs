//! Field reconstruction from sensors: a sum-of-Gaussians profile on [0, 10]
//! is observed at CholeskyGKS locations and predicted elsewhere by the GP
//! posterior mean. Relative error falls as the number of sensors grows.

use doptk::gp::{posterior, relative_error};
use doptk::points::{grid1d, sum_of_gaussians_1d};
use doptk::rng::{seeded, standard_normals};
use doptk::select::select_cholesky_gks;
use doptk::{KernelOperator, KernelSpec, Pivoting};

fn main() -> doptk::Result<()> {
    let pts = grid1d(0.0, 10.0, 1001)?;
    let truth = sum_of_gaussians_1d(&pts, &[2.0, 5.0, 8.0], &[0.5, 0.7, 0.6], &[1.0, 1.5, 1.2])?;
    let spec = KernelSpec::squared_exponential(1.0, 0.5, 1e-3)?;
    let op = KernelOperator::new(&spec, &pts)?;

    for k in [10, 20, 30, 40] {
        let sel = select_cholesky_gks(&op, k, Pivoting::Random, Some(k as u64))?.indices;
        let noise = standard_normals(k, &mut seeded(1));
        let y: Vec<f64> = sel.iter().zip(&noise).map(|(&i, z)| truth[i] + spec.eta * z).collect();
        let post = posterior(&op, &sel, &y, spec.eta, false)?;
        let field = post.full_field(&sel, &y);
        let max_sd = post.cov.diagonal().iter().cloned().fold(0.0f64, f64::max).sqrt();
        println!("k = {k:>2}: relative error {:.2e}, largest posterior sd {max_sd:.2e}", relative_error(&field, &truth)?);
    }
    Ok(())
}
