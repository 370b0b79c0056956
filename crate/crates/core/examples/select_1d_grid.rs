//! Every selection method on an equispaced 1D grid, scored by D-optimality.
//!
//! `cargo run --release --example select_1d_grid -- [n] [k]`
//! With n = 6001 and k = 30 this is the full-size grid experiment; the
//! default n = 1501 keeps the dense eigendecomposition quick.

use doptk::kernel::assemble_covariance;
use doptk::points::grid1d;
use doptk::select::{
    random_baseline, select_cholesky_gks, select_conceptual_gks, select_greedy_efficient,
    select_nysgks,
};
use doptk::{KernelOperator, KernelSpec, Pivoting};

fn main() -> doptk::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let n = args.next().unwrap_or(1501);
    let k = args.next().unwrap_or(30);

    let pts = grid1d(0.0, 10.0, n)?;
    let spec = KernelSpec::squared_exponential(1.0, 0.5, 4.2784e-4)?;
    let op = KernelOperator::new(&spec, &pts)?;
    let eta = spec.eta;

    let dense = assemble_covariance(&spec, &pts)?;
    let runs = [
        select_conceptual_gks(&dense, k)?,
        select_nysgks(&op, k, 10, 0)?,
        select_cholesky_gks(&op, k, Pivoting::Greedy, None)?,
        select_cholesky_gks(&op, k, Pivoting::Random, Some(0))?,
        select_greedy_efficient(&op, k, eta)?,
    ];
    println!("n = {n}, k = {k}");
    for r in runs {
        let r = r.scored(&op, eta)?;
        println!("{:>16}  φ_D = {:9.4}  ({:.2}s)", r.method.label(), r.d_optimality.unwrap(), r.wall_time);
    }
    let h = random_baseline(&op, k, eta, 2000, 0)?;
    println!("{:>16}  max {:.4}, mean {:.4} over 2000 draws", "random", h.max, h.mean);

    // Sorted sensor locations of the conceptual selection.
    let mut x: Vec<f64> = select_conceptual_gks(&dense, k)?.indices.iter().map(|&i| pts.point(i)[0]).collect();
    x.sort_by(f64::total_cmp);
    println!("conceptual-gks locations: {:.3?}", x);
    Ok(())
}
