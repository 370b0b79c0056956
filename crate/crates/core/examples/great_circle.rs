//! Sensor placement on the sphere with the great-circle squared-exponential
//! kernel. Points are (longitude, latitude) in degrees on a coarse global
//! grid; distances are haversine kilometres.

use doptk::gp::score;
use doptk::select::{select_cholesky_gks, select_greedy_efficient};
use doptk::{KernelFamily, KernelOperator, KernelSpec, Pivoting, PointSet};

fn main() -> doptk::Result<()> {
    let mut rows = Vec::new();
    for lat in (-80..=80).step_by(10) {
        for lon in (-180..180).step_by(10) {
            rows.push(vec![lon as f64, lat as f64]);
        }
    }
    let pts = PointSet::from_rows(&rows)?;
    let spec = KernelSpec::new(KernelFamily::GreatCircle, 1.0, 1500.0, 0.05)?;
    let op = KernelOperator::new(&spec, &pts)?;
    let k = 25;

    let gks = select_cholesky_gks(&op, k, Pivoting::Random, Some(2))?;
    let greedy = select_greedy_efficient(&op, k, spec.eta)?;
    println!("{} candidates, k = {k}", pts.len());
    println!("rpcholesky+gks φ_D = {:.3}", score(&op, &gks.indices, spec.eta)?);
    println!("greedy         φ_D = {:.3}", score(&op, &greedy.indices, spec.eta)?);
    let mut sensors: Vec<&[f64]> = gks.indices.iter().map(|&i| pts.point(i)).collect();
    sensors.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));
    for s in sensors.iter().take(8) {
        println!("  lon {:>6.1}  lat {:>5.1}", s[0], s[1]);
    }
    Ok(())
}
