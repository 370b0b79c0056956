//! Evaluates every bound on a small instance and prints the JSON report,
//! the same output as `doptk bounds-check`.

use doptk::bounds::{bound_report, BoundOptions};
use doptk::kernel::assemble_covariance;
use doptk::points::latin_hypercube;
use doptk::KernelSpec;

fn main() -> doptk::Result<()> {
    let pts = latin_hypercube(10, 2, 3)?;
    let spec = KernelSpec::squared_exponential(1.0, 0.35, 0.1)?;
    let k = assemble_covariance(&spec, &pts)?;
    let report = bound_report(&k, 3, spec.eta, BoundOptions { oversampling: 4, ..Default::default() })?;
    for c in &report.checks {
        let tag = match (c.satisfied, c.asserted) {
            (true, _) => "ok",
            (false, true) => "VIOLATED",
            (false, false) => "not guaranteed",
        };
        println!("{:<40} value {:>10.4} bound {:>10.4}  {tag}", c.name, c.value, c.bound);
    }
    println!("{}", serde_json::to_string_pretty(&report.quantities).expect("serializable"));
    Ok(())
}
