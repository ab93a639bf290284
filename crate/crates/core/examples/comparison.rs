//! Order preservation: φ ≤ ψ gives u ≤ v at every node, with a witness on
//! failure.

use semilinear_heat::harness::verify_comparison;
use semilinear_heat::nonlinearity::builtin_from_str;
use semilinear_heat::solver::{monotone_solve, MonotoneOptions, TimeGrid};
use semilinear_heat::{GridField, GridSpec, HeatPropagator, Result};

fn main() -> Result<()> {
    let spec = GridSpec::new(1, 20.0, 256)?;
    let prop = HeatPropagator::new(spec);
    let f = builtin_from_str("power(1.5)", 1)?;
    let phi = GridField::from_fn(spec, |x| 0.2 * (-x[0] * x[0]).exp() - 0.1 * (-(x[0] - 3.0).powi(2)).exp())?;
    let psi = phi.add(&GridField::from_fn(spec, |x| 0.05 * (-(x[0] + 2.0).powi(2)).exp())?)?;
    let grid = TimeGrid::graded(0.2, 48)?;
    let opts = MonotoneOptions::default();
    let (_, u, _) = monotone_solve(&prop, &f, &phi, &grid, &opts)?;
    let (_, v, _) = monotone_solve(&prop, &f, &psi, &grid, &opts)?;
    let report = verify_comparison(&prop, &u, &v, &phi, &psi, 1e-6)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    Ok(())
}
