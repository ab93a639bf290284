//! Maximal continuation for u_t = Δu + |u| u: larger peaks blow up sooner.

use semilinear_heat::nonlinearity::{builtin_from_str, compute_envelopes};
use semilinear_heat::solver::{continue_maximally, ContinuationOptions};
use semilinear_heat::{GridField, GridSpec, HeatPropagator, Result};

fn main() -> Result<()> {
    let spec = GridSpec::new(1, 20.0, 256)?;
    let prop = HeatPropagator::new(spec);
    let f = builtin_from_str("power(2)", 1)?;
    let env = compute_envelopes(&f, 1e6, 64)?;
    let opts = ContinuationOptions { time_nodes: 32, ..ContinuationOptions::default() };
    for peak in [20.0, 40.0, 80.0] {
        let phi = GridField::from_fn(spec, |x| peak * (-x[0] * x[0] / 2.0).exp())?;
        let traj = continue_maximally(&prop, &f, &env, &phi, 1.0, &opts)?;
        println!("peak {peak:4}: {} at t = {:.5}", traj.status.label(), traj.t_max_reached);
    }
    Ok(())
}
