//! Small data for min(|u|², |u|⁴): the solution stays inside A S(t)φ± for all
//! time and decays like t^{-n/2}.

use semilinear_heat::harness::{verify_global_envelope, GlobalEnvelopeConfig};
use semilinear_heat::nonlinearity::{builtin_from_str, compute_envelopes};
use semilinear_heat::solver::ContinuationOptions;
use semilinear_heat::{GridField, GridSpec, HeatPropagator, Result};

fn main() -> Result<()> {
    let spec = GridSpec::new(1, 20.0, 512)?;
    let prop = HeatPropagator::new(spec);
    let f = builtin_from_str("minpower(2,4)", 1)?;
    let env = compute_envelopes(&f, 1e6, 64)?;
    let width: f64 = 0.25;
    let norm = (2.0 * std::f64::consts::PI).sqrt() * width;
    let phi = GridField::from_fn(spec, |x| 1e-2 * (-x[0] * x[0] / (2.0 * width * width)).exp() / norm)?;
    let config = GlobalEnvelopeConfig::new(2.0, 1e-2, 10.0)?;
    let opts = ContinuationOptions { time_nodes: 128, ..ContinuationOptions::default() };
    let r = verify_global_envelope(&prop, &f, &env, &phi, &config, &opts)?;
    println!("status {}, envelope holds: {}", r.status.label(), r.envelope.passed);
    println!("decay exponent {:?} over {:?} (heat flow: -0.5)", r.decay_exponent, r.fit_window);
    Ok(())
}
