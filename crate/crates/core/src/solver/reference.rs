use rayon::prelude::*;

use super::{BlowUpThresholds, SolutionTrajectory, SolveStatus, TimeGrid};
use crate::error::Result;
use crate::field::GridField;
use crate::nonlinearity::Nonlinearity;
use crate::semigroup::HeatPropagator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeOutcome {
    Value(f64),
    /// `|u|` passed the escape bound (or the step size collapsed) at this
    /// fraction of the requested interval.
    Escaped { fraction: f64 },
}

// Dormand-Prince 5(4) tableau; the nodes are unused for autonomous f
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of the autonomous scalar ODE
/// `u' = f(u)` over `[0, h]`.
pub fn dormand_prince(f: impl Fn(f64) -> f64, u0: f64, h: f64, rtol: f64, escape: f64) -> OdeOutcome {
    let atol = rtol * 1e-6;
    let (mut t, mut u) = (0.0, u0);
    let mut step = h;
    let min_step = h * 1e-14;
    while t < h {
        step = step.min(h - t);
        let mut k = [0.0; 7];
        k[0] = f(u);
        for s in 1..7 {
            let mut acc = u;
            for r in 0..s {
                acc += step * A[s][r] * k[r];
            }
            k[s] = f(acc);
        }
        let mut hi = u;
        let mut lo = u;
        for s in 0..7 {
            hi += step * B5[s] * k[s];
            lo += step * B4[s] * k[s];
        }
        let err = (hi - lo).abs() / (atol + rtol * u.abs().max(hi.abs()));
        if !hi.is_finite() || !err.is_finite() {
            if step <= min_step {
                return OdeOutcome::Escaped { fraction: t / h };
            }
            step *= 0.25;
            continue;
        }
        if err <= 1.0 {
            t += step;
            u = hi;
            if u.abs() > escape {
                return OdeOutcome::Escaped { fraction: t / h };
            }
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).min(5.0) };
            step *= grow;
        } else {
            step *= (0.9 * err.powf(-0.2)).max(0.2);
            if step <= min_step {
                return OdeOutcome::Escaped { fraction: t / h };
            }
        }
    }
    OdeOutcome::Value(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    /// Minimum number of splitting steps per grid interval.
    pub substeps: usize,
    /// Upper bound on the splitting step.
    pub max_dt: f64,
    pub rtol: f64,
    pub thresholds: BlowUpThresholds,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            substeps: 1,
            max_dt: 1e-3,
            rtol: 1e-10,
            thresholds: BlowUpThresholds::default(),
        }
    }
}

/// Reaction half step at every lattice point; `Err(fraction)` on escape.
fn react(nl: &Nonlinearity, u: &GridField, h: f64, opts: &ReferenceOptions) -> std::result::Result<GridField, f64> {
    let escape = opts.thresholds.sup_norm;
    let values = u
        .values()
        .par_iter()
        .map(|&x| match dormand_prince(|v| nl.eval(v), x, h, opts.rtol, escape) {
            OdeOutcome::Value(v) => Ok(v),
            OdeOutcome::Escaped { fraction } => Err(fraction),
        })
        .collect::<std::result::Result<Vec<f64>, f64>>()?;
    Ok(GridField::from_vec_unchecked(*u.spec(), values))
}

/// Strang splitting: half reaction step, exact diffusion step, half
/// reaction step. Blow-up is flagged when a pointwise ODE escapes or the
/// norms pass the thresholds; the trajectory then ends at the detection
/// time.
pub fn reference_integrate(
    prop: &HeatPropagator,
    nl: &Nonlinearity,
    phi: &GridField,
    grid: &TimeGrid,
    opts: &ReferenceOptions,
) -> Result<SolutionTrajectory> {
    prop.spec().check_same(phi.spec())?;
    let nodes = grid.nodes();
    let mass0 = phi.norm_l1();
    let mut u = phi.clone();
    let mut fields = vec![u.clone()];
    let mut t = 0.0;
    for j in 1..nodes.len() {
        let dt_total = nodes[j] - nodes[j - 1];
        let steps = opts.substeps.max((dt_total / opts.max_dt).ceil() as usize).max(1);
        let dt = dt_total / steps as f64;
        for _ in 0..steps {
            let blow_up = |at: f64, fields: Vec<GridField>| {
                let kept = fields.len();
                SolutionTrajectory::new(
                    nodes[..kept].to_vec(),
                    fields,
                    SolveStatus::BlowUpDetected { t_detect: at },
                )
            };
            match react(nl, &u, dt / 2.0, opts) {
                Ok(v) => u = v,
                Err(frac) => return Ok(blow_up(t + frac * dt / 2.0, fields)),
            }
            u = prop.apply(&u, dt)?;
            match react(nl, &u, dt / 2.0, opts) {
                Ok(v) => u = v,
                Err(frac) => return Ok(blow_up(t + dt / 2.0 + frac * dt / 2.0, fields)),
            }
            t += dt;
            if opts.thresholds.exceeded(&u, mass0) {
                return Ok(blow_up(t, fields));
            }
        }
        t = nodes[j];
        fields.push(u.clone());
    }
    Ok(SolutionTrajectory::new(
        nodes.to_vec(),
        fields,
        SolveStatus::HorizonReached,
    ))
}
