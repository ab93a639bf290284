use super::{
    bounded_data_horizon, horizon, monotone_solve, BlowUpThresholds, MonotoneOptions,
    SolutionTrajectory, SolveStatus, TimeGrid,
};
use crate::conditions::{check_condition, ConditionKind, Verdict};
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::nonlinearity::{Domain, EnvelopeFunctions, Nonlinearity};
use crate::semigroup::HeatPropagator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub monotone: MonotoneOptions,
    /// Nodes per restart segment.
    pub time_nodes: usize,
    /// Fraction of the certified horizon taken per restart. At the full
    /// horizon the supersolution margin of `A S(t)u₀` is zero and the
    /// quadrature error of the time grid alone can break the ordering.
    pub safety: f64,
    /// A restart horizon below this is treated as collapse.
    pub min_step: f64,
    pub max_restarts: usize,
    pub thresholds: BlowUpThresholds,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            monotone: MonotoneOptions::default(),
            time_nodes: 64,
            safety: 0.5,
            min_step: 1e-9,
            max_restarts: 10_000,
            thresholds: BlowUpThresholds::default(),
        }
    }
}

/// Restarts the monotone iteration on successive horizons until `t_limit`,
/// a blow-up flag, or horizon collapse.
///
/// Each restart takes `safety` times the longer of two certified horizons for the current
/// state `u₀`: the mass-based `T_B` with `K = 2 ‖u₀‖₁`, and the bounded-data
/// time `1 / (2 ℓ(2 ‖u₀‖∞))`. Requires the uniqueness condition (`I2`, or
/// `I2_plus` for non-negative data), since otherwise the glued trajectory
/// need not be the solution.
pub fn continue_maximally(
    prop: &HeatPropagator,
    nl: &Nonlinearity,
    env: &EnvelopeFunctions,
    phi: &GridField,
    t_limit: f64,
    opts: &ContinuationOptions,
) -> Result<SolutionTrajectory> {
    if !(t_limit > 0.0 && t_limit.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_limit {t_limit} must be positive")));
    }
    let dim = prop.spec().dim();
    let cone = nl.domain() == Domain::NonNegative || phi.is_nonnegative();
    if nl.domain() == Domain::NonNegative && !phi.is_nonnegative() {
        return Err(Error::InvalidArgument(
            "a positive-cone nonlinearity needs non-negative data".into(),
        ));
    }
    let (kind, ell) = if cone {
        (ConditionKind::I2Plus, &env.ell_plus)
    } else {
        (ConditionKind::I2, &env.ell)
    };
    let uniqueness = check_condition(kind, env, dim)?;
    if uniqueness.verdict != Verdict::Convergent {
        return Err(Error::UniquenessNotGuaranteed(format!(
            "{kind} {:?}",
            uniqueness.verdict
        )));
    }

    let mass0 = phi.norm_l1();
    let a = opts.monotone.amplification;
    let mut t = 0.0;
    let mut u = phi.clone();
    let mut nodes = vec![0.0];
    let mut fields = vec![u.clone()];
    let finish = |nodes, fields, status| Ok(SolutionTrajectory::new(nodes, fields, status));

    for restart in 0..opts.max_restarts {
        if t >= t_limit {
            break;
        }
        if opts.thresholds.exceeded(&u, mass0) {
            return finish(nodes, fields, SolveStatus::BlowUpDetected { t_detect: t });
        }
        let (l1, linf) = (u.norm_l1(), u.norm_inf());
        let step = if l1 == 0.0 {
            f64::INFINITY
        } else {
            let mass_horizon = horizon(ell, 2.0 * l1, dim)?.t_b.value();
            opts.safety * mass_horizon.max(bounded_data_horizon(ell, linf, a))
        };
        if step < opts.min_step {
            log::info!("horizon collapsed to {step:e} at t = {t:e}");
            return finish(nodes, fields, SolveStatus::BlowUpDetected { t_detect: t });
        }
        // an ordering breach means the segment is under-resolved in time:
        // halve it, and treat a collapse below min_step as blow-up
        let mut step = step.min(t_limit - t);
        let (upper, state) = loop {
            // graded nodes resolve the t^{-n/2} layer of L¹ data; after a
            // restart the data is bounded and uniform nodes do better
            let grid = if restart == 0 {
                TimeGrid::graded(step, opts.time_nodes)?
            } else {
                TimeGrid::uniform(step, opts.time_nodes)?
            };
            match monotone_solve(prop, nl, &u, &grid, &opts.monotone) {
                Ok((_, upper, state)) => break (upper, state),
                Err(Error::OrderingViolation { t: at, .. }) if step / 2.0 >= opts.min_step => {
                    log::debug!("ordering breach at {at:e} in a step of {step:e}; halving");
                    step /= 2.0;
                }
                Err(Error::OrderingViolation { .. }) => {
                    return finish(nodes, fields, SolveStatus::BlowUpDetected { t_detect: t });
                }
                Err(e) => return Err(e),
            }
        };
        log::debug!(
            "restart {restart}: t = {t:e}, step {step:e}, {} iterations",
            state.iteration_count
        );
        for (&s, field) in upper.nodes.iter().zip(upper.fields).skip(1) {
            nodes.push(t + s);
            fields.push(field);
        }
        if !state.converged {
            let gap = state.sup_gap;
            return finish(nodes, fields, SolveStatus::NotConverged { gap });
        }
        t = if step == t_limit - t { t_limit } else { t + step };
        u = fields.last().unwrap().clone();
    }
    if t < t_limit {
        return Err(Error::InvalidArgument(format!(
            "restart budget of {} exhausted at t = {t:e}",
            opts.max_restarts
        )));
    }
    if opts.thresholds.exceeded(&u, mass0) {
        return finish(nodes, fields, SolveStatus::BlowUpDetected { t_detect: t });
    }
    finish(nodes, fields, SolveStatus::HorizonReached)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::nonlinearity::{builtin_from_str, compute_envelopes};

    #[test]
    fn zero_data_runs_to_the_limit() {
        let spec = GridSpec::new(1, 10.0, 64).unwrap();
        let prop = HeatPropagator::new(spec);
        let f = builtin_from_str("power(1.5)", 1).unwrap();
        let env = compute_envelopes(&f, 1e6, 64).unwrap();
        let traj = continue_maximally(&prop, &f, &env, &GridField::zeros(spec), 2.0, &ContinuationOptions::default()).unwrap();
        assert_eq!(traj.status, SolveStatus::HorizonReached);
        assert_eq!(traj.t_max_reached, 2.0);
        assert!(traj.fields.iter().all(|u| u.norm_inf() == 0.0));
    }

    #[test]
    fn refuses_without_uniqueness() {
        let spec = GridSpec::new(1, 10.0, 64).unwrap();
        let prop = HeatPropagator::new(spec);
        let f = builtin_from_str("power(3.5)", 1).unwrap();
        let env = compute_envelopes(&f, 1e6, 64).unwrap();
        let phi = GridField::constant(spec, 0.1);
        assert!(matches!(
            continue_maximally(&prop, &f, &env, &phi, 1.0, &ContinuationOptions::default()),
            Err(Error::UniquenessNotGuaranteed(_))
        ));
    }

    #[test]
    fn linear_growth_continues_past_one_horizon() {
        let spec = GridSpec::new(1, 10.0, 64).unwrap();
        let prop = HeatPropagator::new(spec);
        let c: f64 = 1.0;
        let f = builtin_from_str(&format!("linear({c})"), 1).unwrap();
        let env = compute_envelopes(&f, 1e6, 64).unwrap();
        let phi = GridField::from_fn(spec, |x| (-x[0] * x[0]).exp()).unwrap();
        let traj = continue_maximally(&prop, &f, &env, &phi, 2.0, &ContinuationOptions::default()).unwrap();
        assert_eq!(traj.status, SolveStatus::HorizonReached);
        let exact = prop.apply(&phi, 2.0).unwrap().scaled((2.0 * c).exp());
        let err = traj.final_field().sub(&exact).unwrap().norm_l1() / exact.norm_l1();
        assert!(err < 1e-4, "{err:e}");
    }
}
