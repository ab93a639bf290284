//! Discrete checks of the comparison principle, continuous dependence, the
//! small-data global envelope and uniqueness of the monotone limit. Every
//! failed check carries a witness `(t, x, lhs, rhs)`.

use serde::Serialize;

use crate::conditions::{check_condition, fujita_exponent, ConditionKind, Verdict};
use crate::error::{Error, Result};
use crate::field::{first_violation, pointwise_leq, GridField};
use crate::nonlinearity::{Domain, EnvelopeFunctions, Nonlinearity};
use crate::semigroup::{validity_window, HeatPropagator};
use crate::solver::{
    continue_maximally, g_function, ContinuationOptions, IterationState, SolutionTrajectory,
    SolveStatus,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub index: usize,
    pub x: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

impl Witness {
    fn at(t: f64, field: &GridField, index: usize, lhs: f64, rhs: f64) -> Self {
        let dim = field.spec().dim();
        Self {
            t,
            index,
            x: field.spec().point(index)[..dim].to_vec(),
            lhs,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub witness: Option<Witness>,
}

impl Assertion {
    fn new(name: &str, witness: Option<Witness>, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed: witness.is_none(),
            detail,
            witness,
        }
    }
}

/// First node and point where `a > b + slack`.
fn ordering_witness(
    nodes: &[f64],
    a: &[GridField],
    b: &[GridField],
    slack: f64,
) -> Result<Option<Witness>> {
    for (j, (x, y)) in a.iter().zip(b).enumerate() {
        if let Some((i, lhs, rhs)) = first_violation(x, y, slack)? {
            return Ok(Some(Witness::at(nodes[j], x, i, lhs, rhs)));
        }
    }
    Ok(None)
}

fn max_sup(fields: &[GridField]) -> f64 {
    fields.iter().map(|u| u.norm_inf()).fold(0.0, f64::max)
}

fn same_nodes(u: &SolutionTrajectory, v: &SolutionTrajectory) -> Result<()> {
    if u.nodes.len() != v.nodes.len()
        || u.nodes.iter().zip(&v.nodes).any(|(a, b)| (a - b).abs() > 1e-14 * a.abs().max(1.0))
    {
        return Err(Error::InvalidArgument(
            "trajectories are not on the same time nodes".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub slack: f64,
    /// `max_j (-min S(t_j)(ψ - φ))⁺`: how far the discrete heat flow of the
    /// non-negative difference dips below zero. Counted twice in the slack.
    pub heat_defect: f64,
    pub ordering: Assertion,
    pub positivity: Option<Assertion>,
    /// `max (u(t;φ) - u(t;ψ))` over nodes and points; non-positive when ordered.
    pub max_excess: f64,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.ordering.passed && self.positivity.as_ref().is_none_or(|a| a.passed)
    }
}

fn heat_defect(prop: &HeatPropagator, u: &GridField, nodes: &[f64]) -> Result<f64> {
    Ok(prop
        .apply_many(u, nodes)?
        .iter()
        .map(|v| (-v.min()).max(0.0))
        .fold(0.0, f64::max))
}

/// Checks `u(t;φ) ≤ u(t;ψ)` and, for non-negative `φ`, `u(t;φ) ≥ 0`.
///
/// The slack is `rel_slack × scale` plus twice the positivity defect of the
/// discrete heat flow on `ψ - φ` (resp. `φ`); for well-resolved data the
/// defect is at round-off level.
pub fn verify_comparison(
    prop: &HeatPropagator,
    u_phi: &SolutionTrajectory,
    u_psi: &SolutionTrajectory,
    phi: &GridField,
    psi: &GridField,
    rel_slack: f64,
) -> Result<ComparisonReport> {
    if !pointwise_leq(phi, psi, 0.0)? {
        return Err(Error::InvalidArgument("comparison needs phi <= psi".into()));
    }
    same_nodes(u_phi, u_psi)?;
    let nodes = &u_phi.nodes;
    let scale = max_sup(&u_phi.fields).max(max_sup(&u_psi.fields)).max(f64::MIN_POSITIVE);
    let defect = heat_defect(prop, &psi.sub(phi)?, nodes)?;
    let slack = rel_slack * scale + 2.0 * defect;
    let witness = ordering_witness(nodes, &u_phi.fields, &u_psi.fields, slack)?;
    let max_excess = u_phi
        .fields
        .iter()
        .zip(&u_psi.fields)
        .map(|(a, b)| a.sub(b).map(|d| d.max()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let ordering = Assertion::new(
        "u(phi) <= u(psi)",
        witness,
        format!("max excess {max_excess:e}, slack {slack:e}"),
    );

    let positivity = if phi.is_nonnegative() {
        let slack = rel_slack * scale + 2.0 * heat_defect(prop, phi, nodes)?;
        let zeros = vec![GridField::zeros(*phi.spec()); nodes.len()];
        let w = ordering_witness(nodes, &zeros, &u_phi.fields, slack)?;
        let lowest = u_phi.fields.iter().map(|u| u.min()).fold(f64::INFINITY, f64::min);
        Some(Assertion::new(
            "u(phi) >= 0",
            w,
            format!("minimum {lowest:e}, slack {slack:e}"),
        ))
    } else {
        None
    };
    Ok(ComparisonReport {
        slack,
        heat_defect: defect,
        ordering,
        positivity,
        max_excess,
    })
}

/// `k_n` and `q(t) = k_n ∫_0^t L(s^{-n/2}) ds` with observed-to-bound ratios.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuousDependenceBound {
    pub k_n: f64,
    pub q_curve: Vec<(f64, f64)>,
    /// Largest node with `‖u‖∞, ‖v‖∞ ≤ t^{-n/2}` on all earlier nodes.
    pub tau: Option<f64>,
    /// `(t, lhs / bound)` over nodes in `(0, tau]`.
    pub ratio_series: Vec<(f64, f64)>,
}

pub fn k_n(dim: usize) -> f64 {
    1.0 + 2f64.powf(dim as f64 / 2.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuousDependenceReport {
    pub data_distance: f64,
    pub bound: ContinuousDependenceBound,
    pub window_empty: bool,
    pub assertion: Assertion,
    pub max_ratio: f64,
}

impl ContinuousDependenceReport {
    pub fn passed(&self) -> bool {
        self.assertion.passed
    }
}

/// Checks `‖u - v‖₁ + t^{n/2} ‖u - v‖∞ ≤ 2 ‖φ - ψ‖₁ e^{q(t)} (1 + rel_tol)`
/// on the window where both solutions satisfy `‖·‖∞ ≤ t^{-n/2}`.
pub fn verify_continuous_dependence(
    u: &SolutionTrajectory,
    v: &SolutionTrajectory,
    phi: &GridField,
    psi: &GridField,
    env: &EnvelopeFunctions,
    rel_tol: f64,
) -> Result<ContinuousDependenceReport> {
    same_nodes(u, v)?;
    let dim = phi.spec().dim();
    let n = dim as f64;
    let kn = k_n(dim);
    let data_distance = phi.sub(psi)?.norm_l1();

    let mut tau = None;
    for (j, &t) in u.nodes.iter().enumerate().skip(1) {
        let cap = t.powf(-n / 2.0);
        if u.fields[j].norm_inf() <= cap && v.fields[j].norm_inf() <= cap {
            tau = Some(t);
        } else {
            break;
        }
    }

    let mut q_curve = vec![(0.0, 0.0)];
    let mut ratio_series = Vec::new();
    let mut witness = None;
    let mut max_ratio: f64 = 0.0;
    if let Some(tau) = tau {
        for (j, &t) in u.nodes.iter().enumerate().skip(1) {
            if t > tau {
                break;
            }
            // g with 2K = 1 is exactly ∫_0^t L(s^{-n/2}) ds
            let q = kn * g_function(&env.big_l, 0.5, dim, t)?;
            q_curve.push((t, q));
            let d = u.fields[j].sub(&v.fields[j])?;
            let lhs = d.norm_l1() + t.powf(n / 2.0) * d.norm_inf();
            let bound = 2.0 * data_distance * q.exp();
            let ratio = if bound > 0.0 {
                lhs / bound
            } else if lhs > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            max_ratio = max_ratio.max(ratio);
            ratio_series.push((t, ratio));
            if witness.is_none() && lhs > bound * (1.0 + rel_tol) {
                witness = Some(Witness {
                    t,
                    index: 0,
                    x: Vec::new(),
                    lhs,
                    rhs: bound,
                });
            }
        }
    }
    let window_empty = tau.is_none();
    let detail = if window_empty {
        "empty validity window: no node with sup norm below t^(-n/2)".to_string()
    } else {
        format!("max ratio {max_ratio:.6} over {} nodes", ratio_series.len())
    };
    Ok(ContinuousDependenceReport {
        data_distance,
        bound: ContinuousDependenceBound {
            k_n: kn,
            q_curve,
            tau,
            ratio_series,
        },
        window_empty,
        assertion: Assertion::new("blended distance <= 2|phi-psi| e^q", witness, detail),
        max_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlobalEnvelopeConfig {
    pub amplification: f64,
    pub smallness: f64,
    pub horizon: f64,
}

impl GlobalEnvelopeConfig {
    pub fn new(amplification: f64, smallness: f64, horizon: f64) -> Result<Self> {
        if !(amplification > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "amplification {amplification} must exceed 1"
            )));
        }
        if !(smallness > 0.0) {
            return Err(Error::InvalidArgument(format!("smallness {smallness} must be positive")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
        }
        Ok(Self {
            amplification,
            smallness,
            horizon,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GlobalEnvelopeReport {
    pub config: GlobalEnvelopeConfig,
    pub status: SolveStatus,
    pub t_max_reached: f64,
    pub envelope: Assertion,
    pub slack: f64,
    /// Least-squares slope of `ln ‖u‖∞` against `ln t` over the final decade.
    pub decay_exponent: Option<f64>,
    pub fit_window: Option<(f64, f64)>,
    /// Largest `t^{n/2} ‖u(t)‖∞ / (A ‖φ‖₁)` seen.
    pub max_decay_ratio: f64,
    #[serde(skip)]
    pub trajectory: SolutionTrajectory,
}

impl GlobalEnvelopeReport {
    pub fn passed(&self) -> bool {
        self.envelope.passed && self.status == SolveStatus::HorizonReached
    }
}

/// Least-squares slope of `ln y` against `ln t` over points with `t` in
/// `[lo, hi]` and `y > 0`.
pub fn fit_power_law(points: &[(f64, f64)], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, y)| *t >= lo && *t <= hi && *t > 0.0 && *y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs to `config.horizon` and checks `A S(t)φ⁻ ≤ u ≤ A S(t)φ⁺` at every
/// node, then fits the decay of `‖u‖∞` over the last decade of the run that
/// lies inside the torus validity window.
pub fn verify_global_envelope(
    prop: &HeatPropagator,
    nl: &Nonlinearity,
    env: &EnvelopeFunctions,
    phi: &GridField,
    config: &GlobalEnvelopeConfig,
    opts: &ContinuationOptions,
) -> Result<GlobalEnvelopeReport> {
    let dim = prop.spec().dim();
    let cone = nl.domain() == Domain::NonNegative || phi.is_nonnegative();
    let (i2, i3) = if cone {
        (ConditionKind::I2Plus, ConditionKind::I3Plus)
    } else {
        (ConditionKind::I2, ConditionKind::I3)
    };
    for kind in [i2, i3] {
        let v = check_condition(kind, env, dim)?;
        if v.verdict != Verdict::Convergent {
            return Err(Error::InvalidArgument(format!(
                "global envelope needs {kind} convergent, found {:?}",
                v.verdict
            )));
        }
    }
    let mass = phi.norm_l1();
    if mass > config.smallness * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "data mass {mass:e} exceeds the smallness bound {:e}",
            config.smallness
        )));
    }
    let mut opts = *opts;
    opts.monotone.amplification = config.amplification;
    let traj = continue_maximally(prop, nl, env, phi, config.horizon, &opts)?;

    let a = config.amplification;
    let nodes = &traj.nodes;
    let lower: Vec<GridField> = prop
        .apply_many(&phi.negative_part(), nodes)?
        .into_iter()
        .map(|u| u.scaled(a))
        .collect();
    let upper: Vec<GridField> = prop
        .apply_many(&phi.positive_part(), nodes)?
        .into_iter()
        .map(|u| u.scaled(a))
        .collect();
    let defect = a * prop
        .apply_many(&phi.map(f64::abs), nodes)?
        .iter()
        .map(|u| (-u.min()).max(0.0))
        .fold(0.0f64, f64::max);
    let scale = max_sup(&lower).max(max_sup(&upper)).max(f64::MIN_POSITIVE);
    let slack = 1e-8 * scale + defect;
    let witness = match ordering_witness(nodes, &lower, &traj.fields, slack)? {
        Some(w) => Some(w),
        None => ordering_witness(nodes, &traj.fields, &upper, slack)?,
    };
    let envelope = Assertion::new(
        "A S(t)phi- <= u <= A S(t)phi+",
        witness,
        format!("{} nodes to t = {:e}", nodes.len(), traj.t_max_reached),
    );

    let n = dim as f64;
    let series: Vec<(f64, f64)> = traj.norms.iter().map(|r| (r.t, r.linf)).collect();
    let t_end = traj.t_max_reached.min(validity_window(prop.spec()));
    let fit_window = (t_end > 0.0).then(|| (t_end / 10.0, t_end));
    let decay_exponent = fit_window.and_then(|(lo, hi)| fit_power_law(&series, lo, hi));
    let max_decay_ratio = if mass > 0.0 {
        traj.norms
            .iter()
            .map(|r| r.t.powf(n / 2.0) * r.linf / (a * mass))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(GlobalEnvelopeReport {
        config: *config,
        status: traj.status,
        t_max_reached: traj.t_max_reached,
        envelope,
        slack,
        decay_exponent,
        fit_window,
        max_decay_ratio,
        trajectory: traj,
    })
}

/// Bisects in `ln δ` for the largest mass at which `profile`, rescaled to
/// that mass, passes [`verify_global_envelope`]. `None` if even `lo` fails;
/// `hi` itself if it passes.
#[allow(clippy::too_many_arguments)]
pub fn largest_passing_smallness(
    prop: &HeatPropagator,
    nl: &Nonlinearity,
    env: &EnvelopeFunctions,
    profile: &GridField,
    amplification: f64,
    horizon: f64,
    opts: &ContinuationOptions,
    (lo, hi): (f64, f64),
    steps: usize,
) -> Result<Option<f64>> {
    let mass = profile.norm_l1();
    if !(mass > 0.0 && 0.0 < lo && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "need a non-zero profile and 0 < lo < hi, got mass {mass:e}, [{lo:e}, {hi:e}]"
        )));
    }
    let passes = |delta: f64| -> Result<bool> {
        let phi = profile.scaled(delta / mass);
        let config = GlobalEnvelopeConfig::new(amplification, delta, horizon)?;
        Ok(verify_global_envelope(prop, nl, env, &phi, &config, opts)?.passed())
    };
    if passes(hi)? {
        return Ok(Some(hi));
    }
    if !passes(lo)? {
        return Ok(None);
    }
    let (mut good, mut bad) = (lo.ln(), hi.ln());
    for _ in 0..steps {
        let mid = 0.5 * (good + bad);
        if passes(mid.exp())? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Some(good.exp()))
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub sup_gap: f64,
    pub threshold: f64,
    /// False when `I2` is not convergent: the gap is recorded only.
    pub asserted: bool,
    pub assertion: Assertion,
}

impl UniquenessReport {
    pub fn passed(&self) -> bool {
        self.assertion.passed
    }
}

/// Under `I2` the monotone limits coincide: asserts
/// `sup_gap ≤ tol (1 + ‖φ‖₁)`. Otherwise the gap is recorded.
pub fn verify_uniqueness_gap(
    state: &IterationState,
    i2: Verdict,
    tol: f64,
    phi_mass: f64,
) -> UniquenessReport {
    let threshold = tol * (1.0 + phi_mass);
    let asserted = i2 == Verdict::Convergent;
    let failed = asserted && state.sup_gap > threshold;
    let witness = failed.then(|| Witness {
        t: f64::NAN,
        index: 0,
        x: Vec::new(),
        lhs: state.sup_gap,
        rhs: threshold,
    });
    UniquenessReport {
        sup_gap: state.sup_gap,
        threshold,
        asserted,
        assertion: Assertion::new(
            "lower and upper limits coincide",
            witness,
            format!("gap {:e} after {} iterations", state.sup_gap, state.iteration_count),
        ),
    }
}

/// `p_F` for reports.
pub fn critical_exponent(dim: usize) -> f64 {
    fujita_exponent(dim)
}
