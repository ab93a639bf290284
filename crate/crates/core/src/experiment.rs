//! Runs a validated [`ExperimentConfig`] and writes its artifacts:
//! `manifest.json`, `report.json`, `norms.csv`, `norms.dat` and
//! `field_NNNNN.bin` snapshots. Output depends only on config and seed.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::conditions::{check_condition, classification_envelopes, classify, ConditionKind, Verdict};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::harness::{
    largest_passing_smallness, verify_comparison, verify_continuous_dependence, verify_global_envelope, verify_uniqueness_gap,
    Assertion, GlobalEnvelopeConfig,
};
use crate::nonlinearity::{Domain, EnvelopeFunctions, Nonlinearity};
use crate::semigroup::HeatPropagator;
use crate::solver::{
    continue_maximally, horizon, monotone_solve, reference_integrate, ContinuationOptions,
    MonotoneOptions, ReferenceOptions, SolutionTrajectory, TimeGrid,
};

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub kind: ExperimentKind,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: String,
    pub seed: u64,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn of(config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            experiment: config.id(),
            seed: config.seed,
            config: config.clone(),
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Gnuplot-readable copy of the norm series.
pub fn write_norms_dat(traj: &SolutionTrajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut body = format!("# status {}\n# t l1 linf t_half_n_linf\n", traj.status.label());
    for r in &traj.norms {
        body.push_str(&format!("{:e} {:e} {:e} {:e}\n", r.t, r.l1, r.linf, r.t_half_n_linf));
    }
    out.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_trajectory(traj: &SolutionTrajectory, dir: &Path, snapshots: usize) -> Result<()> {
    let stride = if snapshots == 0 {
        traj.fields.len()
    } else {
        traj.fields.len().div_ceil(snapshots)
    };
    traj.write_checkpoint(dir, stride)?;
    write_norms_dat(traj, &dir.join("norms.dat"))
}

struct Setup {
    prop: HeatPropagator,
    nl: Nonlinearity,
    env: EnvelopeFunctions,
    diagnostics: Vec<String>,
}

fn setup(config: &ExperimentConfig) -> Result<Setup> {
    let spec = config.grid_spec()?;
    let nl = config.nonlinearity()?;
    let mut diagnostics = Vec::new();
    let env = classification_envelopes(&nl, &mut diagnostics)?;
    Ok(Setup {
        prop: HeatPropagator::new(spec),
        nl,
        env,
        diagnostics,
    })
}

fn on_cone(nl: &Nonlinearity, data: &[&GridField]) -> bool {
    nl.domain() == Domain::NonNegative || data.iter().all(|u| u.is_nonnegative())
}

/// Final time: `numerics.t_end`, else half the existence horizon for data
/// of mass at most `mass`.
fn final_time(config: &ExperimentConfig, s: &Setup, mass: f64, cone: bool) -> Result<f64> {
    if let Some(t) = config.numerics.t_end {
        return Ok(t);
    }
    if mass == 0.0 {
        return Ok(1.0);
    }
    let ell = if cone { &s.env.ell_plus } else { &s.env.ell };
    let t_b = horizon(ell, mass, config.grid.dim)?.t_b.value();
    Ok(if t_b.is_finite() { t_b / 2.0 } else { 1.0 })
}

fn monotone_options(config: &ExperimentConfig) -> MonotoneOptions {
    MonotoneOptions {
        tol: config.numerics.tol,
        max_iter: config.numerics.max_iter,
        amplification: config.numerics.amplification,
        ..MonotoneOptions::default()
    }
}

fn continuation_options(config: &ExperimentConfig) -> ContinuationOptions {
    ContinuationOptions {
        monotone: monotone_options(config),
        time_nodes: config.numerics.time_nodes,
        ..ContinuationOptions::default()
    }
}

fn uniqueness_verdict(s: &Setup, cone: bool, dim: usize) -> Result<Verdict> {
    let kind = if cone { ConditionKind::I2Plus } else { ConditionKind::I2 };
    Ok(check_condition(kind, &s.env, dim)?.verdict)
}

fn reference_gap(s: &Setup, phi: &GridField, traj: &SolutionTrajectory) -> Result<Value> {
    let grid = TimeGrid::from_nodes(traj.nodes.clone())?;
    let oracle = reference_integrate(&s.prop, &s.nl, phi, &grid, &ReferenceOptions::default())?;
    let kept = oracle.fields.len().min(traj.fields.len());
    let mut worst: f64 = 0.0;
    for j in 1..kept {
        let scale = oracle.fields[j].norm_l1().max(f64::MIN_POSITIVE);
        worst = worst.max(traj.fields[j].sub(&oracle.fields[j])?.norm_l1() / scale);
    }
    Ok(json!({
        "oracle_status": oracle.status,
        "max_relative_l1": worst,
        "nodes_compared": kept,
    }))
}

fn solve_pair(
    config: &ExperimentConfig,
    s: &Setup,
    phi: &GridField,
    psi: &GridField,
) -> Result<(SolutionTrajectory, SolutionTrajectory, f64)> {
    let cone = on_cone(&s.nl, &[phi, psi]);
    let t_end = final_time(config, s, phi.norm_l1().max(psi.norm_l1()), cone)?;
    let grid = TimeGrid::graded(t_end, config.numerics.time_nodes)?;
    let opts = monotone_options(config);
    let (_, u, _) = monotone_solve(&s.prop, &s.nl, phi, &grid, &opts)?;
    let (_, v, _) = monotone_solve(&s.prop, &s.nl, psi, &grid, &opts)?;
    Ok((u, v, t_end))
}

fn run_classify(config: &ExperimentConfig) -> Result<Report> {
    let nl = config.nonlinearity()?;
    let class = classify(&nl, config.grid.dim)?;
    Ok(Report {
        experiment: config.id(),
        kind: ExperimentKind::Classify,
        passed: true,
        assertions: Vec::new(),
        details: serde_json::to_value(&class)?,
    })
}

fn run_solve(config: &ExperimentConfig, out: &Path) -> Result<Report> {
    let s = setup(config)?;
    let (phi, _) = config.data()?;
    let dim = config.grid.dim;
    let cone = on_cone(&s.nl, &[&phi]);
    let t_end = final_time(config, &s, phi.norm_l1(), cone)?;
    let mut assertions = Vec::new();
    let mut details = json!({
        "t_end": t_end,
        "initial_l1": phi.norm_l1(),
        "envelope_diagnostics": s.diagnostics,
    });
    let traj = if config.numerics.continuation {
        continue_maximally(&s.prop, &s.nl, &s.env, &phi, t_end, &continuation_options(config))?
    } else {
        let grid = TimeGrid::graded(t_end, config.numerics.time_nodes)?;
        let (_, upper, state) = monotone_solve(&s.prop, &s.nl, &phi, &grid, &monotone_options(config))?;
        let gap = verify_uniqueness_gap(&state, uniqueness_verdict(&s, cone, dim)?, config.numerics.tol, phi.norm_l1());
        details["iterations"] = json!(state.iteration_count);
        details["gap_history"] = serde_json::to_value(&state.history)?;
        details["positivity_defect"] = json!(state.positivity_defect);
        details["uniqueness"] = serde_json::to_value(&gap)?;
        if gap.asserted {
            assertions.push(gap.assertion);
        }
        upper
    };
    details["status"] = serde_json::to_value(traj.status)?;
    details["t_max_reached"] = json!(traj.t_max_reached);
    details["final_norms"] = serde_json::to_value(traj.norms.last())?;
    if config.numerics.reference {
        details["reference"] = reference_gap(&s, &phi, &traj)?;
    }
    write_trajectory(&traj, out, config.numerics.snapshots)?;
    Ok(Report {
        experiment: config.id(),
        kind: ExperimentKind::Solve,
        passed: assertions.iter().all(|a| a.passed),
        assertions,
        details,
    })
}

fn run_compare(config: &ExperimentConfig, out: &Path) -> Result<Report> {
    let s = setup(config)?;
    let (phi, psi) = config.data()?;
    let psi = psi.expect("compare builds psi");
    let (u, v, t_end) = solve_pair(config, &s, &phi, &psi)?;
    let slack = config.compare.as_ref().expect("validated").slack;
    let report = verify_comparison(&s.prop, &u, &v, &phi, &psi, slack)?;
    write_trajectory(&u, &out.join("phi"), config.numerics.snapshots)?;
    write_trajectory(&v, &out.join("psi"), config.numerics.snapshots)?;
    let mut assertions = vec![report.ordering.clone()];
    assertions.extend(report.positivity.clone());
    Ok(Report {
        experiment: config.id(),
        kind: ExperimentKind::Compare,
        passed: report.passed(),
        assertions,
        details: json!({ "t_end": t_end, "comparison": report }),
    })
}

fn run_cdep(config: &ExperimentConfig, out: &Path) -> Result<Report> {
    let s = setup(config)?;
    let (phi, psi) = config.data()?;
    let psi = psi.expect("cdep builds psi");
    let (u, v, t_end) = solve_pair(config, &s, &phi, &psi)?;
    let tol = config.cdep.as_ref().expect("validated").tol;
    let report = verify_continuous_dependence(&u, &v, &phi, &psi, &s.env, tol)?;
    write_trajectory(&u, &out.join("phi"), config.numerics.snapshots)?;
    write_trajectory(&v, &out.join("psi"), config.numerics.snapshots)?;
    Ok(Report {
        experiment: config.id(),
        kind: ExperimentKind::Cdep,
        passed: report.passed(),
        assertions: vec![report.assertion.clone()],
        details: json!({ "t_end": t_end, "continuous_dependence": report }),
    })
}

fn run_global(config: &ExperimentConfig, out: &Path) -> Result<Report> {
    let s = setup(config)?;
    let (phi, _) = config.data()?;
    let g = config.global.expect("validated");
    let cfg = GlobalEnvelopeConfig::new(g.amplification, g.smallness, g.horizon)?;
    let report = verify_global_envelope(&s.prop, &s.nl, &s.env, &phi, &cfg, &continuation_options(config))?;
    write_trajectory(&report.trajectory, out, config.numerics.snapshots)?;
    let mut details = serde_json::to_value(&report)?;
    if let Some(bracket) = g.bisect {
        let delta = largest_passing_smallness(
            &s.prop,
            &s.nl,
            &s.env,
            &phi,
            g.amplification,
            g.horizon,
            &continuation_options(config),
            (bracket[0], bracket[1]),
            g.bisect_steps,
        )?;
        details["largest_passing_smallness"] = json!(delta);
    }
    Ok(Report {
        experiment: config.id(),
        kind: ExperimentKind::Global,
        passed: report.passed(),
        assertions: vec![report.envelope.clone()],
        details,
    })
}

fn sweep_row(config: &ExperimentConfig, report: &Report, value: f64) -> Value {
    let d = &report.details;
    match config.experiment.kind {
        ExperimentKind::Classify => {
            let verdict = |k: &str| {
                d["verdicts"]
                    .as_array()
                    .and_then(|vs| vs.iter().find(|v| v["kind"] == k))
                    .map(|v| v["verdict"].clone())
                    .unwrap_or(Value::Null)
            };
            json!({
                "value": value,
                "classification": d["classification"],
                "global_for_small_data": d["global_for_small_data"],
                "I1": verdict("I1"),
                "I2": verdict("I2"),
                "I3": verdict("I3"),
            })
        }
        _ => json!({
            "value": value,
            "passed": report.passed,
            "status": d["status"],
            "t_max_reached": d["t_max_reached"],
        }),
    }
}

fn run_sweep(config: &ExperimentConfig, out: &Path) -> Result<Report> {
    let sweep = config.sweep.clone().expect("validated");
    let points: Vec<(usize, f64)> = sweep.values.iter().copied().enumerate().collect();
    let results = points
        .par_iter()
        .map(|&(i, value)| {
            let mut c = config.with_param(sweep.param, value);
            c.experiment.kind = sweep.kind;
            c.experiment.id = Some(format!("{}-{i:03}", config.id()));
            c.sweep = None;
            let dir = out.join(format!("point_{i:03}"));
            let report = run_into(&c, &dir)?;
            Ok(sweep_row(&c, &report, value))
        })
        .collect::<Result<Vec<Value>>>()?;

    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let columns: Vec<String> = match results.first() {
        Some(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    };
    w.write_record(&columns)?;
    for row in &results {
        w.write_record(columns.iter().map(|k| match &row[k] {
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            other => other.to_string(),
        }))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(Report {
        experiment: config.id(),
        kind: ExperimentKind::Sweep,
        passed: true,
        assertions: Vec::new(),
        details: json!({ "param": sweep.param, "kind": sweep.kind, "rows": results }),
    })
}

/// Runs one experiment into `out`, writing manifest and report.
pub fn run_into(config: &ExperimentConfig, out: &Path) -> Result<Report> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join("manifest.json"), &Manifest::of(config))?;
    log::info!("running {} into {}", config.id(), out.display());
    let report = match config.experiment.kind {
        ExperimentKind::Classify => run_classify(config)?,
        ExperimentKind::Solve => run_solve(config, out)?,
        ExperimentKind::Compare => run_compare(config, out)?,
        ExperimentKind::Cdep => run_cdep(config, out)?,
        ExperimentKind::Global => run_global(config, out)?,
        ExperimentKind::Sweep => run_sweep(config, out)?,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Runs with at most `workers` threads (0 keeps the default pool).
pub fn run(config: &ExperimentConfig, out: &Path, workers: usize) -> Result<Report> {
    if workers == 0 {
        return run_into(config, out);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_into(config, out))
}

/// Resolved plan printed by `--dry-run`: validated config plus what the
/// run would compute, without solving anything.
pub fn plan(config: &ExperimentConfig, out: &Path) -> Result<Value> {
    config.validate()?;
    let mut plan = json!({
        "experiment": config.id(),
        "kind": config.experiment.kind,
        "out": out,
        "seed": config.seed,
        "config": config,
    });
    if !config.initial_data.is_empty() {
        let (phi, psi) = config.data()?;
        plan["phi_l1"] = json!(phi.norm_l1());
        plan["phi_sup"] = json!(phi.norm_inf());
        if let Some(psi) = psi {
            plan["psi_l1"] = json!(psi.norm_l1());
            plan["distance_l1"] = json!(phi.sub(&psi)?.norm_l1());
        }
    }
    if let Some(s) = &config.sweep {
        let dirs: Vec<PathBuf> = (0..s.values.len()).map(|i| out.join(format!("point_{i:03}"))).collect();
        plan["point_dirs"] = json!(dirs);
    }
    Ok(plan)
}
