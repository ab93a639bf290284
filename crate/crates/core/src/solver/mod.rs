//! The variation-of-constants operator, existence horizons, the monotone
//! iteration, a splitting reference integrator and maximal continuation.

mod continuation;
mod horizon;
mod monotone;
mod reference;

use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::nonlinearity::Nonlinearity;
use crate::semigroup::HeatPropagator;

pub use continuation::{continue_maximally, ContinuationOptions};
pub use horizon::{bounded_data_horizon, g_function, horizon, HorizonEstimate, HorizonTime};
pub use monotone::{monotone_solve, IterationState, MonotoneOptions};
pub use reference::{dormand_prince, reference_integrate, OdeOutcome, ReferenceOptions};

/// Detection heuristics for blow-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUpThresholds {
    pub sup_norm: f64,
    /// `‖u‖₁` limit as a multiple of `1 + ‖φ‖₁`.
    pub mass_factor: f64,
}

impl Default for BlowUpThresholds {
    fn default() -> Self {
        Self {
            sup_norm: 1e8,
            mass_factor: 1e6,
        }
    }
}

impl BlowUpThresholds {
    pub fn exceeded(&self, u: &GridField, initial_mass: f64) -> bool {
        u.norm_inf() > self.sup_norm || u.norm_l1() > self.mass_factor * (1.0 + initial_mass)
    }
}

/// Time nodes `0 = t_0 < ... < t_M = t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// `t_j = t_end (j/M)^2`, which concentrates nodes near the initial time.
    pub fn graded(t_end: f64, steps: usize) -> Result<Self> {
        Self::check(t_end, steps)?;
        let m = steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|j| t_end * (j as f64 / m).powi(2)).collect();
        nodes[steps] = t_end;
        Ok(Self { nodes })
    }

    pub fn uniform(t_end: f64, steps: usize) -> Result<Self> {
        Self::check(t_end, steps)?;
        let mut nodes: Vec<f64> = (0..=steps).map(|j| t_end * j as f64 / steps as f64).collect();
        nodes[steps] = t_end;
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "a time grid needs at least two nodes starting at 0".into(),
            ));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes[nodes.len() - 1].is_finite() {
            return Err(Error::InvalidArgument("time nodes must be strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    fn check(t_end: f64, steps: usize) -> Result<()> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end {t_end} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("a time grid needs at least one step".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
}

/// `f(u)` pointwise; a non-finite value signals incipient blow-up.
pub fn apply_nonlinearity(nl: &Nonlinearity, u: &GridField) -> Result<GridField> {
    let values = u
        .values()
        .iter()
        .map(|&x| {
            let y = nl.eval(x);
            if y.is_finite() {
                Ok(y)
            } else {
                Err(Error::NonFiniteEvaluation { at: x })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    GridField::new(*u.spec(), values)
}

/// `𝓕(u; φ)(t_j) = S(t_j)φ + ∫_0^{t_j} S(t_j - s) f(u(s)) ds` at every node.
///
/// On each interval `f(u(s))` is replaced by its endpoint values and the
/// semigroup is applied exactly at both ends (trapezoidal in `s`). In
/// Fourier space the accumulated integral obeys
/// `Q_j = E(Δ_j) Q_{j-1} + (Δ_j/2) (E(Δ_j) f̂_{j-1} + f̂_j)`, so one pass
/// costs two transforms per node.
pub fn duhamel(
    prop: &HeatPropagator,
    nl: &Nonlinearity,
    phi: &GridField,
    grid: &TimeGrid,
    u: &[GridField],
) -> Result<Vec<GridField>> {
    let sources = u
        .iter()
        .map(|v| apply_nonlinearity(nl, v))
        .collect::<Result<Vec<_>>>()?;
    duhamel_with_sources(prop, phi, grid, &sources)
}

/// [`duhamel`] with the source values `f(u(t_j))` given directly.
pub fn duhamel_with_sources(
    prop: &HeatPropagator,
    phi: &GridField,
    grid: &TimeGrid,
    sources: &[GridField],
) -> Result<Vec<GridField>> {
    let nodes = grid.nodes();
    if sources.len() != nodes.len() {
        return Err(Error::InvalidArgument(format!(
            "trajectory has {} fields for {} nodes",
            sources.len(),
            nodes.len()
        )));
    }
    let k2 = prop.frequency_grid();
    let phi_hat = prop.forward(phi)?;
    let mut q = vec![Complex::new(0.0, 0.0); k2.len()];
    let mut f_prev = prop.forward(&sources[0])?;
    let mut out = Vec::with_capacity(nodes.len());
    out.push(phi.clone());
    for j in 1..nodes.len() {
        let (t, dt) = (nodes[j], nodes[j] - nodes[j - 1]);
        let f_hat = prop.forward(&sources[j])?;
        let mut spectrum = Vec::with_capacity(k2.len());
        for i in 0..k2.len() {
            let e = (-k2[i] * dt).exp();
            q[i] = e * q[i] + 0.5 * dt * (e * f_prev[i] + f_hat[i]);
            spectrum.push((-k2[i] * t).exp() * phi_hat[i] + q[i]);
        }
        out.push(prop.inverse(spectrum)?);
        f_prev = f_hat;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveStatus {
    /// Iteration reached the requested gap.
    Converged,
    /// The run reached its final time.
    HorizonReached,
    /// Blow-up heuristics fired at `t_detect`.
    BlowUpDetected { t_detect: f64 },
    /// Iteration budget exhausted with the final gap.
    NotConverged { gap: f64 },
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::HorizonReached => "horizon_reached",
            SolveStatus::BlowUpDetected { .. } => "blow_up_detected",
            SolveStatus::NotConverged { .. } => "not_converged",
        }
    }

    pub fn blow_up_time(&self) -> Option<f64> {
        match self {
            SolveStatus::BlowUpDetected { t_detect } => Some(*t_detect),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub t: f64,
    pub l1: f64,
    pub linf: f64,
    pub t_half_n_linf: f64,
}

impl NormRecord {
    pub fn of(t: f64, u: &GridField) -> Self {
        let linf = u.norm_inf();
        Self {
            t,
            l1: u.norm_l1(),
            linf,
            t_half_n_linf: t.powf(u.spec().dim() as f64 / 2.0) * linf,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionTrajectory {
    pub nodes: Vec<f64>,
    pub fields: Vec<GridField>,
    pub norms: Vec<NormRecord>,
    pub status: SolveStatus,
    pub t_max_reached: f64,
}

impl SolutionTrajectory {
    pub fn new(nodes: Vec<f64>, fields: Vec<GridField>, status: SolveStatus) -> Self {
        let norms = nodes
            .iter()
            .zip(&fields)
            .map(|(&t, u)| NormRecord::of(t, u))
            .collect();
        let t_max_reached = status
            .blow_up_time()
            .unwrap_or_else(|| nodes.last().copied().unwrap_or(0.0));
        Self {
            nodes,
            fields,
            norms,
            status,
            t_max_reached,
        }
    }

    pub fn final_field(&self) -> &GridField {
        self.fields.last().expect("trajectory has at least one node")
    }

    /// CSV norm log with columns `t, l1, linf, t_half_n_linf, status`.
    pub fn write_norms_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "l1", "linf", "t_half_n_linf", "status"])?;
        let label = self.status.label();
        for r in &self.norms {
            w.write_record([
                format!("{:e}", r.t),
                format!("{:e}", r.l1),
                format!("{:e}", r.linf),
                format!("{:e}", r.t_half_n_linf),
                label.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Writes `norms.csv` plus every `stride`-th field (and the last) as
    /// `field_NNNNN.bin` into `dir`.
    pub fn write_checkpoint(&self, dir: &Path, stride: usize) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("norms.csv");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.write_norms_csv(std::io::BufWriter::new(file))?;
        let stride = stride.max(1);
        let last = self.fields.len() - 1;
        for (j, u) in self.fields.iter().enumerate() {
            if j % stride != 0 && j != last {
                continue;
            }
            let path = dir.join(format!("field_{j:05}.bin"));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut out = std::io::BufWriter::new(file);
            u.write_binary(&mut out).map_err(|e| Error::io(&path, e))?;
            out.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::nonlinearity::builtin_from_str;

    fn gaussian(spec: GridSpec, mass: f64) -> GridField {
        GridField::from_fn(spec, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            mass * (-r2 / 2.0).exp() / (2.0 * std::f64::consts::PI).powf(x.len() as f64 / 2.0)
        })
        .unwrap()
    }

    #[test]
    fn graded_grid_shape() {
        let g = TimeGrid::graded(2.0, 16).unwrap();
        assert_eq!(g.nodes().len(), 17);
        assert_eq!(g.t_end(), 2.0);
        assert!(g.nodes()[1] <= 2.0 / 256.0 + 1e-15);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::graded(0.0, 4).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_source_gives_heat_flow() {
        let spec = GridSpec::new(1, 10.0, 128).unwrap();
        let prop = HeatPropagator::new(spec);
        let phi = gaussian(spec, 1.0);
        let grid = TimeGrid::graded(1.0, 8).unwrap();
        let junk: Vec<GridField> = (0..9).map(|j| GridField::constant(spec, j as f64)).collect();
        let zero = builtin_from_str("zero", 1).unwrap();
        let out = duhamel(&prop, &zero, &phi, &grid, &junk).unwrap();
        let heat = prop.apply_many(&phi, grid.nodes()).unwrap();
        for (a, b) in out.iter().zip(&heat) {
            assert!(a.sub(b).unwrap().norm_inf() < 1e-14);
        }
        // u = 0 with any f also gives the heat flow
        let cube = builtin_from_str("power(3)", 1).unwrap();
        let zeros = vec![GridField::zeros(spec); 9];
        let out = duhamel(&prop, &cube, &phi, &grid, &zeros).unwrap();
        for (a, b) in out.iter().zip(&heat) {
            assert!(a.sub(b).unwrap().norm_inf() < 1e-14);
        }
    }

    #[test]
    fn linear_constant_data_first_picard_iterate() {
        let spec = GridSpec::new(1, 4.0, 16).unwrap();
        let prop = HeatPropagator::new(spec);
        let (a, c) = (2.0, 0.5);
        let phi = GridField::constant(spec, a);
        let f = builtin_from_str(&format!("linear({c})"), 1).unwrap();
        let grid = TimeGrid::uniform(0.1, 10).unwrap();
        let u0 = vec![phi.clone(); 11];
        let out = duhamel(&prop, &f, &phi, &grid, &u0).unwrap();
        for (t, u) in grid.nodes().iter().zip(&out) {
            let picard = a * (1.0 + c * t);
            let exact = a * (c * t).exp();
            assert!((u.values()[3] - picard).abs() < 1e-12);
            assert!((u.values()[3] - exact).abs() <= a * (c * t).powi(2));
        }
    }

    #[test]
    fn norm_csv_has_header_and_status() {
        let spec = GridSpec::new(1, 4.0, 16).unwrap();
        let u = GridField::constant(spec, 1.0);
        let traj = SolutionTrajectory::new(vec![0.0, 1.0], vec![u.clone(), u], SolveStatus::HorizonReached);
        let mut buf = Vec::new();
        traj.write_norms_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,l1,linf,t_half_n_linf,status\n"));
        assert!(text.lines().nth(2).unwrap().ends_with("horizon_reached"));
    }
}
