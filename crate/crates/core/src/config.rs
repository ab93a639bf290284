//! TOML experiment configuration. See `configs/` for one file per
//! experiment kind; every key is listed in the README.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridField, GridSpec};
use crate::nonlinearity::{builtin, parse, Nonlinearity, BUILTIN_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Classify,
    Solve,
    Compare,
    Cdep,
    Global,
    Sweep,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Classify => "classify",
            ExperimentKind::Solve => "solve",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Cdep => "cdep",
            ExperimentKind::Global => "global",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_half_width() -> f64 {
    10.0
}

fn default_points() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
}

impl NonlinearityConfig {
    pub fn build(&self, dim: usize) -> Result<Nonlinearity> {
        match (&self.builtin, &self.expr) {
            (Some(name), None) => {
                if !BUILTIN_NAMES.contains(&name.as_str()) {
                    return Err(Error::config(
                        "nonlinearity.builtin",
                        format!("unknown builtin `{name}`; known: {}", BUILTIN_NAMES.join(", ")),
                    ));
                }
                builtin(name, &self.params, dim)
                    .map_err(|e| Error::config("nonlinearity.params", e.to_string()))
            }
            (None, Some(text)) => {
                if !self.params.is_empty() {
                    return Err(Error::config("nonlinearity.params", "only valid with `builtin`"));
                }
                parse(text).map_err(|e| Error::config("nonlinearity.expr", e.to_string()))
            }
            _ => Err(Error::config(
                "nonlinearity",
                "set exactly one of `builtin` or `expr`",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    #[default]
    Positive,
    Negative,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// One summand of the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Component {
    /// Normalised Gaussian of standard deviation `width`; give `mass` or
    /// `peak`.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        peak: Option<f64>,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        sign: Sign,
    },
    /// Smooth compactly supported `peak · exp(1 - 1/(1 - r²/radius²))`.
    Bump {
        peak: f64,
        radius: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        sign: Sign,
    },
    /// All of `mass` on the lattice point nearest `center`.
    Spike {
        mass: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        sign: Sign,
    },
    /// `count` Gaussians of total mass `mass` with random centres inside
    /// half the box and, if `signed`, random signs. Drawn from the run seed.
    Random {
        count: usize,
        mass: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        signed: bool,
    },
}

fn one() -> f64 {
    1.0
}

fn centre(center: &[f64], dim: usize, field: &str) -> Result<[f64; 3]> {
    if !center.is_empty() && center.len() != dim {
        return Err(Error::config(
            format!("{field}.center"),
            format!("has {} coordinates, grid has dimension {dim}", center.len()),
        ));
    }
    let mut c = [0.0; 3];
    c[..center.len()].copy_from_slice(center);
    Ok(c)
}

fn positive(value: f64, field: String) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {value}")))
    }
}

fn gaussian(spec: GridSpec, mass: f64, width: f64, c: [f64; 3]) -> Result<GridField> {
    let n = spec.dim() as f64;
    let norm = (2.0 * std::f64::consts::PI).powf(n / 2.0) * width.powf(n);
    GridField::from_fn(spec, |x| {
        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        mass * (-r2 / (2.0 * width * width)).exp() / norm
    })
}

impl Component {
    fn build(&self, spec: GridSpec, rng: &mut ChaCha8Rng, field: &str) -> Result<GridField> {
        let dim = spec.dim();
        match self {
            Component::Gaussian {
                mass,
                peak,
                width,
                center,
                sign,
            } => {
                let width = positive(*width, format!("{field}.width"))?;
                let norm = (2.0 * std::f64::consts::PI).powf(dim as f64 / 2.0) * width.powi(dim as i32);
                let c = centre(center, dim, field)?;
                match (mass, peak) {
                    // renormalised so the discrete mass is exact on coarse grids
                    (Some(m), None) => {
                        let m = positive(*m, format!("{field}.mass"))?;
                        let g = gaussian(spec, 1.0, width, c)?;
                        Ok(g.scaled(sign.factor() * m / g.norm_l1()))
                    }
                    (None, Some(p)) => {
                        gaussian(spec, sign.factor() * positive(*p, format!("{field}.peak"))? * norm, width, c)
                    }
                    _ => Err(Error::config(field, "set exactly one of `mass` or `peak`")),
                }
            }
            Component::Bump {
                peak,
                radius,
                center,
                sign,
            } => {
                let peak = positive(*peak, format!("{field}.peak"))? * sign.factor();
                let radius = positive(*radius, format!("{field}.radius"))?;
                let c = centre(center, dim, field)?;
                GridField::from_fn(spec, |x| {
                    let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                    let z = r2 / (radius * radius);
                    if z < 1.0 {
                        peak * (1.0 - 1.0 / (1.0 - z)).exp()
                    } else {
                        0.0
                    }
                })
            }
            Component::Spike { mass, center, sign } => {
                let mass = positive(*mass, format!("{field}.mass"))? * sign.factor();
                let c = centre(center, dim, field)?;
                let h = spec.spacing();
                let nearest = (0..spec.len())
                    .min_by(|&a, &b| {
                        let d = |i: usize| {
                            let p = spec.point(i);
                            (0..dim).map(|k| (p[k] - c[k]).powi(2)).sum::<f64>()
                        };
                        d(a).total_cmp(&d(b))
                    })
                    .unwrap_or(0);
                let mut values = vec![0.0; spec.len()];
                values[nearest] = mass / h.powi(dim as i32);
                GridField::new(spec, values)
            }
            Component::Random {
                count,
                mass,
                width,
                signed,
            } => {
                if *count == 0 {
                    return Err(Error::config(format!("{field}.count"), "must be at least 1"));
                }
                let mass = positive(*mass, format!("{field}.mass"))?;
                let width = positive(*width, format!("{field}.width"))?;
                let reach = spec.half_width() / 2.0;
                let weights: Vec<f64> = (0..*count).map(|_| rng.gen_range(0.2..1.0)).collect();
                let total: f64 = weights.iter().sum();
                let mut out = GridField::zeros(spec);
                for w in weights {
                    let mut c = [0.0; 3];
                    for v in c.iter_mut().take(dim) {
                        *v = rng.gen_range(-reach..reach);
                    }
                    let s = if *signed && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
                    out = out.add(&gaussian(spec, s * mass * w / total, width, c)?)?;
                }
                Ok(out)
            }
        }
    }
}

/// Sum of components; each `Random` component draws from `rng` in order.
pub fn build_data(components: &[Component], spec: GridSpec, rng: &mut ChaCha8Rng, field: &str) -> Result<GridField> {
    let mut out = GridField::zeros(spec);
    for (i, c) in components.iter().enumerate() {
        out = out.add(&c.build(spec, rng, &format!("{field}[{i}]"))?)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_time_nodes")]
    pub time_nodes: usize,
    /// Final time; defaults to half the existence horizon of the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_amplification")]
    pub amplification: f64,
    /// Glue successive horizons instead of a single monotone solve.
    #[serde(default)]
    pub continuation: bool,
    /// Also run the splitting integrator and report the difference.
    #[serde(default)]
    pub reference: bool,
    /// Number of field snapshots written per trajectory.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    100
}
fn default_time_nodes() -> usize {
    64
}
fn default_amplification() -> f64 {
    2.0
}
fn default_snapshots() -> usize {
    5
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            time_nodes: default_time_nodes(),
            t_end: None,
            amplification: default_amplification(),
            continuation: false,
            reference: false,
            snapshots: default_snapshots(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// `ψ = φ + Σ extra`; must be non-negative so that `φ ≤ ψ`.
    pub extra: Vec<Component>,
    #[serde(default = "default_compare_slack")]
    pub slack: f64,
}

fn default_compare_slack() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdepConfig {
    /// `ψ = φ + Σ perturbation`.
    pub perturbation: Vec<Component>,
    #[serde(default = "default_cdep_tol")]
    pub tol: f64,
}

fn default_cdep_tol() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalConfig {
    #[serde(default = "default_amplification")]
    pub amplification: f64,
    pub smallness: f64,
    pub horizon: f64,
    /// `[lo, hi]`: also bisect for the largest mass at which the data shape
    /// still passes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisect: Option<[f64; 2]>,
    #[serde(default = "default_bisect_steps")]
    pub bisect_steps: usize,
}

fn default_bisect_steps() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Experiment run at each point: `classify` or `solve`.
    #[serde(default = "default_sweep_kind")]
    pub kind: ExperimentKind,
    /// Index into `nonlinearity.params` that is varied.
    #[serde(default)]
    pub param: usize,
    pub values: Vec<f64>,
}

fn default_sweep_kind() -> ExperimentKind {
    ExperimentKind::Classify
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_data: Vec<Component>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdep: Option<CdepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global: Option<GlobalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" at byte {}", s.start)).unwrap_or_default();
            Error::config("<config>", format!("{}{span}", e.message()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<config>", e.to_string()))
    }

    pub fn id(&self) -> String {
        self.experiment
            .id
            .clone()
            .unwrap_or_else(|| self.experiment.kind.name().to_string())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return Err(Error::config("grid.dim", format!("must be 1, 2 or 3, got {}", g.dim)));
        }
        if !(g.half_width > 0.0 && g.half_width.is_finite()) {
            return Err(Error::config("grid.half_width", format!("must be positive, got {}", g.half_width)));
        }
        if g.points < 4 || !g.points.is_power_of_two() {
            return Err(Error::config(
                "grid.points",
                format!("must be a power of two, at least 4, got {}", g.points),
            ));
        }
        GridSpec::new(g.dim, g.half_width, g.points).map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        self.nonlinearity.build(self.grid.dim)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Initial data `φ`, plus `ψ` for pair experiments. Random components
    /// draw from one stream seeded by `seed`, `φ` first.
    pub fn data(&self) -> Result<(GridField, Option<GridField>)> {
        let spec = self.grid_spec()?;
        let mut rng = self.rng();
        let phi = build_data(&self.initial_data, spec, &mut rng, "initial_data")?;
        let psi = match self.experiment.kind {
            ExperimentKind::Compare => {
                let c = self.compare.as_ref().expect("validated");
                let extra = build_data(&c.extra, spec, &mut rng, "compare.extra")?;
                if !extra.is_nonnegative() {
                    return Err(Error::config("compare.extra", "must be non-negative so that phi <= psi"));
                }
                Some(phi.add(&extra)?)
            }
            ExperimentKind::Cdep => {
                let c = self.cdep.as_ref().expect("validated");
                Some(phi.add(&build_data(&c.perturbation, spec, &mut rng, "cdep.perturbation")?)?)
            }
            _ => None,
        };
        Ok((phi, psi))
    }

    /// Checks every knob and builds the nonlinearity and data once so that
    /// errors surface before any run.
    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        self.nonlinearity()?;
        let n = &self.numerics;
        if !(n.tol > 0.0 && n.tol < 1.0) {
            return Err(Error::config("numerics.tol", format!("must lie in (0, 1), got {}", n.tol)));
        }
        if n.max_iter == 0 || n.max_iter > 10_000 {
            return Err(Error::config("numerics.max_iter", format!("must lie in 1..=10000, got {}", n.max_iter)));
        }
        if n.time_nodes < 2 || n.time_nodes > 100_000 {
            return Err(Error::config(
                "numerics.time_nodes",
                format!("must lie in 2..=100000, got {}", n.time_nodes),
            ));
        }
        if let Some(t) = n.t_end {
            positive(t, "numerics.t_end".into())?;
        }
        if !(n.amplification > 1.0 && n.amplification.is_finite()) {
            return Err(Error::config(
                "numerics.amplification",
                format!("must exceed 1, got {}", n.amplification),
            ));
        }
        let kind = self.experiment.kind;
        let needs_data = !matches!(kind, ExperimentKind::Classify)
            && !(kind == ExperimentKind::Sweep
                && self.sweep.as_ref().is_some_and(|s| s.kind == ExperimentKind::Classify));
        if needs_data && self.initial_data.is_empty() {
            return Err(Error::config("initial_data", "at least one component is required"));
        }
        let section = |present: bool, name: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::config(name, format!("section required for `{}`", kind.name())))
            }
        };
        match kind {
            ExperimentKind::Compare => {
                let c = self.compare.as_ref();
                section(c.is_some(), "compare")?;
                positive(c.unwrap().slack, "compare.slack".into())?;
            }
            ExperimentKind::Cdep => {
                let c = self.cdep.as_ref();
                section(c.is_some(), "cdep")?;
                positive(c.unwrap().tol, "cdep.tol".into())?;
            }
            ExperimentKind::Global => {
                let g = self.global.as_ref();
                section(g.is_some(), "global")?;
                let g = g.unwrap();
                if !(g.amplification > 1.0) {
                    return Err(Error::config("global.amplification", "must exceed 1"));
                }
                positive(g.smallness, "global.smallness".into())?;
                positive(g.horizon, "global.horizon".into())?;
                if let Some([lo, hi]) = g.bisect {
                    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                        return Err(Error::config("global.bisect", format!("needs 0 < lo < hi, got [{lo}, {hi}]")));
                    }
                }
            }
            ExperimentKind::Sweep => {
                let s = self.sweep.as_ref();
                section(s.is_some(), "sweep")?;
                let s = s.unwrap();
                if !matches!(s.kind, ExperimentKind::Classify | ExperimentKind::Solve) {
                    return Err(Error::config("sweep.kind", "must be `classify` or `solve`"));
                }
                if s.values.is_empty() {
                    return Err(Error::config("sweep.values", "must not be empty"));
                }
                if s.param >= self.nonlinearity.params.len() {
                    return Err(Error::config(
                        "sweep.param",
                        format!("index {} outside nonlinearity.params", s.param),
                    ));
                }
                for &v in &s.values {
                    self.with_param(s.param, v).nonlinearity()?;
                }
            }
            _ => {}
        }
        if needs_data {
            self.data()?;
        }
        Ok(())
    }

    /// Copy with `nonlinearity.params[index] = value`, used by sweeps.
    pub fn with_param(&self, index: usize, value: f64) -> Self {
        let mut c = self.clone();
        if let Some(p) = c.nonlinearity.params.get_mut(index) {
            *p = value;
        }
        c
    }
}
