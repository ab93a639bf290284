//! Source terms `f`, their structural checks, and the growth envelopes
//! `ℓ`, `L`, `ℓ₊`, `L₊` that drive the integral conditions.

mod builtins;
mod envelopes;
pub mod expr;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtins::{builtin, builtin_from_str, BUILTIN_NAMES};
pub use envelopes::{
    compute_envelopes, compute_envelopes_with, compute_numeric_envelopes, Envelope,
    EnvelopeFunctions, EnvelopeOptions, Provenance,
};

pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Where `f` is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `f: R -> R`.
    Real,
    /// `f: [0, inf) -> [0, inf)`; the positive-cone theory only. Negative
    /// arguments evaluate to `f(0) = 0`.
    NonNegative,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub monotone: bool,
    pub odd: bool,
    pub convex_on_positives: bool,
}

/// Exact envelopes for a nonlinearity, evaluated for `s >= 0`.
#[derive(Clone)]
pub struct ClosedFormEnvelopes {
    pub ell: Evaluator,
    pub big_l: Evaluator,
    pub ell_plus: Evaluator,
    pub big_l_plus: Evaluator,
}

impl ClosedFormEnvelopes {
    /// Envelopes for an odd `f`, where the positive-cone variants coincide
    /// with the two-sided ones.
    pub fn odd(ell: Evaluator, big_l: Evaluator) -> Self {
        Self {
            ell_plus: ell.clone(),
            big_l_plus: big_l.clone(),
            ell,
            big_l,
        }
    }
}

#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    evaluator: Evaluator,
    domain: Domain,
    claims: Claims,
    closed_form: Option<ClosedFormEnvelopes>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("claims", &self.claims)
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

/// Probe points for the finiteness check at construction.
fn construction_probes() -> impl Iterator<Item = f64> {
    (-12..=4).map(|k| 10f64.powf(k as f64 * 0.5))
}

impl Nonlinearity {
    /// Wraps an evaluator, checking `f(0) = 0` exactly and finiteness at a
    /// spread of probe points.
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let value = f(0.0);
        if value != 0.0 {
            return Err(Error::NonzeroAtOrigin { value });
        }
        for t in construction_probes() {
            let probes: &[f64] = match domain {
                Domain::Real => &[t, -t],
                Domain::NonNegative => &[t],
            };
            for &u in probes {
                if !f(u).is_finite() {
                    return Err(Error::NonFiniteEvaluation { at: u });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            evaluator: Arc::new(f),
            domain,
            claims: Claims::default(),
            closed_form: None,
        })
    }

    pub fn with_claims(mut self, claims: Claims) -> Self {
        self.claims = claims;
        self
    }

    pub fn with_closed_form(mut self, envelopes: ClosedFormEnvelopes) -> Self {
        self.closed_form = Some(envelopes);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn claims(&self) -> Claims {
        self.claims
    }

    pub fn closed_form(&self) -> Option<&ClosedFormEnvelopes> {
        self.closed_form.as_ref()
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self.domain {
            Domain::NonNegative if u <= 0.0 => 0.0,
            _ => (self.evaluator)(u),
        }
    }

    /// `c f` for `c > 0`; closed-form envelopes scale with it.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scale factor {c} must be positive"
            )));
        }
        let scale = |e: &Evaluator| -> Evaluator {
            let e = e.clone();
            Arc::new(move |s| c * e(s))
        };
        let inner = self.evaluator.clone();
        Ok(Self {
            name: format!("{c}*({})", self.name),
            evaluator: Arc::new(move |u| c * inner(u)),
            domain: self.domain,
            claims: self.claims,
            closed_form: self.closed_form.as_ref().map(|cf| ClosedFormEnvelopes {
                ell: scale(&cf.ell),
                big_l: scale(&cf.big_l),
                ell_plus: scale(&cf.ell_plus),
                big_l_plus: scale(&cf.big_l_plus),
            }),
        })
    }
}

/// Parses `text` with the expression grammar into a real-line nonlinearity.
pub fn parse(text: &str) -> Result<Nonlinearity> {
    let e = expr::parse_expr(text)?;
    Nonlinearity::new(text.trim(), Domain::Real, move |u| e.eval(u))
}

/// Outcome of a probing check; failures carry a witness pair of arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ProbeVerdict {
    Pass,
    Fail { witness: (f64, f64), reason: String },
}

impl ProbeVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, ProbeVerdict::Pass)
    }
}

fn log_probes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Probes hypothesis (M): monotone, locally Lipschitz, `f(0) = 0`.
///
/// `probe_count` log-spaced magnitudes in `[1e-6 range, range]` are mirrored
/// to both signs (positive only on the cone). The pair `(0, min(1, range))`
/// is checked first, then every adjacent pair. Local Lipschitz continuity is
/// probed by shrinking a symmetric difference quotient a hundredfold at every
/// point; growth beyond a factor of 3 flags a diverging quotient.
pub fn check_hypothesis_m(nl: &Nonlinearity, probe_count: usize, range: f64) -> Result<ProbeVerdict> {
    if probe_count < 2 {
        return Err(Error::InvalidArgument("probe_count must be >= 2".into()));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidArgument(format!("range {range} must be positive")));
    }
    let f0 = nl.eval(0.0);
    if f0 != 0.0 {
        return Ok(ProbeVerdict::Fail {
            witness: (0.0, 0.0),
            reason: format!("f(0) = {f0}"),
        });
    }
    let unit = range.min(1.0);
    if nl.eval(unit) < f0 {
        return Ok(ProbeVerdict::Fail {
            witness: (0.0, unit),
            reason: "f decreases".into(),
        });
    }

    let magnitudes = log_probes(range * 1e-6, range, probe_count);
    let mut points: Vec<f64> = Vec::with_capacity(2 * probe_count + 1);
    if nl.domain() == Domain::Real {
        points.extend(magnitudes.iter().rev().map(|m| -m));
    }
    points.push(0.0);
    points.extend(magnitudes.iter().copied());

    let values: Vec<f64> = points.iter().map(|&u| nl.eval(u)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Ok(ProbeVerdict::Fail {
            witness: (points[i], points[i]),
            reason: "non-finite value".into(),
        });
    }
    for i in 1..points.len() {
        if values[i] < values[i - 1] {
            return Ok(ProbeVerdict::Fail {
                witness: (points[i - 1], points[i]),
                reason: "f decreases".into(),
            });
        }
    }

    for &u in &points {
        let base = 1e-3 * u.abs().max(1e-3);
        let quotient = |d: f64| -> f64 {
            if nl.domain() == Domain::NonNegative && u - d < 0.0 {
                (nl.eval(u + d) - nl.eval(u)) / d
            } else {
                (nl.eval(u + d) - nl.eval(u - d)) / (2.0 * d)
            }
        };
        let coarse = quotient(base);
        let fine = quotient(base * 1e-2);
        if fine.is_finite() && fine > 1.0 && fine > 3.0 * coarse.max(1e-300) {
            let d = base * 1e-2;
            return Ok(ProbeVerdict::Fail {
                witness: (u - d, u + d),
                reason: format!("difference quotient grows from {coarse:e} to {fine:e}"),
            });
        }
    }
    Ok(ProbeVerdict::Pass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFlags {
    pub odd: ProbeVerdict,
    pub convex_on_positives: ProbeVerdict,
}

impl StructureFlags {
    pub fn is_odd(&self) -> bool {
        self.odd.passed()
    }

    pub fn is_convex_on_positives(&self) -> bool {
        self.convex_on_positives.passed()
    }
}

/// Numerically probes oddness and midpoint convexity on `(0, range]`.
pub fn check_structure(nl: &Nonlinearity, range: f64) -> Result<StructureFlags> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidArgument(format!("range {range} must be positive")));
    }
    let probes = log_probes(range * 1e-6, range, 6 * 32 + 1);

    let odd = if nl.domain() == Domain::NonNegative {
        ProbeVerdict::Fail {
            witness: (0.0, 0.0),
            reason: "defined on the positive cone only".into(),
        }
    } else {
        probes
            .iter()
            .find_map(|&u| {
                let (a, b) = (nl.eval(u), nl.eval(-u));
                let tol = 1e-12 * a.abs().max(b.abs()) + 1e-300;
                ((a + b).abs() > tol).then(|| ProbeVerdict::Fail {
                    witness: (-u, u),
                    reason: format!("f(u) + f(-u) = {:e}", a + b),
                })
            })
            .unwrap_or(ProbeVerdict::Pass)
    };

    let mut convex = ProbeVerdict::Pass;
    'outer: for gap in 1..=3 {
        for w in probes.windows(gap + 1) {
            let (a, b) = (w[0], w[gap]);
            let (fa, fb) = (nl.eval(a), nl.eval(b));
            let mid = nl.eval(0.5 * (a + b));
            let chord = 0.5 * (fa + fb);
            if mid > chord + 1e-12 * (fa.abs() + fb.abs()) {
                convex = ProbeVerdict::Fail {
                    witness: (a, b),
                    reason: format!("f(mid) = {mid:e} exceeds chord {chord:e}"),
                };
                break 'outer;
            }
        }
    }
    Ok(StructureFlags {
        odd,
        convex_on_positives: convex,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_power_law() {
        let f = parse("pow(abs(u),1.5)*sign(u)").unwrap();
        assert_eq!(f.eval(4.0), 8.0);
        assert_eq!(f.eval(-4.0), -8.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.domain(), Domain::Real);
    }

    #[test]
    fn parse_rejects_nonzero_origin_and_nonfinite() {
        assert!(matches!(
            parse("u+1"),
            Err(Error::NonzeroAtOrigin { value }) if value == 1.0
        ));
        // negative base with a fractional exponent is NaN
        assert!(matches!(parse("pow(u,1.5)"), Err(Error::NonFiniteEvaluation { .. })));
        assert!(matches!(parse("u*"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn hypothesis_m_examples() {
        let cube = parse("u*u*u").unwrap();
        assert_eq!(check_hypothesis_m(&cube, 32, 100.0).unwrap(), ProbeVerdict::Pass);

        let neg = parse("-u").unwrap();
        match check_hypothesis_m(&neg, 32, 100.0).unwrap() {
            ProbeVerdict::Fail { witness, .. } => assert_eq!(witness, (0.0, 1.0)),
            ProbeVerdict::Pass => panic!("-u is decreasing"),
        }

        let minpq = parse("odd_extend(min(pow(u,2),pow(u,4)))").unwrap();
        assert!(check_hypothesis_m(&minpq, 64, 100.0).unwrap().passed());

        let root = parse("sign(u)*pow(abs(u),0.5)").unwrap();
        assert!(!check_hypothesis_m(&root, 32, 10.0).unwrap().passed());

        assert!(check_hypothesis_m(&cube, 1, 10.0).is_err());
    }

    #[test]
    fn structure_examples() {
        let power = parse("pow(abs(u),2.5)*sign(u)").unwrap();
        let s = check_structure(&power, 100.0).unwrap();
        assert!(s.is_odd() && s.is_convex_on_positives());

        let minpq = parse("odd_extend(min(pow(u,2),pow(u,4)))").unwrap();
        let s = check_structure(&minpq, 100.0).unwrap();
        assert!(s.is_odd());
        assert!(!s.is_convex_on_positives());

        let cubic = parse("u*u*u + u").unwrap();
        let s = check_structure(&cubic, 100.0).unwrap();
        assert!(s.is_odd() && s.is_convex_on_positives());

        let shifted = parse("max(u, 0)*max(u,0)").unwrap();
        let s = check_structure(&shifted, 10.0).unwrap();
        assert!(!s.is_odd());
        assert!(s.is_convex_on_positives());
    }

    #[test]
    fn scaling_scales_values() {
        let f = parse("u*abs(u)").unwrap();
        let g = f.scaled(3.0).unwrap();
        assert_eq!(g.eval(2.0), 12.0);
        assert!(f.scaled(0.0).is_err());
    }
}
