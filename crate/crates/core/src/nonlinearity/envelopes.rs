use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Domain, Evaluator, Nonlinearity};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Numeric,
}

/// A non-decreasing function on `[0, inf)` with value 0 at the origin.
#[derive(Clone)]
pub enum Envelope {
    Closed(Evaluator),
    /// Samples on a log grid; evaluated by log-log interpolation and
    /// power-law extrapolation outside the grid.
    Tabulated {
        s: Vec<f64>,
        v: Vec<f64>,
        low_exponent: f64,
        high_exponent: f64,
    },
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Closed(_) => f.write_str("Envelope::Closed"),
            Envelope::Tabulated { s, .. } => write!(
                f,
                "Envelope::Tabulated({} samples on [{:e}, {:e}])",
                s.len(),
                s[0],
                s[s.len() - 1]
            ),
        }
    }
}

fn local_exponent(s0: f64, v0: f64, s1: f64, v1: f64) -> f64 {
    if v0 > 0.0 && v1 > 0.0 {
        ((v1 / v0).ln() / (s1 / s0).ln()).max(0.0)
    } else {
        0.0
    }
}

impl Envelope {
    fn tabulate(s: Vec<f64>, v: Vec<f64>, window: usize) -> Self {
        let n = s.len();
        let w = window.clamp(1, n - 1);
        let low_exponent = local_exponent(s[0], v[0], s[w], v[w]);
        let high_exponent = local_exponent(s[n - 1 - w], v[n - 1 - w], s[n - 1], v[n - 1]);
        Envelope::Tabulated {
            s,
            v,
            low_exponent,
            high_exponent,
        }
    }

    pub fn provenance(&self) -> Provenance {
        match self {
            Envelope::Closed(_) => Provenance::ClosedForm,
            Envelope::Tabulated { .. } => Provenance::Numeric,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 || s.is_nan() {
            return 0.0;
        }
        match self {
            Envelope::Closed(e) => e(s),
            Envelope::Tabulated {
                s: grid,
                v,
                low_exponent,
                high_exponent,
            } => {
                let n = grid.len();
                if s <= grid[0] {
                    return v[0] * (s / grid[0]).powf(*low_exponent);
                }
                if s >= grid[n - 1] {
                    return v[n - 1] * (s / grid[n - 1]).powf(*high_exponent);
                }
                let i = grid.partition_point(|&x| x <= s) - 1;
                let (s0, s1, v0, v1) = (grid[i], grid[i + 1], v[i], v[i + 1]);
                let value = if v0 > 0.0 && v1 > 0.0 {
                    let w = (s / s0).ln() / (s1 / s0).ln();
                    (v0.ln() + w * (v1 / v0).ln()).exp()
                } else {
                    v0 + (v1 - v0) * (s - s0) / (s1 - s0)
                };
                value.clamp(v0, v1)
            }
        }
    }

    /// Largest tabulated abscissa, if tabulated.
    pub fn table_end(&self) -> Option<f64> {
        match self {
            Envelope::Closed(_) => None,
            Envelope::Tabulated { s, .. } => s.last().copied(),
        }
    }
}

/// `ℓ`, `L` and their positive-cone variants `ℓ₊`, `L₊`.
#[derive(Debug, Clone)]
pub struct EnvelopeFunctions {
    pub ell: Envelope,
    pub big_l: Envelope,
    pub ell_plus: Envelope,
    pub big_l_plus: Envelope,
    pub provenance: Provenance,
}

impl EnvelopeFunctions {
    pub fn ell(&self, s: f64) -> f64 {
        self.ell.eval(s)
    }

    pub fn big_l(&self, s: f64) -> f64 {
        self.big_l.eval(s)
    }

    pub fn ell_plus(&self, s: f64) -> f64 {
        self.ell_plus.eval(s)
    }

    pub fn big_l_plus(&self, s: f64) -> f64 {
        self.big_l_plus.eval(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeOptions {
    pub s_min: f64,
    pub s_max: f64,
    pub samples_per_decade: usize,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self {
            s_min: 1e-6,
            s_max: 1e6,
            samples_per_decade: 64,
        }
    }
}

/// Envelopes on `[1e-6, s_max]`, closed form when the nonlinearity has one.
pub fn compute_envelopes(
    nl: &Nonlinearity,
    s_max: f64,
    samples_per_decade: usize,
) -> Result<EnvelopeFunctions> {
    compute_envelopes_with(
        nl,
        &EnvelopeOptions {
            s_max,
            samples_per_decade,
            ..EnvelopeOptions::default()
        },
    )
}

pub fn compute_envelopes_with(nl: &Nonlinearity, opts: &EnvelopeOptions) -> Result<EnvelopeFunctions> {
    match nl.closed_form() {
        Some(cf) => Ok(EnvelopeFunctions {
            ell: Envelope::Closed(cf.ell.clone()),
            big_l: Envelope::Closed(cf.big_l.clone()),
            ell_plus: Envelope::Closed(cf.ell_plus.clone()),
            big_l_plus: Envelope::Closed(cf.big_l_plus.clone()),
            provenance: Provenance::ClosedForm,
        }),
        None => compute_numeric_envelopes(nl, opts),
    }
}

fn cummax_in_place(v: &mut [f64]) {
    let mut m = 0.0f64;
    for x in v.iter_mut() {
        m = m.max(*x);
        *x = m;
    }
}

/// Always builds tabulated envelopes, ignoring any closed forms.
///
/// `ℓ` is the running maximum of `f(t)/t` over both signs; `L` the running
/// maximum of symmetric difference quotients at step `1e-8 |t|`. Where the
/// quotient jumps by more than 10% between neighbours the interval is probed
/// at ten extra points clustered toward both ends, so derivative jumps at
/// kinks are caught.
pub fn compute_numeric_envelopes(nl: &Nonlinearity, opts: &EnvelopeOptions) -> Result<EnvelopeFunctions> {
    let EnvelopeOptions {
        s_min,
        s_max,
        samples_per_decade,
    } = *opts;
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("s_max {s_max} must be positive")));
    }
    if !(s_min > 0.0 && s_min < s_max) {
        return Err(Error::InvalidArgument(format!(
            "s_min {s_min} must lie in (0, s_max)"
        )));
    }
    if samples_per_decade < 2 {
        return Err(Error::InvalidArgument("samples_per_decade must be >= 2".into()));
    }
    let decades = (s_max / s_min).log10();
    let count = ((decades * samples_per_decade as f64).ceil() as usize).max(2) + 1;
    let (a, b) = (s_min.ln(), s_max.ln());
    let grid: Vec<f64> = (0..count)
        .map(|i| {
            if i + 1 == count {
                s_max
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect();

    let two_sided = nl.domain() == Domain::Real;
    let eval = |u: f64| -> Result<f64> {
        let y = nl.eval(u);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::EnvelopeOverflow { at: u })
        }
    };
    let quotient = |t: f64| -> Result<f64> {
        let d = 1e-8 * t.abs();
        let q = (eval(t + d)? - eval(t - d)?) / (2.0 * d);
        if q.is_finite() {
            Ok(q.max(0.0))
        } else {
            Err(Error::EnvelopeOverflow { at: t })
        }
    };
    let lipschitz = |t: f64| -> Result<f64> {
        let mut q = quotient(t)?;
        if two_sided {
            q = q.max(quotient(-t)?);
        }
        Ok(q)
    };

    let mut ratio_plus = Vec::with_capacity(count);
    let mut ratio = Vec::with_capacity(count);
    let mut quot = Vec::with_capacity(count);
    let mut quot_plus = Vec::with_capacity(count);
    for &t in &grid {
        let rp = (eval(t)? / t).max(0.0);
        let rm = if two_sided { (eval(-t)? / -t).max(0.0) } else { 0.0 };
        ratio_plus.push(rp);
        ratio.push(rp.max(rm));
        quot_plus.push(quotient(t)?);
        quot.push(lipschitz(t)?);
    }

    // kink refinement: extra quotient probes fold into the upper endpoint
    for i in 1..count {
        let (q0, q1) = (quot[i - 1], quot[i]);
        let jump = (q1 - q0).abs() > 0.1 * q0.abs().max(q1.abs());
        if !jump {
            continue;
        }
        let (lo, hi) = (grid[i - 1], grid[i]);
        let width = hi - lo;
        let (mut best, mut best_plus) = (0.0f64, 0.0f64);
        for k in 1..=5 {
            let off = width * 10f64.powi(-k);
            for t in [lo + off, hi - off] {
                best = best.max(lipschitz(t)?);
                best_plus = best_plus.max(quotient(t)?);
            }
        }
        quot[i] = quot[i].max(best);
        quot_plus[i] = quot_plus[i].max(best_plus);
    }

    cummax_in_place(&mut ratio);
    cummax_in_place(&mut ratio_plus);
    cummax_in_place(&mut quot);
    cummax_in_place(&mut quot_plus);
    let big_l: Vec<f64> = quot.iter().zip(&ratio).map(|(q, r)| q.max(*r)).collect();
    let big_l_plus: Vec<f64> = quot_plus
        .iter()
        .zip(&ratio_plus)
        .map(|(q, r)| q.max(*r))
        .collect();

    let window = samples_per_decade / 4;
    let ell_plus = Envelope::tabulate(grid.clone(), ratio_plus, window);
    let big_l_plus = Envelope::tabulate(grid.clone(), big_l_plus, window);
    let (ell, big_l) = if two_sided {
        (
            Envelope::tabulate(grid.clone(), ratio, window),
            Envelope::tabulate(grid, big_l, window),
        )
    } else {
        (ell_plus.clone(), big_l_plus.clone())
    };
    Ok(EnvelopeFunctions {
        ell,
        big_l,
        ell_plus,
        big_l_plus,
        provenance: Provenance::Numeric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{builtin_from_str, parse};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn probes() -> Vec<f64> {
        (0..=120).map(|k| 10f64.powf(-3.0 + k as f64 * 0.05)).collect()
    }

    #[test]
    fn numeric_power_law_matches_dense_search() {
        for p in [1.5, 2.0, 3.0] {
            let f = parse(&format!("pow(abs(u),{p})*sign(u)")).unwrap();
            let env = compute_envelopes(&f, 1e4, 64).unwrap();
            assert_eq!(env.provenance, Provenance::Numeric);
            for s in probes() {
                // independent oracle: brute-force sup over a dense grid
                let dense = (1..=4000).map(|k| s * k as f64 / 4000.0);
                let ell_oracle = dense
                    .clone()
                    .map(|t| f.eval(t) / t)
                    .fold(0.0f64, f64::max);
                let l_oracle = dense
                    .map(|t| {
                        let h = 1e-6 * t;
                        (f.eval(t + h) - f.eval(t - h)) / (2.0 * h)
                    })
                    .fold(0.0f64, f64::max);
                assert!(rel(env.ell(s), ell_oracle) < 1e-3, "p={p} s={s}");
                assert!(rel(env.big_l(s), l_oracle) < 1e-3, "p={p} s={s}");
            }
        }
    }

    #[test]
    fn closed_form_cross_check() {
        for p in [1.5, 2.0, 3.0, 4.5] {
            let f = builtin_from_str(&format!("power({p})"), 2).unwrap();
            let closed = compute_envelopes(&f, 1e4, 64).unwrap();
            assert_eq!(closed.provenance, Provenance::ClosedForm);
            let numeric = compute_numeric_envelopes(
                &f,
                &EnvelopeOptions {
                    s_max: 1e4,
                    ..EnvelopeOptions::default()
                },
            )
            .unwrap();
            for s in probes() {
                assert!(rel(numeric.ell(s), closed.ell(s)) < 1e-3);
                assert!(rel(numeric.big_l(s), closed.big_l(s)) < 1e-3);
                assert!(rel(closed.ell(s), s.powf(p - 1.0)) < 1e-12);
                assert!(rel(closed.big_l(s), p * s.powf(p - 1.0)) < 1e-12);
            }
        }
    }

    #[test]
    fn minpower_numeric_envelopes() {
        let f = parse("odd_extend(min(pow(u,2),pow(u,4)))").unwrap();
        let env = compute_envelopes(&f, 1e4, 64).unwrap();
        for s in [1e-3, 0.01, 0.3, 0.9] {
            assert!(rel(env.ell(s), s.powi(3)) < 1e-3, "s={s}");
            assert!(rel(env.big_l(s), 4.0 * s.powi(3)) < 1e-3, "s={s}");
        }
        // derivative jumps from 4 down to 2 at u = 1; L keeps the 4
        assert!(rel(env.big_l(1.5), 4.0) < 1e-3);
        for s in [3.0, 50.0, 5e3] {
            assert!(rel(env.ell(s), s) < 1e-3, "s={s}");
            assert!(rel(env.big_l(s), 2.0 * s) < 1e-3, "s={s}");
        }
    }

    #[test]
    fn zero_nonlinearity_has_zero_envelopes() {
        let f = parse("0*u").unwrap();
        let env = compute_envelopes(&f, 1e3, 16).unwrap();
        for s in [0.0, 1e-9, 1.0, 1e6] {
            assert_eq!(env.ell(s), 0.0);
            assert_eq!(env.big_l(s), 0.0);
        }
    }

    #[test]
    fn overflow_names_the_argument() {
        let f = parse("exp(u)-1").unwrap();
        match compute_envelopes(&f, 1e3, 16) {
            Err(Error::EnvelopeOverflow { at }) => assert!(at > 700.0 && at < 800.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extrapolation_follows_the_last_exponent() {
        let f = parse("u*abs(u)").unwrap();
        let env = compute_envelopes(&f, 1e2, 32).unwrap();
        assert!(rel(env.ell(1e4), 1e4) < 1e-6);
        assert!(rel(env.ell(1e-9), 1e-9) < 1e-6);
        assert_eq!(env.ell(0.0), 0.0);
    }

    #[test]
    fn one_sided_cone_envelopes() {
        let f = parse("max(u,0)*max(u,0)*max(u,0)").unwrap();
        let env = compute_envelopes(&f, 1e2, 32).unwrap();
        // f/t is non-negative on negatives as u^3/u only for positive u
        assert!(rel(env.ell_plus(2.0), 4.0) < 1e-9);
        assert!(rel(env.ell(2.0), 4.0) < 1e-9);
        let g = parse("u + max(u,0)").unwrap();
        let env = compute_envelopes(&g, 1e2, 32).unwrap();
        assert!(rel(env.ell_plus(1.0), 2.0) < 1e-9);
        assert!(rel(env.ell(1.0), 2.0) < 1e-9);
        assert!(rel(env.big_l_plus(1.0), 2.0) < 1e-6);
    }
}
