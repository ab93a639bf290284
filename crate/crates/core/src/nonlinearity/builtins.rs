use std::sync::Arc;

use super::{Claims, ClosedFormEnvelopes, Domain, Evaluator, Nonlinearity};
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: &[&str] = &["power", "minpower", "logcorrected", "linear", "zero"];

fn arity_error(name: &str, expected: &str, got: usize) -> Error {
    Error::InvalidArgument(format!("`{name}` takes {expected} parameter(s), got {got}"))
}

/// Looks up a builtin by name. `dim` matters only for `logcorrected`,
/// whose leading power is the critical exponent `1 + 2/dim`.
pub fn builtin(name: &str, params: &[f64], dim: usize) -> Result<Nonlinearity> {
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite parameter for `{name}`")));
    }
    match name {
        "power" => match params {
            [p] => power(*p),
            _ => Err(arity_error(name, "1", params.len())),
        },
        "minpower" => match params {
            [p, q] => minpower(*p, *q),
            _ => Err(arity_error(name, "2", params.len())),
        },
        "logcorrected" => match params {
            [g, b] => logcorrected(*g, *b, 0.1, 10.0, dim),
            [g, b, lo, hi] => logcorrected(*g, *b, *lo, *hi, dim),
            _ => Err(arity_error(name, "2 or 4", params.len())),
        },
        "linear" => match params {
            [c] => linear(*c),
            _ => Err(arity_error(name, "1", params.len())),
        },
        "zero" => match params {
            [] => zero(),
            _ => Err(arity_error(name, "0", params.len())),
        },
        _ => Err(Error::UnknownBuiltin(name.to_string())),
    }
}

/// Parses `name(a, b, ...)` or a bare `name`.
pub fn builtin_from_str(text: &str, dim: usize) -> Result<Nonlinearity> {
    let text = text.trim();
    let (name, params) = match text.find('(') {
        None => (text, Vec::new()),
        Some(open) => {
            let inner = text[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::InvalidArgument(format!("unbalanced parentheses in `{text}`")))?;
            let params = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|p| {
                        p.trim().parse::<f64>().map_err(|_| {
                            Error::InvalidArgument(format!("bad parameter `{}` in `{text}`", p.trim()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            (text[..open].trim(), params)
        }
    };
    builtin(name, &params, dim)
}

fn ev(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Evaluator {
    Arc::new(f)
}

/// `|u|^{p-1} u` for `p >= 1`.
pub fn power(p: f64) -> Result<Nonlinearity> {
    if p < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "power exponent {p} must be >= 1 for a locally Lipschitz source"
        )));
    }
    let nl = Nonlinearity::new(format!("power({p})"), Domain::Real, move |u: f64| {
        u.abs().powf(p - 1.0) * u
    })?;
    Ok(nl
        .with_claims(Claims {
            monotone: true,
            odd: true,
            convex_on_positives: true,
        })
        .with_closed_form(ClosedFormEnvelopes::odd(
            ev(move |s| s.powf(p - 1.0)),
            ev(move |s| p * s.powf(p - 1.0)),
        )))
}

/// Odd extension of `min(u^p, u^q)` with `1 <= p < q`.
pub fn minpower(p: f64, q: f64) -> Result<Nonlinearity> {
    if !(p >= 1.0 && q > p) {
        return Err(Error::InvalidArgument(format!(
            "minpower needs 1 <= p < q, got p = {p}, q = {q}"
        )));
    }
    let nl = Nonlinearity::new(format!("minpower({p},{q})"), Domain::Real, move |u: f64| {
        let a = u.abs();
        let m = if a <= 1.0 { a.powf(q) } else { a.powf(p) };
        m.copysign(u)
    })?;
    Ok(nl
        .with_claims(Claims {
            monotone: true,
            odd: true,
            convex_on_positives: false,
        })
        .with_closed_form(ClosedFormEnvelopes::odd(
            ev(move |s| if s <= 1.0 { s.powf(q - 1.0) } else { s.powf(p - 1.0) }),
            ev(move |s| {
                if s <= 1.0 {
                    q * s.powf(q - 1.0)
                } else {
                    q.max(p * s.powf(p - 1.0))
                }
            }),
        )))
}

/// Cubic Hermite segment on `[a, b]` with Fritsch-Carlson slope limiting,
/// so a monotone data pair gives a monotone interpolant.
#[derive(Debug, Clone, Copy)]
struct MonotoneCubic {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    ma: f64,
    mb: f64,
}

impl MonotoneCubic {
    fn new(a: f64, b: f64, fa: f64, fb: f64, mut ma: f64, mut mb: f64) -> Self {
        let secant = (fb - fa) / (b - a);
        if secant <= 0.0 {
            ma = 0.0;
            mb = 0.0;
        } else {
            let (alpha, beta) = (ma / secant, mb / secant);
            let r = alpha.hypot(beta);
            if r > 3.0 {
                ma *= 3.0 / r;
                mb *= 3.0 / r;
            }
        }
        Self { a, b, fa, fb, ma, mb }
    }

    fn eval(&self, u: f64) -> f64 {
        let h = self.b - self.a;
        let t = (u - self.a) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.fa
            + (t3 - 2.0 * t2 + t) * h * self.ma
            + (-2.0 * t3 + 3.0 * t2) * self.fb
            + (t3 - t2) * h * self.mb
    }
}

/// `u^P g(u)` on `[0, inf)` with `P = 1 + 2/dim`, where
/// `g = ln(1/u)^{-gamma}` below `a`, `ln(e + u)^{-beta}` above `b`, and `f`
/// itself is a monotone cubic on `[a, b]`.
pub fn logcorrected(gamma: f64, beta: f64, a: f64, b: f64, dim: usize) -> Result<Nonlinearity> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!("dimension {dim} must be 1, 2 or 3")));
    }
    if !(gamma > 0.0 && beta > 0.0) {
        return Err(Error::InvalidArgument("gamma and beta must be positive".into()));
    }
    if !(0.0 < a && a < b && a < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < a < min(b, 1), got a = {a}, b = {b}"
        )));
    }
    let pf = 1.0 + 2.0 / dim as f64;
    let e = std::f64::consts::E;
    if beta >= pf * (e + b).ln() {
        return Err(Error::InvalidArgument(format!(
            "beta = {beta} makes f decreasing beyond b = {b}; increase b"
        )));
    }
    let left = move |u: f64| u.powf(pf) * (1.0 / u).ln().powf(-gamma);
    let right = move |u: f64| u.powf(pf) * (e + u).ln().powf(-beta);
    let left_slope = {
        let x = (1.0 / a).ln();
        a.powf(pf - 1.0) * x.powf(-gamma) * (pf + gamma / x)
    };
    let right_slope = {
        let y = (e + b).ln();
        b.powf(pf - 1.0) * y.powf(-beta) * (pf - beta * b / ((e + b) * y))
    };
    let mid = MonotoneCubic::new(a, b, left(a), right(b), left_slope, right_slope);
    let nl = Nonlinearity::new(
        format!("logcorrected({gamma},{beta},{a},{b})"),
        Domain::NonNegative,
        move |u: f64| {
            if u <= 0.0 {
                0.0
            } else if u < a {
                left(u)
            } else if u <= b {
                mid.eval(u)
            } else {
                right(u)
            }
        },
    )?;
    Ok(nl.with_claims(Claims {
        monotone: true,
        odd: false,
        convex_on_positives: false,
    }))
}

/// `c u` for `c >= 0`.
pub fn linear(c: f64) -> Result<Nonlinearity> {
    if c < 0.0 {
        return Err(Error::InvalidArgument(format!("linear slope {c} must be >= 0")));
    }
    let nl = Nonlinearity::new(format!("linear({c})"), Domain::Real, move |u| c * u)?;
    Ok(nl
        .with_claims(Claims {
            monotone: true,
            odd: true,
            convex_on_positives: true,
        })
        .with_closed_form(ClosedFormEnvelopes::odd(ev(move |_| c), ev(move |_| c))))
}

pub fn zero() -> Result<Nonlinearity> {
    let nl = Nonlinearity::new("zero", Domain::Real, |_| 0.0)?;
    Ok(nl
        .with_claims(Claims {
            monotone: true,
            odd: true,
            convex_on_positives: true,
        })
        .with_closed_form(ClosedFormEnvelopes::odd(ev(|_| 0.0), ev(|_| 0.0))))
}
