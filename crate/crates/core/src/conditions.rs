//! Numeric verdicts on the integral conditions and the well-posedness
//! classifier built on them.
//!
//! All three conditions integrate `s^{-p_F} e(s)` for an envelope `e`:
//! `I1` uses `ℓ` on `[1, inf)`, `I2` uses `L` on `[1, inf)`, `I3` uses `ℓ` on
//! `(0, 1]`. The `_plus` variants use the positive-cone envelopes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{
    check_hypothesis_m, check_structure, compute_envelopes_with, Domain, Envelope,
    EnvelopeFunctions, EnvelopeOptions, Nonlinearity, ProbeVerdict, StructureFlags,
};

/// Points per dyadic band for composite Simpson on `ln s`.
pub const BAND_POINTS: usize = 129;
/// Bands are taken up to `2^40` and down to `2^-40`.
pub const MAX_BANDS: usize = 40;

pub fn fujita_exponent(dim: usize) -> f64 {
    1.0 + 2.0 / dim as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionKind {
    I1,
    I2,
    I3,
    #[serde(rename = "I1_plus")]
    I1Plus,
    #[serde(rename = "I2_plus")]
    I2Plus,
    #[serde(rename = "I3_plus")]
    I3Plus,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 6] = [
        ConditionKind::I1,
        ConditionKind::I2,
        ConditionKind::I3,
        ConditionKind::I1Plus,
        ConditionKind::I2Plus,
        ConditionKind::I3Plus,
    ];

    pub fn envelope<'a>(&self, env: &'a EnvelopeFunctions) -> &'a Envelope {
        match self {
            ConditionKind::I1 | ConditionKind::I3 => &env.ell,
            ConditionKind::I2 => &env.big_l,
            ConditionKind::I1Plus | ConditionKind::I3Plus => &env.ell_plus,
            ConditionKind::I2Plus => &env.big_l_plus,
        }
    }

    /// True for the conditions integrating over `(0, 1]`.
    pub fn is_lower(&self) -> bool {
        matches!(self, ConditionKind::I3 | ConditionKind::I3Plus)
    }

    pub fn label(&self) -> &'static str {
        match self {
            ConditionKind::I1 => "I1",
            ConditionKind::I2 => "I2",
            ConditionKind::I3 => "I3",
            ConditionKind::I1Plus => "I1_plus",
            ConditionKind::I2Plus => "I2_plus",
            ConditionKind::I3Plus => "I3_plus",
        }
    }
}

impl std::fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

/// Which rule produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// Every band integral vanished.
    Vanishing,
    /// Last three increments each shrank by at least 0.75 and the geometric
    /// tail is below `1e-6` of the total.
    StrongGeometric,
    /// Increments shrink at a stable ratio bounded away from 1.
    Geometric,
    /// Increments decay like `k^{-b}` in the band index; `b` is reported.
    Algebraic,
    /// Increments did not decrease over the last three doublings.
    NonDecreasing,
    /// None of the rules applied.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub kind: ConditionKind,
    pub verdict: Verdict,
    pub evidence: Evidence,
    /// `(cutoff, integral from 1 to cutoff)` after each band.
    pub partial_values: Vec<(f64, f64)>,
    pub increments: Vec<f64>,
    pub total: f64,
    /// Estimated remainder beyond the last cutoff, when convergent.
    pub tail_estimate: Option<f64>,
    /// Slope of `ln(integrand)` against `ln s` at the last cutoff.
    pub tail_exponent_estimate: Option<f64>,
    /// Fitted algebraic decay exponent of the increments, when used.
    pub band_decay_exponent: Option<f64>,
}

impl ConditionVerdict {
    pub fn is_convergent(&self) -> bool {
        self.verdict == Verdict::Convergent
    }
}

fn integrand(env: &Envelope, pf: f64, s: f64) -> f64 {
    s.powf(-pf) * env.eval(s)
}

/// `∫_{s0}^{s1} s^{-p_F} e(s) ds` by composite Simpson in `x = ln s`.
pub fn band_integral(env: &Envelope, pf: f64, s0: f64, s1: f64) -> Result<f64> {
    let (x0, x1) = (s0.ln(), s1.ln());
    let intervals = BAND_POINTS - 1;
    let h = (x1 - x0) / intervals as f64;
    let mut sum = 0.0;
    for i in 0..=intervals {
        let x = x0 + h * i as f64;
        let s = x.exp();
        let value = integrand(env, pf, s) * s;
        if !value.is_finite() {
            return Err(Error::EnvelopeOverflow { at: s });
        }
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * value;
    }
    Ok(sum * h / 3.0)
}

/// The substituted form `(n/2) ∫_{S^{-2/n}}^1 e(τ^{-n/2}) dτ`, which equals
/// `∫_1^S s^{-p_F} e(s) ds`. Integrated directly in `τ` with `panels`
/// geometric panels of Gauss-Legendre, independently of [`band_integral`].
pub fn substituted_integral(env: &Envelope, dim: usize, cutoff: f64, panels: usize) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let half_n = dim as f64 / 2.0;
    let lo = cutoff.powf(-1.0 / half_n);
    let ratio = (1.0 / lo).powf(1.0 / panels as f64);
    let mut total = 0.0;
    let mut a = lo;
    for p in 0..panels {
        let b = if p + 1 == panels { 1.0 } else { a * ratio };
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            let tau = mid + half * x;
            total += w * half * env.eval(tau.powf(-half_n));
        }
        a = b;
    }
    half_n * total
}

/// Local slope of `ln(increment)` against `ln(k + 1/2)` over the last
/// `window` bands, by least squares.
fn algebraic_decay(increments: &[f64], window: usize) -> Option<f64> {
    let k0 = increments.len().checked_sub(window)?;
    let pts: Vec<(f64, f64)> = increments[k0..]
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (((k0 + i) as f64 + 0.5).ln(), v.ln()))
        .collect();
    if pts.len() < window {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    Some(-sxy / sxx)
}

/// Decides from a sequence of non-negative band increments.
fn decide(increments: &[f64]) -> (Verdict, Evidence, Option<f64>, Option<f64>) {
    let k = increments.len();
    let total: f64 = increments.iter().sum();
    if increments.iter().all(|&v| v == 0.0) {
        return (Verdict::Convergent, Evidence::Vanishing, Some(0.0), None);
    }
    let last = &increments[k - 4..];
    let ratio = |i: usize| -> f64 {
        if last[i] == 0.0 {
            if last[i + 1] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            last[i + 1] / last[i]
        }
    };
    let ratios = [ratio(0), ratio(1), ratio(2)];
    let rho = ratios.iter().cloned().fold(0.0f64, f64::max);
    let tail = |rho: f64| last[3] * rho / (1.0 - rho);

    if ratios.iter().all(|&r| r <= 0.75) && tail(rho) < 1e-6 * total {
        return (Verdict::Convergent, Evidence::StrongGeometric, Some(tail(rho)), None);
    }
    if ratios[1..].iter().all(|&r| r >= 1.0 - 1e-9) {
        return (Verdict::Divergent, Evidence::NonDecreasing, None, None);
    }
    let drift = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    if drift <= 1e-4 && rho <= 1.0 - 1e-3 {
        return (Verdict::Convergent, Evidence::Geometric, Some(tail(rho)), None);
    }
    match algebraic_decay(increments, 8) {
        Some(b) if b > 1.1 => {
            let tail = last[3] * (k as f64 - 0.5) / (b - 1.0);
            (Verdict::Convergent, Evidence::Algebraic, Some(tail), Some(b))
        }
        Some(b) if b < 0.9 => (Verdict::Divergent, Evidence::Algebraic, None, Some(b)),
        b => (Verdict::Inconclusive, Evidence::Undecided, None, b),
    }
}

/// Integrates over dyadic bands `[2^k, 2^{k+1}]` (or `[2^{-k-1}, 2^{-k}]`
/// for `I3`) up to the cap and decides from the increment sequence.
pub fn check_condition(kind: ConditionKind, env: &EnvelopeFunctions, dim: usize) -> Result<ConditionVerdict> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!("dimension {dim} must be 1, 2 or 3")));
    }
    let pf = fujita_exponent(dim);
    let e = kind.envelope(env);
    let lower = kind.is_lower();
    let band = |k: usize| -> (f64, f64) {
        let (a, b) = (2f64.powi(k as i32), 2f64.powi(k as i32 + 1));
        if lower {
            (1.0 / b, 1.0 / a)
        } else {
            (a, b)
        }
    };
    let increments = (0..MAX_BANDS)
        .into_par_iter()
        .map(|k| {
            let (a, b) = band(k);
            band_integral(e, pf, a, b)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut running = 0.0;
    let partial_values = increments
        .iter()
        .enumerate()
        .map(|(k, v)| {
            running += v;
            let (a, b) = band(k);
            (if lower { a } else { b }, running)
        })
        .collect();
    let (verdict, evidence, tail_estimate, band_decay_exponent) = decide(&increments);

    let (a, b) = band(MAX_BANDS - 1);
    let (h_a, h_b) = (integrand(e, pf, a), integrand(e, pf, b));
    let tail_exponent_estimate =
        (h_a > 0.0 && h_b > 0.0).then(|| (h_b / h_a).ln() / (b / a).ln());

    Ok(ConditionVerdict {
        kind,
        verdict,
        evidence,
        partial_values,
        increments,
        total: running,
        tail_estimate,
        tail_exponent_estimate,
        band_decay_exponent,
    })
}

/// `∫ s^{-p_F} e(s) ds` from `anchor` to infinity (or from 0 to `anchor`
/// when `lower`), over [`MAX_BANDS`] dyadic bands plus the estimated
/// remainder when the increments are judged convergent.
pub fn dyadic_integral(env: &Envelope, pf: f64, anchor: f64, lower: bool) -> Result<(f64, Verdict)> {
    let mut increments = Vec::with_capacity(MAX_BANDS);
    for k in 0..MAX_BANDS {
        let (a, b) = (anchor * 2f64.powi(k as i32), anchor * 2f64.powi(k as i32 + 1));
        let (a, b) = if lower {
            (anchor * anchor / b, anchor * anchor / a)
        } else {
            (a, b)
        };
        increments.push(band_integral(env, pf, a, b)?);
    }
    let sum: f64 = increments.iter().sum();
    let (verdict, _, tail, _) = decide(&increments);
    Ok((sum + tail.unwrap_or(0.0), verdict))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    WellPosedL1,
    WellPosedL1PlusOnly,
    NotWellPosedL1Plus,
    Indeterminate,
}

/// The result that justified a conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Citation {
    /// `I2` gives uniqueness, continuous dependence and comparison in `L^1`.
    UniquenessUnderI2,
    /// For odd `f` convex on `(0, inf)`, `I1` and `I2` coincide; well-posed
    /// iff `∫_1^inf s^{-(2+2/n)} f(s) ds < inf`.
    OddConvexCriterion,
    /// `I2_plus` gives the same conclusions on the positive cone.
    UniquenessUnderI2Plus,
    /// Convex `f`: well-posed on the positive cone iff the growth integral
    /// converges; here it diverges.
    ConvexConeCriterion,
    /// Odd convex `f` failing `I2`: non-existence or loss of comparison for
    /// some data in `L^1`.
    OddConvexNonUniqueness,
    /// `I2` and `I3` together: small data exist globally and decay like
    /// `t^{-n/2}`.
    SmallDataGlobal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionFlags {
    pub satisfies_i1: bool,
    pub satisfies_i2: bool,
    pub satisfies_i3: bool,
    pub satisfies_i1_plus: bool,
    pub satisfies_i2_plus: bool,
    pub satisfies_i3_plus: bool,
    pub odd: bool,
    pub convex_on_positives: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WellPosednessClass {
    pub nonlinearity: String,
    pub dim: usize,
    pub domain: Domain,
    pub flags: ConditionFlags,
    pub classification: Classification,
    pub global_for_small_data: bool,
    pub citations: Vec<Citation>,
    pub diagnostics: Vec<String>,
    pub hypothesis_m: ProbeVerdict,
    pub structure: StructureFlags,
    pub verdicts: Vec<ConditionVerdict>,
}

impl WellPosednessClass {
    pub fn verdict(&self, kind: ConditionKind) -> Option<&ConditionVerdict> {
        self.verdicts.iter().find(|v| v.kind == kind)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Envelope range used by [`classify`]: wide enough that every band lies on
/// the tabulated grid, so no verdict rests on extrapolation.
pub fn classification_envelope_options() -> EnvelopeOptions {
    EnvelopeOptions {
        s_min: 1e-13,
        s_max: 2f64.powi(MAX_BANDS as i32 + 1),
        samples_per_decade: 64,
    }
}

/// Envelopes for classification, shrinking the range if `f` overflows.
pub fn classification_envelopes(nl: &Nonlinearity, diagnostics: &mut Vec<String>) -> Result<EnvelopeFunctions> {
    let mut opts = classification_envelope_options();
    loop {
        match compute_envelopes_with(nl, &opts) {
            Err(Error::EnvelopeOverflow { at }) if at.abs() / 2.0 > 2.0 * opts.s_min => {
                opts.s_max = at.abs() / 2.0;
                diagnostics.push(format!(
                    "f overflows at {at:e}; envelopes beyond {:e} are power-law extrapolations",
                    opts.s_max
                ));
            }
            other => return other,
        }
    }
}

pub fn classify(nl: &Nonlinearity, dim: usize) -> Result<WellPosednessClass> {
    let mut diagnostics = Vec::new();
    let hypothesis_m = check_hypothesis_m(nl, 256, 1e6)?;
    let structure = check_structure(nl, 1e3)?;
    let env = classification_envelopes(nl, &mut diagnostics)?;
    let verdicts = ConditionKind::ALL
        .iter()
        .map(|&k| check_condition(k, &env, dim))
        .collect::<Result<Vec<_>>>()?;
    let v = |k: ConditionKind| verdicts.iter().find(|c| c.kind == k).unwrap().verdict;
    use ConditionKind::*;
    use Verdict::*;

    let flags = ConditionFlags {
        satisfies_i1: v(I1) == Convergent,
        satisfies_i2: v(I2) == Convergent,
        satisfies_i3: v(I3) == Convergent,
        satisfies_i1_plus: v(I1Plus) == Convergent,
        satisfies_i2_plus: v(I2Plus) == Convergent,
        satisfies_i3_plus: v(I3Plus) == Convergent,
        odd: structure.is_odd(),
        convex_on_positives: structure.is_convex_on_positives(),
    };
    let real = nl.domain() == Domain::Real;
    let (odd, convex) = (flags.odd, flags.convex_on_positives);
    let mut citations = Vec::new();

    let classification = 'decide: {
        if !hypothesis_m.passed() {
            diagnostics.push("f fails the monotone locally Lipschitz probe".into());
            break 'decide Classification::Indeterminate;
        }
        for (strong, weak) in [(I2, I1), (I2Plus, I1Plus)] {
            if v(strong) == Convergent && v(weak) == Divergent {
                diagnostics.push(format!(
                    "{strong} convergent with {weak} divergent contradicts L >= ell"
                ));
                break 'decide Classification::Indeterminate;
            }
        }
        if real && odd && convex && v(I1) == Convergent && v(I2) == Divergent {
            diagnostics.push("odd convex f with I1 convergent but I2 divergent".into());
            break 'decide Classification::Indeterminate;
        }
        if real {
            match v(I2) {
                Convergent => {
                    citations.push(Citation::UniquenessUnderI2);
                    if odd && convex {
                        citations.push(Citation::OddConvexCriterion);
                    }
                    break 'decide Classification::WellPosedL1;
                }
                Inconclusive => break 'decide Classification::Indeterminate,
                Divergent => {}
            }
        }
        match v(I2Plus) {
            Convergent => {
                citations.push(Citation::UniquenessUnderI2Plus);
                break 'decide Classification::WellPosedL1PlusOnly;
            }
            Inconclusive => break 'decide Classification::Indeterminate,
            Divergent => {}
        }
        if convex {
            match v(I1Plus) {
                Divergent => {
                    citations.push(Citation::ConvexConeCriterion);
                    if real && odd {
                        citations.push(Citation::OddConvexNonUniqueness);
                    }
                    break 'decide Classification::NotWellPosedL1Plus;
                }
                Convergent => diagnostics.push(
                    "convex f with I1_plus convergent but I2_plus divergent".into(),
                ),
                Inconclusive => {}
            }
        }
        Classification::Indeterminate
    };

    let global_for_small_data = match classification {
        Classification::WellPosedL1 => flags.satisfies_i3,
        Classification::WellPosedL1PlusOnly => flags.satisfies_i3_plus,
        _ => false,
    };
    if global_for_small_data {
        citations.push(Citation::SmallDataGlobal);
    }
    for c in &verdicts {
        if c.verdict == Inconclusive {
            diagnostics.push(format!("{} inconclusive", c.kind));
        }
    }

    Ok(WellPosednessClass {
        nonlinearity: nl.name().to_string(),
        dim,
        domain: nl.domain(),
        flags,
        classification,
        global_for_small_data,
        citations,
        diagnostics,
        hypothesis_m,
        structure,
        verdicts,
    })
}
