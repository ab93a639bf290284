use serde::{Deserialize, Serialize};

use crate::conditions::{dyadic_integral, fujita_exponent, Verdict};
use crate::error::{Error, Result};
use crate::nonlinearity::Envelope;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonTime {
    Finite(f64),
    /// `g` stays below 1/2 for all time.
    Unbounded,
}

impl HorizonTime {
    pub fn value(&self) -> f64 {
        match self {
            HorizonTime::Finite(t) => *t,
            HorizonTime::Unbounded => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonEstimate {
    pub mass_bound: f64,
    pub t_b: HorizonTime,
    /// Samples `(t, g(t))`.
    pub g_values: Vec<(f64, f64)>,
}

/// `g(t) = ∫_0^t ℓ(2K s^{-n/2}) ds`, evaluated in the form
/// `(2/n) (2K)^{2/n} ∫_σ^inf s^{-p_F} ℓ(s) ds` with `σ = 2K t^{-n/2}`.
pub fn g_function(ell: &Envelope, mass_bound: f64, dim: usize, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let pf = fujita_exponent(dim);
    let n = dim as f64;
    let two_k = 2.0 * mass_bound;
    let prefactor = (2.0 / n) * two_k.powf(2.0 / n);
    let sigma = two_k * t.powf(-n / 2.0);
    if sigma >= 1.0 {
        let (tail, verdict) = dyadic_integral(ell, pf, sigma, false)?;
        if verdict != Verdict::Convergent {
            return Err(Error::NoHorizon(format!("tail beyond {sigma:e} is {verdict:?}")));
        }
        return Ok(prefactor * tail);
    }
    let (upper, verdict) = dyadic_integral(ell, pf, 1.0, false)?;
    if verdict != Verdict::Convergent {
        return Err(Error::NoHorizon(format!("{verdict:?}")));
    }
    // finite dyadic bands from σ up to 1, the first one partial
    let bands = (1.0 / sigma).log2().ceil() as i32;
    let mut middle = 0.0;
    for k in 0..bands {
        let hi = 2f64.powi(-k);
        let lo = (hi / 2.0).max(sigma);
        middle += crate::conditions::band_integral(ell, pf, lo, hi)?;
    }
    Ok(prefactor * (upper + middle))
}

/// Largest `T_B` with `g(T_B) <= 1/2` for data of mass at most `mass_bound`.
pub fn horizon(ell: &Envelope, mass_bound: f64, dim: usize) -> Result<HorizonEstimate> {
    if !(mass_bound > 0.0 && mass_bound.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mass bound {mass_bound} must be positive"
        )));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!("dimension {dim} must be 1, 2 or 3")));
    }
    let pf = fujita_exponent(dim);
    let (upper, v1) = dyadic_integral(ell, pf, 1.0, false)?;
    if v1 != Verdict::Convergent {
        return Err(Error::NoHorizon(format!("{v1:?}")));
    }
    let n = dim as f64;
    let prefactor = (2.0 / n) * (2.0 * mass_bound).powf(2.0 / n);
    let (lower, v3) = dyadic_integral(ell, pf, 1.0, true)?;
    let g = |t: f64| g_function(ell, mass_bound, dim, t);

    let unbounded = v3 == Verdict::Convergent && prefactor * (upper + lower) <= 0.5;
    let t_b = if unbounded {
        HorizonTime::Unbounded
    } else {
        let (mut lo, mut hi) = (1.0, 1.0);
        if g(1.0)? > 0.5 {
            while g(lo)? > 0.5 {
                lo /= 2.0;
                if lo < 1e-300 {
                    return Err(Error::NoHorizon("g does not vanish at t = 0".into()));
                }
            }
            hi = lo * 2.0;
        } else {
            let mut doublings = 0;
            while g(hi)? <= 0.5 {
                hi *= 2.0;
                doublings += 1;
                if doublings > 2000 {
                    break;
                }
            }
            lo = hi / 2.0;
        }
        if g(hi)? <= 0.5 {
            HorizonTime::Unbounded
        } else {
            while (hi - lo) > 1e-12 * hi {
                let mid = 0.5 * (lo + hi);
                if g(mid)? <= 0.5 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            HorizonTime::Finite(lo)
        }
    };

    let t_top = match t_b {
        HorizonTime::Finite(t) => t,
        HorizonTime::Unbounded => 1e3,
    };
    let g_values = (0..=32)
        .map(|i| {
            let t = t_top * 10f64.powf(-3.0 + 3.0 * i as f64 / 32.0);
            g(t).map(|v| (t, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HorizonEstimate {
        mass_bound,
        t_b,
        g_values,
    })
}

/// Time `(A - 1) / (A ℓ(A ‖u₀‖∞))` for which `A S(t) u₀⁺` stays a
/// supersolution when the data is bounded.
pub fn bounded_data_horizon(ell: &Envelope, sup_norm: f64, amplification: f64) -> f64 {
    let rate = ell.eval(amplification * sup_norm);
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        (amplification - 1.0) / (amplification * rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{builtin_from_str, compute_envelopes};

    fn ell(text: &str, dim: usize) -> Envelope {
        let f = builtin_from_str(text, dim).unwrap();
        compute_envelopes(&f, 1e6, 64).unwrap().ell
    }

    #[test]
    fn linear_source_horizon() {
        for c in [0.5, 1.0, 3.0] {
            for dim in 1..=3 {
                let h = horizon(&ell(&format!("linear({c})"), dim), 0.7, dim).unwrap();
                let t = h.t_b.value();
                assert!((t - 0.5 / c).abs() < 1e-5 * t, "c={c} n={dim}: {t}");
            }
        }
    }

    #[test]
    fn power_law_closed_form() {
        for (p, dim, k) in [(1.5, 1, 1.0), (1.5, 2, 0.3), (1.2, 3, 2.0), (2.5, 1, 0.1)] {
            let a = dim as f64 * (p - 1.0) / 2.0;
            let two_k: f64 = 2.0 * k;
            // (2K)^{p-1} t^{1-a} / (1-a) = 1/2
            let exact = (0.5 * (1.0 - a) / two_k.powf(p - 1.0)).powf(1.0 / (1.0 - a));
            let h = horizon(&ell(&format!("power({p})"), dim), k, dim).unwrap();
            let t = h.t_b.value();
            assert!((t - exact).abs() < 1e-5 * exact, "p={p} n={dim}: {t} vs {exact}");
            assert!(g_function(&ell(&format!("power({p})"), dim), k, dim, t).unwrap() <= 0.5 + 1e-9);
            assert!(h.g_values.windows(2).all(|w| w[1].1 >= w[0].1));
        }
    }

    #[test]
    fn zero_source_is_unbounded() {
        let h = horizon(&ell("zero", 2), 1.0, 2).unwrap();
        assert_eq!(h.t_b, HorizonTime::Unbounded);
    }

    #[test]
    fn small_mass_with_global_envelope_is_unbounded() {
        let e = ell("minpower(2,4)", 1);
        assert_eq!(horizon(&e, 0.02, 1).unwrap().t_b, HorizonTime::Unbounded);
        assert!(matches!(horizon(&e, 10.0, 1).unwrap().t_b, HorizonTime::Finite(_)));
    }

    #[test]
    fn critical_power_has_no_horizon() {
        assert!(matches!(
            horizon(&ell("power(3)", 1), 1.0, 1),
            Err(Error::NoHorizon(_))
        ));
    }
}
