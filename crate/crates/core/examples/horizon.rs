//! Existence horizon T_B: the largest t with ∫₀ᵗ ℓ(2K s^{-n/2}) ds ≤ 1/2,
//! against the closed form for a power.

use semilinear_heat::nonlinearity::{builtin_from_str, compute_envelopes};
use semilinear_heat::solver::horizon;
use semilinear_heat::Result;

fn main() -> Result<()> {
    let p: f64 = 1.5;
    let f = builtin_from_str(&format!("power({p})"), 1)?;
    let env = compute_envelopes(&f, 1e6, 64)?;
    let a = (p - 1.0) / 2.0;
    for k in [0.01f64, 0.1, 1.0, 10.0] {
        let t_b = horizon(&env.ell, k, 1)?.t_b.value();
        let exact = (0.5 * (1.0 - a) / (2.0 * k).powf(p - 1.0)).powf(1.0 / (1.0 - a));
        println!("K = {k:5}  T_B = {t_b:.6e}  closed form {exact:.6e}");
    }
    Ok(())
}
