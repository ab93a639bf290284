//! Integral-condition verdicts and the resulting well-posedness class for
//! power nonlinearities on either side of 1 + 2/n.

use semilinear_heat::conditions::{classify, fujita_exponent};
use semilinear_heat::nonlinearity::builtin_from_str;
use semilinear_heat::Result;

fn main() -> Result<()> {
    for dim in 1..=3 {
        let pf = fujita_exponent(dim);
        for p in [pf - 0.5, pf, pf + 0.5] {
            let c = classify(&builtin_from_str(&format!("power({p})"), dim)?, dim)?;
            println!("n = {dim}  p = {p:.3}  {:?}", c.classification);
            for v in &c.verdicts {
                println!("    {:<8} {:?} (partial integral {:.4e})", v.kind.to_string(), v.verdict, v.total);
            }
        }
    }
    let c = classify(&builtin_from_str("minpower(2,4)", 1)?, 1)?;
    println!("minpower(2,4), n = 1: {:?}, global for small data: {}", c.classification, c.global_for_small_data);
    Ok(())
}
