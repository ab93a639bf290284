//! Envelopes ℓ(s), L(s) and their positive-cone versions for a few source
//! terms, from closed forms and by numerical maximisation.

use semilinear_heat::nonlinearity::{builtin_from_str, compute_envelopes, compute_numeric_envelopes, EnvelopeOptions};
use semilinear_heat::Result;

fn main() -> Result<()> {
    for text in ["power(1.5)", "minpower(2,4)", "logcorrected(1.5,1.5)"] {
        let f = builtin_from_str(text, 1)?;
        let env = compute_envelopes(&f, 1e6, 64)?;
        let numeric = compute_numeric_envelopes(&f, &EnvelopeOptions::default())?;
        println!("{text}");
        for s in [1e-3, 1e-1, 1.0, 1e1, 1e3] {
            println!(
                "  s = {s:7.0e}  ell {:10.4e} (numeric {:10.4e})  L {:10.4e}  ell+ {:10.4e}  L+ {:10.4e}",
                env.ell(s),
                numeric.ell(s),
                env.big_l(s),
                env.ell_plus(s),
                env.big_l_plus(s)
            );
        }
    }
    Ok(())
}
