//! π(F), the true pFDR and its conservative bound for a known mixture.
//!
//! π(F) = inf_λ F̄(λ)/(1-λ) recovers π whenever the alternative density
//! vanishes at 1; when it does not, π(F) overstates π and the bound
//! π(F)γ/F(γ) stays conservative.
//!
//! Usage: `cargo run --example mixture_functionals`

use pfdr::mixture_core::{
    model_cdf, pfdr_bar, pfdr_model, pi_of_f, BetaParams, DiscreteMixingMeasure, PValueMixture, DEFAULT_LAMBDA_MAX,
};

fn main() -> pfdr::Result<()> {
    let cases = [
        ("be(0.5, 3): h(1) = 0", BetaParams::new(0.5, 3.0)?),
        ("be(0.5, 1): h(1) = 0.5", BetaParams::new(0.5, 1.0)?),
    ];
    for (name, atom) in cases {
        let model = PValueMixture::new(0.8, DiscreteMixingMeasure::single(atom))?;
        let pi_f = pi_of_f(&model, DEFAULT_LAMBDA_MAX)?;
        println!("{name}: pi = 0.8, pi(F) = {pi_f:.6}");
        println!("  {:>6} {:>10} {:>10}", "gamma", "pFDR", "bound");
        for gamma in [0.01, 0.05, 0.1] {
            let truth = pfdr_model(&model, gamma)?;
            let bound = pfdr_bar(pi_f, model_cdf(gamma, &model)?, gamma)?;
            println!("  {gamma:>6} {truth:>10.5} {bound:>10.5}");
        }
    }
    Ok(())
}
