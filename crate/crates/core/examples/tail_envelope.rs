//! Upper-tail envelope H̄(1-x) <= C x^{1+ε} near x = 0, for a fixed mixture
//! and for random draws from the Dirichlet-process prior.
//!
//! Usage: `cargo run --example tail_envelope [draws]`

use pfdr::dp_mcmc::{sample_prior_measure, DpConfig};
use pfdr::mixture_core::{tail_envelope_check, BetaParams, DiscreteMixingMeasure, TailEnvelope};
use pfdr::pvalue_models::rng_from_seed;

fn main() -> pfdr::Result<()> {
    let draws: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let env = TailEnvelope::new(1.0, 0.05, 0.5)?;

    let steep = DiscreteMixingMeasure::single(BetaParams::new(0.5, 3.0)?);
    let flat = DiscreteMixingMeasure::single(BetaParams::new(1.0, 1.0)?);
    println!("be(0.5, 3): {:?}", tail_envelope_check(&steep, &env)?);
    println!("uniform:    {:?}", tail_envelope_check(&flat, &env)?);

    let config = DpConfig::default();
    let mut rng = rng_from_seed(6);
    let mut violations = 0;
    for _ in 0..draws {
        let g = sample_prior_measure(&config, 1000, &mut rng)?;
        violations += !tail_envelope_check(&g, &env)?.ok as usize;
    }
    println!("{violations} of {draws} prior draws violate the envelope (b >= 1 + {})", config.eps_b);
    Ok(())
}
