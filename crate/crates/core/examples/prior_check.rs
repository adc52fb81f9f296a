//! Sampler self-check: with a constant likelihood the chain must reproduce
//! the prior on π and on the cluster shapes.
//!
//! Usage: `cargo run --release --example prior_check`

use pfdr::dp_mcmc::{prior_reproduction_check, ChainSettings, DpConfig};

fn main() -> pfdr::Result<()> {
    let settings = ChainSettings {
        iterations: 101_000,
        burn_in: 1000,
        thin: 10,
        seed: 3,
        ..ChainSettings::default()
    };
    let report = prior_reproduction_check(&DpConfig::default(), &settings)?;
    println!("{report:#?}");
    Ok(())
}
