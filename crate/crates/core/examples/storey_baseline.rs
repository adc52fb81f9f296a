//! Posterior pFDR against the truth and Storey's plug-in estimator.
//!
//! Usage: `cargo run --release --example storey_baseline [m] [seed]`

use pfdr::dp_mcmc::{ChainSettings, DpConfig};
use pfdr::harness::compare_estimators;
use pfdr::mixture_core::{BetaParams, DiscreteMixingMeasure};
use pfdr::pvalue_models::{Alternative, ScenarioSpec};

fn main() -> pfdr::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let scenario = ScenarioSpec {
        pi0: 0.8,
        alt: Alternative::Mixture(DiscreteMixingMeasure::single(BetaParams::new(0.5, 3.0)?)),
        m,
        seed,
    };
    let settings = ChainSettings {
        seed: seed + 1,
        ..ChainSettings::default()
    };
    let cmp = compare_estimators(
        &scenario,
        &DpConfig::default(),
        &settings,
        &[0.5, 0.8],
        &[0.01, 0.05, 0.1],
        0.9,
    )?;
    println!("true pi0 {}; posterior mean {:.4}", cmp.true_pi0, cmp.bayes_pi_mean);
    for (lambda, pi) in &cmp.storey_pi {
        println!("Storey pi(lambda = {lambda}) = {pi:.4}");
    }
    println!(
        "{:>6} {:>6} {:>8} {:>8} {:>18} {:>8}",
        "lambda", "gamma", "true", "bayes", "90% interval", "storey"
    );
    for r in &cmp.rows {
        println!(
            "{:>6} {:>6} {:>8.4} {:>8.4} ({:>7.4}, {:>7.4}) {:>8.4}",
            r.lambda, r.gamma, r.true_pfdr, r.bayes_mean, r.bayes_lo, r.bayes_hi, r.storey
        );
    }
    Ok(())
}
