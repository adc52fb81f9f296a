//! Fit the Dirichlet-process beta mixture to simulated p-values and report
//! the posterior of π and the pFDR curve.
//!
//! Usage: `cargo run --release --example dp_posterior [m] [seed]`

use std::time::Instant;

use pfdr::dp_mcmc::{run_chain, ChainSettings, DpConfig};
use pfdr::estimators::{summarize, DEFAULT_CREDIBLE_LEVEL};
use pfdr::mixture_core::{pfdr_model, BetaParams, DiscreteMixingMeasure, PValueMixture};
use pfdr::pvalue_models::{sample_pvalues, Alternative, ScenarioSpec};

fn main() -> pfdr::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let alt = DiscreteMixingMeasure::single(BetaParams::new(0.5, 3.0)?);
    let truth = PValueMixture::new(0.8, alt.clone())?;
    let spec = ScenarioSpec {
        pi0: 0.8,
        alt: Alternative::Mixture(alt),
        m,
        seed,
    };
    let data = sample_pvalues(&spec)?;

    let settings = ChainSettings {
        seed: seed ^ 0x5eed,
        ..ChainSettings::default()
    };
    let start = Instant::now();
    let run = run_chain(&data.pvalues, &DpConfig::default(), &settings)?;
    println!(
        "m = {m}: {} draws in {:.2?}, acceptance {:.3}, final step {:.3}",
        run.draws.len(),
        start.elapsed(),
        run.acceptance_rate,
        run.mh_step
    );

    let gammas = [0.01, 0.025, 0.05, 0.1, 0.2];
    let summary = summarize(&run.draws, &gammas, DEFAULT_CREDIBLE_LEVEL)?;
    println!(
        "pi: mean {:.4}, 90% interval ({:.4}, {:.4}), ess {:.0}  (truth 0.8)",
        summary.pi_mean, summary.pi_ci.0, summary.pi_ci.1, summary.ess_pi
    );
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "gamma", "true", "mean", "lo", "hi");
    for p in &summary.pfdr_curve {
        println!(
            "{:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            p.gamma,
            pfdr_model(&truth, p.gamma)?,
            p.mean,
            p.lo,
            p.hi
        );
    }
    let mean_clusters =
        run.draws.iter().map(|d| d.n_clusters as f64).sum::<f64>() / run.draws.len() as f64;
    println!("mean number of occupied clusters {mean_clusters:.2}");
    Ok(())
}
