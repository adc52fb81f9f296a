//! Simulate a two-groups p-value dataset and check it against its model.
//!
//! Usage: `cargo run --example simulate_scenario [m] [seed]`

use pfdr::estimators::ecdf_sup_distance;
use pfdr::mixture_core::{BetaParams, DiscreteMixingMeasure, PValueMixture};
use pfdr::pvalue_models::{sample_pvalues, Alternative, ScenarioSpec};

fn main() -> pfdr::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let alt = DiscreteMixingMeasure::new(
        vec![BetaParams::new(0.3, 4.0)?, BetaParams::new(0.8, 1.5)?],
        vec![0.6, 0.4],
    )?;
    let spec = ScenarioSpec {
        pi0: 0.9,
        alt: Alternative::Mixture(alt.clone()),
        m,
        seed,
    };
    let sim = sample_pvalues(&spec)?;
    let nulls = sim.is_null.iter().filter(|n| **n).count();
    println!("{m} p-values, {nulls} true nulls ({:.3} of the total)", nulls as f64 / m as f64);

    let model = PValueMixture::new(spec.pi0, alt)?;
    let d = ecdf_sup_distance(&sim.pvalues, &model)?;
    println!(
        "sup |F_m - F| = {d:.5}; the 1% Kolmogorov critical value is {:.5}",
        1.63 / (m as f64).sqrt()
    );
    let small = sim.pvalues.iter().filter(|p| **p <= 0.05).count();
    println!("{small} p-values at or below 0.05");
    Ok(())
}
