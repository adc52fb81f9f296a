//! Posterior concentration as the number of hypotheses grows.
//!
//! Usage: `cargo run --release --example consistency_sweep [replicates]`
//! (the full default of 10 replicates over m = 200, 1000, 5000 takes a few
//! minutes on one core)

use pfdr::dp_mcmc::{ChainSettings, DpConfig};
use pfdr::harness::{aggregate_sweep, run_sweep, trend_report, SweepSpec};
use pfdr::mixture_core::{BetaParams, DiscreteMixingMeasure};
use pfdr::pvalue_models::{Alternative, ScenarioSpec};

fn main() -> pfdr::Result<()> {
    let replicates: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let spec = SweepSpec {
        m_list: vec![200, 1000, 5000],
        replicates,
        scenario: ScenarioSpec {
            pi0: 0.8,
            alt: Alternative::Mixture(DiscreteMixingMeasure::single(BetaParams::new(0.5, 3.0)?)),
            m: 0,
            seed: 1,
        },
        epsilon: 0.05,
        gamma_grid: vec![0.01, 0.025, 0.05, 0.1, 0.2],
    };
    let rows = run_sweep(&spec, &DpConfig::default(), &ChainSettings::default(), 0)?;
    let aggregates = aggregate_sweep(&rows, spec.scenario.pi0);
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>12} {:>10}",
        "m", "ball_mass", "|pi err|", "sup_F_err", "max_pfdr_err", "p90 excess"
    );
    for a in &aggregates {
        println!(
            "{:>6} {:>10.4} {:>10.4} {:>10.4} {:>12.4} {:>10.4}",
            a.m, a.median_ball_mass, a.median_abs_pi_err, a.median_sup_f_err, a.median_max_pfdr_err, a.p90_pi_excess
        );
    }
    let trend = trend_report(&aggregates);
    println!("{trend:?}");
    Ok(())
}
