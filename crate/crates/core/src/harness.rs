//! Consistency experiments: simulate p-values, fit the mixture, and measure
//! how the posterior concentrates as the number of hypotheses grows.

use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp_mcmc::{run_chain, ChainSettings, DpConfig, PosteriorDraw};
use crate::error::{domain, Result};
use crate::estimators::{draw_cdf, quantile_sorted, storey_pfdr, storey_pi, summarize, DEFAULT_CREDIBLE_LEVEL};
use crate::mixture_core::{model_cdf, pfdr_model, PValueMixture};
use crate::pvalue_models::{sample_pvalues, Alternative, ScenarioSpec};

/// Points in the uniform grid on [0, 1] used for the sup-distance of cdfs.
pub const SUP_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub m_list: Vec<usize>,
    pub replicates: usize,
    /// `m` and `seed` are overwritten per cell; `seed` is the master seed.
    pub scenario: ScenarioSpec,
    /// Radius of the ball {|π - π₀| < ε}.
    pub epsilon: f64,
    pub gamma_grid: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m_list.is_empty() || self.m_list.windows(2).any(|w| w[0] >= w[1]) || self.m_list[0] == 0 {
            return domain("m_list must be positive and strictly increasing");
        }
        if self.replicates < 3 {
            return domain(format!("replicates must be at least 3, got {}", self.replicates));
        }
        if !(self.epsilon > 0.0) {
            return domain(format!("epsilon must be positive, got {}", self.epsilon));
        }
        truth_of(&self.scenario)?;
        ScenarioSpec {
            m: self.m_list[0],
            ..self.scenario.clone()
        }
        .validate()
    }
}

/// The true p-value distribution; needs an explicit beta-mixture alternative.
pub fn truth_of(scenario: &ScenarioSpec) -> Result<PValueMixture> {
    match &scenario.alt {
        Alternative::Mixture(g) => PValueMixture::new(scenario.pi0, g.clone()),
        Alternative::Test { .. } => domain("consistency metrics need a beta-mixture alternative"),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of cell (m, replicate): splitmix64 folded over master, m, replicate.
pub fn cell_seed(master: u64, m: usize, replicate: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ m as u64) ^ replicate as u64)
}

/// Chain seed derived from a data seed, so data and chain streams differ.
pub fn chain_seed(data_seed: u64) -> u64 {
    splitmix64(data_seed ^ 0xc4a1_5eed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub replicate: usize,
    /// Posterior mean of π.
    pub pi_mean: f64,
    /// Posterior mass of {|π - π₀| < ε}.
    pub ball_mass: f64,
    pub abs_pi_err: f64,
    /// Grid sup-distance between posterior-mean F and F₀.
    pub sup_f_err: f64,
    /// Max over the γ grid of |posterior-mean pFDR - true pFDR|.
    pub max_pfdr_err: f64,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellMetrics {
    pub ball_mass: f64,
    pub pi_mean: f64,
    pub sup_f_err: f64,
    pub max_pfdr_err: f64,
}

/// Metrics of a set of posterior draws against the known truth.
pub fn cell_metrics(
    draws: &[PosteriorDraw],
    truth: &PValueMixture,
    epsilon: f64,
    gamma_grid: &[f64],
) -> Result<CellMetrics> {
    let pi0 = truth.pi();
    let n = draws.len() as f64;
    let ball_mass = draws.iter().filter(|d| (d.pi - pi0).abs() < epsilon).count() as f64 / n;
    let summary = summarize(draws, gamma_grid, DEFAULT_CREDIBLE_LEVEL)?;

    let mut sup_f_err: f64 = 0.0;
    for k in 0..SUP_GRID_POINTS {
        let x = k as f64 / (SUP_GRID_POINTS - 1) as f64;
        let mut mean = 0.0;
        for d in draws {
            mean += draw_cdf(d, x)?;
        }
        sup_f_err = sup_f_err.max((mean / n - model_cdf(x, truth)?).abs());
    }

    let mut max_pfdr_err: f64 = 0.0;
    for p in &summary.pfdr_curve {
        max_pfdr_err = max_pfdr_err.max((p.mean - pfdr_model(truth, p.gamma)?).abs());
    }
    Ok(CellMetrics {
        ball_mass,
        pi_mean: summary.pi_mean,
        sup_f_err,
        max_pfdr_err,
    })
}

fn run_cell(spec: &SweepSpec, config: &DpConfig, settings: &ChainSettings, m: usize, replicate: usize) -> SweepRow {
    let start = Instant::now();
    let outcome = (|| {
        let seed = cell_seed(spec.scenario.seed, m, replicate);
        let scenario = ScenarioSpec {
            m,
            seed,
            ..spec.scenario.clone()
        };
        let truth = truth_of(&scenario)?;
        let data = sample_pvalues(&scenario)?;
        let cell_settings = ChainSettings {
            seed: chain_seed(seed),
            ..settings.clone()
        };
        let run = run_chain(&data.pvalues, config, &cell_settings)?;
        cell_metrics(&run.draws, &truth, spec.epsilon, &spec.gamma_grid)
    })();
    let wall_time_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(c) => SweepRow {
            m,
            replicate,
            pi_mean: c.pi_mean,
            ball_mass: c.ball_mass,
            abs_pi_err: (c.pi_mean - spec.scenario.pi0).abs(),
            sup_f_err: c.sup_f_err,
            max_pfdr_err: c.max_pfdr_err,
            wall_time_s,
            error: None,
        },
        Err(e) => {
            warn!("cell m={m} replicate={replicate} failed: {e}");
            SweepRow {
                m,
                replicate,
                pi_mean: f64::NAN,
                ball_mass: f64::NAN,
                abs_pi_err: f64::NAN,
                sup_f_err: f64::NAN,
                max_pfdr_err: f64::NAN,
                wall_time_s,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Runs every (m, replicate) cell, in parallel on `threads` workers
/// (0 = rayon's default). Rows come back ordered by m, then replicate;
/// a failing cell is recorded and the sweep continues.
pub fn run_sweep(spec: &SweepSpec, config: &DpConfig, settings: &ChainSettings, threads: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    config.validate()?;
    settings.validate()?;
    let cells: Vec<(usize, usize)> = spec
        .m_list
        .iter()
        .flat_map(|&m| (0..spec.replicates).map(move |r| (m, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::Numeric {
            routine: "run_sweep",
            detail: e.to_string(),
        })?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, r)| run_cell(spec, config, settings, m, r))
            .collect()
    }))
}

/// Per-m medians of the sweep metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAggregate {
    pub m: usize,
    pub ok_cells: usize,
    pub median_ball_mass: f64,
    pub median_abs_pi_err: f64,
    pub median_sup_f_err: f64,
    pub median_max_pfdr_err: f64,
    /// 90th percentile of π̂ - π₀ over replicates.
    pub p90_pi_excess: f64,
}

fn median_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Aggregates successful rows by m.
pub fn aggregate_sweep(rows: &[SweepRow], pi0: f64) -> Vec<SweepAggregate> {
    let mut ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
    ms.dedup();
    ms.into_iter()
        .map(|m| {
            let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.m == m && r.error.is_none()).collect();
            let pick = |f: fn(&SweepRow) -> f64| median_of(ok.iter().map(|r| f(r)));
            let mut excess: Vec<f64> = ok.iter().map(|r| r.pi_mean - pi0).collect();
            excess.sort_by(f64::total_cmp);
            SweepAggregate {
                m,
                ok_cells: ok.len(),
                median_ball_mass: pick(|r| r.ball_mass),
                median_abs_pi_err: pick(|r| r.abs_pi_err),
                median_sup_f_err: pick(|r| r.sup_f_err),
                median_max_pfdr_err: pick(|r| r.max_pfdr_err),
                p90_pi_excess: if excess.is_empty() {
                    f64::NAN
                } else {
                    quantile_sorted(&excess, 0.9)
                },
            }
        })
        .collect()
}

/// Number of adjacent pairs that move the wrong way; `increasing` selects
/// the expected direction. Ties count as wrong.
pub fn trend_inversions(values: &[f64], increasing: bool) -> usize {
    values
        .windows(2)
        .filter(|w| if increasing { w[1] <= w[0] } else { w[1] >= w[0] })
        .count()
}

/// Direction checks over the per-m aggregates. A metric is flagged when it
/// has more than one inversion across adjacent m.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub ball_mass_inversions: usize,
    pub abs_pi_err_inversions: usize,
    pub sup_f_err_inversions: usize,
    pub max_pfdr_err_inversions: usize,
    /// Adjacent m where the 90th percentile of π̂ - π₀ rose.
    pub pi_excess_rises: usize,
    pub flagged: Vec<String>,
}

pub fn trend_report(aggregates: &[SweepAggregate]) -> TrendReport {
    let col = |f: fn(&SweepAggregate) -> f64| aggregates.iter().map(f).collect::<Vec<_>>();
    let ball = trend_inversions(&col(|a| a.median_ball_mass), true);
    let abs_pi = trend_inversions(&col(|a| a.median_abs_pi_err), false);
    let sup_f = trend_inversions(&col(|a| a.median_sup_f_err), false);
    let pfdr = trend_inversions(&col(|a| a.median_max_pfdr_err), false);
    let excess = col(|a| a.p90_pi_excess)
        .windows(2)
        .filter(|w| w[1] > w[0])
        .count();
    let flagged = [
        ("ball_mass", ball),
        ("abs_pi_err", abs_pi),
        ("sup_F_err", sup_f),
        ("max_pfdr_err", pfdr),
    ]
    .iter()
    .filter(|(_, n)| *n > 1)
    .map(|(name, _)| name.to_string())
    .collect();
    TrendReport {
        ball_mass_inversions: ball,
        abs_pi_err_inversions: abs_pi,
        sup_f_err_inversions: sup_f,
        max_pfdr_err_inversions: pfdr,
        pi_excess_rises: excess,
        flagged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub lambda: f64,
    pub gamma: f64,
    pub true_pfdr: f64,
    pub bayes_mean: f64,
    pub bayes_lo: f64,
    pub bayes_hi: f64,
    pub storey: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub true_pi0: f64,
    pub bayes_pi_mean: f64,
    pub storey_pi: Vec<(f64, f64)>,
    pub rows: Vec<ComparisonRow>,
}

/// True pFDR, the Bayesian posterior summary and Storey's baseline on one
/// simulated dataset, for every (λ, γ). Data come from `scenario.seed`, the
/// chain from `settings.seed`.
pub fn compare_estimators(
    scenario: &ScenarioSpec,
    config: &DpConfig,
    settings: &ChainSettings,
    lambdas: &[f64],
    gammas: &[f64],
    level: f64,
) -> Result<Comparison> {
    let truth = truth_of(scenario)?;
    let data = sample_pvalues(scenario)?;
    let run = run_chain(&data.pvalues, config, settings)?;
    let summary = summarize(&run.draws, gammas, level)?;
    let mut rows = Vec::with_capacity(lambdas.len() * gammas.len());
    let mut pis = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        pis.push((lambda, storey_pi(&data.pvalues, lambda)?));
        for point in &summary.pfdr_curve {
            rows.push(ComparisonRow {
                lambda,
                gamma: point.gamma,
                true_pfdr: pfdr_model(&truth, point.gamma)?,
                bayes_mean: point.mean,
                bayes_lo: point.lo,
                bayes_hi: point.hi,
                storey: storey_pfdr(&data.pvalues, lambda, point.gamma)?,
            });
        }
    }
    Ok(Comparison {
        true_pi0: scenario.pi0,
        bayes_pi_mean: summary.pi_mean,
        storey_pi: pis,
        rows,
    })
}
