//! Posterior summaries of π and the pFDR curve, plus Storey's frequentist
//! baseline.

use std::cell::RefCell;

use log::info;
use serde::{Deserialize, Serialize};

use crate::dp_mcmc::PosteriorDraw;
use crate::error::{domain, Result};
use crate::mixture_core::{model_cdf, PValueMixture};
use crate::special::ks_statistic;

pub const DEFAULT_CREDIBLE_LEVEL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gamma: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub pi_mean: f64,
    pub pi_ci: (f64, f64),
    pub ess_pi: f64,
    pub pfdr_curve: Vec<CurvePoint>,
    /// Per-draw pFDR values above 1 that were clipped.
    pub clipped: usize,
    pub level: f64,
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and equal-tailed interval. The interval is widened to contain the
/// mean when a very skewed sample would place the mean outside it.
fn mean_and_interval(values: &mut [f64], level: f64) -> (f64, f64, f64) {
    // shifted by the first value so constant samples average exactly
    let shift = values[0];
    let mean = shift + values.iter().map(|v| v - shift).sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let lo = quantile_sorted(values, tail);
    let hi = quantile_sorted(values, 1.0 - tail);
    (mean, lo.min(mean), hi.max(mean))
}

/// Effective sample size `n / (1 + 2 Σ ρ_k)`, the sum running over lags
/// until the first nonpositive autocorrelation.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let var = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return n as f64;
    }
    let mut sum_rho = 0.0;
    for lag in 1..n {
        let cov = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        let rho = cov / var;
        if rho <= 0.0 {
            break;
        }
        sum_rho += rho;
    }
    n as f64 / (1.0 + 2.0 * sum_rho)
}

/// Per-draw cdf F(γ) = πγ + (1-π)H(γ).
pub fn draw_cdf(draw: &PosteriorDraw, x: f64) -> Result<f64> {
    Ok(draw.pi * x + (1.0 - draw.pi) * draw.g_draw.cdf(x)?)
}

/// Per-draw πγ/F(γ), clipped to at most 1. The flag reports clipping.
pub fn draw_pfdr(draw: &PosteriorDraw, gamma: f64) -> Result<(f64, bool)> {
    let f = draw_cdf(draw, gamma)?;
    if f <= 0.0 {
        return Ok((0.0, false));
    }
    let v = draw.pi * gamma / f;
    Ok(if v > 1.0 { (1.0, true) } else { (v, false) })
}

fn check_gamma_grid(gamma_grid: &[f64]) -> Result<()> {
    if let Some(g) = gamma_grid.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
        return domain(format!("gamma {g} outside (0, 1)"));
    }
    if gamma_grid.windows(2).any(|w| w[0] >= w[1]) {
        return domain("gamma grid must be strictly increasing");
    }
    Ok(())
}

/// Posterior mean and equal-tailed interval of π and of πγ/F(γ) at every γ.
pub fn summarize(draws: &[PosteriorDraw], gamma_grid: &[f64], level: f64) -> Result<PosteriorSummary> {
    if draws.len() < 2 {
        return domain(format!("need at least 2 draws, got {}", draws.len()));
    }
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("credible level {level} outside (0, 1)"));
    }
    check_gamma_grid(gamma_grid)?;

    let pis: Vec<f64> = draws.iter().map(|d| d.pi).collect();
    let ess_pi = effective_sample_size(&pis);
    let (pi_mean, pi_lo, pi_hi) = mean_and_interval(&mut pis.clone(), level);

    let mut clipped = 0;
    let mut curve = Vec::with_capacity(gamma_grid.len());
    let mut values = Vec::with_capacity(draws.len());
    for &gamma in gamma_grid {
        values.clear();
        for d in draws {
            let (v, was_clipped) = draw_pfdr(d, gamma)?;
            clipped += was_clipped as usize;
            values.push(v);
        }
        let (mean, lo, hi) = mean_and_interval(&mut values, level);
        curve.push(CurvePoint { gamma, mean, lo, hi });
    }
    if clipped > 0 {
        info!("clipped {clipped} per-draw pFDR values to 1");
    }
    Ok(PosteriorSummary {
        pi_mean,
        pi_ci: (pi_lo, pi_hi),
        ess_pi,
        pfdr_curve: curve,
        clipped,
        level,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        domain(format!("lambda {lambda} outside (0, 1)"))
    }
}

/// #{p > λ} / (m(1-λ)), clipped to [0, 1].
pub fn storey_pi(pvalues: &[f64], lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if pvalues.is_empty() {
        return domain("no p-values supplied");
    }
    let above = pvalues.iter().filter(|p| **p > lambda).count() as f64;
    Ok((above / (pvalues.len() as f64 * (1.0 - lambda))).clamp(0.0, 1.0))
}

/// Storey's plug-in π̂(λ)·γ / (max(R(γ), 1)/m) with R(γ) = #{p ≤ γ}.
/// Approximate baseline; the value is not clipped.
pub fn storey_pfdr(pvalues: &[f64], lambda: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return domain(format!("gamma {gamma} outside (0, 1)"));
    }
    let pi = storey_pi(pvalues, lambda)?;
    let rejected = pvalues.iter().filter(|p| **p <= gamma).count().max(1) as f64;
    Ok(pi * gamma / (rejected / pvalues.len() as f64))
}

/// Kolmogorov-Smirnov distance between the sample's ecdf and the model cdf.
pub fn ecdf_sup_distance(pvalues: &[f64], model: &PValueMixture) -> Result<f64> {
    if pvalues.is_empty() {
        return domain("no p-values supplied");
    }
    let failure = RefCell::new(None);
    let d = ks_statistic(pvalues, |x| {
        model_cdf(x.clamp(0.0, 1.0), model).unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        })
    });
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(d),
    }
}
