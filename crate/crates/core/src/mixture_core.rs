//! Beta mixtures, the two-groups p-value model and its functionals.
//!
//! The alternative p-value density is `h(x) = Σ w_k be(x; a_k, b_k)` with
//! every component decreasing (`a <= 1`, `b >= 1`). The observed p-value cdf
//! is `F(x) = πx + (1 - π)H(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{beta_reg_pair, ln_beta};

/// Tolerance on the total mass of a mixing measure.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Shapes of one decreasing beta component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBeta", into = "RawBeta")]
pub struct BetaParams {
    a: f64,
    b: f64,
    ln_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBeta {
    a: f64,
    b: f64,
}

impl TryFrom<RawBeta> for BetaParams {
    type Error = Error;
    fn try_from(raw: RawBeta) -> Result<Self> {
        BetaParams::new(raw.a, raw.b)
    }
}

impl From<BetaParams> for RawBeta {
    fn from(p: BetaParams) -> Self {
        RawBeta { a: p.a, b: p.b }
    }
}

impl BetaParams {
    /// Requires `0 < a <= 1` and `b >= 1`.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return domain(format!("beta shape a={a} outside (0, 1]"));
        }
        if !(b >= 1.0) || !b.is_finite() {
            return domain(format!("beta shape b={b} must be finite and >= 1"));
        }
        Ok(BetaParams {
            a,
            b,
            ln_norm: ln_beta(a, b),
        })
    }

    /// Caller guarantees `0 < a <= 1 <= b < inf`.
    pub(crate) fn from_valid(a: f64, b: f64) -> Self {
        debug_assert!(a > 0.0 && a <= 1.0 && b >= 1.0 && b.is_finite());
        BetaParams {
            a,
            b,
            ln_norm: ln_beta(a, b),
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// ln B(a, b).
    pub fn ln_beta(&self) -> f64 {
        self.ln_norm
    }

    /// Log density from precomputed `ln x` and `ln(1 - x)`.
    #[inline]
    pub fn ln_density_from_logs(&self, ln_x: f64, ln_1mx: f64) -> f64 {
        (self.a - 1.0) * ln_x + (self.b - 1.0) * ln_1mx - self.ln_norm
    }

    /// Limit of the density as x -> 1: zero when b > 1, `1/B(a, 1) = a` when b = 1.
    pub fn density_at_one(&self) -> f64 {
        if self.b > 1.0 {
            0.0
        } else {
            (-self.ln_norm).exp()
        }
    }
}

/// be(x; a, b) for 0 < x < 1.
pub fn beta_density(x: f64, p: &BetaParams) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return domain(format!("beta density argument {x} outside (0, 1)"));
    }
    Ok(p.ln_density_from_logs(x.ln(), (-x).ln_1p()).exp())
}

/// Regularized incomplete beta I_x(a, b) for x in [0, 1].
pub fn beta_cdf(x: f64, p: &BetaParams) -> Result<f64> {
    beta_reg_pair(p.a, p.b, x).map(|(lower, _)| lower)
}

/// 1 - I_x(a, b), computed without cancellation in the upper tail.
pub fn beta_sf(x: f64, p: &BetaParams) -> Result<f64> {
    beta_reg_pair(p.a, p.b, x).map(|(_, upper)| upper)
}

/// Upper-tail mass of the last `y` of the unit interval, `1 - I_{1-y}(a, b)`,
/// evaluated as `I_y(b, a)` so that small `y` keeps full precision.
pub fn beta_upper_tail(y: f64, p: &BetaParams) -> Result<f64> {
    beta_reg_pair(p.b, p.a, y).map(|(lower, _)| lower)
}

/// A finitely supported mixing measure over beta shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMixingMeasure {
    atoms: Vec<BetaParams>,
    weights: Vec<f64>,
}

impl DiscreteMixingMeasure {
    pub fn new(atoms: Vec<BetaParams>, weights: Vec<f64>) -> Result<Self> {
        Self::validate_shape(&atoms, &weights)?;
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return domain(format!("mixing weights sum to {total}, expected 1"));
        }
        Ok(DiscreteMixingMeasure { atoms, weights })
    }

    /// Builds a measure from nonnegative weights of any positive total.
    pub fn normalized(atoms: Vec<BetaParams>, weights: Vec<f64>) -> Result<Self> {
        Self::validate_shape(&atoms, &weights)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return domain(format!("mixing weights have total {total}"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(DiscreteMixingMeasure { atoms, weights })
    }

    pub fn single(atom: BetaParams) -> Self {
        DiscreteMixingMeasure {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    fn validate_shape(atoms: &[BetaParams], weights: &[f64]) -> Result<()> {
        if atoms.is_empty() {
            return domain("mixing measure needs at least one atom");
        }
        if atoms.len() != weights.len() {
            return domain(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return domain(format!("mixing weight {w} is not a finite nonnegative number"));
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[BetaParams] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BetaParams, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// h(x) = Σ w_k be(x; a_k, b_k).
    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return domain(format!("mixture density argument {x} outside (0, 1)"));
        }
        let (lx, l1x) = (x.ln(), (-x).ln_1p());
        Ok(self
            .iter()
            .map(|(p, w)| w * p.ln_density_from_logs(lx, l1x).exp())
            .sum())
    }

    /// H(x) = Σ w_k I_x(a_k, b_k).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let mut total = 0.0;
        for (p, w) in self.iter() {
            total += w * beta_cdf(x, p)?;
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// 1 - H(x).
    pub fn sf(&self, x: f64) -> Result<f64> {
        let mut total = 0.0;
        for (p, w) in self.iter() {
            total += w * beta_sf(x, p)?;
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// H̄(1 - y).
    pub fn upper_tail(&self, y: f64) -> Result<f64> {
        let mut total = 0.0;
        for (p, w) in self.iter() {
            total += w * beta_upper_tail(y, p)?;
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// h(1), the limit of the density at the right endpoint.
    pub fn density_at_one(&self) -> f64 {
        self.iter().map(|(p, w)| w * p.density_at_one()).sum()
    }
}

/// h(x) for a mixing measure.
pub fn mixture_density(x: f64, g: &DiscreteMixingMeasure) -> Result<f64> {
    g.density(x)
}

/// H(x) for a mixing measure.
pub fn mixture_cdf(x: f64, g: &DiscreteMixingMeasure) -> Result<f64> {
    g.cdf(x)
}

/// The two-groups p-value model `f = π + (1 - π)h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueMixture {
    pi: f64,
    mixing: DiscreteMixingMeasure,
}

impl PValueMixture {
    pub fn new(pi: f64, mixing: DiscreteMixingMeasure) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi) {
            return domain(format!("null proportion {pi} outside [0, 1]"));
        }
        Ok(PValueMixture { pi, mixing })
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn mixing(&self) -> &DiscreteMixingMeasure {
        &self.mixing
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(self.pi + (1.0 - self.pi) * self.mixing.density(x)?)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return domain(format!("cdf argument {x} outside [0, 1]"));
        }
        Ok(self.pi * x + (1.0 - self.pi) * self.mixing.cdf(x)?)
    }

    pub fn sf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return domain(format!("cdf argument {x} outside [0, 1]"));
        }
        Ok(self.pi * (1.0 - x) + (1.0 - self.pi) * self.mixing.sf(x)?)
    }

    pub fn density_at_one(&self) -> f64 {
        self.pi + (1.0 - self.pi) * self.mixing.density_at_one()
    }
}

pub fn model_density(x: f64, m: &PValueMixture) -> Result<f64> {
    m.density(x)
}

pub fn model_cdf(x: f64, m: &PValueMixture) -> Result<f64> {
    m.cdf(x)
}

/// pFDR at nominal level γ: πγ / (πγ + (1 - π)H(γ)).
pub fn pfdr_model(m: &PValueMixture, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return domain(format!("pFDR level {gamma} outside (0, 1]"));
    }
    let f_gamma = m.cdf(gamma)?;
    if !(f_gamma > 0.0) {
        return domain(format!("F({gamma}) = {f_gamma} is not positive"));
    }
    Ok((m.pi() * gamma / f_gamma).clamp(0.0, 1.0))
}

/// Conservative pFDR bound π(F)γ / F(γ).
pub fn pfdr_bar(pi_f: f64, f_gamma: f64, gamma: f64) -> Result<f64> {
    if !(f_gamma > 0.0) {
        return domain(format!("F(γ) = {f_gamma} is not positive"));
    }
    if !(gamma > 0.0) {
        return domain(format!("pFDR level {gamma} is not positive"));
    }
    Ok(pi_f * gamma / f_gamma)
}

/// Anything with a cdf on [0, 1].
pub trait CdfEvaluable {
    fn cdf(&self, x: f64) -> Result<f64>;

    fn sf(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.cdf(x)?)
    }

    /// H̄(1 - y). Override when the tail can be computed without cancellation.
    fn upper_tail(&self, y: f64) -> Result<f64> {
        self.sf(1.0 - y)
    }

    /// Density at x = 1, when it is known in closed form.
    fn density_at_one(&self) -> Option<f64> {
        None
    }
}

/// Adapter for plain closures.
pub struct FnCdf<F>(pub F);

impl<F: Fn(f64) -> f64> CdfEvaluable for FnCdf<F> {
    fn cdf(&self, x: f64) -> Result<f64> {
        Ok((self.0)(x))
    }
}

impl CdfEvaluable for DiscreteMixingMeasure {
    fn cdf(&self, x: f64) -> Result<f64> {
        DiscreteMixingMeasure::cdf(self, x)
    }
    fn sf(&self, x: f64) -> Result<f64> {
        DiscreteMixingMeasure::sf(self, x)
    }
    fn upper_tail(&self, y: f64) -> Result<f64> {
        DiscreteMixingMeasure::upper_tail(self, y)
    }
    fn density_at_one(&self) -> Option<f64> {
        Some(DiscreteMixingMeasure::density_at_one(self))
    }
}

impl CdfEvaluable for PValueMixture {
    fn cdf(&self, x: f64) -> Result<f64> {
        PValueMixture::cdf(self, x)
    }
    fn sf(&self, x: f64) -> Result<f64> {
        PValueMixture::sf(self, x)
    }
    fn upper_tail(&self, y: f64) -> Result<f64> {
        Ok(self.pi * y + (1.0 - self.pi) * self.mixing.upper_tail(y)?)
    }
    fn density_at_one(&self) -> Option<f64> {
        Some(PValueMixture::density_at_one(self))
    }
}

/// Default right end of the π(F) grid.
pub const DEFAULT_LAMBDA_MAX: f64 = 1.0 - 1e-4;

/// The grid λ_j = 1 - 2^{-j} below `lambda_max`, closed by `lambda_max` itself.
pub fn pi_grid(lambda_max: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut tail = 0.5;
    while 1.0 - tail < lambda_max && tail > f64::EPSILON {
        grid.push(1.0 - tail);
        tail *= 0.5;
    }
    if lambda_max > 0.0 && lambda_max < 1.0 {
        grid.push(lambda_max);
    }
    grid
}

/// min over the grid of F̄(λ)/(1 - λ), without any endpoint limit.
pub fn pi_of_f_on_grid<F: CdfEvaluable + ?Sized>(f: &F, grid: &[f64]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for &lambda in grid {
        let tail = 1.0 - lambda;
        if !(tail > 0.0) {
            continue;
        }
        best = best.min(f.upper_tail(tail)? / tail);
    }
    Ok(best.clamp(0.0, 1.0))
}

/// π(F) = inf_λ F̄(λ)/(1 - λ): the largest uniform share compatible with F.
///
/// Evaluated on [`pi_grid`] and, when the cdf knows its density at 1, also
/// on the limiting value λ -> 1.
pub fn pi_of_f<F: CdfEvaluable + ?Sized>(f: &F, lambda_max: f64) -> Result<f64> {
    let grid_value = pi_of_f_on_grid(f, &pi_grid(lambda_max))?;
    let value = match f.density_at_one() {
        Some(limit) => grid_value.min(limit),
        None => grid_value,
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Which transform of H is tested for complete monotonicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmTransform {
    /// y ↦ H(e^{-y}); characterizes mixtures of be(a, 1).
    CdfAtExpNeg,
    /// y ↦ H̄(1 - e^{-y}); characterizes mixtures of be(1, b).
    SurvivalAtOneMinusExpNeg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmReport {
    pub passes: bool,
    /// Smallest failing order and the grid point where it fails.
    pub first_failure: Option<(usize, f64)>,
    /// Highest order n such that every order 1..=n passed.
    pub orders_passed: usize,
}

pub const CM_MAX_ORDER_LIMIT: usize = 12;
pub const CM_DEFAULT_ORDER: usize = 8;

/// Uniform grid on [0, 6] with spacing 0.05.
pub fn default_cm_grid() -> Vec<f64> {
    (0..=120).map(|k| k as f64 * 0.05).collect()
}

/// Finite-difference test of complete monotonicity: checks
/// `(-1)^n Δ^n φ(y) >= -tol` for n = 1..=max_order on a uniform grid, with
/// `tol = 1e-9 · max|φ|`.
pub fn cm_check<F: CdfEvaluable + ?Sized>(
    h: &F,
    transform: CmTransform,
    max_order: usize,
    y_grid: &[f64],
) -> Result<CmReport> {
    if max_order == 0 || max_order > CM_MAX_ORDER_LIMIT {
        return domain(format!(
            "complete-monotonicity order {max_order} outside 1..={CM_MAX_ORDER_LIMIT}"
        ));
    }
    if y_grid.len() < max_order + 1 {
        return domain(format!(
            "grid of {} points too short for order {max_order}",
            y_grid.len()
        ));
    }
    let step = y_grid[1] - y_grid[0];
    if !(step > 0.0) || y_grid[0] < 0.0 {
        return domain("complete-monotonicity grid must be increasing and start at y >= 0");
    }
    let uniform = y_grid
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.max(1.0));
    if !uniform {
        return domain("complete-monotonicity grid must be uniformly spaced");
    }

    let values = y_grid
        .iter()
        .map(|&y| match transform {
            CmTransform::CdfAtExpNeg => h.cdf((-y).exp()),
            CmTransform::SurvivalAtOneMinusExpNeg => h.upper_tail((-y).exp()),
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;

    let mut diffs = values;
    let mut orders_passed = 0;
    let mut first_failure = None;
    for order in 1..=max_order {
        diffs = diffs.windows(2).map(|w| w[1] - w[0]).collect();
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        if let Some(idx) = diffs.iter().position(|d| sign * d < -tol) {
            first_failure = Some((order, y_grid[idx]));
            break;
        }
        orders_passed = order;
    }
    Ok(CmReport {
        passes: first_failure.is_none(),
        first_failure,
        orders_passed,
    })
}

/// A finitely supported probability measure on a single shape parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeMeasure {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ShapeMeasure {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return domain("shape measure needs matching, nonempty values and weights");
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return domain("shape measure weights must be nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return domain(format!("shape measure weights sum to {total}"));
        }
        Ok(ShapeMeasure { values, weights })
    }

    pub fn point(value: f64) -> Self {
        ShapeMeasure {
            values: vec![value],
            weights: vec![1.0],
        }
    }

    /// ∫ a x^{a-1} dG(a).
    pub fn power_density(&self, x: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a * x.powf(a - 1.0))
            .sum()
    }

    /// ∫ b (1-x)^{b-1} dG(b).
    pub fn reflected_power_density(&self, x: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| w * b * (1.0 - x).powf(b - 1.0))
            .sum()
    }
}

/// c^{-1} = ΣΣ a b B(a, b) w₁(a) w₂(b).
pub fn product_normalizer_inv(g1: &ShapeMeasure, g2: &ShapeMeasure) -> f64 {
    let mut total = 0.0;
    for (a, w1) in g1.values.iter().zip(&g1.weights) {
        for (b, w2) in g2.values.iter().zip(&g2.weights) {
            total += w1 * w2 * a * b * ln_beta(*a, *b).exp();
        }
    }
    total
}

/// Mixing measure whose beta mixture equals `c·h₁(x)·h₂(x)`, where
/// `h₁ = ∫ a x^{a-1} dG₁` and `h₂ = ∫ b (1-x)^{b-1} dG₂`.
///
/// Atom (a, b) receives weight `c·a·b·B(a, b)·w₁(a)·w₂(b)`.
pub fn prop8_construct(g1: &ShapeMeasure, g2: &ShapeMeasure) -> Result<DiscreteMixingMeasure> {
    let inv = product_normalizer_inv(g1, g2);
    if !(inv > 0.0) || !inv.is_finite() {
        return domain(format!("product normalizer {inv} is not finite and positive"));
    }
    let mut atoms = Vec::with_capacity(g1.values.len() * g2.values.len());
    let mut weights = Vec::with_capacity(atoms.capacity());
    for (a, w1) in g1.values.iter().zip(&g1.weights) {
        for (b, w2) in g2.values.iter().zip(&g2.weights) {
            atoms.push(BetaParams::new(*a, *b)?);
            weights.push(w1 * w2 * a * b * ln_beta(*a, *b).exp() / inv);
        }
    }
    // Renormalize to absorb rounding; the exact total is 1.
    DiscreteMixingMeasure::normalized(atoms, weights)
}

/// Envelope ψ(x) = C x^{1+ε} on (0, δ) for the upper tail of H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub c: f64,
    pub eps: f64,
    pub delta: f64,
}

impl TailEnvelope {
    pub fn new(c: f64, eps: f64, delta: f64) -> Result<Self> {
        if !(c > 0.0 && eps > 0.0 && delta > 0.0 && delta < 1.0) {
            return domain(format!("invalid tail envelope C={c}, eps={eps}, delta={delta}"));
        }
        Ok(TailEnvelope { c, eps, delta })
    }

    pub fn bound(&self, x: f64) -> f64 {
        self.c * x.powf(1.0 + self.eps)
    }

    /// 200 log-spaced points in [1e-8, δ) followed by 199 equally spaced ones.
    pub fn grid(&self) -> Vec<f64> {
        let lo = 1e-8_f64.ln();
        let hi = self.delta.ln();
        let mut grid: Vec<f64> = (0..200)
            .map(|k| (lo + (hi - lo) * k as f64 / 200.0).exp())
            .collect();
        grid.extend((1..200).map(|k| self.delta * k as f64 / 200.0));
        grid.sort_by(f64::total_cmp);
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub ok: bool,
    pub first_violation: Option<f64>,
}

/// Relative slack for floating-point ties (a = 1 atoms meet the bound exactly).
const ENVELOPE_REL_SLACK: f64 = 1e-10;

/// Checks H̄(1 - x) <= C x^{1+ε} on [`TailEnvelope::grid`].
pub fn tail_envelope_check(g: &DiscreteMixingMeasure, env: &TailEnvelope) -> Result<EnvelopeReport> {
    for x in env.grid() {
        let tail = g.upper_tail(x)?;
        if tail > env.bound(x) * (1.0 + ENVELOPE_REL_SLACK) {
            return Ok(EnvelopeReport {
                ok: false,
                first_violation: Some(x),
            });
        }
    }
    Ok(EnvelopeReport {
        ok: true,
        first_violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::integrate;

    fn bp(a: f64, b: f64) -> BetaParams {
        BetaParams::new(a, b).unwrap()
    }

    #[test]
    fn beta_params_validation() {
        assert!(BetaParams::new(1.2, 2.0).is_err());
        assert!(BetaParams::new(0.0, 2.0).is_err());
        assert!(BetaParams::new(0.5, 0.9).is_err());
        assert!(BetaParams::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn beta_density_examples() {
        assert!((beta_density(0.5, &bp(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((beta_density(0.25, &bp(0.5, 1.0)).unwrap() - 1.0).abs() < 1e-14);
        // B(0.5, 3) = ∫ x^{-1/2}(1-x)^2 dx = 2 - 4/3 + 2/5 = 16/15
        let x: f64 = 0.3;
        let want = x.powf(-0.5) * (1.0 - x).powi(2) / (16.0 / 15.0);
        assert!((beta_density(x, &bp(0.5, 3.0)).unwrap() - want).abs() < 1e-10);
        assert!(beta_density(0.0, &bp(0.5, 3.0)).is_err());
        assert!(beta_density(1.0, &bp(0.5, 3.0)).is_err());
    }

    #[test]
    fn beta_cdf_examples() {
        assert!((beta_cdf(0.5, &bp(1.0, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((beta_cdf(0.5, &bp(1.0, 2.0)).unwrap() - 0.75).abs() < 1e-15);
        // substitute x = t²: ∫_0^x s^{-1/2}(1-s)² ds = 2(t - 2t³/3 + t⁵/5)
        let t = 0.3_f64.sqrt();
        let exact = 2.0 * (t - 2.0 * t.powi(3) / 3.0 + t.powi(5) / 5.0) / (16.0 / 15.0);
        assert!((beta_cdf(0.3, &bp(0.5, 3.0)).unwrap() - exact).abs() < 1e-10);
        // and by quadrature in the substituted variable
        let quad = integrate(|s| 2.0 * (1.0 - s * s).powi(2), 0.0, t, 1e-14) / (16.0 / 15.0);
        assert!((exact - quad).abs() < 1e-12);
    }

    #[test]
    fn mixture_examples() {
        let single = DiscreteMixingMeasure::single(bp(0.5, 3.0));
        assert!(
            (single.density(0.4).unwrap() - beta_density(0.4, &bp(0.5, 3.0)).unwrap()).abs()
                < 1e-15
        );
        let g = DiscreteMixingMeasure::new(vec![bp(0.5, 1.0), bp(1.0, 2.0)], vec![0.5, 0.5])
            .unwrap();
        assert!((mixture_density(0.25, &g).unwrap() - 1.25).abs() < 1e-14);
        assert!((mixture_cdf(1.0, &g).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixing_weights_must_sum_to_one() {
        assert!(DiscreteMixingMeasure::new(vec![bp(0.5, 1.0)], vec![0.9]).is_err());
        assert!(DiscreteMixingMeasure::new(vec![], vec![]).is_err());
        let g = DiscreteMixingMeasure::normalized(vec![bp(0.5, 1.0), bp(1.0, 1.0)], vec![2.0, 2.0])
            .unwrap();
        assert_eq!(g.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn model_examples() {
        let uniform =
            PValueMixture::new(1.0, DiscreteMixingMeasure::single(bp(0.5, 3.0))).unwrap();
        assert_eq!(model_density(0.3, &uniform).unwrap(), 1.0);
        let m = PValueMixture::new(0.5, DiscreteMixingMeasure::single(bp(0.5, 1.0))).unwrap();
        assert!((model_density(0.25, &m).unwrap() - 1.0).abs() < 1e-14);
        assert!(model_cdf(0.2, &m).unwrap() >= 0.5 * 0.2);
        assert_eq!(model_cdf(0.0, &m).unwrap(), 0.0);
        assert!((model_cdf(1.0, &m).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pfdr_examples() {
        let g = DiscreteMixingMeasure::single(bp(0.5, 3.0));
        let all_null = PValueMixture::new(1.0, g.clone()).unwrap();
        assert!((pfdr_model(&all_null, 0.05).unwrap() - 1.0).abs() < 1e-15);
        let no_null = PValueMixture::new(0.0, g.clone()).unwrap();
        assert_eq!(pfdr_model(&no_null, 0.05).unwrap(), 0.0);
        assert!(pfdr_model(&all_null, 0.0).is_err());

        // H(0.05) = 0.5 for be(a, 1) with 0.05^a = 0.5
        let a = 0.5_f64.ln() / 0.05_f64.ln();
        let m = PValueMixture::new(0.8, DiscreteMixingMeasure::single(bp(a, 1.0))).unwrap();
        assert!((pfdr_model(&m, 0.05).unwrap() - 0.04 / 0.14).abs() < 1e-12);
    }

    #[test]
    fn pfdr_bar_examples() {
        assert_eq!(pfdr_bar(1.0, 0.1, 0.1).unwrap(), 1.0);
        assert!((pfdr_bar(0.6, 0.3, 0.1).unwrap() - 0.2).abs() < 1e-15);
        assert!(pfdr_bar(0.6, 0.0, 0.1).is_err());
    }

    #[test]
    fn pi_of_f_examples() {
        let uniform = FnCdf(|x: f64| x);
        assert!((pi_of_f(&uniform, DEFAULT_LAMBDA_MAX).unwrap() - 1.0).abs() < 1e-12);

        let f = FnCdf(|x: f64| 0.5 * x + 0.5 * x.powf(0.2));
        assert!((pi_of_f(&f, DEFAULT_LAMBDA_MAX).unwrap() - 0.6).abs() < 1e-4);

        let m = PValueMixture::new(0.8, DiscreteMixingMeasure::single(bp(0.5, 3.0))).unwrap();
        assert!((pi_of_f(&m, DEFAULT_LAMBDA_MAX).unwrap() - 0.8).abs() < 1e-4);
        // grid alone also resolves it since the tail is thin
        assert!((pi_of_f_on_grid(&m, &pi_grid(DEFAULT_LAMBDA_MAX)).unwrap() - 0.8).abs() < 1e-4);
    }

    #[test]
    fn pi_grid_shape() {
        let g = pi_grid(DEFAULT_LAMBDA_MAX);
        assert_eq!(g[0], 0.5);
        assert_eq!(*g.last().unwrap(), DEFAULT_LAMBDA_MAX);
        assert_eq!(g.len(), 14);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cm_examples() {
        let grid = default_cm_grid();
        let r = cm_check(&FnCdf(|x: f64| x.powf(0.3)), CmTransform::CdfAtExpNeg, 8, &grid).unwrap();
        assert!(r.passes);
        assert_eq!(r.orders_passed, 8);

        let r = cm_check(
            &FnCdf(|x: f64| 3.0 * x * x - 2.0 * x.powi(3)),
            CmTransform::CdfAtExpNeg,
            8,
            &grid,
        )
        .unwrap();
        assert!(!r.passes);
        assert_eq!(r.first_failure, Some((2, 0.0)));
        assert_eq!(r.orders_passed, 1);

        let r = cm_check(
            &FnCdf(|x: f64| 0.5 * x.powf(0.2) + 0.5 * x.powf(0.7)),
            CmTransform::CdfAtExpNeg,
            8,
            &grid,
        )
        .unwrap();
        assert!(r.passes);

        let one_b = DiscreteMixingMeasure::new(vec![bp(1.0, 2.0), bp(1.0, 5.0)], vec![0.3, 0.7])
            .unwrap();
        let r = cm_check(&one_b, CmTransform::SurvivalAtOneMinusExpNeg, 8, &grid).unwrap();
        assert!(r.passes);
    }

    #[test]
    fn cm_rejects_bad_arguments() {
        let grid = default_cm_grid();
        let f = FnCdf(|x: f64| x);
        assert!(cm_check(&f, CmTransform::CdfAtExpNeg, 13, &grid).is_err());
        assert!(cm_check(&f, CmTransform::CdfAtExpNeg, 0, &grid).is_err());
        assert!(cm_check(&f, CmTransform::CdfAtExpNeg, 2, &[0.0, 0.1, 0.3]).is_err());
    }

    #[test]
    fn prop8_examples() {
        let g = prop8_construct(&ShapeMeasure::point(0.4), &ShapeMeasure::point(3.0)).unwrap();
        assert_eq!(g.atoms(), &[bp(0.4, 3.0)]);
        assert_eq!(g.weights(), &[1.0]);

        let g1 = ShapeMeasure::new(vec![0.2, 0.8], vec![0.5, 0.5]).unwrap();
        let g = prop8_construct(&g1, &ShapeMeasure::point(2.0)).unwrap();
        assert!((g.weights()[0] - 0.6).abs() < 1e-14);
        assert!((g.weights()[1] - 0.4).abs() < 1e-14);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_envelope_examples() {
        let env = TailEnvelope::new(1.0, 0.5, 0.5).unwrap();
        let g = DiscreteMixingMeasure::single(bp(0.5, 1.5));
        assert!(tail_envelope_check(&g, &env).unwrap().ok);

        let uniform = DiscreteMixingMeasure::single(bp(1.0, 1.0));
        let r = tail_envelope_check(&uniform, &env).unwrap();
        assert!(!r.ok);
        assert!(r.first_violation.is_some());

        let mix = DiscreteMixingMeasure::new(
            vec![bp(0.2, 1.5), bp(1.0, 1.5), bp(0.7, 8.0)],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        assert!(tail_envelope_check(&mix, &env).unwrap().ok);
    }
}
