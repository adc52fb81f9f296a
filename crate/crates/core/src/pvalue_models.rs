//! Closed-form p-value densities for parametric tests, and simulation of
//! p-value datasets under the two-groups model.
//!
//! For a statistic with null density `g₀` and cdf `G₀`, a one-sided p-value
//! has density `g₁(z)/g₀(z)` at `z = G₀⁻¹(1 - x)`; a two-sided p-value from a
//! null-symmetric statistic has density `g̃₁(z)/g₀(z)` at `z = G₀⁻¹(1 - x/2)`
//! with `g̃₁(z) = (g₁(z) + g₁(-z))/2`.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::mixture_core::{BetaParams, DiscreteMixingMeasure};
use crate::special::integrate_gl;

/// Lower clamp applied to simulated p-values.
pub const PVALUE_FLOOR: f64 = 1e-12;

/// Seeded generator used for every simulation in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    /// T ~ N(√n θ, 1).
    NormalLocation,
    /// T ~ noncentral t with `df` degrees of freedom and noncentrality √n θ.
    TLocation { df: u32 },
    /// T ~ exponential with mean θ; the p-value is the upper tail.
    ExponentialScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    OneSided,
    TwoSided,
}

/// A parametric test: statistic family, null parameter, sidedness and
/// per-test sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestModel {
    pub kind: ModelKind,
    pub theta0: f64,
    pub sidedness: Sidedness,
    pub n: u32,
}

impl TestModel {
    pub fn new(kind: ModelKind, theta0: f64, sidedness: Sidedness, n: u32) -> Result<Self> {
        let model = TestModel {
            kind,
            theta0,
            sidedness,
            n,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return domain("per-test sample size n must be at least 1");
        }
        if !self.theta0.is_finite() {
            return domain("theta0 must be finite");
        }
        match self.kind {
            ModelKind::TLocation { df } if df == 0 => domain("t model needs df >= 1"),
            ModelKind::ExponentialScale if !(self.theta0 > 0.0) => {
                domain("exponential-scale model needs a positive null scale")
            }
            ModelKind::ExponentialScale if self.sidedness == Sidedness::TwoSided => {
                domain("two-sided p-values need a null-symmetric statistic; the exponential is not")
            }
            _ => Ok(()),
        }
    }

    fn check_alternative(&self, theta1: f64) -> Result<()> {
        self.validate()?;
        if !theta1.is_finite() {
            return domain("alternative parameter must be finite");
        }
        if matches!(self.kind, ModelKind::ExponentialScale) && !(theta1 > 0.0) {
            return domain("exponential-scale model needs a positive alternative scale");
        }
        Ok(())
    }

    /// √n (θ₁ - θ₀) for the location families.
    fn noncentrality(&self, theta1: f64) -> f64 {
        (self.n as f64).sqrt() * (theta1 - self.theta0)
    }

    fn null_family(&self) -> NullFamily {
        match self.kind {
            ModelKind::NormalLocation => NullFamily::Normal(Normal::standard()),
            ModelKind::TLocation { df } => NullFamily::T(
                StudentsT::new(0.0, 1.0, df as f64).expect("df validated positive"),
            ),
            ModelKind::ExponentialScale => NullFamily::Exponential(self.theta0),
        }
    }

    /// g₁(z)/g₀(z) on the standardized statistic scale.
    fn likelihood_ratio(&self, theta1: f64, z: f64) -> f64 {
        match self.kind {
            ModelKind::NormalLocation => {
                let d = self.noncentrality(theta1);
                (d * z - 0.5 * d * d).exp()
            }
            ModelKind::TLocation { df } => {
                noncentral_t_ratio(df as f64, self.noncentrality(theta1), z)
            }
            ModelKind::ExponentialScale => {
                let (m0, m1) = (self.theta0, theta1);
                (m0 / m1) * (z * (1.0 / m0 - 1.0 / m1)).exp()
            }
        }
    }

    fn is_null(&self, theta1: f64) -> bool {
        theta1 == self.theta0
    }
}

enum NullFamily {
    Normal(Normal),
    T(StudentsT),
    Exponential(f64),
}

impl NullFamily {
    fn pdf(&self, z: f64) -> f64 {
        match self {
            NullFamily::Normal(d) => d.pdf(z),
            NullFamily::T(d) => d.pdf(z),
            NullFamily::Exponential(mean) => {
                if z < 0.0 {
                    0.0
                } else {
                    (-z / mean).exp() / mean
                }
            }
        }
    }

    fn cdf(&self, z: f64) -> f64 {
        match self {
            NullFamily::Normal(d) => d.cdf(z),
            NullFamily::T(d) => d.cdf(z),
            NullFamily::Exponential(mean) => -(-z.max(0.0) / mean).exp_m1(),
        }
    }

    fn sf(&self, z: f64) -> f64 {
        match self {
            NullFamily::Normal(d) => d.sf(z),
            NullFamily::T(d) => d.sf(z),
            NullFamily::Exponential(mean) => (-z.max(0.0) / mean).exp(),
        }
    }

    /// Solves `P(T > z) = tail` for z.
    fn upper_quantile(&self, tail: f64) -> Result<f64> {
        if let NullFamily::Exponential(mean) = self {
            return Ok(-mean * tail.ln());
        }
        upper_quantile_bisect(|z| self.sf(z), |z| self.cdf(z), |z| self.pdf(z), tail)
    }
}

const QUANTILE_TOL: f64 = 1e-12;

// Monotone bisection refined by one Newton step. The residual is taken on
// the tail holding less probability to avoid cancellation.
fn upper_quantile_bisect(
    sf: impl Fn(f64) -> f64,
    cdf: impl Fn(f64) -> f64,
    pdf: impl Fn(f64) -> f64,
    tail: f64,
) -> Result<f64> {
    let residual = |z: f64| {
        if tail <= 0.5 {
            sf(z) - tail
        } else {
            (1.0 - tail) - cdf(z)
        }
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut expansions = 0;
    while residual(lo) < 0.0 || residual(hi) > 0.0 {
        lo *= 2.0;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numeric {
                routine: "null quantile",
                detail: format!("could not bracket tail probability {tail}"),
            });
        }
    }
    let mut iterations = 0;
    while hi - lo > QUANTILE_TOL * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 400 {
            return Err(Error::Numeric {
                routine: "null quantile",
                detail: format!("bisection stalled on [{lo}, {hi}] for tail {tail}"),
            });
        }
    }
    let z = 0.5 * (lo + hi);
    let density = pdf(z);
    if density > 0.0 && density.is_finite() {
        // d(residual)/dz = -pdf on both branches
        let refined = z + residual(z) / density;
        if refined.is_finite() && (refined - z).abs() <= hi - lo + QUANTILE_TOL {
            return Ok(refined);
        }
    }
    Ok(z)
}

/// g_δ(t)/g_0(t) for the noncentral t with ν degrees of freedom.
///
/// Writing T = (Z + δ)/S with S = √(V/ν), the ratio equals
/// `e^{-δ²/2} E[e^{δ t S}]` where S² ~ Gamma((ν+1)/2, rate (ν+t²)/2).
fn noncentral_t_ratio(nu: f64, delta: f64, t: f64) -> f64 {
    if delta == 0.0 {
        return 1.0;
    }
    let beta = 0.5 * (nu + t * t);
    let c = delta * t;
    let log_kernel = |s: f64| nu * s.ln() - beta * s * s + c * s;
    let mode = (c + (c * c + 8.0 * beta * nu).sqrt()) / (4.0 * beta);
    let peak = log_kernel(mode);
    // The log kernel is concave with curvature at least 2β, so 14 of these
    // widths on either side of the mode hold all but e^{-98} of the mass.
    let reach = 14.0 / (2.0 * beta).sqrt();
    let lo = (mode - reach).max(0.0);
    let hi = mode + reach;
    let body = integrate_gl(
        |s| {
            if s <= 0.0 {
                0.0
            } else {
                (log_kernel(s) - peak).exp()
            }
        },
        lo,
        hi,
        48,
        12,
    );
    // ∫_0^∞ s^ν e^{-βs²} ds = Γ((ν+1)/2) / (2 β^{(ν+1)/2})
    let ln_norm = ln_gamma(0.5 * (nu + 1.0)) - 0.5 * (nu + 1.0) * beta.ln() - std::f64::consts::LN_2;
    (-0.5 * delta * delta + peak + body.ln() - ln_norm).exp()
}

fn check_unit_open(x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return domain(format!("p-value argument {x} outside (0, 1)"));
    }
    Ok(())
}

/// One-sided p-value density g_{θ₁}(z)/g_{θ₀}(z) at z = G_{θ₀}⁻¹(1 - x).
pub fn pvalue_density_one_sided(model: &TestModel, theta1: f64, x: f64) -> Result<f64> {
    check_unit_open(x)?;
    model.check_alternative(theta1)?;
    if model.is_null(theta1) {
        return Ok(1.0);
    }
    let z = model.null_family().upper_quantile(x)?;
    Ok(model.likelihood_ratio(theta1, z))
}

/// Two-sided p-value density g̃_{θ₁}(z)/g_{θ₀}(z) at z = G_{θ₀}⁻¹(1 - x/2).
pub fn pvalue_density_two_sided(model: &TestModel, theta1: f64, x: f64) -> Result<f64> {
    check_unit_open(x)?;
    model.check_alternative(theta1)?;
    if matches!(model.kind, ModelKind::ExponentialScale) {
        return domain("two-sided p-values need a null-symmetric statistic; the exponential is not");
    }
    if model.is_null(theta1) {
        return Ok(1.0);
    }
    let z = model.null_family().upper_quantile(0.5 * x)?;
    Ok(0.5 * (model.likelihood_ratio(theta1, z) + model.likelihood_ratio(theta1, -z)))
}

/// Density according to the model's own sidedness.
pub fn pvalue_density(model: &TestModel, theta1: f64, x: f64) -> Result<f64> {
    match model.sidedness {
        Sidedness::OneSided => pvalue_density_one_sided(model, theta1, x),
        Sidedness::TwoSided => pvalue_density_two_sided(model, theta1, x),
    }
}

/// Equally spaced `(x, density)` pairs on the open unit interval.
pub fn density_curve(model: &TestModel, theta1: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if points == 0 {
        return domain("density curve needs at least one point");
    }
    (1..=points)
        .map(|k| {
            let x = k as f64 / (points + 1) as f64;
            pvalue_density(model, theta1, x).map(|d| (x, d))
        })
        .collect()
}

/// Upper-tail p-values of an exponential statistic with mean μ₀ under the
/// null and μ₁ under the alternative satisfy P(p <= x) = x^{μ₀/μ₁}, i.e. the
/// p-value is exactly be(μ₀/μ₁, 1).
pub fn exponential_pvalue_shape(mu0: f64, mu1: f64) -> Result<BetaParams> {
    if !(mu0 > 0.0 && mu1 > 0.0) || !mu0.is_finite() || !mu1.is_finite() {
        return domain(format!("exponential scales must be positive, got ({mu0}, {mu1})"));
    }
    if mu1 < mu0 {
        return domain(format!(
            "alternative scale {mu1} below null scale {mu0} gives shape a > 1"
        ));
    }
    BetaParams::new(mu0 / mu1, 1.0)
}

/// How non-null p-values are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    Test { model: TestModel, theta1: f64 },
    Mixture(DiscreteMixingMeasure),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub pi0: f64,
    pub alt: Alternative,
    pub m: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi0) {
            return domain(format!("pi0={} outside [0, 1]", self.pi0));
        }
        if self.m == 0 {
            return domain("scenario needs m >= 1");
        }
        if let Alternative::Test { model, theta1 } = &self.alt {
            model.check_alternative(*theta1)?;
        }
        Ok(())
    }
}

/// A simulated dataset: p-values and the hidden null indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPValues {
    pub pvalues: Vec<f64>,
    pub is_null: Vec<bool>,
}

/// Draws `m` p-values: each index is null with probability π₀ (uniform
/// p-value), otherwise drawn from the alternative.
pub fn sample_pvalues(spec: &ScenarioSpec) -> Result<SimulatedPValues> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut pvalues = Vec::with_capacity(spec.m);
    let mut is_null = Vec::with_capacity(spec.m);
    let alt = AltSampler::new(&spec.alt)?;
    let mut clamped = 0usize;
    for _ in 0..spec.m {
        let null = rng.random::<f64>() < spec.pi0;
        let p = if null {
            rng.random::<f64>()
        } else {
            alt.draw(&mut rng)
        };
        let kept = p.clamp(PVALUE_FLOOR, 1.0 - PVALUE_FLOOR);
        if kept != p {
            clamped += 1;
        }
        pvalues.push(kept);
        is_null.push(null);
    }
    if clamped > 0 {
        warn!("clamped {clamped} simulated p-values into [{PVALUE_FLOOR:e}, 1 - {PVALUE_FLOOR:e}]");
    }
    Ok(SimulatedPValues { pvalues, is_null })
}

enum AltSampler {
    Normal { delta: f64, two_sided: bool },
    T { delta: f64, chi: ChiSquared<f64>, null: StudentsT, df: f64, two_sided: bool },
    Exponential { mu0: f64, stat: Exp<f64> },
    Mixture { cumulative: Vec<f64>, betas: Vec<Beta<f64>> },
}

impl AltSampler {
    fn new(alt: &Alternative) -> Result<Self> {
        let bad = |e: String| Error::Domain(e);
        Ok(match alt {
            Alternative::Test { model, theta1 } => {
                let two_sided = model.sidedness == Sidedness::TwoSided;
                match model.kind {
                    ModelKind::NormalLocation => AltSampler::Normal {
                        delta: model.noncentrality(*theta1),
                        two_sided,
                    },
                    ModelKind::TLocation { df } => AltSampler::T {
                        delta: model.noncentrality(*theta1),
                        chi: ChiSquared::new(df as f64).map_err(|e| bad(e.to_string()))?,
                        null: StudentsT::new(0.0, 1.0, df as f64)
                            .map_err(|e| bad(e.to_string()))?,
                        df: df as f64,
                        two_sided,
                    },
                    ModelKind::ExponentialScale => AltSampler::Exponential {
                        mu0: model.theta0,
                        stat: Exp::new(1.0 / theta1).map_err(|e| bad(e.to_string()))?,
                    },
                }
            }
            Alternative::Mixture(g) => {
                let mut acc = 0.0;
                let cumulative = g
                    .weights()
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect();
                let betas = g
                    .atoms()
                    .iter()
                    .map(|p| Beta::new(p.a(), p.b()).map_err(|e| bad(e.to_string())))
                    .collect::<Result<_>>()?;
                AltSampler::Mixture { cumulative, betas }
            }
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AltSampler::Normal { delta, two_sided } => {
                let z: f64 = rng.sample(StandardNormal);
                let t = z + delta;
                let std = Normal::standard();
                if *two_sided {
                    2.0 * std.sf(t.abs())
                } else {
                    std.sf(t)
                }
            }
            AltSampler::T {
                delta,
                chi,
                null,
                df,
                two_sided,
            } => {
                let z: f64 = rng.sample(StandardNormal);
                let v = chi.sample(rng);
                let t = (z + delta) / (v / df).sqrt();
                if *two_sided {
                    2.0 * null.sf(t.abs())
                } else {
                    null.sf(t)
                }
            }
            AltSampler::Exponential { mu0, stat } => (-stat.sample(rng) / mu0).exp(),
            AltSampler::Mixture { cumulative, betas } => {
                let u: f64 = rng.random();
                let k = cumulative
                    .iter()
                    .position(|c| u < *c)
                    .unwrap_or(betas.len() - 1);
                betas[k].sample(rng)
            }
        }
    }
}
