//! Posterior sampling for the Dirichlet-process mixture of beta densities.
//!
//! Model, for p-values `x_1..x_m`:
//!
//! ```text
//! z_i | π            ~ Bernoulli(π)              (null indicator)
//! x_i | z_i = null   ~ U(0, 1)
//! x_i | z_i = alt    ~ be(a_{c_i}, b_{c_i})
//! c  | z             ~ CRP(τ) over the alternative indices
//! (L_a, L_b)         ~ N(0, σ_a²) × N(0, σ_b²) per cluster
//! a = exp(-|L_a|),   b = ε_b + exp(|L_b|)
//! π                  ~ Beta(α_π, β_π)
//! ```
//!
//! The beta likelihood has no conjugate base measure, so label updates use
//! Neal's auxiliary-component scheme (algorithm 8). Each null indicator is
//! updated jointly with its label: a point may leave the alternative group or
//! enter it at an existing or auxiliary cluster in a single Gibbs move.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{domain, Result};
use crate::mixture_core::{BetaParams, DiscreteMixingMeasure};
use crate::pvalue_models::{rng_from_seed, SimRng};
use crate::special::{beta_reg, ks_pvalue, ks_statistic};

/// Latent magnitudes are capped so the induced shapes stay finite.
const MAX_ABS_LATENT: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    /// DP precision τ.
    pub tau: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    /// Offset so that b >= 1 + eps_b.
    pub eps_b: f64,
    /// Beta prior on π.
    pub pi_prior: (f64, f64),
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            tau: 1.0,
            sigma_a: 1.0,
            sigma_b: 1.0,
            eps_b: 0.05,
            pi_prior: (1.0, 1.0),
        }
    }
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("tau", self.tau),
            ("sigma_a", self.sigma_a),
            ("sigma_b", self.sigma_b),
            ("eps_b", self.eps_b),
            ("pi_prior.alpha", self.pi_prior.0),
            ("pi_prior.beta", self.pi_prior.1),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return domain(format!("{name} must be positive and finite, got {value}"));
            }
        }
        Ok(())
    }

    /// One draw from the base measure G₀.
    pub fn draw_base<R: Rng + ?Sized>(&self, rng: &mut R) -> AtomParams {
        let la = Normal::new(0.0, self.sigma_a).expect("validated scale").sample(rng);
        let lb = Normal::new(0.0, self.sigma_b).expect("validated scale").sample(rng);
        AtomParams::from_latent(la, lb, self.eps_b)
    }

    /// Log density of G₀ at (L_a, L_b), up to a constant.
    fn ln_base(&self, la: f64, lb: f64) -> f64 {
        -0.5 * (la * la / (self.sigma_a * self.sigma_a) + lb * lb / (self.sigma_b * self.sigma_b))
    }

    /// P(a <= t) under G₀, with -ln a half-normal(σ_a).
    pub fn base_cdf_a(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            erfc(-t.ln() / (self.sigma_a * std::f64::consts::SQRT_2))
        }
    }

    /// P(b <= t) under G₀, with ln(b - eps_b) half-normal(σ_b).
    pub fn base_cdf_b(&self, t: f64) -> f64 {
        if t <= 1.0 + self.eps_b {
            0.0
        } else {
            erf((t - self.eps_b).ln() / (self.sigma_b * std::f64::consts::SQRT_2))
        }
    }
}

/// Chain length, thinning and proposal settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Initial random-walk scale on (L_a, L_b); adapted during burn-in only.
    pub mh_step: f64,
    pub aux_components: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            iterations: 4000,
            burn_in: 1000,
            thin: 5,
            seed: 1,
            mh_step: 0.3,
            aux_components: 3,
        }
    }
}

impl ChainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return domain(format!(
                "need burn_in < iterations, got {} and {}",
                self.burn_in, self.iterations
            ));
        }
        if self.thin == 0 {
            return domain("thin must be at least 1");
        }
        if !(self.mh_step >= 0.0) || !self.mh_step.is_finite() {
            return domain(format!("mh_step must be finite and nonnegative, got {}", self.mh_step));
        }
        if self.aux_components == 0 {
            return domain("aux_components must be at least 1");
        }
        Ok(())
    }
}

/// Latent coordinates of a cluster together with the induced shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomParams {
    pub la: f64,
    pub lb: f64,
    pub shape: BetaParams,
}

impl AtomParams {
    pub fn from_latent(la: f64, lb: f64, eps_b: f64) -> Self {
        let a = (-la.abs().min(MAX_ABS_LATENT)).exp();
        let b = eps_b + lb.abs().min(MAX_ABS_LATENT).exp();
        AtomParams {
            la,
            lb,
            shape: BetaParams::from_valid(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub atom: AtomParams,
    pub count: usize,
    sum_ln_x: f64,
    sum_ln_1mx: f64,
}

impl Cluster {
    fn empty(atom: AtomParams) -> Self {
        Cluster {
            atom,
            count: 0,
            sum_ln_x: 0.0,
            sum_ln_1mx: 0.0,
        }
    }

    fn log_lik(&self, shape: &BetaParams, flat: bool) -> f64 {
        if flat {
            return 0.0;
        }
        (shape.a() - 1.0) * self.sum_ln_x + (shape.b() - 1.0) * self.sum_ln_1mx
            - self.count as f64 * shape.ln_beta()
    }
}

/// P-values prepared for sampling: cached logs and the visiting order.
#[derive(Debug, Clone)]
pub struct PValueData {
    ln_x: Vec<f64>,
    ln_1mx: Vec<f64>,
    order: Vec<usize>,
    flat: bool,
}

impl PValueData {
    pub fn new(pvalues: &[f64]) -> Result<Self> {
        if pvalues.is_empty() {
            return domain("no p-values supplied");
        }
        if let Some((i, p)) = pvalues
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p > 0.0 && **p < 1.0))
        {
            return domain(format!("p-value {p} at index {i} outside (0, 1)"));
        }
        Ok(PValueData {
            ln_x: pvalues.iter().map(|p| p.ln()).collect(),
            ln_1mx: pvalues.iter().map(|p| (-p).ln_1p()).collect(),
            order: (0..pvalues.len()).collect(),
            flat: false,
        })
    }

    /// `m` placeholder observations whose likelihood is identically 1, so
    /// the chain samples from the prior.
    pub fn flat(m: usize) -> Result<Self> {
        let mut data = PValueData::new(&vec![0.5; m])?;
        data.flat = true;
        Ok(data)
    }

    /// Visit points in the given order during every sweep.
    pub fn with_visit_order(mut self, order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len() {
            return domain("visit order must be a permutation of the indices");
        }
        for &i in &order {
            if i >= seen.len() || seen[i] {
                return domain("visit order must be a permutation of the indices");
            }
            seen[i] = true;
        }
        self.order = order;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ln_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_x.is_empty()
    }

    #[inline]
    fn point_log_lik(&self, i: usize, shape: &BetaParams) -> f64 {
        if self.flat {
            0.0
        } else {
            shape.ln_density_from_logs(self.ln_x[i], self.ln_1mx[i])
        }
    }
}

/// MCMC state. Clusters live in a slab so labels stay stable while other
/// clusters come and go.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub is_null: Vec<bool>,
    pub labels: Vec<Option<usize>>,
    clusters: Vec<Option<Cluster>>,
    free: Vec<usize>,
    pub pi: f64,
}

impl LatentState {
    /// All points alternative and in one cluster with the given atom.
    pub fn single_cluster(data: &PValueData, atom: AtomParams, pi: f64) -> Self {
        let mut state = LatentState {
            is_null: vec![false; data.len()],
            labels: vec![None; data.len()],
            clusters: vec![Some(Cluster::empty(atom))],
            free: Vec::new(),
            pi,
        };
        for &i in &data.order {
            state.attach(i, 0, data);
        }
        state
    }

    pub fn n_alt(&self) -> usize {
        self.is_null.iter().filter(|n| !**n).count()
    }

    pub fn n_null(&self) -> usize {
        self.is_null.len() - self.n_alt()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.iter().flatten().count()
    }

    /// Live clusters with their labels.
    pub fn clusters(&self) -> impl Iterator<Item = (usize, &Cluster)> {
        self.clusters
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.as_ref().map(|c| (k, c)))
    }

    /// Cluster sizes in decreasing order.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.clusters().map(|(_, c)| c.count).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    /// Checks the structural invariants of the state.
    pub fn check_invariants(&self, eps_b: f64) -> Result<()> {
        let mut counts = vec![0usize; self.clusters.len()];
        for (i, (null, label)) in self.is_null.iter().zip(&self.labels).enumerate() {
            match (null, label) {
                (true, None) => {}
                (false, Some(k)) => match self.clusters.get(*k) {
                    Some(Some(_)) => counts[*k] += 1,
                    _ => return domain(format!("point {i} points at dead cluster {k}")),
                },
                _ => return domain(format!("point {i} has inconsistent null flag and label")),
            }
        }
        for (k, c) in self.clusters() {
            if c.count == 0 || c.count != counts[k] {
                return domain(format!("cluster {k} count {} vs members {}", c.count, counts[k]));
            }
            let s = c.atom.shape;
            if !(s.a() > 0.0 && s.a() <= 1.0 && s.b() >= 1.0 + eps_b - 1e-12) {
                return domain(format!("cluster {k} shapes ({}, {}) outside support", s.a(), s.b()));
            }
        }
        Ok(())
    }

    fn attach(&mut self, i: usize, label: usize, data: &PValueData) {
        let c = self.clusters[label].as_mut().expect("live cluster");
        c.count += 1;
        c.sum_ln_x += data.ln_x[i];
        c.sum_ln_1mx += data.ln_1mx[i];
        self.labels[i] = Some(label);
        self.is_null[i] = false;
    }

    /// Removes point `i` from its cluster; returns the atom of the cluster
    /// if this emptied it.
    fn detach(&mut self, i: usize, data: &PValueData) -> Option<AtomParams> {
        let label = self.labels[i].take()?;
        let slot = &mut self.clusters[label];
        let c = slot.as_mut().expect("live cluster");
        c.count -= 1;
        c.sum_ln_x -= data.ln_x[i];
        c.sum_ln_1mx -= data.ln_1mx[i];
        if c.count == 0 {
            let atom = c.atom;
            *slot = None;
            self.free.push(label);
            Some(atom)
        } else {
            None
        }
    }

    fn open_cluster(&mut self, atom: AtomParams) -> usize {
        let cluster = Some(Cluster::empty(atom));
        match self.free.pop() {
            Some(k) => {
                self.clusters[k] = cluster;
                k
            }
            None => {
                self.clusters.push(cluster);
                self.clusters.len() - 1
            }
        }
    }
}

/// Starting state: p > 0.5 flagged null, every other point in one shared
/// cluster drawn from G₀, π drawn from its prior.
pub fn init_state(pvalues: &[f64], config: &DpConfig, seed: u64) -> Result<LatentState> {
    let data = PValueData::new(pvalues)?;
    init_state_on(&data, pvalues, config, &mut rng_from_seed(seed))
}

fn init_state_on<R: Rng + ?Sized>(
    data: &PValueData,
    pvalues: &[f64],
    config: &DpConfig,
    rng: &mut R,
) -> Result<LatentState> {
    config.validate()?;
    let atom = config.draw_base(rng);
    let pi = Beta::new(config.pi_prior.0, config.pi_prior.1)
        .expect("validated prior")
        .sample(rng);
    let mut state = LatentState {
        is_null: pvalues.iter().map(|p| *p > 0.5).collect(),
        labels: vec![None; data.len()],
        clusters: Vec::new(),
        free: Vec::new(),
        pi,
    };
    if state.is_null.iter().any(|n| !n) {
        let k = state.open_cluster(atom);
        for &i in &data.order {
            if !state.is_null[i] {
                state.attach(i, k, data);
            }
        }
    }
    Ok(state)
}

enum Choice {
    Null,
    Existing(usize),
    Aux(usize),
}

fn sample_log_weights<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> usize {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    // rounding fallthrough: last positive weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

// One algorithm-8 move for point i, optionally also offering the null group.
#[allow(clippy::too_many_arguments)]
fn reassign<R: Rng + ?Sized>(
    state: &mut LatentState,
    data: &PValueData,
    config: &DpConfig,
    aux_components: usize,
    i: usize,
    allow_null: bool,
    rng: &mut R,
    choices: &mut Vec<Choice>,
    log_w: &mut Vec<f64>,
) {
    let emptied = state.detach(i, data);
    let mut aux: Vec<AtomParams> = Vec::with_capacity(aux_components);
    if let Some(atom) = emptied {
        aux.push(atom);
    }
    while aux.len() < aux_components {
        aux.push(config.draw_base(rng));
    }

    let n_alt_rest = state.n_alt_excluding(i);
    let ln_denominator = (n_alt_rest as f64 + config.tau).ln();
    let alt_base = if allow_null {
        (1.0 - state.pi).ln() - ln_denominator
    } else {
        -ln_denominator
    };

    choices.clear();
    log_w.clear();
    if allow_null {
        choices.push(Choice::Null);
        log_w.push(state.pi.ln());
    }
    for (k, c) in state.clusters() {
        choices.push(Choice::Existing(k));
        log_w.push(alt_base + (c.count as f64).ln() + data.point_log_lik(i, &c.atom.shape));
    }
    let ln_aux_mass = (config.tau / aux_components as f64).ln();
    for (j, atom) in aux.iter().enumerate() {
        choices.push(Choice::Aux(j));
        log_w.push(alt_base + ln_aux_mass + data.point_log_lik(i, &atom.shape));
    }

    match choices[sample_log_weights(log_w, rng)] {
        Choice::Null => {
            state.is_null[i] = true;
            state.labels[i] = None;
        }
        Choice::Existing(k) => state.attach(i, k, data),
        Choice::Aux(j) => {
            let k = state.open_cluster(aux[j]);
            state.attach(i, k, data);
        }
    }
}

impl LatentState {
    fn n_alt_excluding(&self, i: usize) -> usize {
        // `i` is detached (label None) but may still carry is_null = false.
        let total: usize = self.clusters().map(|(_, c)| c.count).sum();
        debug_assert!(self.labels[i].is_none());
        total
    }
}

/// Gibbs update of every null indicator jointly with its cluster label.
///
/// For point i the options are: null with weight π; an existing cluster k
/// with weight (1-π)·n_{-i,k}/(n_{-i}+τ)·be(x_i; a_k, b_k); or one of the
/// auxiliary G₀ draws with weight (1-π)·(τ/M)/(n_{-i}+τ)·be(x_i; a, b).
pub fn update_z<R: Rng + ?Sized>(
    state: &mut LatentState,
    data: &PValueData,
    config: &DpConfig,
    settings: &ChainSettings,
    rng: &mut R,
) {
    let (mut choices, mut log_w) = (Vec::new(), Vec::new());
    for &i in &data.order {
        reassign(
            state,
            data,
            config,
            settings.aux_components,
            i,
            true,
            rng,
            &mut choices,
            &mut log_w,
        );
    }
}

/// Conjugate draw π ~ Beta(α + #null, β + #alt).
pub fn update_pi<R: Rng + ?Sized>(state: &mut LatentState, config: &DpConfig, rng: &mut R) {
    let (alpha, beta) = pi_posterior(state, config);
    state.pi = Beta::new(alpha, beta).expect("positive shapes").sample(rng);
}

/// Shapes of the conditional posterior of π given the null indicators.
pub fn pi_posterior(state: &LatentState, config: &DpConfig) -> (f64, f64) {
    (
        config.pi_prior.0 + state.n_null() as f64,
        config.pi_prior.1 + state.n_alt() as f64,
    )
}

/// Algorithm-8 relabelling of every alternative point with z held fixed.
pub fn update_clusters<R: Rng + ?Sized>(
    state: &mut LatentState,
    data: &PValueData,
    config: &DpConfig,
    settings: &ChainSettings,
    rng: &mut R,
) {
    let (mut choices, mut log_w) = (Vec::new(), Vec::new());
    for &i in &data.order {
        if state.is_null[i] {
            continue;
        }
        reassign(
            state,
            data,
            config,
            settings.aux_components,
            i,
            false,
            rng,
            &mut choices,
            &mut log_w,
        );
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MhStats {
    pub proposed: usize,
    pub accepted: usize,
}

impl MhStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn add(&mut self, other: MhStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
    }
}

/// Random-walk Metropolis on (L_a, L_b) for every live cluster.
pub fn update_cluster_params<R: Rng + ?Sized>(
    state: &mut LatentState,
    data: &PValueData,
    config: &DpConfig,
    mh_step: f64,
    rng: &mut R,
) -> MhStats {
    let mut stats = MhStats::default();
    let step = Normal::new(0.0, mh_step).expect("validated step");
    for slot in state.clusters.iter_mut() {
        let Some(c) = slot.as_mut() else { continue };
        let la = c.atom.la + step.sample(rng);
        let lb = c.atom.lb + step.sample(rng);
        let proposal = AtomParams::from_latent(la, lb, config.eps_b);
        let log_ratio = c.log_lik(&proposal.shape, data.flat) - c.log_lik(&c.atom.shape, data.flat)
            + config.ln_base(la, lb)
            - config.ln_base(c.atom.la, c.atom.lb);
        stats.proposed += 1;
        if rng.random::<f64>().ln() < log_ratio {
            c.atom = proposal;
            stats.accepted += 1;
        }
    }
    stats
}

/// One retained posterior draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorDraw {
    pub iteration: usize,
    pub pi: f64,
    pub n_clusters: usize,
    pub cluster_sizes: Vec<usize>,
    /// Cluster atoms weighted n_k/(n_alt+τ), plus one fresh G₀ atom carrying
    /// τ/(n_alt+τ).
    pub g_draw: DiscreteMixingMeasure,
}

impl PosteriorDraw {
    fn from_state<R: Rng + ?Sized>(
        iteration: usize,
        state: &LatentState,
        config: &DpConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let n_alt = state.n_alt() as f64;
        let total = n_alt + config.tau;
        let mut atoms = Vec::with_capacity(state.n_clusters() + 1);
        let mut weights = Vec::with_capacity(atoms.capacity());
        for (_, c) in state.clusters() {
            atoms.push(c.atom.shape);
            weights.push(c.count as f64 / total);
        }
        atoms.push(config.draw_base(rng).shape);
        weights.push(config.tau / total);
        Ok(PosteriorDraw {
            iteration,
            pi: state.pi,
            n_clusters: state.n_clusters(),
            cluster_sizes: state.cluster_sizes(),
            g_draw: DiscreteMixingMeasure::new(atoms, weights)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub draws: Vec<PosteriorDraw>,
    /// Metropolis acceptance rate after burn-in.
    pub acceptance_rate: f64,
    /// Random-walk scale in force after burn-in.
    pub mh_step: f64,
}

const ADAPT_WINDOW: usize = 50;
const TARGET_ACCEPTANCE: f64 = 0.3;

/// Runs the sampler: each sweep updates z, π, cluster labels and cluster
/// parameters in that order, and every `thin`-th sweep after burn-in is kept.
pub fn run_chain(pvalues: &[f64], config: &DpConfig, settings: &ChainSettings) -> Result<ChainRun> {
    let data = PValueData::new(pvalues)?;
    run_chain_on(&data, pvalues, config, settings)
}

/// [`run_chain`] over prepared data; `pvalues` seeds the initial null flags.
pub fn run_chain_on(
    data: &PValueData,
    pvalues: &[f64],
    config: &DpConfig,
    settings: &ChainSettings,
) -> Result<ChainRun> {
    config.validate()?;
    settings.validate()?;
    if pvalues.len() != data.len() {
        return domain("p-value slice and prepared data differ in length");
    }
    let mut rng = SimRng::seed_from_u64(settings.seed);
    let mut state = init_state_on(data, pvalues, config, &mut rng)?;
    let mut mh_step = settings.mh_step;
    let mut window = MhStats::default();
    let mut sampling = MhStats::default();
    let mut draws = Vec::with_capacity((settings.iterations - settings.burn_in) / settings.thin + 1);

    for iteration in 0..settings.iterations {
        update_z(&mut state, data, config, settings, &mut rng);
        update_pi(&mut state, config, &mut rng);
        update_clusters(&mut state, data, config, settings, &mut rng);
        let stats = update_cluster_params(&mut state, data, config, mh_step, &mut rng);

        if iteration < settings.burn_in {
            window.add(stats);
            if (iteration + 1) % ADAPT_WINDOW == 0 && window.proposed > 0 && mh_step > 0.0 {
                mh_step = (mh_step * (window.rate() - TARGET_ACCEPTANCE).exp()).clamp(1e-4, 5.0);
                window = MhStats::default();
            }
            continue;
        }
        sampling.add(stats);
        if (iteration - settings.burn_in) % settings.thin == 0 {
            draws.push(PosteriorDraw::from_state(iteration, &state, config, &mut rng)?);
        }
    }

    let acceptance_rate = sampling.rate();
    if acceptance_rate.is_finite() && !(0.1..=0.6).contains(&acceptance_rate) {
        warn!("Metropolis acceptance rate {acceptance_rate:.3} outside [0.1, 0.6]");
    }
    Ok(ChainRun {
        draws,
        acceptance_rate,
        mh_step,
    })
}

/// A draw G ~ DP(G₀, τ) by stick-breaking, truncated once the remaining
/// stick is below `1e-12` or after `max_atoms` atoms (the remainder is
/// renormalized away).
pub fn sample_prior_measure<R: Rng + ?Sized>(
    config: &DpConfig,
    max_atoms: usize,
    rng: &mut R,
) -> Result<DiscreteMixingMeasure> {
    config.validate()?;
    let stick = Beta::new(1.0, config.tau).expect("positive precision");
    let mut remaining = 1.0;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    while remaining > 1e-12 && atoms.len() < max_atoms.max(1) {
        let v = stick.sample(rng);
        weights.push(remaining * v);
        remaining *= 1.0 - v;
        atoms.push(config.draw_base(rng).shape);
    }
    DiscreteMixingMeasure::normalized(atoms, weights)
}

/// KS comparison of data-free chain output against the prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorCheckReport {
    pub draws: usize,
    pub pi_ks: f64,
    pub pi_pvalue: f64,
    /// Fresh G₀ atom carried by every draw.
    pub a_pvalue: f64,
    pub b_pvalue: f64,
    /// Atom of the occupied cluster, in draws where the point is alternative.
    pub cluster_a_pvalue: f64,
    pub cluster_b_pvalue: f64,
    pub min_b: f64,
    pub passes: bool,
}

const PRIOR_CHECK_LEVEL: f64 = 0.01;

/// Runs the chain on a single observation with constant likelihood. With
/// no information in the data the retained draws must reproduce the prior:
/// π ~ Beta(α_π, β_π) and cluster shapes distributed as the pushforward of G₀.
pub fn prior_reproduction_check(config: &DpConfig, settings: &ChainSettings) -> Result<PriorCheckReport> {
    let data = PValueData::flat(1)?;
    let run = run_chain_on(&data, &[0.5], config, settings)?;
    let pis: Vec<f64> = run.draws.iter().map(|d| d.pi).collect();
    let fresh: Vec<BetaParams> = run
        .draws
        .iter()
        .map(|d| *d.g_draw.atoms().last().expect("fresh atom"))
        .collect();
    let occupied: Vec<BetaParams> = run
        .draws
        .iter()
        .filter(|d| d.n_clusters == 1)
        .map(|d| d.g_draw.atoms()[0])
        .collect();

    let (alpha, beta) = config.pi_prior;
    let pi_cdf = |x: f64| beta_reg(alpha, beta, x.clamp(0.0, 1.0)).unwrap_or(f64::NAN);
    let pi_ks = ks_statistic(&pis, pi_cdf);
    let ks_p = |xs: &[f64], cdf: &dyn Fn(f64) -> f64| {
        if xs.is_empty() {
            return 0.0;
        }
        ks_pvalue(ks_statistic(xs, cdf), xs.len())
    };
    let a_of = |v: &[BetaParams]| v.iter().map(|p| p.a()).collect::<Vec<_>>();
    let b_of = |v: &[BetaParams]| v.iter().map(|p| p.b()).collect::<Vec<_>>();
    let cdf_a = |t: f64| config.base_cdf_a(t);
    let cdf_b = |t: f64| config.base_cdf_b(t);

    let pi_pvalue = ks_pvalue(pi_ks, pis.len());
    let a_pvalue = ks_p(&a_of(&fresh), &cdf_a);
    let b_pvalue = ks_p(&b_of(&fresh), &cdf_b);
    let cluster_a_pvalue = ks_p(&a_of(&occupied), &cdf_a);
    let cluster_b_pvalue = ks_p(&b_of(&occupied), &cdf_b);
    let min_b = fresh
        .iter()
        .chain(&occupied)
        .map(|p| p.b())
        .fold(f64::INFINITY, f64::min);
    let passes = [pi_pvalue, a_pvalue, b_pvalue, cluster_a_pvalue, cluster_b_pvalue]
        .iter()
        .all(|p| *p > PRIOR_CHECK_LEVEL)
        && min_b >= 1.0 + config.eps_b;
    Ok(PriorCheckReport {
        draws: pis.len(),
        pi_ks,
        pi_pvalue,
        a_pvalue,
        b_pvalue,
        cluster_a_pvalue,
        cluster_b_pvalue,
        min_b,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(iterations: usize, burn_in: usize, thin: usize, seed: u64) -> ChainSettings {
        ChainSettings {
            iterations,
            burn_in,
            thin,
            seed,
            ..ChainSettings::default()
        }
    }

    #[test]
    fn init_rejects_empty_input() {
        assert!(init_state(&[], &DpConfig::default(), 1).is_err());
    }

    #[test]
    fn init_is_deterministic_and_thresholds() {
        let p = [0.1, 0.7, 0.3, 0.9];
        let a = init_state(&p, &DpConfig::default(), 9).unwrap();
        let b = init_state(&p, &DpConfig::default(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.is_null, vec![false, true, false, true]);
        assert_eq!(a.n_clusters(), 1);
        a.check_invariants(0.05).unwrap();

        let all_null = init_state(&[0.6, 0.8], &DpConfig::default(), 9).unwrap();
        assert!(all_null.is_null.iter().all(|n| *n));
        assert_eq!(all_null.n_clusters(), 0);
    }

    #[test]
    fn pi_one_makes_everything_null() {
        let p = [0.01, 0.2, 0.5];
        let data = PValueData::new(&p).unwrap();
        let config = DpConfig::default();
        let mut state = init_state(&p, &config, 1).unwrap();
        state.pi = 1.0;
        update_z(&mut state, &data, &config, &ChainSettings::default(), &mut rng_from_seed(2));
        assert!(state.is_null.iter().all(|n| *n));
        assert_eq!(state.n_clusters(), 0);
    }

    #[test]
    fn zero_likelihood_point_goes_null() {
        let p = [0.01, 0.02, 1.0 - 1e-12];
        let data = PValueData::new(&p).unwrap();
        let config = DpConfig {
            tau: 1e-8,
            ..DpConfig::default()
        };
        let atom = AtomParams::from_latent(0.7, 2.0, config.eps_b);
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let mut state = LatentState::single_cluster(&data, atom, 0.5);
            update_z(&mut state, &data, &config, &ChainSettings::default(), &mut rng);
            assert!(state.is_null[2]);
        }
    }

    #[test]
    fn pi_update_is_conjugate() {
        let config = DpConfig::default();
        let data = PValueData::new(&vec![0.9; 100]).unwrap();
        let mut state = init_state(&vec![0.9; 100], &config, 3).unwrap();
        assert_eq!(pi_posterior(&state, &config), (101.0, 1.0));
        let _ = data;
        let n = 20_000;
        let mut rng = rng_from_seed(11);
        let mean = (0..n)
            .map(|_| {
                update_pi(&mut state, &config, &mut rng);
                state.pi
            })
            .sum::<f64>()
            / n as f64;
        let (a, b) = (101.0_f64, 1.0_f64);
        let sd = (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt() / (n as f64).sqrt();
        assert!((mean - a / (a + b)).abs() < 4.0 * sd, "mean {mean}");
    }

    #[test]
    fn single_alt_point_always_lands_in_a_cluster() {
        let p = [0.05];
        let data = PValueData::new(&p).unwrap();
        let config = DpConfig::default();
        let mut state = init_state(&p, &config, 5).unwrap();
        let mut rng = rng_from_seed(6);
        for _ in 0..100 {
            update_clusters(&mut state, &data, &config, &ChainSettings::default(), &mut rng);
            assert_eq!(state.n_clusters(), 1);
            state.check_invariants(config.eps_b).unwrap();
        }
    }

    #[test]
    fn tiny_precision_never_opens_clusters() {
        let p: Vec<f64> = (1..=50).map(|k| k as f64 / 200.0).collect();
        let data = PValueData::new(&p).unwrap();
        let config = DpConfig {
            tau: 1e-8,
            ..DpConfig::default()
        };
        let atom = AtomParams::from_latent(0.7, 1.0, config.eps_b);
        let mut state = LatentState::single_cluster(&data, atom, 0.5);
        let mut rng = rng_from_seed(8);
        for _ in 0..50 {
            update_clusters(&mut state, &data, &config, &ChainSettings::default(), &mut rng);
            assert_eq!(state.n_clusters(), 1);
        }
    }

    #[test]
    fn zero_step_always_accepts() {
        let p = [0.1, 0.2, 0.3];
        let data = PValueData::new(&p).unwrap();
        let config = DpConfig::default();
        let atom = AtomParams::from_latent(0.5, 0.5, config.eps_b);
        let mut state = LatentState::single_cluster(&data, atom, 0.5);
        let stats = update_cluster_params(&mut state, &data, &config, 0.0, &mut rng_from_seed(1));
        assert_eq!(stats.accepted, stats.proposed);
    }

    #[test]
    fn chain_counts_and_determinism() {
        let p: Vec<f64> = (1..=40).map(|k| (k as f64 / 41.0).powi(2)).collect();
        let config = DpConfig::default();
        let one = run_chain(&p, &config, &settings(11, 10, 1, 3)).unwrap();
        assert_eq!(one.draws.len(), 1);

        let a = run_chain(&p, &config, &settings(60, 20, 4, 3)).unwrap();
        let b = run_chain(&p, &config, &settings(60, 20, 4, 3)).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.draws.len(), 10);
        for d in &a.draws {
            let total: f64 = d.g_draw.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(d.g_draw.atoms().iter().all(|s| s.a() <= 1.0 && s.b() >= 1.05));
        }
    }

    #[test]
    fn chain_rejects_bad_settings() {
        let p = [0.2, 0.4];
        let config = DpConfig::default();
        assert!(run_chain(&p, &config, &settings(10, 10, 1, 1)).is_err());
        assert!(run_chain(&p, &config, &settings(10, 5, 0, 1)).is_err());
        let bad = DpConfig {
            tau: -1.0,
            ..DpConfig::default()
        };
        assert!(run_chain(&p, &bad, &settings(10, 5, 1, 1)).is_err());
    }

    #[test]
    fn stick_breaking_draw_is_normalized() {
        let config = DpConfig::default();
        let g = sample_prior_measure(&config, 500, &mut rng_from_seed(2)).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g.atoms().iter().all(|p| p.b() >= 1.05));
    }
}
