//! Command-line front end: a flat TOML config, six subcommands and
//! deterministic output files.
//!
//! Every CSV starts with one `#` metadata line
//! (`# pfdr <version> seed=<seed> config_hash=<hash>`); JSON outputs carry
//! the same information under `meta`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::debug;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dp_mcmc::{run_chain, ChainSettings, DpConfig};
use crate::error::{Error, Result};
use crate::estimators::summarize;
use crate::harness::{aggregate_sweep, chain_seed, compare_estimators, run_sweep, trend_report, truth_of, SweepSpec};
use crate::mixture_core::{
    cm_check, default_cm_grid, pi_of_f, tail_envelope_check, BetaParams, CmTransform, DiscreteMixingMeasure,
    PValueMixture, TailEnvelope, CM_MAX_ORDER_LIMIT,
};
use crate::pvalue_models::{density_curve, sample_pvalues, Alternative, ModelKind, ScenarioSpec, Sidedness, TestModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const OUT_DIR_ENV: &str = "PFDR_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AltKind {
    /// Explicit `alt_atoms` / `alt_weights`.
    BetaMixture,
    Normal,
    T,
    Exponential,
}

/// Every setting of every subcommand. All fields default; see
/// [`RunConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub log_level: LogLevel,
    /// Worker threads for sweeps; 0 picks the number of cores.
    pub threads: usize,

    pub pi0: f64,
    pub m: usize,
    pub alt_kind: AltKind,
    /// (a, b) pairs of the beta-mixture alternative.
    pub alt_atoms: Vec<[f64; 2]>,
    pub alt_weights: Vec<f64>,
    pub theta0: f64,
    pub theta1: f64,
    pub sidedness: Sidedness,
    /// Per-test sample size of the parametric alternatives.
    pub n_obs: u32,
    pub df: u32,

    pub tau: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub eps_b: f64,
    pub pi_prior: [f64; 2],

    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub mh_step: f64,
    pub aux_components: usize,

    pub gamma_grid: Vec<f64>,
    pub credible_level: f64,
    pub storey_lambda: f64,

    pub m_list: Vec<usize>,
    pub replicates: usize,
    pub epsilon: f64,
    /// Write measured wall times into sweep.csv (breaks byte-identity).
    pub record_timing: bool,

    pub plot_points: usize,
    pub cm_max_order: usize,
    pub lambda_max: f64,
    pub envelope_c: f64,
    pub envelope_eps: f64,
    pub envelope_delta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let dp = DpConfig::default();
        let chain = ChainSettings::default();
        RunConfig {
            seed: 1,
            output_dir: "pfdr-out".into(),
            log_level: LogLevel::Info,
            threads: 0,
            pi0: 0.8,
            m: 2000,
            alt_kind: AltKind::BetaMixture,
            alt_atoms: vec![[0.5, 3.0]],
            alt_weights: vec![1.0],
            theta0: 0.0,
            theta1: 1.0,
            sidedness: Sidedness::OneSided,
            n_obs: 1,
            df: 10,
            tau: dp.tau,
            sigma_a: dp.sigma_a,
            sigma_b: dp.sigma_b,
            eps_b: dp.eps_b,
            pi_prior: [dp.pi_prior.0, dp.pi_prior.1],
            iterations: chain.iterations,
            burn_in: chain.burn_in,
            thin: chain.thin,
            mh_step: chain.mh_step,
            aux_components: chain.aux_components,
            gamma_grid: vec![0.01, 0.025, 0.05, 0.1, 0.2],
            credible_level: 0.9,
            storey_lambda: 0.5,
            m_list: vec![200, 1000, 5000],
            replicates: 10,
            epsilon: 0.05,
            record_timing: false,
            plot_points: 199,
            cm_max_order: 8,
            lambda_max: crate::mixture_core::DEFAULT_LAMBDA_MAX,
            envelope_c: 1.0,
            envelope_eps: 0.05,
            envelope_delta: 0.5,
        }
    }
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn require(ok: bool, field: &str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(config_err(field, message()))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    require(v > 0.0 && v.is_finite(), field, || format!("must be positive and finite, got {v}"))
}

fn open_unit(field: &str, v: f64) -> Result<()> {
    require(v > 0.0 && v < 1.0, field, || format!("must lie in (0, 1), got {v}"))
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Parses flat `key = value` TOML into a fully defaulted, validated config.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| config_err("<document>", e.message().trim().to_string()))?;
    let known = toml::Table::try_from(RunConfig::default()).expect("default config serializes");
    let mut unknown: Vec<String> = table.keys().filter(|k| !known.contains_key(*k)).cloned().collect();
    if !unknown.is_empty() {
        unknown.sort();
        return Err(Error::UnknownKeys(unknown));
    }
    // Deserialize key by key so a type mismatch names its field.
    for (key, value) in &table {
        let mut single = toml::Table::new();
        single.insert(key.clone(), value.clone());
        single
            .try_into::<RunConfig>()
            .map_err(|e| config_err(key, e.message().trim().to_string()))?;
    }
    let config: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| config_err("<document>", e.message().trim().to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.seed <= i64::MAX as u64, "seed", || {
            format!("must be at most {} to round-trip through TOML", i64::MAX)
        })?;
        require(!self.output_dir.is_empty(), "output_dir", || "must not be empty".into())?;
        require((0.0..=1.0).contains(&self.pi0), "pi0", || format!("must lie in [0, 1], got {}", self.pi0))?;
        require(self.m >= 1, "m", || "must be at least 1".into())?;
        match self.alt_kind {
            AltKind::BetaMixture => {
                self.mixing()?;
            }
            _ => {
                self.test_model()?;
            }
        }
        positive("tau", self.tau)?;
        positive("sigma_a", self.sigma_a)?;
        positive("sigma_b", self.sigma_b)?;
        positive("eps_b", self.eps_b)?;
        positive("pi_prior[0]", self.pi_prior[0])?;
        positive("pi_prior[1]", self.pi_prior[1])?;
        require(self.iterations > self.burn_in, "iterations", || {
            format!("must exceed burn_in ({}), got {}", self.burn_in, self.iterations)
        })?;
        require(self.thin >= 1, "thin", || "must be at least 1".into())?;
        require(self.mh_step >= 0.0 && self.mh_step.is_finite(), "mh_step", || {
            format!("must be finite and nonnegative, got {}", self.mh_step)
        })?;
        require(self.aux_components >= 1, "aux_components", || "must be at least 1".into())?;
        require(!self.gamma_grid.is_empty(), "gamma_grid", || "must not be empty".into())?;
        for (k, g) in self.gamma_grid.iter().enumerate() {
            open_unit(&format!("gamma_grid[{k}]"), *g)?;
        }
        require(strictly_increasing(&self.gamma_grid), "gamma_grid", || "must be strictly increasing".into())?;
        open_unit("credible_level", self.credible_level)?;
        open_unit("storey_lambda", self.storey_lambda)?;
        require(
            !self.m_list.is_empty() && self.m_list[0] >= 1 && strictly_increasing(&self.m_list),
            "m_list",
            || "must be positive and strictly increasing".into(),
        )?;
        require(self.replicates >= 3, "replicates", || format!("must be at least 3, got {}", self.replicates))?;
        positive("epsilon", self.epsilon)?;
        require(self.plot_points >= 1, "plot_points", || "must be at least 1".into())?;
        require(
            (1..=CM_MAX_ORDER_LIMIT).contains(&self.cm_max_order),
            "cm_max_order",
            || format!("must lie in 1..={CM_MAX_ORDER_LIMIT}, got {}", self.cm_max_order),
        )?;
        open_unit("lambda_max", self.lambda_max)?;
        positive("envelope_c", self.envelope_c)?;
        positive("envelope_eps", self.envelope_eps)?;
        open_unit("envelope_delta", self.envelope_delta)?;
        Ok(())
    }

    /// The effective config as TOML; `parse_config` inverts it.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::to_toml`], with
    /// `output_dir` blanked so the hash does not depend on where results go.
    pub fn hash(&self) -> String {
        let located = RunConfig {
            output_dir: String::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(located.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn mixing(&self) -> Result<DiscreteMixingMeasure> {
        require(!self.alt_atoms.is_empty(), "alt_atoms", || "must not be empty".into())?;
        require(self.alt_atoms.len() == self.alt_weights.len(), "alt_weights", || {
            format!("needs one weight per atom ({} atoms)", self.alt_atoms.len())
        })?;
        let atoms = self
            .alt_atoms
            .iter()
            .enumerate()
            .map(|(k, [a, b])| BetaParams::new(*a, *b).map_err(|e| config_err(&format!("alt_atoms[{k}]"), e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        DiscreteMixingMeasure::new(atoms, self.alt_weights.clone()).map_err(|e| config_err("alt_weights", e.to_string()))
    }

    pub fn test_model(&self) -> Result<TestModel> {
        let kind = match self.alt_kind {
            AltKind::Normal => ModelKind::NormalLocation,
            AltKind::T => ModelKind::TLocation { df: self.df },
            AltKind::Exponential => ModelKind::ExponentialScale,
            AltKind::BetaMixture => return Err(config_err("alt_kind", "beta-mixture has no test model")),
        };
        TestModel::new(kind, self.theta0, self.sidedness, self.n_obs).map_err(|e| config_err("alt_kind", e.to_string()))
    }

    pub fn scenario(&self) -> Result<ScenarioSpec> {
        let alt = match self.alt_kind {
            AltKind::BetaMixture => Alternative::Mixture(self.mixing()?),
            _ => Alternative::Test {
                model: self.test_model()?,
                theta1: self.theta1,
            },
        };
        Ok(ScenarioSpec {
            pi0: self.pi0,
            alt,
            m: self.m,
            seed: self.seed,
        })
    }

    pub fn dp_config(&self) -> DpConfig {
        DpConfig {
            tau: self.tau,
            sigma_a: self.sigma_a,
            sigma_b: self.sigma_b,
            eps_b: self.eps_b,
            pi_prior: (self.pi_prior[0], self.pi_prior[1]),
        }
    }

    /// Chain settings; the chain seed is derived from the master seed.
    pub fn chain_settings(&self) -> ChainSettings {
        ChainSettings {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: chain_seed(self.seed),
            mh_step: self.mh_step,
            aux_components: self.aux_components,
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        Ok(SweepSpec {
            m_list: self.m_list.clone(),
            replicates: self.replicates,
            scenario: self.scenario()?,
            epsilon: self.epsilon,
            gamma_grid: self.gamma_grid.clone(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "pfdr", version, about = "pFDR estimation with Dirichlet mixtures of beta densities")]
struct Cli {
    /// Flat TOML config; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config and $PFDR_OUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate p-values from the configured scenario (pvalues.csv).
    Simulate,
    /// Fit the mixture to p-values (draws.csv, gdraws.json, summary.json).
    Estimate {
        /// P-value CSV with a `pvalue` column; defaults to <out>/pvalues.csv.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// π(F), complete monotonicity and tail envelope of the configured mixture.
    Diagnose,
    /// Consistency sweep over m_list × replicates (sweep.csv).
    Sweep,
    /// Posterior pFDR against the truth and Storey's estimator (comparison.csv).
    Compare,
    /// P-value densities on a grid (density.csv).
    Plotdata,
}

struct Context {
    config: RunConfig,
    out: PathBuf,
    threads: usize,
    header: String,
}

impl Context {
    fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": "pfdr",
            "version": VERSION,
            "seed": self.config.seed,
            "config_hash": self.config.hash(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn csv_writer(&self, name: &str) -> Result<csv::Writer<fs::File>> {
        let mut file = fs::File::create(self.path(name))?;
        writeln!(file, "{}", self.header)?;
        Ok(csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file))
    }

    fn write_json(&self, name: &str, mut body: serde_json::Value) -> Result<()> {
        body["meta"] = self.meta();
        let mut text = serde_json::to_string_pretty(&body)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }
}

/// Reads p-values from a CSV with a `pvalue` column (or a single column).
/// Errors carry the 1-based line number of the offending row.
pub fn read_pvalues(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = match headers.iter().position(|h| h.trim() == "pvalue") {
        Some(c) => c,
        None if headers.len() == 1 => 0,
        None => {
            return Err(Error::Input {
                row: 1,
                message: "missing `pvalue` column".into(),
            })
        }
    };
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Input {
                row,
                message: e.to_string(),
            }
        })?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let field = record.get(column).ok_or_else(|| Error::Input {
            row,
            message: "missing pvalue field".into(),
        })?;
        let p: f64 = field.trim().parse().map_err(|_| Error::Input {
            row,
            message: format!("cannot parse `{field}` as a number"),
        })?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Input {
                row,
                message: format!("p-value {p} outside (0, 1)"),
            });
        }
        values.push(p);
    }
    if values.is_empty() {
        return Err(Error::Input {
            row: 1,
            message: "no p-values".into(),
        });
    }
    Ok(values)
}

fn simulate(ctx: &Context) -> Result<()> {
    let sim = sample_pvalues(&ctx.config.scenario()?)?;
    let mut w = ctx.csv_writer("pvalues.csv")?;
    w.write_record(["index", "pvalue", "is_null"])?;
    for (i, (p, null)) in sim.pvalues.iter().zip(&sim.is_null).enumerate() {
        w.write_record([i.to_string(), p.to_string(), (*null as u8).to_string()])?;
    }
    w.flush()?;
    println!("wrote {} p-values to {}", sim.pvalues.len(), ctx.path("pvalues.csv").display());
    Ok(())
}

fn estimate(ctx: &Context, input: Option<PathBuf>) -> Result<()> {
    let input = input.unwrap_or_else(|| ctx.path("pvalues.csv"));
    let pvalues = read_pvalues(&input)?;
    let run = run_chain(&pvalues, &ctx.config.dp_config(), &ctx.config.chain_settings())?;
    let summary = summarize(&run.draws, &ctx.config.gamma_grid, ctx.config.credible_level)?;

    let mut w = ctx.csv_writer("draws.csv")?;
    w.write_record(["iteration", "pi", "n_clusters"])?;
    for d in &run.draws {
        w.write_record([d.iteration.to_string(), d.pi.to_string(), d.n_clusters.to_string()])?;
    }
    w.flush()?;

    let gdraws: Vec<serde_json::Value> = run
        .draws
        .iter()
        .map(|d| {
            serde_json::json!({
                "iteration": d.iteration,
                "pi": d.pi,
                "atoms": d.g_draw.atoms().iter().map(|p| [p.a(), p.b()]).collect::<Vec<_>>(),
                "weights": d.g_draw.weights(),
            })
        })
        .collect();
    ctx.write_json("gdraws.json", serde_json::json!({ "draws": gdraws }))?;
    ctx.write_json(
        "summary.json",
        serde_json::json!({
            "pi_mean": summary.pi_mean,
            "pi_ci": [summary.pi_ci.0, summary.pi_ci.1],
            "ess_pi": summary.ess_pi,
            "pfdr_curve": summary.pfdr_curve,
            "credible_level": summary.level,
            "clipped": summary.clipped,
            "draws": run.draws.len(),
            "acceptance_rate": run.acceptance_rate,
        }),
    )?;
    println!(
        "{} draws; pi mean {:.4} ({:.4}, {:.4}); ess {:.0}",
        run.draws.len(),
        summary.pi_mean,
        summary.pi_ci.0,
        summary.pi_ci.1,
        summary.ess_pi
    );
    Ok(())
}

fn diagnose(ctx: &Context) -> Result<()> {
    let c = &ctx.config;
    if c.alt_kind != AltKind::BetaMixture {
        return Err(config_err("alt_kind", "diagnose needs a beta-mixture alternative"));
    }
    let mixing = c.mixing()?;
    let model = PValueMixture::new(c.pi0, mixing.clone())?;
    let pi_f = pi_of_f(&model, c.lambda_max)?;
    let grid = default_cm_grid();
    let cm_cdf = cm_check(&mixing, CmTransform::CdfAtExpNeg, c.cm_max_order, &grid)?;
    let cm_sf = cm_check(&mixing, CmTransform::SurvivalAtOneMinusExpNeg, c.cm_max_order, &grid)?;
    let envelope = TailEnvelope::new(c.envelope_c, c.envelope_eps, c.envelope_delta)?;
    let tail = tail_envelope_check(&mixing, &envelope)?;
    ctx.write_json(
        "diagnose.json",
        serde_json::json!({
            "pi0": c.pi0,
            "pi_of_F": pi_f,
            "cm_orders_passed": cm_cdf.orders_passed,
            "cm_orders_passed_survival": cm_sf.orders_passed,
            "cm_max_order": c.cm_max_order,
            "tail_envelope_ok": tail.ok,
            "first_envelope_violation": tail.first_violation,
            "density_at_one": mixing.density_at_one(),
        }),
    )?;
    println!(
        "pi(F) = {pi_f:.6}; completely monotone to order {} (cdf) / {} (survival); tail envelope {}",
        cm_cdf.orders_passed,
        cm_sf.orders_passed,
        if tail.ok { "holds" } else { "violated" }
    );
    Ok(())
}

fn sweep(ctx: &Context) -> Result<()> {
    let c = &ctx.config;
    let spec = c.sweep_spec()?;
    let rows = run_sweep(&spec, &c.dp_config(), &c.chain_settings(), ctx.threads)?;
    let mut w = ctx.csv_writer("sweep.csv")?;
    w.write_record([
        "m",
        "replicate",
        "ball_mass",
        "abs_pi_err",
        "sup_F_err",
        "max_pfdr_err",
        "wall_time_s",
    ])?;
    for r in &rows {
        let wall = if c.record_timing { r.wall_time_s } else { 0.0 };
        w.write_record([
            r.m.to_string(),
            r.replicate.to_string(),
            r.ball_mass.to_string(),
            r.abs_pi_err.to_string(),
            r.sup_f_err.to_string(),
            r.max_pfdr_err.to_string(),
            wall.to_string(),
        ])?;
    }
    w.flush()?;
    let aggregates = aggregate_sweep(&rows, c.pi0);
    let trend = trend_report(&aggregates);
    let failures: Vec<_> = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| serde_json::json!({"m": r.m, "replicate": r.replicate, "error": e})))
        .collect();
    ctx.write_json(
        "sweep_summary.json",
        serde_json::json!({
            "per_m": aggregates,
            "trend": trend,
            "failed_cells": failures,
            "note": "finite-m thresholds are calibration choices; the limits are asymptotic",
        }),
    )?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>12}", "m", "ball_mass", "|pi err|", "sup_F_err", "max_pfdr_err");
    for a in &aggregates {
        println!(
            "{:>6} {:>10.4} {:>10.4} {:>10.4} {:>12.4}",
            a.m, a.median_ball_mass, a.median_abs_pi_err, a.median_sup_f_err, a.median_max_pfdr_err
        );
    }
    if !trend.flagged.is_empty() {
        println!("trend flagged for: {}", trend.flagged.join(", "));
    }
    Ok(())
}

fn compare(ctx: &Context) -> Result<()> {
    let c = &ctx.config;
    let scenario = c.scenario()?;
    truth_of(&scenario)?;
    let cmp = compare_estimators(
        &scenario,
        &c.dp_config(),
        &c.chain_settings(),
        &[c.storey_lambda],
        &c.gamma_grid,
        c.credible_level,
    )?;
    let mut w = ctx.csv_writer("comparison.csv")?;
    w.write_record(["gamma", "true_pfdr", "bayes_mean", "bayes_lo", "bayes_hi", "storey"])?;
    for r in &cmp.rows {
        w.write_record([
            r.gamma.to_string(),
            r.true_pfdr.to_string(),
            r.bayes_mean.to_string(),
            r.bayes_lo.to_string(),
            r.bayes_hi.to_string(),
            r.storey.to_string(),
        ])?;
    }
    w.flush()?;
    println!(
        "pi0 {}: posterior mean {:.4}, Storey (lambda {}) {:.4}",
        cmp.true_pi0, cmp.bayes_pi_mean, cmp.storey_pi[0].0, cmp.storey_pi[0].1
    );
    Ok(())
}

fn plotdata(ctx: &Context) -> Result<()> {
    let c = &ctx.config;
    let points: Vec<(f64, f64)> = match c.alt_kind {
        AltKind::BetaMixture => {
            let mixing = c.mixing()?;
            (1..=c.plot_points)
                .map(|k| {
                    let x = k as f64 / (c.plot_points + 1) as f64;
                    mixing.density(x).map(|d| (x, d))
                })
                .collect::<Result<_>>()?
        }
        _ => density_curve(&c.test_model()?, c.theta1, c.plot_points)?,
    };
    let mut w = ctx.csv_writer("density.csv")?;
    w.write_record(["x", "alt_density", "mixture_density"])?;
    for (x, h) in &points {
        let f = c.pi0 + (1.0 - c.pi0) * h;
        w.write_record([x.to_string(), h.to_string(), f.to_string()])?;
    }
    w.flush()?;
    println!("wrote {} points to {}", points.len(), ctx.path("density.csv").display());
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => parse_config(&fs::read_to_string(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    let out = match (cli.out, std::env::var_os(OUT_DIR_ENV)) {
        (Some(out), _) => out,
        (None, Some(env)) if !env.is_empty() => PathBuf::from(env),
        _ => PathBuf::from(&config.output_dir),
    };
    config.output_dir = out.to_string_lossy().into_owned();
    config.validate()?;
    let _ = env_logger::Builder::new().filter_level(config.log_level.filter()).try_init();

    fs::create_dir_all(&out)?;
    let header = format!("# pfdr {VERSION} seed={} config_hash={}", config.seed, config.hash());
    fs::write(out.join("effective_config.toml"), format!("{header}\n{}", config.to_toml()))?;
    println!("seed = {}", config.seed);
    debug!("effective config:\n{}", config.to_toml());

    let ctx = Context {
        threads: config.threads,
        config,
        out,
        header,
    };
    match cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Estimate { input } => estimate(&ctx, input),
        Command::Diagnose => diagnose(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Compare => compare(&ctx),
        Command::Plotdata => plotdata(&ctx),
    }
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on a runtime failure, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn negative_tau_names_the_field() {
        match parse_config("tau = -1.0") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "tau"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        match parse_config("tua = 1.0\nseed = 3\nburnin = 5") {
            Err(Error::UnknownKeys(keys)) => assert_eq!(keys, vec!["burnin", "tua"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_mismatch_names_the_field() {
        match parse_config("m = \"lots\"") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "m"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn effective_config_round_trips() {
        let mut c = RunConfig::default();
        c.tau = 0.37;
        c.alt_atoms = vec![[0.3, 2.0], [1.0, 4.5]];
        c.alt_weights = vec![0.25, 0.75];
        c.gamma_grid = vec![0.001, 0.1 + 0.2];
        c.sidedness = Sidedness::TwoSided;
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 2, ..RunConfig::default() };
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn weights_must_match_atoms() {
        match parse_config("alt_weights = [0.5, 0.5]") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "alt_weights"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["pfdr", "frobnicate"]), 2);
        assert_eq!(run(["pfdr"]), 2);
    }
}
