//! Acceptance criteria 1-9. Each test prints one PASS/FAIL line with the
//! measured quantities and its runtime, then asserts. Tests share a lock so
//! runtimes are not inflated by one another.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use pfdr::dp_mcmc::{
    pi_posterior, prior_reproduction_check, sample_prior_measure, update_cluster_params, update_pi, AtomParams,
    ChainSettings, DpConfig, LatentState, PValueData,
};
use pfdr::estimators::effective_sample_size;
use pfdr::harness::{aggregate_sweep, run_sweep, SweepSpec};
use pfdr::mixture_core::{
    cm_check, default_cm_grid, mixture_density, pi_of_f, pi_of_f_on_grid, pi_grid, prop8_construct,
    tail_envelope_check, BetaParams, CmTransform, DiscreteMixingMeasure, FnCdf, PValueMixture, ShapeMeasure,
    TailEnvelope, DEFAULT_LAMBDA_MAX,
};
use pfdr::pvalue_models::{
    pvalue_density_two_sided, rng_from_seed, sample_pvalues, Alternative, ModelKind, ScenarioSpec, Sidedness,
    TestModel,
};
use pfdr::special::{beta_reg, integrate, ks_pvalue, ks_statistic, ln_beta};
use rand::Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn report(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration, limit: Option<Duration>) {
    let within = limit.is_none_or(|l| elapsed <= l);
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    let limit = limit.map(|l| format!(" (limit {:.0?})", l)).unwrap_or_default();
    println!("criterion {id} [{name}]: {verdict} | {detail} | {:.2?}{limit}", elapsed);
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(within, "criterion {id} exceeded its runtime limit: {elapsed:.2?}");
}

fn random_mixture<R: Rng>(rng: &mut R, a_range: (f64, f64), b_range: (f64, f64)) -> DiscreteMixingMeasure {
    let k = rng.random_range(1..=4);
    let atoms = (0..k)
        .map(|_| {
            let a = rng.random_range(a_range.0..=a_range.1);
            let b = rng.random_range(b_range.0..=b_range.1);
            BetaParams::new(a, b).unwrap()
        })
        .collect();
    let weights = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    DiscreteMixingMeasure::normalized(atoms, weights).unwrap()
}

#[test]
fn criterion_1_two_sided_floor() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let model = TestModel::new(ModelKind::NormalLocation, 0.0, Sidedness::TwoSided, 4).unwrap();
    let value = pvalue_density_two_sided(&model, 0.5, 1.0 - 1e-8).unwrap();
    let err = (value - (-0.5f64).exp()).abs();
    report(
        1,
        "two-sided floor",
        err < 1e-6,
        format!("density {value:.12}, |err| {err:.2e} (tol 1e-6)"),
        start.elapsed(),
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn criterion_2_exponential_pvalues_are_beta() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let model = TestModel::new(ModelKind::ExponentialScale, 1.0, Sidedness::OneSided, 1).unwrap();
    let spec = ScenarioSpec {
        pi0: 0.0,
        alt: Alternative::Test { model, theta1: 2.0 },
        m: 100_000,
        seed: 2024,
    };
    let p = sample_pvalues(&spec).unwrap().pvalues;
    let d = ks_statistic(&p, |x| x.clamp(0.0, 1.0).sqrt());
    report(
        2,
        "exponential p-values are be(0.5, 1)",
        d < 0.01,
        format!("KS statistic {d:.5} over 1e5 draws (limit 0.01)"),
        start.elapsed(),
        Some(Duration::from_secs(5)),
    );
}

#[test]
fn criterion_3_pi_of_f_oracle() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = rng_from_seed(3);
    let grid = pi_grid(DEFAULT_LAMBDA_MAX);
    let mut worst_power: f64 = 0.0;
    for _ in 0..100 {
        let pi = rng.random_range(0.0..=1.0);
        let a = rng.random_range(0.01..=1.0);
        // F(x) = πx + (1-π)x^a, written as a closure so no library cdf is involved
        let f = FnCdf(move |x: f64| pi * x + (1.0 - pi) * x.powf(a));
        let want = pi + (1.0 - pi) * a;
        worst_power = worst_power.max((pi_of_f_on_grid(&f, &grid).unwrap() - want).abs());
    }
    let mut worst_mixture: f64 = 0.0;
    for _ in 0..100 {
        let pi = rng.random_range(0.0..=1.0);
        let g = random_mixture(&mut rng, (0.05, 1.0), (1.0 + 1e-9, 10.0));
        let model = PValueMixture::new(pi, g).unwrap();
        worst_mixture = worst_mixture.max((pi_of_f(&model, DEFAULT_LAMBDA_MAX).unwrap() - pi).abs());
    }
    report(
        3,
        "pi(F) oracle",
        worst_power < 1e-4 && worst_mixture < 1e-4,
        format!("max |err| power family {worst_power:.2e}, b>1 mixtures {worst_mixture:.2e} (tol 1e-4)"),
        start.elapsed(),
        Some(Duration::from_secs(10)),
    );
}

#[test]
fn criterion_4_complete_monotonicity() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = rng_from_seed(4);
    let grid = default_cm_grid();
    let mut power_pass = 0;
    let mut reflected_pass = 0;
    for _ in 0..50 {
        let g = random_mixture(&mut rng, (0.02, 1.0), (1.0, 1.0));
        power_pass += cm_check(&g, CmTransform::CdfAtExpNeg, 8, &grid).unwrap().passes as usize;
        let g = random_mixture(&mut rng, (1.0, 1.0), (1.0, 20.0));
        reflected_pass += cm_check(&g, CmTransform::SurvivalAtOneMinusExpNeg, 8, &grid).unwrap().passes as usize;
    }
    let be22 = FnCdf(|x: f64| beta_reg(2.0, 2.0, x).unwrap());
    let r = cm_check(&be22, CmTransform::CdfAtExpNeg, 8, &grid).unwrap();
    let fails_at_two = r.first_failure.map(|(order, _)| order) == Some(2);
    report(
        4,
        "complete monotonicity",
        power_pass == 50 && reflected_pass == 50 && fails_at_two,
        format!(
            "be(a,1) mixtures {power_pass}/50, be(1,b) mixtures {reflected_pass}/50, Be(2,2) first failure {:?}",
            r.first_failure
        ),
        start.elapsed(),
        Some(Duration::from_secs(10)),
    );
}

#[test]
fn criterion_5_product_construction() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = rng_from_seed(5);
    let mut worst_mass: f64 = 0.0;
    let mut worst_point: f64 = 0.0;
    for _ in 0..20 {
        let shape = |rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64| {
            let k = rng.random_range(1..=3);
            let values: Vec<f64> = (0..k).map(|_| rng.random_range(lo..=hi)).collect();
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let head: f64 = weights[..k - 1].iter().sum();
            weights[k - 1] = 1.0 - head;
            ShapeMeasure::new(values, weights).unwrap()
        };
        let g1 = shape(&mut rng, 0.1, 1.0);
        let g2 = shape(&mut rng, 1.0, 8.0);
        let h = prop8_construct(&g1, &g2).unwrap();
        let a_min = g1.values.iter().copied().fold(1.0, f64::min);
        // x = u^p removes the x^{a-1} singularity at the origin
        let p = 2.0 / a_min;
        let mass_of = |f: &dyn Fn(f64) -> f64| {
            integrate(
                |u: f64| if u <= 0.0 { 0.0 } else { f(u.powf(p).min(1.0 - f64::EPSILON)) * p * u.powf(p - 1.0) },
                0.0,
                1.0,
                1e-13,
            )
        };
        let product = |x: f64| g1.power_density(x) * g2.reflected_power_density(x);
        let c = 1.0 / mass_of(&product);
        let mass = mass_of(&|x| mixture_density(x, &h).unwrap());
        worst_mass = worst_mass.max((mass - 1.0).abs());
        for k in 0..100 {
            let x = (k as f64 + 0.5) / 100.0;
            let want = c * product(x);
            let got = mixture_density(x, &h).unwrap();
            worst_point = worst_point.max((got - want).abs() / want.max(1.0));
        }
    }
    report(
        5,
        "product construction",
        worst_mass < 1e-8 && worst_point < 1e-8,
        format!("max |mass - 1| {worst_mass:.2e}, max pointwise err {worst_point:.2e} (tol 1e-8)"),
        start.elapsed(),
        None,
    );
}

#[test]
fn criterion_6_prior_draws_respect_tail_envelope() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let config = DpConfig::default();
    let env = TailEnvelope::new(1.0, config.eps_b, 0.5).unwrap();
    let mut rng = rng_from_seed(6);
    let mut violations = 0;
    let mut atoms = 0;
    for _ in 0..1000 {
        let g = sample_prior_measure(&config, 1000, &mut rng).unwrap();
        atoms += g.atoms().len();
        violations += !tail_envelope_check(&g, &env).unwrap().ok as usize;
    }
    report(
        6,
        "tail envelope under the prior",
        violations == 0,
        format!("{violations} violations over 1000 prior draws ({atoms} atoms), eps_b = 0.05"),
        start.elapsed(),
        None,
    );
}

// Posterior mean of (a, b) for one cluster with all points alternative,
// integrated on a fine grid over (|L_a|, |L_b|).
fn grid_posterior_means(ps: &[f64], config: &DpConfig) -> (f64, f64) {
    let n = ps.len() as f64;
    let s1: f64 = ps.iter().map(|p| p.ln()).sum();
    let s2: f64 = ps.iter().map(|p| (-p).ln_1p()).sum();
    let (cells, hi) = (600, 6.0);
    let h = hi / cells as f64;
    let mut log_post = Vec::with_capacity(cells * cells);
    for i in 0..cells {
        let la = (i as f64 + 0.5) * h;
        for j in 0..cells {
            let lb = (j as f64 + 0.5) * h;
            let a = (-la).exp();
            let b = config.eps_b + lb.exp();
            let ll = (a - 1.0) * s1 + (b - 1.0) * s2 - n * ln_beta(a, b);
            let prior = -0.5 * (la * la / config.sigma_a.powi(2) + lb * lb / config.sigma_b.powi(2));
            log_post.push((ll + prior, a, b));
        }
    }
    let max = log_post.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut ma, mut mb) = (0.0, 0.0, 0.0);
    for (lp, a, b) in log_post {
        let w = (lp - max).exp();
        z += w;
        ma += w * a;
        mb += w * b;
    }
    (ma / z, mb / z)
}

#[test]
fn criterion_7_sampler_correctness() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let config = DpConfig::default();

    // (a) conjugate update of π at frozen z: parameters and draws
    let mut ps: Vec<f64> = vec![0.9; 70];
    ps.extend(vec![0.05; 30]);
    let data = PValueData::new(&ps).unwrap();
    let mut state = LatentState::single_cluster(&data, AtomParams::from_latent(0.5, 0.5, config.eps_b), 0.5);
    for i in 0..70 {
        state.is_null[i] = true;
        state.labels[i] = None;
    }
    let exact = pi_posterior(&state, &config) == (71.0, 31.0);
    let mut rng = rng_from_seed(71);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| {
            update_pi(&mut state, &config, &mut rng);
            state.pi
        })
        .collect();
    let pi_p = ks_pvalue(ks_statistic(&draws, |x| beta_reg(71.0, 31.0, x).unwrap()), draws.len());
    let part_a = exact && pi_p > 0.01;

    // (b) data-free chain reproduces the prior, 1e4 retained draws
    let settings = ChainSettings {
        iterations: 1000 + 10 * 10_000,
        burn_in: 1000,
        thin: 10,
        seed: 72,
        ..ChainSettings::default()
    };
    let prior = prior_reproduction_check(&config, &settings).unwrap();
    let part_b = prior.passes && prior.draws == 10_000;

    // (c) frozen z, one cluster: MH means against the grid posterior
    let sample = ScenarioSpec {
        pi0: 0.0,
        alt: Alternative::Mixture(DiscreteMixingMeasure::single(BetaParams::new(0.5, 3.0).unwrap())),
        m: 200,
        seed: 73,
    };
    let xs = sample_pvalues(&sample).unwrap().pvalues;
    let data = PValueData::new(&xs).unwrap();
    let mut state = LatentState::single_cluster(&data, AtomParams::from_latent(0.7, 1.0, config.eps_b), 0.5);
    let mut rng = rng_from_seed(74);
    let (mut a_trace, mut b_trace) = (Vec::new(), Vec::new());
    for it in 0..205_000 {
        update_cluster_params(&mut state, &data, &config, 0.25, &mut rng);
        if it >= 5_000 {
            let (_, c) = state.clusters().next().unwrap();
            a_trace.push(c.atom.shape.a());
            b_trace.push(c.atom.shape.b());
        }
    }
    let mc = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / effective_sample_size(v)).sqrt())
    };
    let ((ma, sea), (mb, seb)) = (mc(&a_trace), mc(&b_trace));
    let (oa, ob) = grid_posterior_means(&xs, &config);
    let part_c = (ma - oa).abs() < 3.0 * sea && (mb - ob).abs() < 3.0 * seb;

    report(
        7,
        "sampler correctness",
        part_a && part_b && part_c,
        format!(
            "(a) exact params {exact}, KS p {pi_p:.3}; (b) KS p pi {:.3} a {:.3} b {:.3} cluster a {:.3} cluster b {:.3}, min b {:.4}; \
             (c) a {ma:.4} vs {oa:.4} (se {sea:.4}), b {mb:.4} vs {ob:.4} (se {seb:.4})",
            prior.pi_pvalue, prior.a_pvalue, prior.b_pvalue, prior.cluster_a_pvalue, prior.cluster_b_pvalue, prior.min_b
        ),
        start.elapsed(),
        Some(Duration::from_secs(120)),
    );
}

#[test]
fn criterion_8_consistency_trend() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let spec = SweepSpec {
        m_list: vec![200, 1000, 5000],
        replicates: 10,
        scenario: ScenarioSpec {
            pi0: 0.8,
            alt: Alternative::Mixture(DiscreteMixingMeasure::single(BetaParams::new(0.5, 3.0).unwrap())),
            m: 0,
            seed: 1,
        },
        epsilon: 0.05,
        gamma_grid: vec![0.01, 0.025, 0.05, 0.1, 0.2],
    };
    let rows = run_sweep(&spec, &DpConfig::default(), &ChainSettings::default(), 0).unwrap();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let agg = aggregate_sweep(&rows, 0.8);
    let col = |f: fn(&pfdr::harness::SweepAggregate) -> f64| agg.iter().map(f).collect::<Vec<_>>();
    let ball = col(|a| a.median_ball_mass);
    let sup_f = col(|a| a.median_sup_f_err);
    let pfdr = col(|a| a.median_max_pfdr_err);
    let abs_pi = col(|a| a.median_abs_pi_err);
    let up = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let down = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let pass = failed == 0 && up(&ball) && down(&sup_f) && down(&pfdr) && abs_pi[2] <= 0.07;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" < ");
    report(
        8,
        "consistency trend",
        pass,
        format!(
            "medians over m = 200/1000/5000: ball mass {}, sup_F_err {}, max_pfdr_err {}, |pi err| {} (m=5000 limit 0.07); failed cells {failed}",
            fmt(&ball),
            fmt(&sup_f),
            fmt(&pfdr),
            fmt(&abs_pi)
        ),
        start.elapsed(),
        Some(Duration::from_secs(15 * 60)),
    );
}

fn run_all(dir: &Path, out: &str) -> bool {
    ["simulate", "estimate", "diagnose", "sweep", "compare", "plotdata"]
        .iter()
        .all(|cmd| {
            Command::new(env!("CARGO_BIN_EXE_pfdr"))
                .current_dir(dir)
                .env_remove("PFDR_OUT_DIR")
                .args([cmd, "--config", "c.toml", "--out", out])
                .output()
                .map(|o| o.status.success())
                .unwrap_or(false)
        })
}

#[test]
fn criterion_9_determinism() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "seed = 99\nm = 500\niterations = 600\nburn_in = 200\nm_list = [100, 200]\nreplicates = 3\n",
    )
    .unwrap();
    let ran = run_all(dir.path(), "first") && run_all(dir.path(), "second");
    let mut compared = 0;
    let mut differing = Vec::new();
    if ran {
        for entry in fs::read_dir(dir.path().join("first")).unwrap() {
            let name = entry.unwrap().file_name();
            if name == "effective_config.toml" {
                continue;
            }
            compared += 1;
            let a = fs::read(dir.path().join("first").join(&name)).unwrap();
            let b = fs::read(dir.path().join("second").join(&name)).unwrap();
            if a != b {
                differing.push(name.to_string_lossy().into_owned());
            }
        }
    }
    report(
        9,
        "determinism",
        ran && compared == 9 && differing.is_empty(),
        format!("all subcommands ran: {ran}; {compared} output files compared, differing: {differing:?}"),
        start.elapsed(),
        None,
    );
}
