//! Multi-run experiments: parameter resolution, seeded runs, regret against
//! the grid oracle, aggregation and CSV output.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use raol_core::learner::{
    budget_exponent_for_constant, constant_schedule_for_budget, select_params_first_order,
    select_params_zeroth_order, validate_budget, BudgetReport, SampleCounts,
};
use raol_core::model::ModelFeedback;
use raol_core::oracle::{best_static_decision, dynamic_regret};
use raol_core::variation::{function_variation, risk_variation, RiskSchedule};
use raol_core::{
    CostModel, Learner, LearnerConfig, LearningMode, OracleTable, Resolution, SamplingSchedule,
};

use crate::catalog::{find_scenario, Policy, Scenario};
use crate::error::{BenchError, Result};

/// How many samples each step draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSpec {
    Fixed(usize),
    /// `n_t = t`.
    Growing,
    /// Smallest constant count meeting the budget for the configured `a`, `c`.
    Auto,
}

impl std::str::FromStr for SampleSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "t" => Ok(Self::Growing),
            "auto" => Ok(Self::Auto),
            other => other
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .map(Self::Fixed)
                .ok_or_else(|| {
                    BenchError::Config(format!(
                        "nt must be a positive integer, `t` or `auto`, got `{other}`"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub modes: Vec<LearningMode>,
    /// `None` keeps the scenario's own count.
    pub samples: Option<SampleSpec>,
    pub a: Option<f64>,
    pub c: f64,
    pub runs: usize,
    pub seed_base: u64,
    /// Overrides the selected step size.
    pub eta: Option<f64>,
    /// Overrides the scenario's multiplier on the rate-derived step size.
    pub eta_scale: Option<f64>,
    /// Overrides the selected smoothing radius.
    pub delta: Option<f64>,
    pub x1: f64,
    pub resolution: Resolution,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Both learners, 20 runs from seed 0, `c = 1`, starting price 0.
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            modes: vec![LearningMode::FirstOrder, LearningMode::ZerothOrder],
            samples: None,
            a: None,
            c: 1.0,
            runs: 20,
            seed_base: 0,
            eta: None,
            eta_scale: None,
            delta: None,
            x1: 0.0,
            resolution: Resolution::default(),
            out: None,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|i| self.seed_base + i).collect()
    }
}

/// Learner label used in file and column names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Learner(LearningMode),
    Static,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Learner(m) => m.name(),
            Self::Static => "static",
        }
    }
}

/// Parameters actually used for one arm, with the inputs they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedParams {
    pub arm: String,
    pub horizon: usize,
    pub samples: String,
    pub a: f64,
    pub c: f64,
    pub v_alpha: f64,
    pub v_f: f64,
    pub v_alpha_used: f64,
    pub v_f_used: f64,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub window: Option<f64>,
    pub static_price: Option<f64>,
    pub budget_lhs: f64,
    pub budget_rhs: f64,
    pub budget_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub x: f64,
    pub x_hat: Option<f64>,
    pub occupancy_mean: f64,
    pub cvar_action: f64,
    pub cvar_opt: f64,
    pub x_opt: f64,
    pub regret_cum: f64,
    pub alpha: f64,
    pub n_t: usize,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub arm: Arm,
    pub run: usize,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    /// Noise draws behind every step, kept for occupancy checks.
    pub noise: Vec<Vec<f64>>,
}

impl RunTrace {
    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret_cum)
    }
}

/// Mean and population standard deviation (divide by the run count).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> Moments {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Moments {
        mean,
        std: var.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub t: usize,
    pub price: Moments,
    pub occupancy: Moments,
    pub cvar: Moments,
    pub regret: Moments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub arm: Arm,
    pub runs: usize,
    pub rows: Vec<SummaryRow>,
}

impl RunSummary {
    pub fn final_regret(&self) -> Moments {
        self.rows.last().map_or_else(Moments::default, |r| r.regret)
    }
}

pub const SUMMARY_METRICS: [&str; 4] = ["price", "occupancy", "cvar", "regret"];

/// Per-step mean and population std across runs of one arm. The tracked
/// price is the decision `x_t`.
pub fn summarize(traces: &[&RunTrace]) -> Result<RunSummary> {
    let first = traces.first().ok_or(BenchError::NoTraces)?;
    let len = first.rows.len();
    if let Some(bad) = traces.iter().find(|r| r.rows.len() != len) {
        return Err(BenchError::LengthMismatch {
            expected: len,
            got: bad.rows.len(),
        });
    }
    let rows = (0..len)
        .map(|i| {
            let col = |f: fn(&TraceRow) -> f64| moments(traces.iter().map(move |r| f(&r.rows[i])));
            SummaryRow {
                t: first.rows[i].t,
                price: col(|r| r.x),
                occupancy: col(|r| r.occupancy_mean),
                cvar: col(|r| r.cvar_action),
                regret: col(|r| r.regret_cum),
            }
        })
        .collect();
    Ok(RunSummary {
        arm: first.arm,
        runs: traces.len(),
        rows,
    })
}

pub struct ExperimentResult {
    pub scenario: Scenario,
    pub params: Vec<ResolvedParams>,
    pub oracle: OracleTable,
    pub traces: Vec<RunTrace>,
    pub summaries: Vec<RunSummary>,
    pub files: Vec<PathBuf>,
}

impl ExperimentResult {
    pub fn summary(&self, arm: Arm) -> Option<&RunSummary> {
        self.summaries.iter().find(|s| s.arm == arm)
    }

    pub fn traces_for(&self, arm: Arm) -> Vec<&RunTrace> {
        self.traces.iter().filter(|t| t.arm == arm).collect()
    }
}

struct Plan {
    arm: Arm,
    config: Option<LearnerConfig>,
    schedule: SamplingSchedule,
    static_price: Option<f64>,
    params: ResolvedParams,
}

fn sampling(scn: &Scenario, cfg: &ExperimentConfig) -> Result<(SamplingSchedule, String)> {
    let horizon = scn.model.horizon;
    let spec = cfg.samples.unwrap_or(SampleSpec::Fixed(scn.samples));
    let (counts, a, label) = match spec {
        SampleSpec::Fixed(n) => (
            SampleCounts::Constant(n),
            cfg.a
                .unwrap_or_else(|| budget_exponent_for_constant(n, horizon, cfg.c).max(0.0)),
            n.to_string(),
        ),
        SampleSpec::Growing => (SampleCounts::Growing, cfg.a.unwrap_or(1.0), "t".to_string()),
        SampleSpec::Auto => {
            let a = cfg.a.unwrap_or_else(|| {
                budget_exponent_for_constant(scn.samples, horizon, cfg.c).max(0.0)
            });
            let n = constant_schedule_for_budget(horizon, a, cfg.c);
            (SampleCounts::Constant(n), a, n.to_string())
        }
    };
    Ok((SamplingSchedule::new(counts, a, cfg.c)?, label))
}

fn plan(scn: &Scenario, cfg: &ExperimentConfig) -> Result<Vec<Plan>> {
    let model = &scn.model;
    let horizon = model.horizon;
    let risk = RiskSchedule::from_model(model);
    let v_alpha = risk_variation(&risk);
    let v_f = function_variation(
        model,
        &model.set,
        cfg.resolution.quad_points,
        cfg.resolution.grid_points,
    )?
    .value;
    let v_alpha_used = if scn.variation_use.risk { v_alpha } else { 0.0 };
    let v_f_used = if scn.variation_use.function { v_f } else { 0.0 };
    let (schedule, label) = sampling(scn, cfg)?;
    let BudgetReport { lhs, rhs, ok } = validate_budget(&schedule, horizon);
    if !ok {
        eprintln!(
            "warning: {}: sampling budget not met (sum 1/sqrt(n_t) = {lhs:.4} > {rhs:.4})",
            scn.id
        );
    }
    let base = ResolvedParams {
        arm: String::new(),
        horizon,
        samples: label,
        a: schedule.a,
        c: schedule.c,
        v_alpha,
        v_f,
        v_alpha_used,
        v_f_used,
        eta: None,
        delta: None,
        window: None,
        static_price: None,
        budget_lhs: lhs,
        budget_rhs: rhs,
        budget_ok: ok,
    };

    if scn.policy == Policy::StaticPrice {
        let (x, _) = best_static_decision(model, &model.set, cfg.resolution)?;
        return Ok(vec![Plan {
            arm: Arm::Static,
            config: None,
            schedule,
            static_price: Some(x[0]),
            params: ResolvedParams {
                arm: Arm::Static.name().into(),
                static_price: Some(x[0]),
                ..base
            },
        }]);
    }

    let mut plans = Vec::new();
    for &mode in &cfg.modes {
        let (eta, delta, window) = match mode {
            LearningMode::FirstOrder => {
                let p = select_params_first_order(horizon, v_alpha_used, v_f_used);
                let k = cfg.eta_scale.unwrap_or(scn.eta_scale.first);
                (k * p.eta, 0.0, p.window)
            }
            LearningMode::ZerothOrder => {
                let p = select_params_zeroth_order(
                    horizon,
                    v_alpha_used,
                    v_f_used,
                    schedule.a,
                    model.set.inscribed_radius(),
                );
                let k = cfg.eta_scale.unwrap_or(scn.eta_scale.zeroth);
                (k * p.eta, p.delta, p.window)
            }
        };
        let eta = cfg.eta.unwrap_or(eta);
        let delta = match mode {
            LearningMode::FirstOrder => 0.0,
            LearningMode::ZerothOrder => cfg.delta.unwrap_or(delta),
        };
        let config = LearnerConfig {
            mode,
            eta,
            delta,
            schedule: schedule.clone(),
            risk_schedule: risk.clone(),
        };
        config.validate(&model.set)?;
        plans.push(Plan {
            arm: Arm::Learner(mode),
            config: Some(config),
            schedule: schedule.clone(),
            static_price: None,
            params: ResolvedParams {
                arm: mode.name().into(),
                eta: Some(eta),
                delta: (mode == LearningMode::ZerothOrder).then_some(delta),
                window: Some(window),
                ..base.clone()
            },
        });
    }
    Ok(plans)
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sphere_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn run_one(
    scn: &Scenario,
    plan: &Plan,
    run: usize,
    seed: u64,
    x1: f64,
    table: &OracleTable,
) -> Result<RunTrace> {
    let model = &scn.model;
    let horizon = model.horizon;
    let mut feedback = ModelFeedback::new(model, noise_rng(seed));
    let mut decisions = Vec::with_capacity(horizon);
    let mut played = Vec::with_capacity(horizon);
    let mut noise = Vec::with_capacity(horizon);
    let mut meta = Vec::with_capacity(horizon);

    match (&plan.config, plan.static_price) {
        (Some(config), _) => {
            let mut learner = Learner::new(config.clone(), model.set.clone(), &[x1])?;
            let mut sphere = sphere_rng(seed);
            for _ in 0..horizon {
                let rec = learner.step(&mut feedback, &mut sphere)?;
                decisions.push(rec.x[0]);
                played.push(rec.x_hat.as_ref().map(|v| v[0]));
                noise.push(feedback.last_noise().to_vec());
                meta.push((rec.alpha, rec.n_t));
            }
        }
        (None, Some(price)) => {
            use raol_core::learner::Feedback;
            for t in 1..=horizon {
                let n = plan.schedule.n_at(t);
                feedback.sample(t, &[price], n, false);
                decisions.push(price);
                played.push(None);
                noise.push(feedback.last_noise().to_vec());
                meta.push((model.risk_level(t).value(), n));
            }
        }
        (None, None) => unreachable!("plans carry a learner or a static price"),
    }

    let actions: Vec<Vec<f64>> = decisions
        .iter()
        .zip(&played)
        .map(|(x, h)| vec![h.unwrap_or(*x)])
        .collect();
    let regret = dynamic_regret(&actions, model, table)?;
    let eta = plan.config.as_ref().map(|c| c.eta);
    let delta = plan
        .config
        .as_ref()
        .filter(|c| c.mode == LearningMode::ZerothOrder)
        .map(|c| c.delta);
    let rows = regret
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let a = step.action[0];
            let occ = noise[i]
                .iter()
                .map(|&xi| model.occupancy(a, xi))
                .sum::<f64>()
                / noise[i].len() as f64;
            TraceRow {
                t: step.t,
                x: decisions[i],
                x_hat: played[i],
                occupancy_mean: occ,
                cvar_action: step.cvar_action,
                cvar_opt: step.cvar_opt,
                x_opt: step.x_opt[0],
                regret_cum: step.regret_cum,
                alpha: meta[i].0,
                n_t: meta[i].1,
                eta,
                delta,
            }
        })
        .collect();
    Ok(RunTrace {
        arm: plan.arm,
        run,
        seed,
        rows,
        noise,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in &trace.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_summary(path: &Path, summaries: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    for s in summaries {
        for m in SUMMARY_METRICS {
            header.push(format!("{}_{m}_mean", s.arm.name()));
            header.push(format!("{}_{m}_std", s.arm.name()));
        }
    }
    w.write_record(&header)?;
    let len = summaries.first().map_or(0, |s| s.rows.len());
    for i in 0..len {
        let mut rec = vec![summaries[0].rows[i].t.to_string()];
        for s in summaries {
            let r = &s.rows[i];
            for m in [r.price, r.occupancy, r.cvar, r.regret] {
                rec.push(m.mean.to_string());
                rec.push(m.std.to_string());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Serialize)]
struct OracleRow {
    t: usize,
    x_opt: f64,
    cvar_opt: f64,
    target: f64,
    alpha: f64,
}

fn write_oracle(path: &Path, scn: &Scenario, table: &OracleTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for t in 1..=table.horizon() {
        w.serialize(OracleRow {
            t,
            x_opt: table.x_opt(t)[0],
            cvar_opt: table.c_opt(t),
            target: scn.model.target_at(t),
            alpha: scn.model.risk_level(t).value(),
        })?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Serialize)]
struct Metadata<'a> {
    scenario: &'a str,
    description: &'a str,
    runs: usize,
    seed_base: u64,
    x1: f64,
    grid_points: usize,
    quad_points: usize,
    std_convention: &'static str,
    arms: &'a [ResolvedParams],
}

/// Runs every arm of the scenario over all seeds. Runs execute in parallel;
/// outputs are assembled in (arm, run) order so files are reproducible.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.runs == 0 {
        return Err(BenchError::Config("runs must be at least 1".into()));
    }
    if cfg.modes.is_empty() {
        return Err(BenchError::Config("no learner mode selected".into()));
    }
    let scn = find_scenario(&cfg.scenario)?;
    let plans = plan(&scn, cfg)?;
    let table = OracleTable::build(&scn.model, &scn.model.set, cfg.resolution)?;
    let seeds = cfg.seeds();
    let jobs: Vec<(usize, usize)> = (0..plans.len())
        .flat_map(|p| (0..seeds.len()).map(move |r| (p, r)))
        .collect();
    let traces = jobs
        .par_iter()
        .map(|&(p, r)| run_one(&scn, &plans[p], r, seeds[r], cfg.x1, &table))
        .collect::<Result<Vec<_>>>()?;
    let summaries = plans
        .iter()
        .map(|p| {
            let mine: Vec<&RunTrace> = traces.iter().filter(|t| t.arm == p.arm).collect();
            summarize(&mine)
        })
        .collect::<Result<Vec<_>>>()?;
    let params: Vec<ResolvedParams> = plans.into_iter().map(|p| p.params).collect();

    let mut files = Vec::new();
    if let Some(root) = &cfg.out {
        let dir = root.join(&scn.id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for tr in &traces {
            let path = dir.join(format!("trace_{}_run{:02}.csv", tr.arm.name(), tr.run));
            write_trace(&path, tr)?;
            files.push(path);
        }
        let path = dir.join("summary.csv");
        write_summary(&path, &summaries)?;
        files.push(path);
        let path = dir.join("oracle.csv");
        write_oracle(&path, &scn, &table)?;
        files.push(path);
        let meta = Metadata {
            scenario: &scn.id,
            description: &scn.description,
            runs: cfg.runs,
            seed_base: cfg.seed_base,
            x1: cfg.x1,
            grid_points: cfg.resolution.grid_points,
            quad_points: cfg.resolution.quad_points,
            std_convention: "population",
            arms: &params,
        };
        let path = dir.join("params.toml");
        fs::write(&path, toml::to_string(&meta)?).map_err(io_err(&path))?;
        files.push(path);
    }

    Ok(ExperimentResult {
        scenario: scn,
        params,
        oracle: table,
        traces,
        summaries,
        files,
    })
}

/// Deterministic learner configuration for a scenario, as the harness
/// would resolve it; exposed for tests and tuning.
pub fn resolve_config(cfg: &ExperimentConfig, mode: LearningMode) -> Result<LearnerConfig> {
    let scn = find_scenario(&cfg.scenario)?;
    let plans = plan(
        &scn,
        &ExperimentConfig {
            modes: vec![mode],
            ..cfg.clone()
        },
    )?;
    plans
        .into_iter()
        .find_map(|p| p.config)
        .ok_or_else(|| BenchError::Config(format!("{} has no learner arm", scn.id)))
}

/// Quarter-octave multipliers `2^(k/4)`, `k = 0..=40`, searched when tuning
/// step sizes.
pub fn scale_grid() -> Vec<f64> {
    (0..=40).map(quarter_octave).collect()
}

pub fn quarter_octave(k: i32) -> f64 {
    2f64.powf(f64::from(k) / 4.0)
}

/// Mean final regret of one learner for each candidate multiplier, in the
/// order given. Other settings, including seeds, come from `cfg`.
pub fn tune_scale(
    cfg: &ExperimentConfig,
    mode: LearningMode,
    candidates: &[f64],
) -> Result<Vec<(f64, f64)>> {
    candidates
        .iter()
        .map(|&k| {
            let trial = ExperimentConfig {
                modes: vec![mode],
                eta_scale: Some(k),
                eta: None,
                out: None,
                ..cfg.clone()
            };
            let res = run_experiment(&trial)?;
            let regret = res
                .summary(Arm::Learner(mode))
                .map_or(f64::INFINITY, |s| s.final_regret().mean);
            Ok((
                k,
                if regret.is_finite() {
                    regret
                } else {
                    f64::INFINITY
                },
            ))
        })
        .collect()
}
