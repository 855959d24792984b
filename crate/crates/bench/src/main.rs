use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use raol_bench::config::{parse_modes, RunOptions, OUT_ENV};
use raol_bench::harness::{scale_grid, tune_scale, ExperimentConfig, SampleSpec};
use raol_bench::{builtin_scenarios, run_experiment};
use raol_core::learner::{
    budget_exponent_for_constant, constant_schedule_for_budget, validate_budget, SampleCounts,
};
use raol_core::oracle::suites::{self, ConcentrationSetup, SuiteReport};
use raol_core::SamplingSchedule;

#[derive(Parser)]
#[command(
    name = "raol",
    version,
    about = "Online CVaR learning experiments on the parking-pricing model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario over several seeds and write traces, summary and oracle CSVs.
    Run(RunArgs),
    /// List the built-in scenarios.
    ListScenarios,
    /// Check a sampling schedule against the budget sum 1/sqrt(n_t) <= c T^(1 - a/2).
    ValidateBudget(BudgetArgs),
    /// Run the randomized coverage suite for one of the error bounds.
    Bounds(BoundsArgs),
    /// Sweep quarter-octave multipliers on the rate-derived step size and report mean final regret.
    Tune(TuneArgs),
}

#[derive(clap::Args)]
struct TuneArgs {
    #[arg(long)]
    scenario: String,
    /// first or zeroth
    #[arg(long, default_value = "first")]
    mode: String,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Kept apart from the evaluation seeds (0..runs) by default.
    #[arg(long, default_value_t = 1000)]
    seed_base: u64,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat TOML file with the same keys as these flags (underscored).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// first, zeroth or both
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed_base: Option<u64>,
    /// Samples per step: an integer, `t` (growing) or `auto` (from --a, --c)
    #[arg(long)]
    nt: Option<String>,
    /// Budget exponent
    #[arg(long)]
    a: Option<f64>,
    /// Budget constant
    #[arg(long)]
    c: Option<f64>,
    /// Step size override
    #[arg(long)]
    eta: Option<f64>,
    /// Multiplier on the rate-derived step size, replacing the scenario's tuned value
    #[arg(long)]
    eta_scale: Option<f64>,
    /// Smoothing radius override (zeroth-order)
    #[arg(long)]
    delta: Option<f64>,
    /// Initial price
    #[arg(long)]
    x1: Option<f64>,
    /// Output directory [env: RAOL_OUT, default: results]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BudgetArgs {
    #[arg(long, default_value_t = 500)]
    horizon: usize,
    #[arg(long, default_value = "8")]
    nt: String,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lemma {
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
    #[value(name = "5")]
    Five,
    #[value(name = "7")]
    Seven,
    #[value(name = "dkw")]
    Dkw,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    lemma: Lemma,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run(args: RunArgs) -> anyhow::Result<bool> {
    let cli = RunOptions {
        scenario: args.scenario,
        mode: args.mode,
        runs: args.runs,
        seed_base: args.seed_base,
        nt: args.nt,
        a: args.a,
        c: args.c,
        eta: args.eta,
        eta_scale: args.eta_scale,
        delta: args.delta,
        x1: args.x1,
        out: args.out,
    };
    let file = match &args.config {
        Some(p) => RunOptions::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunOptions::default(),
    };
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let cfg = cli.over(file).into_config(env_out)?;
    let result = run_experiment(&cfg)?;
    for p in &result.params {
        println!(
            "{:<7} eta={} delta={} a={:.4} V_alpha={:.4} V_f={:.4} budget_ok={}",
            p.arm,
            p.eta.map_or("-".into(), |v| format!("{v:.5}")),
            p.delta.map_or("-".into(), |v| format!("{v:.5}")),
            p.a,
            p.v_alpha_used,
            p.v_f_used,
            p.budget_ok
        );
    }
    for s in &result.summaries {
        let r = s.final_regret();
        println!(
            "{:<7} final regret {:.6} +/- {:.6} over {} runs",
            s.arm.name(),
            r.mean,
            r.std,
            s.runs
        );
    }
    if let Some(dir) = result.files.first().and_then(|f| f.parent()) {
        println!("wrote {} files to {}", result.files.len(), dir.display());
    }
    Ok(true)
}

fn budget(args: BudgetArgs) -> anyhow::Result<bool> {
    let counts = match args.nt.parse::<SampleSpec>()? {
        SampleSpec::Fixed(n) => SampleCounts::Constant(n),
        SampleSpec::Growing => SampleCounts::Growing,
        SampleSpec::Auto => {
            SampleCounts::Constant(constant_schedule_for_budget(args.horizon, args.a, args.c))
        }
    };
    let schedule = SamplingSchedule::new(counts.clone(), args.a, args.c)?;
    let r = validate_budget(&schedule, args.horizon);
    println!(
        "schedule={counts:?} T={} a={} c={}: lhs={:.9} rhs={:.9} {}",
        args.horizon,
        args.a,
        args.c,
        r.lhs,
        r.rhs,
        if r.ok { "ok" } else { "VIOLATED" }
    );
    println!(
        "smallest constant n for this budget: {}",
        constant_schedule_for_budget(args.horizon, args.a, args.c)
    );
    if let SampleCounts::Constant(n) = counts {
        println!(
            "largest exponent met by n={n}: a={:.6}",
            budget_exponent_for_constant(n, args.horizon, args.c)
        );
    }
    Ok(r.ok)
}

fn bounds(args: BoundsArgs) -> anyhow::Result<bool> {
    if args.trials == 0 {
        bail!("--trials must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let setup = ConcentrationSetup::parking_default()?;
    let reports: Vec<SuiteReport> = match args.lemma {
        Lemma::Dkw => vec![
            suites::dkw_suite(&setup, args.trials, &mut rng)?,
            suites::cvar_concentration_suite(&setup, args.trials, &mut rng)?,
        ],
        Lemma::Three => {
            // Price 0 keeps the cost density bounded away from zero.
            let at_zero = ConcentrationSetup {
                price: 0.0,
                ..setup
            };
            let (v, g) = suites::lemma3_suites(&at_zero, args.trials, &mut rng)?;
            vec![v, g]
        }
        Lemma::Four => vec![suites::lemma4_suite(args.trials, &mut rng)?],
        Lemma::Five => vec![suites::lemma5_suite(args.trials, &mut rng)?],
        Lemma::Seven => vec![suites::lemma7_suite(args.trials, &mut rng)?],
    };
    for r in &reports {
        println!("{r}");
    }
    Ok(reports.iter().all(SuiteReport::ok))
}

fn tune(args: TuneArgs) -> anyhow::Result<bool> {
    let modes = parse_modes(&args.mode)?;
    if modes.len() != 1 {
        bail!("tune one mode at a time");
    }
    let mut cfg = ExperimentConfig::new(&args.scenario);
    cfg.runs = args.runs;
    cfg.seed_base = args.seed_base;
    let rows = tune_scale(&cfg, modes[0], &scale_grid())?;
    let best = rows
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    for (k, r) in &rows {
        println!(
            "scale {k:>9.4} mean final regret {r:.6}{}",
            if *k == best.0 { "  <- best" } else { "" }
        );
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::ListScenarios => {
            for s in builtin_scenarios() {
                println!("{:<24} n_t={:<3} {}", s.id, s.samples, s.description);
            }
            Ok(true)
        }
        Command::ValidateBudget(a) => budget(a),
        Command::Bounds(a) => bounds(a),
        Command::Tune(a) => tune(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
