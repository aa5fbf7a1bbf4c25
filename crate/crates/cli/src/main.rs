use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use actsug_core::agents::{AgentConfig, Knowledge, SuggesterConfig};
use actsug_core::env::{EnvSpec, Environment};
use actsug_core::harness::{
    emit_results, run_scenario_with, run_sweep, Format, ScenarioConfig, SweepAxis,
};
use actsug_core::solver::{solve_with_report, SolverParams};
use actsug_core::{AlphaVectorPolicy, Error};
use actsug_service::{AppState, SessionManager};

#[derive(Parser)]
#[command(name = "actsug", version, about = "POMDP agents that treat action suggestions as observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an environment and write the policy JSON.
    Solve(SolveArgs),
    /// Run one scenario and write its summary.
    Simulate(SimulateArgs),
    /// Run one scenario per value of a suggester parameter.
    Sweep(SweepArgs),
    /// Serve live sessions over WebSocket and HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Belief-point budget.
    #[arg(long, default_value_t = 2000)]
    points: usize,
    /// Backup sweeps per expansion round.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 12)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Plain expansion from the initial belief only: no state-corner points
    /// and no action-class second pass.
    #[arg(long)]
    plain: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Normal,
    Perfect,
    Random,
    Naive,
    Scaled,
    Noisy,
}

#[derive(Args, Clone)]
struct SimulateArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, value_enum)]
    agent: AgentKind,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.99)]
    tau: f64,
    #[arg(long, default_value_t = 5.0)]
    lambda: f64,
    /// Probability that a suggestion is uniformly random.
    #[arg(long, default_value_t = 0.0)]
    suggester_random: f64,
    /// Probability that a suggestion is delivered.
    #[arg(long, default_value_t = 1.0)]
    reception: f64,
    /// Partial-knowledge suggester `G,B` (RockSample only).
    #[arg(long, value_parser = parse_pair)]
    partial: Option<(f64, f64)>,
    #[arg(long, default_value_t = 2000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Update the belief even when the suggestion equals the planned action.
    #[arg(long)]
    no_skip_equal: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Reception,
    Randomness,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[command(flatten)]
    sim: SimulateArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (g, b) = s.split_once(',').ok_or("expected G,B")?;
    let g = g.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((g, b))
}

fn load_env(path: &Path) -> Result<Environment, Error> {
    let spec = EnvSpec::load(path)?;
    Environment::new(spec).map_err(|e| Error::Config(e.to_string()))
}

fn solve(args: SolveArgs) -> Result<(), Error> {
    let env = load_env(&args.env)?;
    let params = SolverParams {
        max_belief_points: args.points,
        max_iterations: args.iters,
        bellman_epsilon: args.epsilon,
        expansion_rounds: args.rounds,
        rng_seed: args.seed,
        state_corners: !args.plain,
        action_class_seeds: !args.plain,
    };
    params.validate().map_err(|e| Error::Config(e.to_string()))?;
    let b0 = env.initial_belief(env.default_belief_init())?;
    let (policy, report) = solve_with_report(env.model(), &b0, &params)?;
    eprintln!(
        "{}: {} vectors from {} belief points, {} sweeps, residual {:.2e}, V(b0) = {:.4}",
        env.name(),
        report.vectors,
        report.belief_points,
        report.sweeps,
        report.final_residual,
        policy.value(&b0)?
    );
    policy.save(&args.out)
}

fn scenario(args: &SimulateArgs, spec: EnvSpec) -> ScenarioConfig {
    let agent = match args.agent {
        AgentKind::Normal => AgentConfig::Normal,
        AgentKind::Perfect => AgentConfig::Perfect,
        AgentKind::Random => AgentConfig::Random,
        AgentKind::Naive => AgentConfig::Naive { nu: args.nu },
        AgentKind::Scaled => AgentConfig::Scaled { tau: args.tau },
        AgentKind::Noisy => AgentConfig::Noisy { lambda: args.lambda },
    };
    let mut cfg = ScenarioConfig::new(spec, agent);
    cfg.policy = Some(args.policy.clone());
    cfg.suggester = SuggesterConfig {
        randomness: args.suggester_random,
        reception_rate: args.reception,
        knowledge: match args.partial {
            Some((good, bad)) => Knowledge::Partial { good, bad },
            None => Knowledge::TrueState,
        },
    };
    cfg.episodes = args.episodes;
    cfg.seed = args.seed;
    cfg.max_steps = args.max_steps;
    cfg.skip_equal = !args.no_skip_equal;
    cfg
}

fn load_policy(path: &Path, env: &Environment) -> Result<AlphaVectorPolicy, Error> {
    let policy = AlphaVectorPolicy::load(path)?;
    policy
        .check_model(env.model())
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(policy)
}

fn format_of(f: OutFormat) -> Format {
    match f {
        OutFormat::Csv => Format::Csv,
        OutFormat::Markdown => Format::Markdown,
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let env = load_env(&args.env)?;
    let policy = load_policy(&args.policy, &env)?;
    let cfg = scenario(&args, env.spec().clone());
    let result = run_scenario_with(&cfg, Arc::new(env), Arc::new(policy), None)?;
    let s = &result.summary;
    eprintln!(
        "{}: reward {:.2} ± {:.2}, differing suggestions {:.2} ± {:.2}, steps {:.1}",
        s.scenario_id,
        s.mean_reward,
        s.reward_ci95,
        s.mean_differing_suggestions,
        s.suggestions_ci95,
        s.mean_steps
    );
    emit_results(&[result.summary], format_of(args.format), &args.out)
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let env = load_env(&args.sim.env)?;
    let policy = load_policy(&args.sim.policy, &env)?;
    let base = scenario(&args.sim, env.spec().clone());
    let axis = match args.axis {
        Axis::Reception => SweepAxis::Reception,
        Axis::Randomness => SweepAxis::Randomness,
    };
    let summaries = run_sweep(&base, axis, &args.values, Arc::new(env), Arc::new(policy), None)?;
    for s in &summaries {
        eprintln!(
            "reception {:.2} randomness {:.2}: reward {:.2} ± {:.2}, suggestions {:.2} ± {:.2}",
            s.reception_rate,
            s.randomness,
            s.mean_reward,
            s.reward_ci95,
            s.mean_differing_suggestions,
            s.suggestions_ci95
        );
    }
    emit_results(&summaries, format_of(args.sim.format), &args.sim.out)
}

fn serve(args: ServeArgs) -> Result<(), Error> {
    let env = load_env(&args.env)?;
    let policy = load_policy(&args.policy, &env)?;
    let manager = SessionManager::new(Arc::new(env), Arc::new(policy))?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| Error::Config(format!("bad listen address: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
        path: PathBuf::from("<runtime>"),
        source: e,
    })?;
    runtime
        .block_on(actsug_service::serve(addr, AppState::new(manager)))
        .map_err(|e| Error::Io {
            path: PathBuf::from(addr.to_string()),
            source: e,
        })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
