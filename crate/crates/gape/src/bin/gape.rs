//! `gape`: generate MDPs, plan, run campaigns and check concentration.
//!
//! Exit status: 0 on success, 1 when a run fails, 2 on invalid
//! configuration or command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gape::campaign::{Campaign, ConcentrationSpec, EnvConfig, Mode, ThresholdChoice};
use gape::harness::{self, episode_seed, PlanSettings};
use gape::io::{self, MdpFile, RunFile};
use gape::HarnessError;
use gape_core::baselines::sparse_sampling_budget;
use gape_core::planner::DEFAULT_MAX_EPISODES;
use gape_core::{generate_random_mdp, RewardGranularity};

#[derive(Parser)]
#[command(name = "gape", version, about = "Fixed-confidence Monte-Carlo planning with KL confidence bounds")]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "GAPE_OUTPUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Print progress details to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random MDP and write it as JSON.
    Generate(GenerateArgs),
    /// Plan once from state 0 and report the recommendation.
    Plan(PlanArgs),
    /// Run a campaign described by a TOML file.
    Campaign(CampaignArgs),
    /// Statistical self-checks.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Sparse Sampling budget H^5 (BK)^H / eps^2.
    Nss(NssArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnvChoice {
    Paper,
    Desk,
    File,
}

#[derive(Args)]
struct EnvArgs {
    #[arg(long, value_enum, default_value = "paper")]
    env: EnvChoice,
    /// MDP JSON file for `--env file`.
    #[arg(long)]
    mdp: Option<PathBuf>,
    /// Number of states (overrides the preset).
    #[arg(long = "S")]
    states: Option<usize>,
    #[arg(long = "K")]
    actions: Option<usize>,
    #[arg(long = "B")]
    branching: Option<usize>,
    #[arg(long)]
    sparsity: Option<f64>,
    /// Put the sparse rewards on transitions instead of state-action pairs.
    #[arg(long)]
    transition_rewards: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl EnvArgs {
    fn env_config(&self) -> EnvConfig {
        let mut env = match self.env {
            EnvChoice::Desk => EnvConfig::desk(),
            _ => EnvConfig::paper(),
        };
        if let Some(s) = self.states {
            env.states = s;
        }
        if let Some(k) = self.actions {
            env.actions = k;
        }
        if let Some(b) = self.branching {
            env.branching = b;
        }
        if let Some(x) = self.sparsity {
            env.sparsity = x;
        }
        if self.transition_rewards {
            env.granularity = RewardGranularity::Transition;
        }
        env
    }

    fn load(&self) -> gape::Result<MdpFile> {
        if self.env == EnvChoice::File {
            let path = self.mdp.as_ref().ok_or_else(|| HarnessError::Config("--env file needs --mdp PATH".into()))?;
            return io::read_mdp(path);
        }
        let generator = self.env_config().generator(self.seed);
        let mdp = generate_random_mdp(&generator)?;
        Ok(MdpFile { generator: Some(generator), mdp })
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Output file; defaults to `<out-dir>/mdp.json`, or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Planning horizon; derived from eps and gamma when omitted.
    #[arg(long = "H")]
    horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "practical")]
    thresholds: ThresholdArg,
    #[arg(long, default_value_t = DEFAULT_MAX_EPISODES)]
    max_episodes: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    Practical,
    Theoretical,
}

#[derive(Args)]
struct CampaignArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Monte-Carlo coverage of the deviation inequalities.
    Concentration(ConcentrationArgs),
}

#[derive(Args)]
struct ConcentrationArgs {
    /// Confidence levels; defaults to 0.05 and 0.1.
    #[arg(long, num_args = 1..)]
    delta: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 1000)]
    length: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct NssArgs {
    #[arg(long = "H")]
    horizon: usize,
    #[arg(long = "B")]
    branching: usize,
    #[arg(long = "K")]
    actions: usize,
    #[arg(long)]
    eps: f64,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Run(e.to_string())
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let out_dir = cli.out_dir.as_deref();
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a, out_dir),
        Command::Plan(a) => plan(a, out_dir),
        Command::Campaign(a) => campaign(a, out_dir, cli.verbose),
        Command::Verify { what: VerifyCommand::Concentration(a) } => verify_concentration(a, out_dir),
        Command::Nss(a) => nss(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))
}

fn generate(a: &GenerateArgs, out_dir: Option<&Path>) -> CliResult {
    let file = a.env.load()?;
    let path = match (&a.out, out_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => {
            ensure_dir(d)?;
            Some(d.join("mdp.json"))
        }
        (None, None) => None,
    };
    match path {
        Some(p) => {
            io::write_mdp(&p, &file)?;
            println!(
                "wrote {} (S={} K={} B={})",
                p.display(),
                file.mdp.num_states(),
                file.mdp.num_actions(),
                file.mdp.branching()
            );
        }
        None => {
            let text = serde_json::to_string_pretty(&file).map_err(|e| Failure::Run(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn plan(a: &PlanArgs, out_dir: Option<&Path>) -> CliResult {
    let file = a.env.load()?;
    let settings = PlanSettings {
        eps: a.eps,
        gamma: a.gamma,
        delta: a.delta,
        thresholds: match a.thresholds {
            ThresholdArg::Practical => ThresholdChoice::Practical,
            ThresholdArg::Theoretical => ThresholdChoice::Theoretical,
        },
        horizon: a.horizon,
        max_episodes: a.max_episodes,
        episode_seed: episode_seed(a.env.seed),
    };
    let mut record = harness::plan_on_mdp(&file.mdp, &settings)?;
    record.mdp_seed = file.generator.as_ref().map(|g| g.seed);
    println!(
        "action={} tau={} n={} regret={} H={} stop={}",
        record.recommended_action,
        record.tau,
        record.oracle_calls,
        record.simple_regret.map_or("n/a".to_string(), |r| format!("{r:.6}")),
        record.horizon,
        record.stop_reason
    );
    if let Some(d) = out_dir {
        ensure_dir(d)?;
        #[derive(serde::Serialize)]
        struct Echo<'a> {
            settings: &'a PlanSettings,
            generator: &'a Option<gape_core::GeneratorConfig>,
        }
        let run = RunFile { config: Echo { settings: &settings, generator: &file.generator }, record };
        io::write_json(&d.join("run.json"), &run)?;
    }
    Ok(())
}

fn campaign(a: &CampaignArgs, out_dir: Option<&Path>, verbose: bool) -> CliResult {
    let mut c = Campaign::load(&a.config)?;
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(r) = a.replications {
        c.replications = r;
    }
    let dir = out_dir.map(Path::to_path_buf).or_else(|| c.output.clone()).unwrap_or_else(|| PathBuf::from("gape-out"));
    c.output = Some(dir.clone());
    c.validate()?;
    let result = harness::run_campaign(&c)?;
    harness::write_outputs(&c, &result, &dir)?;
    if verbose {
        for e in result.errors() {
            eprintln!("run failed: {e}");
        }
    }
    if c.mode == Mode::Concentration {
        let failed = result.coverage.iter().filter(|r| !r.passes()).count();
        println!("{} coverage cells, {failed} above delta -> {}", result.coverage.len(), dir.display());
        return Ok(());
    }
    for s in &result.summary {
        println!(
            "{} {}: runs={} median_n={} max_regret={}",
            s.algorithm,
            s.eps_or_budget,
            s.runs,
            s.median_n.map_or("n/a".into(), |x| format!("{x}")),
            s.max_regret.map_or("n/a".into(), |x| format!("{x:.6}")),
        );
    }
    if let Some(fit) = &result.scaling {
        println!("slope={:.3} slope_log_mean={:.3}", fit.slope, fit.slope_log_mean);
    }
    let failures = result.errors().count();
    if failures > 0 {
        return Err(Failure::Run(format!("{failures} runs failed; see {}", dir.join("results.csv").display())));
    }
    Ok(())
}

fn verify_concentration(a: &ConcentrationArgs, out_dir: Option<&Path>) -> CliResult {
    let mut spec = ConcentrationSpec { trials: a.trials, stream_length: a.length, ..ConcentrationSpec::default() };
    if !a.delta.is_empty() {
        spec.delta_grid = a.delta.clone();
    }
    let mut c = Campaign::new(Mode::Concentration);
    c.seed = a.seed;
    c.concentration = Some(spec);
    c.validate()?;
    let result = harness::run_concentration_suite(&c)?;
    if let Some(d) = out_dir {
        harness::write_outputs(&c, &result, d)?;
    }
    for r in &result.coverage {
        println!(
            "{} {:<18} delta={} rate={}",
            if r.passes() { "PASS" } else { "FAIL" },
            r.kind,
            r.delta,
            r.violation_rate
        );
    }
    let failed = result.coverage.iter().filter(|r| !r.passes()).count();
    if failed > 0 {
        return Err(Failure::Run(format!("{failed} coverage cells exceed delta")));
    }
    Ok(())
}

fn nss(a: &NssArgs) -> CliResult {
    if a.horizon == 0 || a.branching == 0 || a.actions == 0 || !(a.eps > 0.0) {
        return Err(Failure::Config("H, B, K and eps must be positive".into()));
    }
    println!("{:e}", sparse_sampling_budget(a.horizon, a.branching, a.actions, a.eps));
    Ok(())
}
