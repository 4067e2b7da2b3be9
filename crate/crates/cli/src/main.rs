use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use pushcell_core::dp::policy_iteration;
use pushcell_core::experiment::{compare_report, run_experiment, ExperimentSpec, WORKERS_ENV};
use pushcell_core::markov::analyze_policy;
use pushcell_core::policy_file::{read_policy, write_policy};
use pushcell_core::sim::{self, SimConfig};
use pushcell_core::threshold::{
    build_policy, ee_threshold, eetb_dtilde, gotb_search, lemma2_lower_bound, potb_threshold, push_budget,
    spec_for, theorem1_blocking, theorem2_blocking, unicast_rate_beyond, PolicyKind,
};
use pushcell_core::{Model, StationaryPolicy};

#[derive(Parser)]
#[command(name = "pushcell", version, about = "Push, unicast or sleep: blocking analysis for an energy-harvesting small cell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal policy by policy iteration; optionally writes the policy table.
    Solve {
        #[command(flatten)]
        input: Input,
        /// Where to write the optimal policy.
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// Exact stationary analysis of one policy.
    Analyze {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        policy: PolicyChoice,
    },
    /// Monte Carlo run of one policy (uses `slots`, `warmup` and `seed`).
    Simulate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        policy: PolicyChoice,
    },
    /// Full experiment sweep; CSV goes to `output` or stdout.
    Sweep {
        #[command(flatten)]
        input: Input,
    },
    /// Closed-form thresholds and infinite-battery predictions.
    Thresholds {
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Args)]
struct Input {
    /// Preset: paper-v, fig3, fig4, fig5 or fig6.
    #[arg(long)]
    preset: Option<String>,
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set p_c=0.4`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PolicyChoice {
    /// Threshold policy: potb, aptb, eetb, gotb or sod.
    #[arg(long)]
    policy: Option<String>,
    /// Policy table written by `solve`.
    #[arg(long)]
    policy_file: Option<PathBuf>,
}

impl Input {
    fn spec(&self) -> Result<ExperimentSpec> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            None => String::new(),
        };
        let mut overrides = Vec::new();
        if let Some(p) = &self.preset {
            overrides.push(format!("preset={p}"));
        }
        overrides.extend(self.overrides.iter().cloned());
        Ok(ExperimentSpec::from_config(&text, &overrides)?)
    }

    fn model(&self) -> Result<(ExperimentSpec, Model)> {
        let spec = self.spec()?;
        let model = Model::new(spec.scenario.params()?)?;
        Ok((spec, model))
    }
}

impl PolicyChoice {
    fn load(&self, model: &Model) -> Result<StationaryPolicy> {
        if let Some(path) = &self.policy_file {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let policy = read_policy(file)?;
            if policy.space() != model.space() {
                bail!("policy file dimensions do not match the scenario");
            }
            return Ok(policy);
        }
        let name = self.policy.as_deref().unwrap_or_default();
        let kind = PolicyKind::parse(name).with_context(|| format!("unknown policy `{name}`"))?;
        let spec = spec_for(kind, model.params())?;
        println!("policy: {kind}");
        println!("c_thr: {}", spec.push_threshold);
        println!("m_thr: {}", spec.unicast_class);
        if let Some(p) = spec.predicted {
            println!("predicted: {p}");
        }
        Ok(build_policy(&spec, model)?)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { input, policy_out } => {
            let (_, model) = input.model()?;
            info!("policy iteration over {} states", model.space().len());
            let result = policy_iteration(&model, None)?;
            for r in &result.trace {
                info!("iteration {}: gain {:.12} ({} actions changed)", r.iteration, r.gain, r.changed);
            }
            println!("gain: {}", result.evaluation.gain);
            println!("iterations: {}", result.trace.len());
            println!("bellman_residual: {:e}", result.bellman_residual);
            if let Some(path) = policy_out {
                let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
                write_policy(&mut out, &result.policy)?;
                out.flush()?;
                println!("policy_file: {}", path.display());
            }
        }
        Command::Analyze { input, policy } => {
            let (_, model) = input.model()?;
            let policy = policy.load(&model)?;
            let a = analyze_policy(&model, &policy)?;
            println!("blocking: {}", a.blocking);
            println!("sleep_frequency: {}", a.action_frequency[0]);
            println!("unicast_frequency: {}", a.action_frequency[1]);
            println!("push_frequency: {}", a.action_frequency[2]);
            println!("mean_battery: {}", a.mean_battery);
            println!("residual: {:e}", a.distribution.residual);
        }
        Command::Simulate { input, policy } => {
            let (spec, model) = input.model()?;
            let policy = policy.load(&model)?;
            let config = SimConfig {
                slots: spec.slots,
                warmup: spec.warmup,
                seed: spec.seed,
                initial: pushcell_core::SystemState::EMPTY,
            };
            let r = sim::run(&model, &policy, &config)?;
            println!("blocking: {}", r.blocking);
            println!("ci_radius: {}", r.ci_radius);
            println!("batch_sigma: {}", r.batch_sigma);
            println!("blocking_per_request: {}", r.blocking_per_request);
            println!("counted_slots: {}", r.counted_slots);
            println!("seed: {}", config.seed);
            println!("mean_battery: {}", r.mean_battery);
        }
        Command::Sweep { input } => {
            let spec = input.spec()?;
            let table = run_experiment(&spec)?;
            for f in &table.failures {
                warn!("{} {} at {:?}: {}", f.policy, f.method, f.sweep_value, f.message);
            }
            for a in compare_report(&table).anomalies {
                warn!("anomaly ({}, {:?}): {}", a.method, a.sweep_value, a.message);
            }
            match &spec.output {
                Some(path) => {
                    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    table.write_csv(BufWriter::new(file))?;
                    info!("{} rows written to {}", table.rows.len(), path.display());
                }
                None => table.write_csv(io::stdout().lock())?,
            }
        }
        Command::Thresholds { input } => {
            let (_, model) = input.model()?;
            print_thresholds(&model)?;
        }
    }
    Ok(())
}

fn print_thresholds(model: &Model) -> Result<()> {
    let p = model.params();
    let grid = &p.grid;
    println!("unicast_units: {:?}", grid.multipliers());
    println!("boundaries_m: {:?}", grid.boundaries());
    println!("mean_unicast_units: {}", grid.mean_unicast_energy());
    let c_po = potb_threshold(p)?;
    println!("c_thr_po: {c_po}");
    println!("theorem1_blocking: {}", theorem1_blocking(p)?);
    let c_ee = ee_threshold(p)?;
    println!("c_thr_ee: {c_ee}");
    println!("push_budget_ee: {}", push_budget(c_ee, p)?);
    println!("eta_ee: {}", unicast_rate_beyond(c_ee, p)?);
    println!("m_thr_ee: {}", eetb_dtilde(p, c_ee)?);
    match theorem2_blocking(p) {
        Ok(v) => println!("theorem2_blocking: {v}"),
        Err(e) => println!("theorem2_blocking: none ({e})"),
    }
    let g = gotb_search(p)?;
    println!("gotb: c_thr {} m_thr {} predicted {}", g.push_threshold, g.unicast_class, g.predicted.unwrap_or(f64::NAN));
    for c in 0..=p.catalog.size() as u32 {
        println!("lemma2_lower_bound[{c}]: {}", lemma2_lower_bound(c, p)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        info!("{WORKERS_ENV}={v}");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
