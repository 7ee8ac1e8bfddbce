// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use osr_lie::lie::SumMode;
use osr_lie::pipeline::{self, Outcome, PipelineConfig, SceneSource};
use osr_lie::Error;

#[derive(Parser)]
#[command(
    name = "osr-lie",
    version,
    about = "Ground filtering and tree/building separation for lidar point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene as CSV
    Synth(Common),
    /// Fit the ground plane and write the ground column
    Filter(Common),
    /// Compute the v feature for nonground points
    Lie(Common),
    /// Cluster nonground points and write the class column
    Cluster(Common),
    /// Run filter, lie and cluster in one pass
    Run(Common),
    /// Score a labeled CSV against truth labels
    Eval(EvalArgs),
}

#[derive(Args)]
struct Common {
    /// JSON pipeline config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Named scene (flat, inclined, lakeside-gradient, flat-empty)
    #[arg(long)]
    scene: Option<String>,
    /// Scene seed for synth, clustering seed otherwise
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    /// Kernel bandwidths as hx,hy,hz
    #[arg(long, value_parser = parse_bandwidth)]
    bandwidth: Option<[f64; 3]>,
    /// Kernel summation: exact or grid
    #[arg(long)]
    mode: Option<SumMode>,
    #[arg(long)]
    use_intensity: bool,
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV with a class column
    #[arg(long)]
    input: PathBuf,
    /// CSV with a truth column; defaults to the input itself
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(short, long)]
    verbose: bool,
}

fn parse_bandwidth(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three values hx,hy,hz".to_string())
}

fn init_logging(verbose: bool) {
    let level = if verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn build_config(a: &Common, synth: bool) -> Result<PipelineConfig, Error> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = &a.input {
        cfg.input = Some(p.clone());
        cfg.scene = None;
    }
    if let Some(s) = &a.scene {
        cfg.scene = Some(SceneSource::Named(s.clone()));
        cfg.input = None;
    }
    if a.output.is_some() {
        cfg.output = a.output.clone();
    }
    if a.report.is_some() {
        cfg.report = a.report.clone();
    }
    if let Some(seed) = a.seed {
        if synth {
            let mut spec = cfg
                .scene
                .as_ref()
                .ok_or_else(|| Error::Config("--seed needs a scene".into()))?
                .resolve()?;
            spec.seed = seed;
            cfg.scene = Some(SceneSource::Spec(Box::new(spec)));
        } else {
            cfg.cluster.seed = seed;
        }
    }
    if let Some(k) = a.k {
        cfg.cluster.k = k;
    }
    if let Some([hx, hy, hz]) = a.bandwidth {
        cfg.lie.hx = hx;
        cfg.lie.hy = hy;
        cfg.lie.hz = hz;
    }
    if let Some(m) = a.mode {
        cfg.lie.mode = m;
    }
    if a.use_intensity {
        cfg.cluster.use_intensity = true;
    }
    Ok(cfg)
}

fn finish(outcome: Outcome, print_report: bool) -> ExitCode {
    if let Some(m) = &outcome.message {
        eprintln!("error: {m}");
    }
    if print_report && outcome.code == 0 {
        if let Some(r) = &outcome.report {
            let _ = writeln!(std::io::stdout(), "{}", r.to_json());
        }
    }
    ExitCode::from(outcome.code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (common, run): (&Common, fn(&PipelineConfig) -> Outcome) = match &cli.command {
        Command::Synth(a) => (a, pipeline::cmd_synth),
        Command::Filter(a) => (a, pipeline::cmd_filter),
        Command::Lie(a) => (a, pipeline::cmd_lie),
        Command::Cluster(a) => (a, pipeline::cmd_cluster),
        Command::Run(a) => (a, pipeline::cmd_run),
        Command::Eval(a) => {
            init_logging(a.verbose);
            let out = pipeline::cmd_eval(&a.input, a.truth.as_deref(), a.report.as_deref());
            return finish(out, a.report.is_none());
        }
    };
    init_logging(common.verbose);
    let cfg = match build_config(common, matches!(cli.command, Command::Synth(_))) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(pipeline::exit_code(&e) as u8);
        }
    };
    let print = cfg.report.is_none() && !matches!(cli.command, Command::Synth(_));
    finish(run(&cfg), print)
}
