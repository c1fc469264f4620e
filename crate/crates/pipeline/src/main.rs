use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use hsc_core::metrics::Subset;
use hsc_pipeline::{
    cmd_annotate, cmd_evaluate, cmd_export, cmd_fit, cmd_sample, cmd_synth, DatasetManifest, PipelineConfig, Split,
    Workspace,
};

#[derive(Parser)]
#[command(name = "hsc", version, about = "Human-scene contact capture pipeline")]
struct Cli {
    /// TOML config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sequences processed at once.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Split to process (default: test; train for `sample`).
    #[arg(long, global = true)]
    split: Option<Split>,
    /// Restrict `evaluate` to one subset tag (a-f, g, or scene-.._hsi-.._subject-..).
    #[arg(long, global = true)]
    subset: Option<Subset>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset.
    Synth,
    /// Fit the body to every sequence.
    Fit,
    /// Label contact from the fits.
    Annotate,
    /// Score predicted contact and fits against ground truth.
    Evaluate,
    /// Write colored body meshes per frame.
    Export,
    /// List training (frame, view) pairs.
    Sample,
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let split = cli.split.unwrap_or(match cli.command {
        Command::Sample => Split::Train,
        _ => Split::Test,
    });
    match cli.command {
        Command::Synth => {
            let m = cmd_synth(&cfg)?;
            println!("wrote {} sequences to {}", m.sequences.len(), cfg.output.display());
        }
        Command::Sample => {
            let manifest = DatasetManifest::load(&cfg.output)?;
            let pairs = cmd_sample(&cfg.output, &manifest, split, cfg.seed)?;
            println!("{} training pairs", pairs.len());
        }
        Command::Fit => {
            let ws = Workspace::open(cfg, cli.jobs)?;
            for s in cmd_fit(&ws, split)? {
                println!("{}: {}/{} frames converged", s.sequence, s.converged, s.frames);
            }
        }
        Command::Annotate => {
            let ws = Workspace::open(cfg, cli.jobs)?;
            for s in cmd_annotate(&ws, split)? {
                println!("{}: {} contact vertices in {} frames", s.sequence, s.contact_vertices, s.frames);
            }
        }
        Command::Export => {
            let ws = Workspace::open(cfg, cli.jobs)?;
            for s in cmd_export(&ws, split)? {
                println!("{}: {} meshes", s.sequence, s.frames);
            }
        }
        Command::Evaluate => {
            let ws = Workspace::open(cfg, cli.jobs)?;
            let t = cmd_evaluate(&ws, split, cli.subset)?;
            println!(
                "{}: precision {:.3} recall {:.3} F1 {:.3} geodesic {}",
                t.contact.method,
                t.contact.precision,
                t.contact.recall,
                t.contact.f1,
                t.contact.geodesic_cm.map_or("n/a".into(), |g| format!("{g:.2} cm"))
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
