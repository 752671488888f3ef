use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::error;

use subgrain::pipeline::{Overrides, Pipeline, StageReport};
use subgrain::report::format_delta;
use subgrain::scoring::Variant;
use subgrain::timeline::DriftModel;

/// Visually grounded subtitle translation pipeline.
#[derive(Parser, Debug)]
#[command(name = "subgrain", version)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(short, long, global = true, default_value = "subgrain.json")]
    config: PathBuf,

    /// Overrides `window_half_ms`.
    #[arg(long, global = true)]
    window_half_ms: Option<u64>,

    /// Overrides `selective.k_list`; repeatable.
    #[arg(long = "k", global = true)]
    k: Vec<f64>,

    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, pair and filter subtitles; load and clean the frame timeline.
    Prepare,
    /// Build visual contexts for every segment (resumable).
    Contextualize {
        #[arg(long)]
        method: String,
    },
    /// Translate every segment under one variant (resumable).
    Translate {
        #[arg(long, value_parser = parse_variant)]
        variant: Variant,
    },
    /// Corpus metrics and oracle selective grounding from segment scores.
    Evaluate,
    /// Tables, language summaries and gain matrices.
    Report {
        /// Additional results.json files to aggregate.
        #[arg(long)]
        results: Vec<PathBuf>,
        /// Published combined table as TSV (requires --selective).
        #[arg(long, requires = "selective")]
        combined: Option<PathBuf>,
        /// Published selective table as TSV (requires --combined).
        #[arg(long, requires = "combined")]
        selective: Option<PathBuf>,
    },
    /// Re-emit the prepared timeline under a drift model.
    Drift {
        /// Seconds of accumulated drift per hour.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        rate: f64,
        /// Constant offset in milliseconds.
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        offset: i64,
        /// Uniform jitter amplitude in milliseconds.
        #[arg(long, default_value_t = 0)]
        jitter: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: subgrain::Error| e.to_string())
}

fn print_stage(report: &StageReport) -> bool {
    for l in &report.languages {
        println!(
            "{} {}: total={} cached={} completed={} failed={}",
            report.stage,
            l.language,
            l.total,
            l.cached,
            l.completed,
            l.failures.len()
        );
        for f in &l.failures {
            eprintln!("  idx {}: {}", f.idx, f.error);
        }
    }
    println!("backend_calls={}", report.backend_calls);
    report.is_complete()
}

fn run(cli: Cli) -> Result<bool> {
    let overrides = Overrides {
        window_half_ms: cli.window_half_ms,
        k_list: (!cli.k.is_empty()).then(|| cli.k.clone()),
        seed: cli.seed,
    };
    let pipeline = Pipeline::from_file(&cli.config, &overrides)
        .with_context(|| format!("loading {}", cli.config.display()))?;
    match cli.command {
        Command::Prepare => {
            let r = pipeline.prepare()?;
            for l in &r.languages {
                println!(
                    "{} {}: pairs={} avg_words={:.2} avg_chars={:.2}",
                    r.movie_id, l.language, l.stats.pairs, l.stats.avg_words, l.stats.avg_chars
                );
            }
            println!("frames={} frames_in_spans={}", r.frames, r.frames_in_spans);
            Ok(true)
        }
        Command::Contextualize { method } => Ok(print_stage(&pipeline.contextualize(&method)?)),
        Command::Translate { variant } => Ok(print_stage(&pipeline.translate(variant)?)),
        Command::Evaluate => {
            let results = pipeline.evaluate()?;
            for r in &results {
                println!(
                    "{} {} {} {}: comet={:.4} baseline={:.4}",
                    r.movie_id, r.language, r.method, r.condition, r.metrics.comet, r.baseline.comet
                );
            }
            println!("wrote {}", pipeline.results_path().display());
            Ok(true)
        }
        Command::Report { results, combined, selective } => {
            let tables = combined.as_deref().zip(selective.as_deref());
            let out = pipeline.report(&results, tables)?;
            for s in &out.summaries {
                println!(
                    "{} {} {}: {} ({} movies)",
                    s.language,
                    s.method,
                    s.condition,
                    format_delta(s.delta_percent),
                    s.movies
                );
            }
            println!("wrote {} files under {}", out.files.len(), pipeline.workdir().join("report").display());
            Ok(true)
        }
        Command::Drift { rate, offset, jitter, out } => {
            let model = DriftModel {
                offset_ms: offset,
                rate_s_per_hour: rate,
                jitter_ms: jitter,
            };
            let path = pipeline.drift(&model, out.as_deref())?;
            println!("wrote {}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
