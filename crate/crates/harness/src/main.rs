use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use embclust_core::embedspace::{load_bundle, save_array, NoisePolicy, PipelineConfig};
use embclust_core::reduce::ReductionSpec;
use embclust_harness::aggregate::{Exclusion, Group};
use embclust_harness::report::{write_reports, ReportOptions};
use embclust_harness::search::{load_search_bundles, pipeline_evaluator};
use embclust_harness::seeds::FINAL_SEED;
use embclust_harness::{
    evaluate_grid, run_pipeline, staged_search, GridOptions, GridSpec, HarnessError, Preset,
    Result, ResultsTable, RunOptions, SearchSpec,
};

#[derive(Parser)]
#[command(
    name = "embclust",
    version,
    about = "Cluster embedding bundles and score them against labels"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Global seed (final runs default to 1; search defaults to the spec's seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid and search evaluation
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Shipped preset supplying per-encoder configs
    #[arg(long, global = true)]
    preset: Option<String>,
    /// How noise samples enter AMI/NMI/ARI
    #[arg(long, global = true, value_enum)]
    noise_policy: Option<Policy>,
    /// Maximum samples per silhouette computation
    #[arg(long, global = true)]
    silhouette_subsample: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    NoiseAsCluster,
    ExcludeNoise,
}

impl From<Policy> for NoisePolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::NoiseAsCluster => NoisePolicy::NoiseAsCluster,
            Policy::ExcludeNoise => NoisePolicy::ExcludeNoise,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Apply a reduction to a bundle's embeddings
    Reduce {
        #[arg(long)]
        manifest: PathBuf,
        /// Reduction spec as JSON, or @path to a JSON file
        #[arg(long)]
        reduction: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one pipeline config on a bundle
    Cluster {
        #[arg(long)]
        manifest: PathBuf,
        /// Pipeline config as JSON, or @path to a JSON file
        #[arg(long, conflicts_with_all = ["encoder", "clusterer"])]
        config: Option<String>,
        /// Encoder entry of the preset
        #[arg(long, requires = "clusterer")]
        encoder: Option<String>,
        /// Clusterer key of the preset (kmeans, spectral, ac_with_c, ac_without_c, ap, hdbscan)
        #[arg(long, requires = "encoder")]
        clusterer: Option<String>,
        /// Label stream to score against
        #[arg(long)]
        stream: Option<String>,
        #[arg(long)]
        out_labels: Option<PathBuf>,
        #[arg(long)]
        out_result: Option<PathBuf>,
    },
    /// Evaluate every cell of a grid manifest
    Evaluate {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a staged parameter search
    Search {
        #[arg(long)]
        spec: PathBuf,
        /// Chosen pipeline config
        #[arg(long)]
        out: PathBuf,
        /// Per-stage candidate scores
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Aggregate a results table
    Report {
        /// results.csv or results.json
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Baseline encoder for the delta report
        #[arg(long)]
        baseline: Option<String>,
        /// Dataset group as name=ds1,ds2 (repeatable)
        #[arg(long = "group")]
        groups: Vec<String>,
        /// Clusterer to leave out of means, as clusterer or dataset:clusterer (repeatable)
        #[arg(long = "exclude")]
        exclusions: Vec<String>,
        /// Mixed-same background dataset for the gap report
        #[arg(long, requires = "mr")]
        ms: Option<String>,
        /// Mixed-random background dataset for the gap report
        #[arg(long, requires = "ms")]
        mr: Option<String>,
    },
}

fn json_arg<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{arg}: {e}")))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::to_writer_pretty(f, value)
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    match cli.command {
        Command::Reduce {
            manifest,
            reduction,
            out,
        } => {
            let spec: ReductionSpec = json_arg(&reduction)?;
            spec.validate()?;
            let bundle = load_bundle(&manifest)?;
            let reduced = spec.apply(&bundle.embeddings, g.seed.unwrap_or(FINAL_SEED))?;
            save_array(&reduced, &out)?;
            log::info!(
                "{} -> {} ({}x{})",
                spec,
                out.display(),
                reduced.n_samples(),
                reduced.n_dims()
            );
        }
        Command::Cluster {
            manifest,
            config,
            encoder,
            clusterer,
            stream,
            out_labels,
            out_result,
        } => {
            let mut cfg: PipelineConfig = match (config, encoder, clusterer) {
                (Some(c), _, _) => json_arg(&c)?,
                (None, Some(e), Some(c)) => {
                    Preset::builtin(g.preset.as_deref().unwrap_or("paper"))?.config(&e, &c)?
                }
                _ => {
                    return Err(HarnessError::Config(
                        "give --config or both --encoder and --clusterer".into(),
                    ))
                }
            };
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            if let Some(p) = g.noise_policy {
                cfg.noise_policy = p.into();
            }
            let bundle = load_bundle(&manifest)?;
            let opts = RunOptions {
                stream,
                silhouette_subsample: g.silhouette_subsample,
                skip_silhouette: false,
            };
            let out = run_pipeline(&bundle, &cfg, &opts)?;
            if let Some(p) = out_labels {
                save_array(&out.assignment, &p)?;
            }
            match out_result {
                Some(p) => write_json(&p, &out.result)?,
                None => println!(
                    "{}",
                    serde_json::to_string_pretty(&out.result).expect("serializes")
                ),
            }
        }
        Command::Evaluate { grid, out_dir } => {
            let spec = GridSpec::load(&grid)?;
            let opts = GridOptions {
                seed: g.seed.unwrap_or(FINAL_SEED),
                workers: g.workers,
                noise_policy: g.noise_policy.map(Into::into),
                silhouette_subsample: g.silhouette_subsample,
                default_preset: g.preset,
            };
            let table = evaluate_grid(&spec, &opts)?;
            table.save(&out_dir)?;
            log::info!(
                "{} cells scored, {} failed; wrote {}",
                table.len(),
                table.failures().len(),
                out_dir.display()
            );
        }
        Command::Search { spec, out, report } => {
            let mut spec = SearchSpec::load(&spec)?;
            if let Some(s) = g.seed {
                spec.seed = s;
            }
            if let Some(p) = g.noise_policy {
                spec.base.noise_policy = p.into();
            }
            let bundles = load_search_bundles(&spec)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(g.workers.unwrap_or(0))
                .build()
                .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
            let outcome =
                pool.install(|| staged_search(&spec, pipeline_evaluator(&spec, &bundles)))?;
            write_json(&out, &outcome.config)?;
            if let Some(p) = report {
                write_json(&p, &outcome.stages)?;
            }
        }
        Command::Report {
            table,
            out_dir,
            baseline,
            groups,
            exclusions,
            ms,
            mr,
        } => {
            let table = ResultsTable::load(&table)?;
            let opts = ReportOptions {
                exclusions: exclusions.iter().map(|s| Exclusion::parse(s)).collect(),
                baseline,
                groups: groups
                    .iter()
                    .map(|s| Group::parse(s))
                    .collect::<Result<_>>()?,
                gap_datasets: ms.zip(mr),
            };
            for p in write_reports(&table, &opts, &out_dir)? {
                log::info!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
