use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use commval::extraction::ExtractionRecord;
use commval::pipeline::{files, read_jsonl, Pipeline, RunConfig, Stage, StageRecord};
use commval::reliability::{krippendorff_alpha, label_accuracy, AnnotationTable};
use commval::scales::{compare_years, na_report, ValueCommunityMatrix};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "commval", version, about = "Community value extraction and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load the comment dump, mask usernames and drop ineligible comments.
    Ingest(Common),
    /// Label comments Low/Mid/High by per-community score percentiles.
    Label {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        low_pct: Option<f64>,
        #[arg(long)]
        high_pct: Option<f64>,
    },
    /// Draw the seeded {context, target} pair sample.
    SamplePairs {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pairs_per_community: Option<usize>,
    },
    /// Draw the seeded class-balanced regression sample.
    SampleRegression {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        per_class: Option<usize>,
    },
    /// Extract value keywords from the pair sample.
    Extract(Common),
    /// Cluster keywords into canonical values.
    Canonicalize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Build the value x community matrix.
    Scales(Common),
    /// Compare one community's values between this run and another year's matrix.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Matrix file of the other year.
        #[arg(long)]
        against: PathBuf,
        #[arg(long)]
        community: String,
    },
    /// Count and explain N/A extractions.
    NaReport(Common),
    /// Fit per-community prosociality regressions.
    Prosocial {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Recall of high prosociality per canonical value.
    Recall(Common),
    /// Write an annotation worksheet sampled from the extractions.
    AnnotateSample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        per_community: Option<usize>,
    },
    /// Inter-rater agreement and label accuracy of a filled worksheet.
    Alpha {
        #[command(flatten)]
        common: Common,
        /// Worksheet to score; defaults to the run's worksheet.
        #[arg(long)]
        worksheet: Option<PathBuf>,
    },
    /// Write report tables from whatever stage outputs exist.
    Report(Common),
    /// Run every stage.
    Run(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn pipeline(config: RunConfig) -> Result<Pipeline> {
    Ok(Pipeline::new(config)?)
}

fn print_stage(stage: Stage, rec: &StageRecord) {
    let counts: Vec<String> = rec.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("{stage}: ok {}", counts.join(" "));
}

fn stages(config: RunConfig, list: &[Stage]) -> Result<()> {
    let p = pipeline(config)?;
    for &stage in list {
        let rec = p.run_stage(stage)?;
        print_stage(stage, &rec);
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest(c) => stages(load(&c)?, &[Stage::Ingest, Stage::Filter]),
        Command::Label { common, low_pct, high_pct } => {
            let mut config = load(&common)?;
            if let Some(v) = low_pct {
                config.sampling.low_percentile = v;
            }
            if let Some(v) = high_pct {
                config.sampling.high_percentile = v;
            }
            stages(config, &[Stage::Label])
        }
        Command::SamplePairs { common, pairs_per_community } => {
            let mut config = load(&common)?;
            if let Some(v) = pairs_per_community {
                config.sampling.pairs_per_community = v;
            }
            stages(config, &[Stage::SamplePairs])
        }
        Command::SampleRegression { common, per_class } => {
            let mut config = load(&common)?;
            if let Some(v) = per_class {
                config.sampling.regression_per_class = v;
            }
            stages(config, &[Stage::SampleRegression])
        }
        Command::Extract(c) => stages(load(&c)?, &[Stage::Extract]),
        Command::Canonicalize { common, k } => {
            let mut config = load(&common)?;
            if let Some(v) = k {
                config.canonicalize.k = v;
            }
            stages(config, &[Stage::Canonicalize])
        }
        Command::Scales(c) => stages(load(&c)?, &[Stage::Scales]),
        Command::Compare { common, against, community } => {
            let config = load(&common)?;
            let this = ValueCommunityMatrix::read_json(&config.out_dir.join(files::MATRIX))
                .context("reading this run's matrix")?;
            let other = ValueCommunityMatrix::read_json(&against)
                .with_context(|| format!("reading {}", against.display()))?;
            let diff = compare_years(&this, &other, &community)?;
            println!("{}", serde_json::to_string_pretty(&diff)?);
            Ok(())
        }
        Command::NaReport(c) => {
            let config = load(&c)?;
            let records: Vec<ExtractionRecord> =
                read_jsonl(&config.out_dir.join(files::EXTRACTIONS)).map_err(|e| anyhow::anyhow!("{e}"))?;
            let report = na_report(&records);
            let dir = config.out_dir.join(files::REPORTS);
            std::fs::create_dir_all(&dir)?;
            report.write_counts_csv(&dir.join("na_counts.csv"))?;
            report.write_explanations_csv(&dir.join("na_explanations.csv"))?;
            for row in report.count_rows() {
                println!("{}\t{}", row.community, row.na_count);
            }
            println!("total\t{}", report.total);
            Ok(())
        }
        Command::Prosocial { common, alpha } => {
            let mut config = load(&common)?;
            if let Some(v) = alpha {
                config.prosocial.alpha = v;
            }
            stages(config, &[Stage::Prosocial])
        }
        Command::Recall(c) => stages(load(&c)?, &[Stage::Recall]),
        Command::AnnotateSample { common, per_community } => {
            let mut config = load(&common)?;
            if let Some(v) = per_community {
                config.annotation.per_community = v;
            }
            let path = pipeline(config)?.annotate_sample()?;
            println!("worksheet: {}", path.display());
            Ok(())
        }
        Command::Alpha { common, worksheet } => {
            let config = load(&common)?;
            let path = worksheet.unwrap_or_else(|| config.out_dir.join(files::WORKSHEET));
            let table = AnnotationTable::read_worksheet(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            println!("items\t{}", table.items.len());
            println!("alpha\t{:.4}", krippendorff_alpha(&table)?);
            println!("accuracy\t{:.4}", label_accuracy(&table)?);
            Ok(())
        }
        Command::Report(c) => stages(load(&c)?, &[Stage::Report]),
        Command::Run(c) => {
            let p = pipeline(load(&c)?)?;
            let manifest = p.run()?;
            for (stage, rec) in &manifest.stages {
                print_stage(*stage, rec);
            }
            if !manifest.complete {
                bail!("run incomplete; see {}", p.manifest_path().display());
            }
            println!("manifest: {}", p.manifest_path().display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
