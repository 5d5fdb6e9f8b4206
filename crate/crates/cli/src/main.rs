//! `sono`: score categorical data for nominal outlyingness.

mod config;
mod output;
mod plot;
mod prepare;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sono::oracle::OracleConfig;
use sono::{analyze, Dataset, LevelOrder, MaxlenRule, MissingPolicy, Mode, NuMethod, ProbabilityModel};

use config::{Format, RunConfig};

#[derive(Parser)]
#[command(name = "sono", version, about = "Nominal outlyingness scores for categorical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every row of a CSV file.
    Score(ScoreArgs),
    /// Run the reference-oracle suites against the production path.
    Verify(VerifyArgs),
    /// Clean a raw benchmark file with its documented recipe.
    Prepare(PrepareArgs),
}

#[derive(Args)]
struct ScoreArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Flat JSON configuration, or a previous run.json. Flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Look for unusually rare (default) or unusually common itemsets.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Significance level in (0, 0.5]; default 0.05.
    #[arg(long)]
    alpha: Option<f64>,
    /// Exponent of the itemset-length weight; default 2.
    #[arg(long)]
    r: Option<f64>,
    /// Score every flagged itemset, not only the minimal ones.
    #[arg(long)]
    no_prune: bool,
    /// Use this maxlen instead of computing it.
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, value_enum)]
    maxlen_rule: Option<MaxlenRuleArg>,
    /// JSON map: variable → list of {level: probability}. Unlisted variables
    /// use empirical proportions.
    #[arg(long)]
    probs: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv, json, svg.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Option<Vec<Format>>,
    /// Comma-separated column names to ignore.
    #[arg(long, value_delimiter = ',')]
    drop_cols: Option<Vec<String>>,
    /// Drop rows with missing values, or treat missing as its own level.
    #[arg(long, value_enum)]
    missing: Option<MissingArg>,
    #[arg(long, value_enum)]
    level_order: Option<LevelOrderArg>,
    #[arg(long)]
    delimiter: Option<char>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
    /// Compute thresholds with exact ν instead of the Edgeworth series.
    #[arg(long)]
    oracle_nu: bool,
    #[arg(long, value_enum)]
    nu_method: Option<NuMethodArg>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [verify::Suite::Walker, verify::Suite::Nu, verify::Suite::Coverage, verify::Suite::Propositions])]
    suite: Vec<verify::Suite>,
    #[arg(long, default_value_t = OracleConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = OracleConfig::default().datasets)]
    datasets: usize,
    /// Largest p in the proposition sweep.
    #[arg(long, default_value_t = 20)]
    p_max: usize,
    #[arg(long, value_enum, default_value = "edgeworth")]
    nu_method: NuMethodArg,
    /// Perturb production scores by this amount before comparing.
    #[arg(long, hide = true, default_value_t = 0.0)]
    inject_score_offset: f64,
}

#[derive(Args)]
struct PrepareArgs {
    /// One of solar-flare, thyroid, primary-tumor, lymphography, diabetes.
    name: String,
    /// Raw file(s) as downloaded.
    #[arg(long, num_args = 1..)]
    raw: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Infrequent,
    Frequent,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MaxlenRuleArg {
    AnyCell,
    AllCells,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MissingArg {
    Drop,
    Level,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum LevelOrderArg {
    FirstAppearance,
    Lexicographic,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum NuMethodArg {
    Auto,
    Edgeworth,
    Exact,
}

impl From<NuMethodArg> for NuMethod {
    fn from(m: NuMethodArg) -> Self {
        match m {
            NuMethodArg::Auto => NuMethod::Auto,
            NuMethodArg::Edgeworth => NuMethod::Edgeworth,
            NuMethodArg::Exact => NuMethod::Exact,
        }
    }
}

/// Process exit statuses.
#[derive(Debug, Clone, Copy)]
enum Failure {
    Internal = 1,
    Usage = 2,
    Ingestion = 3,
    Threshold = 4,
    Output = 5,
    Verification = 6,
}

struct Failed(Failure, anyhow::Error);

trait Classify<T> {
    fn or_fail(self, kind: Failure) -> Result<T, Failed>;
}

impl<T> Classify<T> for anyhow::Result<T> {
    fn or_fail(self, kind: Failure) -> Result<T, Failed> {
        self.map_err(|e| Failed(kind, e))
    }
}

fn classify_core(e: sono::Error) -> Failed {
    use sono::Error::*;
    let kind = match &e {
        Ingestion(_) | EmptyDataset { .. } | Csv(_) => Failure::Ingestion,
        CiSearchFailure { .. } | TableExplosion { .. } | SubsetExplosion { .. } | DegenerateTruncation { .. } => {
            Failure::Threshold
        }
        Config(_) | Domain(_) => Failure::Usage,
        Io(_) => Failure::Output,
        Inconsistent(_) | OracleRefusal(_) => Failure::Internal,
    };
    Failed(kind, e.into())
}

fn resolve(args: &ScoreArgs) -> anyhow::Result<RunConfig> {
    let mut c = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.input {
        c.input = Some(v.clone());
    }
    if let Some(m) = args.mode {
        c.mode = match m {
            ModeArg::Infrequent => Mode::Infrequent,
            ModeArg::Frequent => Mode::Frequent,
        };
    }
    if let Some(v) = args.alpha {
        c.alpha = v;
    }
    if let Some(v) = args.r {
        c.r = v;
    }
    if args.no_prune {
        c.prune = false;
    }
    if let Some(v) = args.max_len {
        c.max_len = Some(v);
    }
    if let Some(v) = args.maxlen_rule {
        c.maxlen_rule = match v {
            MaxlenRuleArg::AnyCell => MaxlenRule::AnyCell,
            MaxlenRuleArg::AllCells => MaxlenRule::AllCells,
        };
    }
    if let Some(v) = &args.probs {
        c.probs = Some(v.clone());
    }
    if let Some(v) = &args.out {
        c.out = v.clone();
    }
    if let Some(v) = &args.format {
        c.format = v.clone();
    }
    if let Some(v) = &args.drop_cols {
        c.drop_cols = v.clone();
    }
    if let Some(v) = args.missing {
        c.missing = match v {
            MissingArg::Drop => MissingPolicy::DropRow,
            MissingArg::Level => MissingPolicy::AsLevel,
        };
    }
    if let Some(v) = args.level_order {
        c.level_order = match v {
            LevelOrderArg::FirstAppearance => LevelOrder::FirstAppearance,
            LevelOrderArg::Lexicographic => LevelOrder::Lexicographic,
        };
    }
    if let Some(v) = args.delimiter {
        c.delimiter = v;
    }
    if let Some(v) = args.threads {
        c.threads = Some(v);
    }
    if let Some(v) = args.nu_method {
        c.nu_method = v.into();
    }
    if args.oracle_nu {
        c.nu_method = NuMethod::Exact;
    }
    if c.input.is_none() {
        anyhow::bail!("no input file: pass --input or set \"input\" in the configuration");
    }
    Ok(c)
}

fn score(args: &ScoreArgs) -> Result<(), Failed> {
    let config = resolve(args).or_fail(Failure::Usage)?;
    let input = config.input.clone().expect("checked in resolve");
    let opts = config.ingest().or_fail(Failure::Usage)?;
    let mut ds = Dataset::from_path(&input, &opts)
        .with_context(|| format!("reading {}", input.display()))
        .or_fail(Failure::Ingestion)?;
    if ds.dropped_rows() > 0 {
        log::warn!("dropped {} row(s) with missing values", ds.dropped_rows());
    }
    let model = match &config.probs {
        Some(path) => {
            let overrides = config::read_probabilities(path).or_fail(Failure::Ingestion)?;
            if overrides.is_empty() {
                log::warn!("{} lists no probabilities; using the empirical model", path.display());
            }
            ProbabilityModel::with_overrides(&mut ds, &overrides).map_err(classify_core)?
        }
        None => ProbabilityModel::empirical(&ds),
    };
    let analysis = analyze(&ds, &model, &config.core()).map_err(classify_core)?;

    let out = &config.out;
    let write = || -> anyhow::Result<()> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        if config.wants(Format::Csv) {
            output::write_scores(&out.join("scores.csv"), &analysis)?;
            output::write_contributions(&out.join("contributions.csv"), &ds, &analysis)?;
        }
        if config.wants(Format::Json) {
            let record = output::RunRecord::new(&config, &ds, model.source(), &analysis);
            output::write_json(&out.join("run.json"), &record)?;
        }
        if config.wants(Format::Svg) {
            let title = format!("Score against depth, {}", input.display());
            let svg = plot::score_vs_depth(&analysis.report.scores, &analysis.report.depths, &title);
            let path = out.join("score_vs_depth.svg");
            std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    };
    write().or_fail(Failure::Output)?;
    println!(
        "{} rows, {} variables, maxlen {}, {} flagged itemsets, {} non-zero scores; results in {}",
        ds.n(),
        ds.p(),
        analysis.maxlen,
        analysis.flags.records.len(),
        analysis.report.nonzero(),
        out.display()
    );
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> Result<(), Failed> {
    let opts = verify::VerifyOptions {
        oracle: OracleConfig {
            seed: args.seed,
            datasets: args.datasets,
            ..OracleConfig::default()
        },
        suites: args.suite.clone(),
        nu_method: args.nu_method.into(),
        p_max: args.p_max,
        score_offset: args.inject_score_offset,
    };
    let mut stdout = std::io::stdout().lock();
    let ok = verify::run(&opts, &mut stdout).or_fail(Failure::Internal)?;
    if ok {
        Ok(())
    } else {
        Err(Failed(Failure::Verification, anyhow::anyhow!("one or more oracle checks failed")))
    }
}

fn run_prepare(args: &PrepareArgs) -> Result<(), Failed> {
    let recipe = prepare::recipe(&args.name).or_fail(Failure::Usage)?;
    let (rows, cols) = prepare::prepare(recipe, &args.raw, &args.out).or_fail(Failure::Ingestion)?;
    println!("{}: wrote {rows}×{cols} to {}", recipe.name, args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Score(a) => score(a),
        Command::Verify(a) => run_verify(a),
        Command::Prepare(a) => run_prepare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failed(kind, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(kind as u8)
        }
    }
}
