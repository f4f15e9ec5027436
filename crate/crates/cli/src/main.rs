//! `mrh`: fit multi-resolution hazard models from delimited survival data.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mrh::MrhError;

#[derive(Parser, Debug)]
#[command(name = "mrh", version, about = "Multi-resolution hazard models for right-censored survival data")]
struct Cli {
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summarise the observed times and list candidate bin widths.
    Binwidth(BinwidthArgs),
    /// Fit a model by MCMC and write its artifacts to an output folder.
    Fit(FitArgs),
    /// Posterior summary tables from a chain file.
    Summarize(SummarizeArgs),
    /// Plot-ready hazard, cumulative hazard, survival or hazard-ratio tables.
    PlotData(PlotDataArgs),
    /// DIC, AIC and BIC of a fitted chain.
    Dic(DicArgs),
    /// Pool several chains and report the Gelman-Rubin factors.
    AnalyzeMultiple(AnalyzeArgs),
    /// Kaplan-Meier product-limit estimates.
    Km(KmArgs),
}

/// Dataset file and column selection.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Comma- or tab-delimited file with a header row.
    pub data: PathBuf,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "delta")]
    pub delta_col: String,
    /// Proportional-hazards covariates; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Do not use any covariates.
    #[arg(long, conflicts_with = "covariates")]
    pub no_covariates: bool,
    /// Categorical column whose levels get separate hazard trees.
    #[arg(long)]
    pub nph: Option<String>,
}

#[derive(Args, Debug)]
pub struct BinwidthArgs {
    pub data: PathBuf,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "delta")]
    pub delta_col: String,
    /// Unit of the recorded times: s, min, h, d, w, mo or y.
    #[arg(long, default_value = "d")]
    pub unit: String,
    /// Also write the table to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Tree depth; the hazard has 2^M bins.
    #[arg(long = "M")]
    pub depth: u32,
    /// End of the study period; defaults to the largest observed time.
    #[arg(long)]
    pub max_study_time: Option<f64>,
    #[arg(long)]
    pub prune: bool,
    /// Number of tree levels tested for pruning, counted from the finest.
    #[arg(long, requires = "prune")]
    pub prune_levels: Option<u32>,
    #[arg(long, default_value_t = 0.05, requires = "prune")]
    pub prune_alpha: f64,
    /// Prior shape `a` of the total hazard: `sample`, `anchor` or a value.
    #[arg(long, default_value = "sample")]
    pub a: String,
    /// Prior rate `lambda` of the total hazard: `sample` or a value.
    #[arg(long, default_value = "sample")]
    pub lambda: String,
    /// Smoothing parameter k: `sample` or a value.
    #[arg(long, default_value = "0.5")]
    pub k_fixed: String,
    /// Split prior centres: `sample` or a value in (0, 1).
    #[arg(long, default_value = "0.5")]
    pub gamma: String,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    /// Iteration cap; with --continue, the number of additional iterations.
    #[arg(long, default_value_t = 500_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 100_000)]
    pub checkpoint_every: usize,
    #[arg(long)]
    pub fix_burn_in: bool,
    #[arg(long)]
    pub fix_thin: bool,
    #[arg(long)]
    pub fix_max: bool,
    /// Run dispersed chains for the Gelman-Rubin diagnostic.
    #[arg(long)]
    pub gr: bool,
    #[arg(long, default_value_t = 3, requires = "gr")]
    pub chains: usize,
    /// Extend the run stored in the output folder.
    #[arg(long = "continue", conflicts_with = "gr")]
    pub continue_chain: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Credible level of the written summary is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Output folder; relative paths resolve under $MRH_OUTPUT_ROOT when set.
    #[arg(long, default_value = "MRHresults")]
    pub outfolder: PathBuf,
}

/// Chain file plus the settings needed to interpret it.
#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    #[arg(long)]
    pub chains: PathBuf,
    #[arg(long)]
    pub max_study_time: Option<f64>,
    /// Tree depth; read from the info file or the column names when omitted.
    #[arg(long = "M")]
    pub depth: Option<u32>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotDataArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// hazard, H, S or ratio.
    #[arg(long, default_value = "hazard")]
    pub kind: String,
    /// One table for all strata instead of one per stratum.
    #[arg(long)]
    pub combine: bool,
    /// Degrees of freedom of a smoothing spline through the step heights.
    #[arg(long)]
    pub smooth_df: Option<f64>,
    /// Folder receiving the plotdata files; defaults to the chain file's folder.
    #[arg(long)]
    pub outdir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DicArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Dataset the chain was fitted to.
    #[command(flatten)]
    pub data: DataArgs,
    /// Sample size used by BIC; defaults to the number of subjects.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Comma-separated chain files.
    #[arg(long, value_delimiter = ',', required = true)]
    pub chains: Vec<PathBuf>,
    #[arg(long)]
    pub max_study_time: Option<f64>,
    #[arg(long = "M")]
    pub depth: Option<u32>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct KmArgs {
    pub data: PathBuf,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "delta")]
    pub delta_col: String,
    /// One curve per level of this column.
    #[arg(long)]
    pub strata: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_DATA: u8 = 4;

/// Failure of a subcommand, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Mrh(MrhError),
}

impl From<MrhError> for CliError {
    fn from(e: MrhError) -> Self {
        CliError::Mrh(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Mrh(MrhError::Config(_)) => EXIT_USAGE,
            CliError::Mrh(MrhError::Io { .. }) => EXIT_IO,
            CliError::Mrh(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Mrh(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_target(false)
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Binwidth(a) => commands::binwidth(a),
        Command::Fit(a) => commands::fit(a, cli.quiet),
        Command::Summarize(a) => commands::summarize_cmd(a),
        Command::PlotData(a) => commands::plot_data_cmd(a),
        Command::Dic(a) => commands::dic(a),
        Command::AnalyzeMultiple(a) => commands::analyze_multiple_cmd(a),
        Command::Km(a) => commands::km(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mrh: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
