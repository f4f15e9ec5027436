use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use mrh::data::{find_bin_width, km_estimate, load_dataset, read_header};
use mrh::files::{read_chain_file, read_info_file, RunInfo, INFO_FILE};
use mrh::numfmt::format_g6;
use mrh::posterior::{analyze_multiple, information_criteria, plot_data, summarize, write_plot_tables, PlotKind};
use mrh::sampler::{continue_chain, fit_chain, run_mcmc, write_outputs};
use mrh::{
    ChainStore, ColumnSpec, FitResult, Hyper, McmcConfig, ModelSpec, MrhError, PruneConfig, ShapeSetting,
    StratumLabels, SurvivalDataset, TimeGrid, TimeUnit,
};

use crate::{
    AnalyzeArgs, BinwidthArgs, ChainArgs, CliError, DataArgs, DicArgs, FitArgs, KmArgs, PlotDataArgs,
    SummarizeArgs, EXIT_NOT_CONVERGED,
};

type CmdResult = Result<u8, CliError>;

pub const SUMMARY_FILE: &str = "summary.txt";
pub const IC_FILE: &str = "ICtable.txt";
pub const GELMAN_RUBIN_FILE: &str = "gelman_rubin.txt";
pub const OUTPUT_ROOT_VAR: &str = "MRH_OUTPUT_ROOT";

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Mrh(MrhError::Io { path: path.to_path_buf(), source: e }))
}

/// Prints `text` and, when requested, writes it to `out`.
fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    print!("{text}");
    if let Some(p) = out {
        write_text(p, text)?;
    }
    Ok(())
}

fn load(args: &DataArgs) -> Result<SurvivalDataset, CliError> {
    let covariates = if args.no_covariates {
        Vec::new()
    } else if let Some(c) = &args.covariates {
        c.clone()
    } else {
        read_header(&args.data)?
            .into_iter()
            .filter(|h| *h != args.time_col && *h != args.delta_col && Some(h) != args.nph.as_ref())
            .collect()
    };
    let spec = ColumnSpec {
        time: args.time_col.clone(),
        delta: args.delta_col.clone(),
        covariates,
        nph: args.nph.iter().cloned().collect(),
    };
    Ok(load_dataset(&args.data, &spec)?)
}

pub fn binwidth(args: BinwidthArgs) -> CmdResult {
    let unit: TimeUnit = args.unit.parse()?;
    let spec = ColumnSpec { time: args.time_col, delta: args.delta_col, ..ColumnSpec::default() };
    let data = load_dataset(&args.data, &spec)?;
    let table = find_bin_width(data.times(), unit)?;
    emit(&table.to_string(), args.out.as_deref())?;
    Ok(0)
}

fn parse_hyper(flag: &str, value: &str) -> Result<Hyper, CliError> {
    if value == "sample" {
        return Ok(Hyper::Sampled);
    }
    value
        .parse::<f64>()
        .map(Hyper::Fixed)
        .map_err(|_| usage(format!("--{flag} expects 'sample' or a number, got '{value}'")))
}

fn model_spec(args: &FitArgs, data: &SurvivalDataset) -> Result<ModelSpec, CliError> {
    if args.depth == 0 {
        return Err(usage("--M must be at least 1"));
    }
    let max_study_time = args.max_study_time.unwrap_or_else(|| data.max_time());
    let mut spec = ModelSpec::for_data(data, args.depth, max_study_time);
    spec.prior.a = match args.a.as_str() {
        "sample" => ShapeSetting::Sampled,
        "anchor" => ShapeSetting::Anchor,
        v => ShapeSetting::Fixed(
            v.parse().map_err(|_| usage(format!("--a expects 'sample', 'anchor' or a number, got '{v}'")))?,
        ),
    };
    spec.prior.lambda = parse_hyper("lambda", &args.lambda)?;
    spec.prior.k = parse_hyper("k-fixed", &args.k_fixed)?;
    spec.prior.gamma = parse_hyper("gamma", &args.gamma)?;
    if let ShapeSetting::Fixed(a) = spec.prior.a {
        check_positive("a", Some(a))?;
    }
    check_positive("lambda", hyper_value(spec.prior.lambda))?;
    check_positive("k-fixed", hyper_value(spec.prior.k))?;
    if let Hyper::Fixed(g) = spec.prior.gamma {
        if !(g > 0.0 && g < 1.0) {
            return Err(usage(format!("--gamma must lie in (0, 1), got {g}")));
        }
    }
    spec.prune = PruneConfig { enabled: args.prune, alpha: args.prune_alpha, levels: args.prune_levels };
    Ok(spec)
}

fn hyper_value(h: Hyper) -> Option<f64> {
    match h {
        Hyper::Fixed(v) => Some(v),
        Hyper::Sampled => None,
    }
}

fn check_positive(flag: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(usage(format!("--{flag} must be positive, got {x}"))),
        _ => Ok(()),
    }
}

fn mcmc_config(args: &FitArgs, quiet: bool) -> McmcConfig {
    McmcConfig {
        max_iter: args.max_iter,
        burn_in: args.burn_in,
        thin: args.thin,
        fix_burn_in: args.fix_burn_in,
        fix_thin: args.fix_thin,
        fix_max: args.fix_max,
        gr: args.gr,
        continue_chain: args.continue_chain,
        seed: args.seed,
        checkpoint_every: args.checkpoint_every,
        progress: !quiet,
        ..McmcConfig::default()
    }
}

/// `out` under the output root when it is relative and the root is set.
pub fn resolve_outfolder(out: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if out.is_relative() && !root.is_empty() => PathBuf::from(root).join(out),
        _ => out.to_path_buf(),
    }
}

/// Summary, information criteria and plot tables of a finished fit.
fn write_reports(result: &FitResult, data: &SurvivalDataset, alpha: f64, folder: &Path) -> Result<String, CliError> {
    let summary = if alpha == result.summary.alpha {
        result.summary.clone()
    } else {
        let grid = TimeGrid::new(result.info.depth, result.info.max_study_time)?;
        summarize(&result.store, &grid, alpha, data.labels())?
    };
    let text = summary.to_string();
    write_text(&folder.join(SUMMARY_FILE), &text)?;
    write_text(&folder.join(IC_FILE), &result.ic.to_string())?;
    let mut kinds = vec![PlotKind::Hazard, PlotKind::CumulativeHazard, PlotKind::Survival];
    if summary.n_strata > 1 {
        kinds.push(PlotKind::Ratio);
    }
    for kind in kinds {
        write_plot_tables(&plot_data(&summary, kind, false, None)?, folder)?;
    }
    Ok(text)
}

pub fn fit(args: FitArgs, quiet: bool) -> CmdResult {
    let data = load(&args.data)?;
    let spec = model_spec(&args, &data)?;
    let config = mcmc_config(&args, quiet);
    config.validate()?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let out = resolve_outfolder(&args.outfolder);
    if args.continue_chain {
        if !out.is_dir() {
            return Err(usage(format!("--continue needs an existing output folder, {} not found", out.display())));
        }
    } else if out.exists() {
        return Err(usage(format!(
            "output folder {} already exists; pass --continue to extend it or choose another --outfolder",
            out.display()
        )));
    }
    if args.gr {
        return fit_gr(&args, &data, &spec, &config, &out);
    }
    let result =
        if args.continue_chain { continue_chain(&out, &data, &spec, &config)? } else { run_mcmc(&data, &spec, &config, &out)? };
    let text = write_reports(&result, &data, args.alpha, &out)?;
    if !quiet {
        print!("{text}");
    }
    info!("results written to {}", out.display());
    Ok(if result.warning.is_some() { EXIT_NOT_CONVERGED } else { 0 })
}

fn fit_gr(args: &FitArgs, data: &SurvivalDataset, spec: &ModelSpec, config: &McmcConfig, out: &Path) -> CmdResult {
    let n = args.chains;
    if n < 2 {
        return Err(usage("--gr needs at least two --chains"));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Mrh(MrhError::Io { path: out.to_path_buf(), source: e }))?;
    let results: Vec<FitResult> = (1..=n)
        .into_par_iter()
        .map(|c| -> Result<FitResult, CliError> {
            let result = fit_chain(data, spec, config, Some((c, n)))?;
            let folder = out.join(format!("chain{c}"));
            write_outputs(&result, &folder)?;
            write_reports(&result, data, args.alpha, &folder)?;
            Ok(result)
        })
        .collect::<Result<_, _>>()?;
    let grid = spec.check(data)?;
    let stores: Vec<ChainStore> = results.iter().map(|r| r.store.clone()).collect();
    let multi = analyze_multiple(&stores, &grid, args.alpha, data.labels())?;
    let text = multi.to_string();
    write_text(&out.join(GELMAN_RUBIN_FILE), &text)?;
    write_text(&out.join(SUMMARY_FILE), &multi.summary.to_string())?;
    print!("{text}");
    Ok(if results.iter().all(FitResult::converged) { 0 } else { EXIT_NOT_CONVERGED })
}

/// Info file stored next to a chain file, if any.
fn sibling_info(chain: &Path) -> Option<RunInfo> {
    let path = chain.parent().unwrap_or(Path::new(".")).join(INFO_FILE);
    read_info_file(&path).ok()
}

fn require_max_study_time(v: Option<f64>) -> Result<f64, CliError> {
    v.ok_or_else(|| {
        usage(
            "Maximum study time (maxStudyTime) needed for hazard rate calculation. \
             The maximum study time can be found in the MCMCInfo.txt file in the output folder.",
        )
    })
}

/// Chain, grid and stratum labels described by `args`.
fn load_chain(path: &Path, max_study_time: Option<f64>, depth: Option<u32>) -> Result<(ChainStore, TimeGrid, StratumLabels), CliError> {
    let max_study_time = require_max_study_time(max_study_time)?;
    let info = sibling_info(path);
    let depth = depth.or(info.as_ref().map(|i| i.depth));
    let store = read_chain_file(path, depth)?;
    let grid = TimeGrid::new(store.layout().depth(), max_study_time)?;
    let n_strata = store.layout().n_strata();
    let labels = match info {
        Some(i) if i.levels.len() == n_strata => StratumLabels { factor: i.nph, levels: i.levels },
        _ => StratumLabels::numbered(n_strata),
    };
    Ok((store, grid, labels))
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn chain_summary(args: &ChainArgs) -> Result<mrh::posterior::PosteriorSummary, CliError> {
    check_alpha(args.alpha)?;
    let (store, grid, labels) = load_chain(&args.chains, args.max_study_time, args.depth)?;
    Ok(summarize(&store, &grid, args.alpha, &labels)?)
}

pub fn summarize_cmd(args: SummarizeArgs) -> CmdResult {
    let summary = chain_summary(&args.chain)?;
    emit(&summary.to_string(), args.out.as_deref())?;
    Ok(0)
}

pub fn plot_data_cmd(args: PlotDataArgs) -> CmdResult {
    let kind: PlotKind = args.kind.parse()?;
    let summary = chain_summary(&args.chain)?;
    let tables = plot_data(&summary, kind, args.combine, args.smooth_df)?;
    let folder = match args.outdir {
        Some(d) => d,
        None => args.chain.chains.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&folder).map_err(|e| CliError::Mrh(MrhError::Io { path: folder.clone(), source: e }))?;
    for path in write_plot_tables(&tables, &folder)? {
        println!("{}", path.display());
    }
    Ok(0)
}

pub fn dic(args: DicArgs) -> CmdResult {
    let (store, grid, _) = load_chain(&args.chain.chains, args.chain.max_study_time, args.chain.depth)?;
    let data = load(&args.data)?;
    if data.covariate_names() != store.layout().covariate_names() {
        return Err(usage(format!(
            "chain covariates [{}] differ from the selected data columns [{}]",
            store.layout().covariate_names().join(", "),
            data.covariate_names().join(", ")
        )));
    }
    if data.n_strata() != store.layout().n_strata() {
        return Err(usage(format!(
            "chain has {} strata but the data has {}",
            store.layout().n_strata(),
            data.n_strata()
        )));
    }
    grid.check_dataset(&data)?;
    let n = args.n.unwrap_or(data.len());
    let ic = information_criteria(&store, &data, &grid, n)?;
    emit(&ic.to_string(), args.out.as_deref())?;
    Ok(0)
}

pub fn analyze_multiple_cmd(args: AnalyzeArgs) -> CmdResult {
    if args.chains.len() < 2 {
        return Err(usage("analyze-multiple needs at least two chain files"));
    }
    check_alpha(args.alpha)?;
    let mut stores = Vec::new();
    let mut first: Option<(TimeGrid, StratumLabels)> = None;
    for path in &args.chains {
        let (store, grid, labels) = load_chain(path, args.max_study_time, args.depth)?;
        if let Some((g, _)) = &first {
            if *g != grid {
                return Err(CliError::Mrh(MrhError::Config(format!(
                    "{} uses a different time grid from {}",
                    path.display(),
                    args.chains[0].display()
                ))));
            }
        } else {
            first = Some((grid, labels));
        }
        stores.push(store);
    }
    let (grid, labels) = first.expect("at least two chains");
    let multi = analyze_multiple(&stores, &grid, args.alpha, &labels)?;
    let text = format!("{}{}", multi.summary, multi);
    emit(&text, args.out.as_deref())?;
    Ok(0)
}

pub fn km(args: KmArgs) -> CmdResult {
    let spec = ColumnSpec {
        time: args.time_col,
        delta: args.delta_col,
        covariates: Vec::new(),
        nph: args.strata.iter().cloned().collect(),
    };
    let data = load_dataset(&args.data, &spec)?;
    let mut text = String::new();
    for curve in km_estimate(&data, args.strata.is_some()) {
        if let Some(l) = curve.stratum {
            let factor = data.labels().factor.as_deref().unwrap_or("stratum");
            text.push_str(&format!("{factor}={}\n", data.labels().levels[l]));
        }
        text.push_str("time\tn.risk\tn.event\tsurvival\n");
        for s in &curve.steps {
            text.push_str(&format!("{}\t{}\t{}\t{}\n", format_g6(s.time), s.n_risk, s.n_event, format_g6(s.survival)));
        }
        text.push('\n');
    }
    emit(&text, args.out.as_deref())?;
    Ok(0)
}
