//! Chain files (`MCMCchains.txt`), run metadata (`MCMCInfo.txt`) and
//! convergence report tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::diagnostics::{autocorr_series, running_mean};
use crate::error::{MrhError, Result};
use crate::model::{Hyper, PriorConfig, ShapeSetting};
use crate::numfmt::{format_exact, format_g6};
use crate::params::ParamLayout;
use crate::sampler::ChainStore;
use crate::tree::SplitId;

pub const CHAIN_FILE: &str = "MCMCchains.txt";
pub const INFO_FILE: &str = "MCMCInfo.txt";
pub const RUNNING_MEAN_FILE: &str = "convergence_runningMean.txt";
pub const ACF_FILE: &str = "convergence_acf.txt";
const RUNNING_MEAN_WINDOW: usize = 100;
const ACF_MAX_LAG: usize = 50;

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| MrhError::io(path, e))
}

/// Writes the store as a tab-delimited table with a header of parameter
/// names. Values are written exactly, so reading the file back reproduces the store.
pub fn write_chain_file(store: &ChainStore, path: &Path) -> Result<()> {
    if store.is_empty() {
        return Err(MrhError::Format("refusing to write an empty chain".into()));
    }
    let mut text = store.names().join("\t");
    text.push('\n');
    for row in store.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_exact(v)).collect();
        text.push_str(&cells.join("\t"));
        text.push('\n');
    }
    create(path)?.write_all(text.as_bytes()).map_err(|e| MrhError::io(path, e))
}

/// Reads a chain file. Burn-in and thinning are unknown from the file alone
/// and are reported as 0 and 1.
pub fn read_chain_file(path: &Path, depth: Option<u32>) -> Result<ChainStore> {
    let text = fs::read_to_string(path).map_err(|e| MrhError::io(path, e))?;
    parse_chain(&text, depth)
}

pub fn parse_chain(text: &str, depth: Option<u32>) -> Result<ChainStore> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| MrhError::Format(format!("unreadable chain header: {e}")))?;
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    if names.iter().all(|n| n.is_empty()) {
        return Err(MrhError::Format("chain file is empty".into()));
    }
    let layout = ParamLayout::from_names(&names, depth)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| MrhError::Format(format!("chain row {}: {e}", i + 1)))?;
        if record.len() != names.len() {
            return Err(MrhError::Format(format!(
                "chain row {} has {} values, expected {}",
                i + 1,
                record.len(),
                names.len()
            )));
        }
        let row = record
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| MrhError::Format(format!("chain row {}: invalid number '{v}'", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MrhError::Format("chain file has no samples".into()));
    }
    let store = ChainStore::from_rows(layout, &rows, 0, 1)?;
    Ok(store)
}

/// Run metadata needed to re-summarize or continue a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub max_study_time: f64,
    pub depth: u32,
    pub burn_in: usize,
    pub thin: usize,
    pub max_iter: usize,
    pub iterations: usize,
    pub converged: bool,
    pub pruned: Vec<Vec<SplitId>>,
    pub nph: Option<String>,
    pub levels: Vec<String>,
    pub covariates: Vec<String>,
    pub seed: u64,
    pub prior: BTreeMap<String, String>,
    pub proposal_scales: Vec<f64>,
}

/// Prior regime as `key -> "sampled" | "anchor" | value`, for matching runs.
pub fn prior_descriptors(prior: &PriorConfig) -> BTreeMap<String, String> {
    let hyper = |h: Hyper| match h {
        Hyper::Sampled => "sampled".to_string(),
        Hyper::Fixed(v) => format!("{v}"),
    };
    let mut out = BTreeMap::new();
    out.insert(
        "prior.a".into(),
        match prior.a {
            ShapeSetting::Sampled => "sampled".to_string(),
            ShapeSetting::Anchor => "anchor".to_string(),
            ShapeSetting::Fixed(v) => format!("{v}"),
        },
    );
    out.insert("prior.lambda".into(), hyper(prior.lambda));
    out.insert("prior.k".into(), hyper(prior.k));
    out.insert("prior.gamma".into(), hyper(prior.gamma));
    out
}

fn format_pruned(pruned: &[Vec<SplitId>]) -> String {
    let items: Vec<String> = pruned
        .iter()
        .enumerate()
        .flat_map(|(l, ids)| ids.iter().map(move |id| format!("R{id}_{}", l + 1)))
        .collect();
    if items.is_empty() {
        "none".into()
    } else {
        items.join(", ")
    }
}

fn parse_pruned(text: &str, n_strata: usize) -> Result<Vec<Vec<SplitId>>> {
    let mut out = vec![Vec::new(); n_strata];
    if text == "none" || text.is_empty() {
        return Ok(out);
    }
    for item in text.split(',').map(str::trim) {
        let bad = || MrhError::Format(format!("invalid pruned split '{item}'"));
        let body = item.strip_prefix('R').ok_or_else(bad)?;
        let (id, l) = body.rsplit_once('_').ok_or_else(bad)?;
        let l: usize = l.parse().map_err(|_| bad())?;
        if l == 0 || l > n_strata {
            return Err(bad());
        }
        out[l - 1].push(id.parse::<SplitId>().map_err(|_| bad())?);
    }
    Ok(out)
}

fn join_list(items: &[String]) -> String {
    if items.is_empty() {
        "none".into()
    } else {
        items.join(", ")
    }
}

fn split_list(text: &str) -> Vec<String> {
    if text == "none" || text.is_empty() {
        Vec::new()
    } else {
        text.split(", ").map(str::to_string).collect()
    }
}

impl RunInfo {
    pub fn n_strata(&self) -> usize {
        self.pruned.len()
    }

    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("maxStudyTime: {}", self.max_study_time),
            format!("M: {}", self.depth),
            format!("burnIn: {}", self.burn_in),
            format!("thin: {}", self.thin),
            format!("maxIter: {}", self.max_iter),
            format!("iterations: {}", self.iterations),
            format!("converged: {}", self.converged),
            format!("strata: {}", self.n_strata()),
            format!("nph: {}", self.nph.as_deref().unwrap_or("none")),
            format!("levels: {}", join_list(&self.levels)),
            format!("covariates: {}", join_list(&self.covariates)),
            format!("prunedSplits: {}", format_pruned(&self.pruned)),
            format!("seed: {}", self.seed),
        ];
        lines.extend(self.prior.iter().map(|(k, v)| format!("{k}: {v}")));
        let scales: Vec<String> = self.proposal_scales.iter().map(|s| format!("{s}")).collect();
        lines.push(format!("proposalScales: {}", scales.join(" ")));
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }

    pub fn parse(text: &str) -> Result<RunInfo> {
        let mut map = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| MrhError::Format(format!("info line without ':' separator: '{line}'")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| map.get(k).ok_or_else(|| MrhError::Format(format!("info file lacks '{k}'")));
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| MrhError::Format(format!("info field '{k}' has invalid value '{v}'")))
        }
        let strata: usize = num("strata", get("strata")?)?;
        let prior = map.iter().filter(|(k, _)| k.starts_with("prior.")).map(|(k, v)| (k.clone(), v.clone())).collect();
        let proposal_scales = match map.get("proposalScales") {
            Some(s) => s.split_whitespace().map(|x| num("proposalScales", x)).collect::<Result<Vec<f64>>>()?,
            None => Vec::new(),
        };
        let nph = get("nph")?;
        Ok(RunInfo {
            max_study_time: num("maxStudyTime", get("maxStudyTime")?)?,
            depth: num("M", get("M")?)?,
            burn_in: num("burnIn", get("burnIn")?)?,
            thin: num("thin", get("thin")?)?,
            max_iter: num("maxIter", get("maxIter")?)?,
            iterations: num("iterations", get("iterations")?)?,
            converged: num("converged", get("converged")?)?,
            pruned: parse_pruned(get("prunedSplits")?, strata)?,
            nph: (nph != "none").then(|| nph.clone()),
            levels: split_list(get("levels")?),
            covariates: split_list(get("covariates")?),
            seed: num("seed", get("seed")?)?,
            prior,
            proposal_scales,
        })
    }
}

pub fn write_info_file(info: &RunInfo, path: &Path) -> Result<()> {
    create(path)?.write_all(info.to_text().as_bytes()).map_err(|e| MrhError::io(path, e))
}

pub fn read_info_file(path: &Path) -> Result<RunInfo> {
    let text = fs::read_to_string(path).map_err(|e| MrhError::io(path, e))?;
    RunInfo::parse(&text)
}

fn write_series(path: &Path, first: &str, names: &[String], series: &[Vec<f64>]) -> Result<()> {
    let len = series.iter().map(Vec::len).max().unwrap_or(0);
    let mut text = format!("{first}\t{}\n", names.join("\t"));
    for i in 0..len {
        text.push_str(&i.to_string());
        for s in series {
            text.push('\t');
            text.push_str(&s.get(i).map_or_else(|| "NA".to_string(), |v| format_g6(*v)));
        }
        text.push('\n');
    }
    create(path)?.write_all(text.as_bytes()).map_err(|e| MrhError::io(path, e))
}

/// Running means over windows of 100 retained draws and autocorrelations
/// at lags 0..=50 for every parameter.
pub fn write_convergence_report(store: &ChainStore, folder: &Path) -> Result<()> {
    let names = store.names();
    let columns: Vec<Vec<f64>> = (0..store.n_cols()).map(|j| store.column(j)).collect();
    let means: Vec<Vec<f64>> = columns.iter().map(|c| running_mean(c, RUNNING_MEAN_WINDOW)).collect();
    write_series(&folder.join(RUNNING_MEAN_FILE), "window", &names, &means)?;
    let acf: Vec<Vec<f64>> = columns.iter().map(|c| autocorr_series(c, ACF_MAX_LAG)).collect();
    write_series(&folder.join(ACF_FILE), "lag", &names, &acf)
}
