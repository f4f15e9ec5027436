//! Posterior summaries, information criteria, multi-chain aggregation and
//! plot-ready tables.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{StratumLabels, SurvivalDataset, TimeGrid};
use crate::diagnostics::gelman_rubin;
use crate::error::{MrhError, Result};
use crate::model::SufficientStats;
use crate::numfmt::format_g6;
use crate::params::{ParamId, ParamLayout};
use crate::sampler::ChainStore;
use crate::smooth::smoothing_spline;

/// Median-unbiased empirical quantile of sorted data (type 8).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (n as f64 + 1.0 / 3.0) * p + 1.0 / 3.0;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Median and the `(alpha/2, 1 - alpha/2)` quantiles.
fn interval(values: &[f64], alpha: f64) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (quantile_sorted(&v, 0.5), quantile_sorted(&v, alpha / 2.0), quantile_sorted(&v, 1.0 - alpha / 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub key: String,
    /// Column-name prefix, e.g. `hr` for `hrEst hrq.025 hrq.975`.
    pub prefix: String,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub alpha: f64,
    pub depth: u32,
    pub max_study_time: f64,
    pub n_strata: usize,
    pub n_covariates: usize,
    pub labels: StratumLabels,
    pub tables: Vec<SummaryTable>,
}

/// `0.025 -> "q.025"`.
pub fn quantile_label(p: f64) -> String {
    let s = format!("{:.10}", p);
    let s = s.trim_end_matches('0').trim_start_matches('0');
    format!("q{s}")
}

fn group_suffix(l: usize, n_strata: usize) -> String {
    if n_strata > 1 {
        format!(".group{}", l + 1)
    } else {
        String::new()
    }
}

impl PosteriorSummary {
    pub fn table(&self, key: &str) -> Option<&SummaryTable> {
        self.tables.iter().find(|t| t.key == key)
    }

    pub fn keys(&self) -> Vec<&str> {
        self.tables.iter().map(|t| t.key.as_str()).collect()
    }

    pub fn n_bins(&self) -> usize {
        1 << self.depth
    }

    pub fn column_names(&self, prefix: &str) -> [String; 3] {
        [
            format!("{prefix}Est"),
            format!("{prefix}{}", quantile_label(self.alpha / 2.0)),
            format!("{prefix}{}", quantile_label(1.0 - self.alpha / 2.0)),
        ]
    }

    /// Tab-delimited rendering of one table, header first.
    pub fn table_text(&self, table: &SummaryTable) -> String {
        let [a, b, c] = self.column_names(&table.prefix);
        let mut out = format!("\t{a}\t{b}\t{c}\n");
        for r in &table.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.name,
                format_g6(r.estimate),
                format_g6(r.lower),
                format_g6(r.upper)
            ));
        }
        out
    }
}

impl fmt::Display for PosteriorSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for table in &self.tables {
            writeln!(f, "${}", table.key)?;
            let header = self.column_names(&table.prefix);
            let cells: Vec<[String; 3]> = table
                .rows
                .iter()
                .map(|r| [format_g6(r.estimate), format_g6(r.lower), format_g6(r.upper)])
                .collect();
            let name_w = table.rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
            let widths: Vec<usize> = (0..3)
                .map(|k| cells.iter().map(|c| c[k].len()).chain([header[k].len()]).max().unwrap_or(0))
                .collect();
            write!(f, "{:name_w$}", "")?;
            for k in 0..3 {
                write!(f, " {:>w$}", header[k], w = widths[k])?;
            }
            writeln!(f)?;
            for (r, c) in table.rows.iter().zip(&cells) {
                write!(f, "{:<name_w$}", r.name)?;
                for k in 0..3 {
                    write!(f, " {:>w$}", c[k], w = widths[k])?;
                }
                writeln!(f)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Per-sample derived quantities of one retained draw.
struct Derived {
    hazard: Vec<f64>,
    ratio: Vec<f64>,
    survival: Vec<f64>,
    cumulative: Vec<f64>,
    increments: Vec<f64>,
}

fn derive(layout: &ParamLayout, row: &[f64], width: f64) -> Derived {
    let d = layout.increments(row);
    let mut out = Derived { hazard: Vec::new(), ratio: Vec::new(), survival: Vec::new(), cumulative: Vec::new(), increments: Vec::new() };
    for dl in &d {
        out.hazard.extend(dl.iter().map(|x| x / width));
        out.increments.extend_from_slice(dl);
        let mut cum = 0.0;
        out.cumulative.push(0.0);
        out.survival.push(1.0);
        for x in dl {
            cum += x;
            out.cumulative.push(cum);
            out.survival.push((-cum).exp());
        }
    }
    for dl in d.iter().skip(1) {
        out.ratio.extend(dl.iter().zip(&d[0]).map(|(a, b)| (a / b).ln()));
    }
    out
}

/// Summarizes a chain: per-bin hazard rates, coefficients (and NPH log
/// hazard ratios against stratum 1), survival and cumulative hazard at
/// bin boundaries, increments, totals, splits and sampled hyperparameters.
pub fn summarize(store: &ChainStore, grid: &TimeGrid, alpha: f64, labels: &StratumLabels) -> Result<PosteriorSummary> {
    if store.is_empty() {
        return Err(MrhError::Format("chain has no samples".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MrhError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let layout = store.layout();
    if grid.depth() != layout.depth() {
        return Err(MrhError::Config(format!(
            "time grid depth {} does not match the chain depth {}",
            grid.depth(),
            layout.depth()
        )));
    }
    let n_strata = layout.n_strata();
    let labels =
        if labels.len() == n_strata { labels.clone() } else { StratumLabels::numbered(n_strata) };
    let j_bins = grid.n_bins();
    let width = grid.bin_width();
    let derived: Vec<Derived> = store.rows().map(|row| derive(layout, row, width)).collect();
    let summarize_field = |get: &dyn Fn(&Derived) -> &Vec<f64>, idx: usize| {
        let values: Vec<f64> = derived.iter().map(|d| get(d)[idx]).collect();
        interval(&values, alpha)
    };
    let row = |name: String, (estimate, lower, upper): (f64, f64, f64)| SummaryRow { name, estimate, lower, upper };
    let mut tables = Vec::new();

    let mut hazard = Vec::new();
    let mut inc = Vec::new();
    for l in 0..n_strata {
        for j in 0..j_bins {
            let suffix = group_suffix(l, n_strata);
            hazard.push(row(format!("h.bin{}{suffix}", j + 1), summarize_field(&|d| &d.hazard, l * j_bins + j)));
            inc.push(row(format!("d.bin{}{suffix}", j + 1), summarize_field(&|d| &d.increments, l * j_bins + j)));
        }
    }
    tables.push(SummaryTable { key: "hazardRate".into(), prefix: "hr".into(), rows: hazard });

    let ids = layout.ids();
    let names = store.names();
    let column_rows = |pred: &dyn Fn(&ParamId) -> bool| -> Vec<SummaryRow> {
        ids.iter()
            .enumerate()
            .filter(|(_, id)| pred(id))
            .map(|(j, _)| row(names[j].clone(), interval(&store.column(j), alpha)))
            .collect()
    };
    let mut beta = column_rows(&|id| matches!(id, ParamId::Beta(_)));
    let factor = labels.factor.clone().unwrap_or_else(|| "group".to_string());
    for l in 1..n_strata {
        for j in 0..j_bins {
            beta.push(row(
                format!("beta.{factor}.{}.bin{}", labels.levels[l], j + 1),
                summarize_field(&|d| &d.ratio, (l - 1) * j_bins + j),
            ));
        }
    }
    if !beta.is_empty() {
        tables.push(SummaryTable { key: "beta".into(), prefix: "beta".into(), rows: beta });
    }

    let mut survival = Vec::new();
    let mut cumulative = Vec::new();
    for l in 0..n_strata {
        for j in 0..=j_bins {
            let suffix = group_suffix(l, n_strata);
            let idx = l * (j_bins + 1) + j;
            survival.push(row(format!("S.t{j}{suffix}"), summarize_field(&|d| &d.survival, idx)));
            cumulative.push(row(format!("H.t{j}{suffix}"), summarize_field(&|d| &d.cumulative, idx)));
        }
    }
    tables.push(SummaryTable { key: "SurvivalCurve".into(), prefix: "S".into(), rows: survival });
    tables.push(SummaryTable { key: "CumulativeHazard".into(), prefix: "H".into(), rows: cumulative });
    tables.push(SummaryTable { key: "d".into(), prefix: "d".into(), rows: inc });
    tables.push(SummaryTable {
        key: "H".into(),
        prefix: "H00".into(),
        rows: column_rows(&|id| matches!(id, ParamId::Total(_))),
    });
    tables.push(SummaryTable {
        key: "Rmp".into(),
        prefix: "Rmp".into(),
        rows: column_rows(&|id| matches!(id, ParamId::Split(..))),
    });
    let gamma = column_rows(&|id| matches!(id, ParamId::Gamma(..)));
    if !gamma.is_empty() {
        tables.push(SummaryTable { key: "gamma".into(), prefix: "gammamp".into(), rows: gamma });
    }
    let k = column_rows(&|id| matches!(id, ParamId::K(_)));
    if !k.is_empty() {
        tables.push(SummaryTable { key: "k".into(), prefix: "k".into(), rows: k });
    }
    Ok(PosteriorSummary {
        alpha,
        depth: grid.depth(),
        max_study_time: grid.max_study_time(),
        n_strata,
        n_covariates: layout.covariate_names().len(),
        labels,
        tables,
    })
}

/// Five-number summary plus mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> FiveNumber {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        FiveNumber {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ICReport {
    pub dic: f64,
    pub aic: f64,
    pub bic: f64,
    /// Effective number of parameters `mean(D) - D(median)`.
    pub p_d: f64,
    pub d_bar: f64,
    pub d_hat: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub neg2loglik: FiveNumber,
}

impl ICReport {
    /// Criteria from per-sample deviances and the deviance at the plug-in point.
    pub fn from_deviances(samples: &[f64], d_hat: f64, n_params: usize, n_obs: usize) -> Result<ICReport> {
        if n_obs == 0 {
            return Err(MrhError::Domain("sample size n must be positive".into()));
        }
        if samples.is_empty() {
            return Err(MrhError::Format("chain has no samples".into()));
        }
        let d_bar = samples.iter().sum::<f64>() / samples.len() as f64;
        let p_d = d_bar - d_hat;
        let p = n_params as f64;
        Ok(ICReport {
            dic: d_bar + p_d,
            aic: d_hat + 2.0 * p,
            bic: d_hat + p * (n_obs as f64).ln(),
            p_d,
            d_bar,
            d_hat,
            n_params,
            n_obs,
            neg2loglik: FiveNumber::of(samples),
        })
    }
}

impl fmt::Display for ICReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.neg2loglik;
        writeln!(f, "$neg2loglik.summ")?;
        let heads = ["Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max."];
        let vals = [s.min, s.q1, s.median, s.mean, s.q3, s.max].map(|v| format!("{v:.1}"));
        let w: Vec<usize> = heads.iter().zip(&vals).map(|(h, v)| h.len().max(v.len())).collect();
        let line = |items: &[String]| items.iter().zip(&w).map(|(x, w)| format!("{x:>w$}")).collect::<Vec<_>>().join(" ");
        writeln!(f, "{}", line(&heads.map(String::from)))?;
        writeln!(f, "{}", line(&vals))?;
        writeln!(f)?;
        writeln!(f, "$ICtable")?;
        writeln!(f, "{:>10} {:>10} {:>10}", "DIC", "AIC", "BIC")?;
        writeln!(f, "{:>10.4} {:>10.4} {:>10.4}", self.dic, self.aic, self.bic)?;
        writeln!(f)?;
        writeln!(f, "pD: {:.4}  parameters: {}  n: {}", self.p_d, self.n_params, self.n_obs)
    }
}

/// DIC, AIC and BIC of a chain. The plug-in point is the vector of marginal
/// posterior medians; the parameter count is the number of chain columns.
pub fn information_criteria(store: &ChainStore, data: &SurvivalDataset, grid: &TimeGrid, n: usize) -> Result<ICReport> {
    if n == 0 {
        return Err(MrhError::Domain("sample size n must be positive".into()));
    }
    if store.is_empty() {
        return Err(MrhError::Format("chain has no samples".into()));
    }
    let layout = store.layout();
    if layout.n_strata() != data.n_strata() || layout.covariate_names().len() != data.n_covariates() {
        return Err(MrhError::Config(format!(
            "chain has {} strata and {} coefficients, data has {} and {}",
            layout.n_strata(),
            layout.covariate_names().len(),
            data.n_strata(),
            data.n_covariates()
        )));
    }
    if layout.depth() != grid.depth() {
        return Err(MrhError::Config("time grid depth does not match the chain".into()));
    }
    let mut stats = SufficientStats::new(data, grid, &vec![0.0; data.n_covariates()])?;
    let has_beta = data.n_covariates() > 0;
    let mut deviance = |row: &[f64]| {
        if has_beta {
            stats.set_beta(data, &layout.betas(row));
        }
        -2.0 * stats.log_likelihood(&layout.increments(row))
    };
    let samples: Vec<f64> = store.rows().map(&mut deviance).collect();
    let medians: Vec<f64> = (0..store.n_cols()).map(|j| median(&store.column(j))).collect();
    let d_hat = deviance(&medians);
    ICReport::from_deviances(&samples, d_hat, store.n_cols(), n)
}

/// Combined summary of several chains plus the Gelman-Rubin factors.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChainSummary {
    pub summary: PosteriorSummary,
    pub gelman_rubin: Vec<(String, f64)>,
}

/// Summarizes each chain and reports the median across chains of every
/// estimate and bound. Chains are truncated to the shortest length.
pub fn analyze_multiple(
    stores: &[ChainStore],
    grid: &TimeGrid,
    alpha: f64,
    labels: &StratumLabels,
) -> Result<MultiChainSummary> {
    if stores.len() < 2 {
        return Err(MrhError::Config("at least two chains are required".into()));
    }
    let first = stores[0].layout();
    let n = stores.iter().map(ChainStore::n_rows).min().unwrap_or(0);
    let aligned = stores.iter().map(|s| s.reorder(first).map(|s| s.tail(n))).collect::<Result<Vec<_>>>()?;
    let summaries = aligned.iter().map(|s| summarize(s, grid, alpha, labels)).collect::<Result<Vec<_>>>()?;
    let mut combined = summaries[0].clone();
    for (t, table) in combined.tables.iter_mut().enumerate() {
        for (r, row) in table.rows.iter_mut().enumerate() {
            let pick = |f: fn(&SummaryRow) -> f64| median(&summaries.iter().map(|s| f(&s.tables[t].rows[r])).collect::<Vec<_>>());
            row.estimate = pick(|x| x.estimate);
            row.lower = pick(|x| x.lower);
            row.upper = pick(|x| x.upper);
        }
    }
    let matrices: Vec<_> = aligned.iter().map(ChainStore::to_matrix).collect();
    Ok(MultiChainSummary { summary: combined, gelman_rubin: gelman_rubin(&matrices)? })
}

impl fmt::Display for MultiChainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.summary)?;
        writeln!(f, "$gelman.rubin")?;
        let w = self.gelman_rubin.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        writeln!(f, "{:w$} Scale Reduction Factor", "")?;
        for (name, v) in &self.gelman_rubin {
            writeln!(f, "{name:<w$} {v:.2}")?;
        }
        if self.gelman_rubin.iter().any(|(_, v)| *v > 1.1) {
            writeln!(f, "\nSome factors exceed 1.1; the chains may not have mixed.")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Hazard,
    CumulativeHazard,
    Survival,
    Ratio,
}

impl PlotKind {
    pub fn file_tag(self) -> &'static str {
        match self {
            PlotKind::Hazard => "hazard",
            PlotKind::CumulativeHazard => "H",
            PlotKind::Survival => "S",
            PlotKind::Ratio => "ratio",
        }
    }
}

impl FromStr for PlotKind {
    type Err = MrhError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hazard" | "h" => Ok(PlotKind::Hazard),
            "H" | "cumhazard" => Ok(PlotKind::CumulativeHazard),
            "S" | "survival" => Ok(PlotKind::Survival),
            "ratio" | "r" => Ok(PlotKind::Ratio),
            _ => Err(MrhError::Config(format!("unknown plot kind '{s}' (expected hazard, H, S or ratio)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub kind: PlotKind,
    /// 0-based stratum, or `None` for a combined or single-stratum table.
    pub stratum: Option<usize>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    pub fn file_name(&self) -> String {
        match self.stratum {
            Some(l) => format!("plotdata_{}_{}.txt", self.kind.file_tag(), l + 1),
            None => format!("plotdata_{}.txt", self.kind.file_tag()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format_g6(*v)).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Plot-ready tables. Step kinds (hazard, ratio) give one row per bin with
/// its start and end; curve kinds (H, S) give one row per bin boundary,
/// including `t = 0`. `smooth` replaces the step heights by a cubic
/// smoothing spline through the bin midpoints with that many degrees of freedom.
pub fn plot_data(summary: &PosteriorSummary, kind: PlotKind, combine: bool, smooth: Option<f64>) -> Result<Vec<PlotTable>> {
    let j_bins = summary.n_bins();
    let width = summary.max_study_time / j_bins as f64;
    let need = |key: &str| {
        summary.table(key).ok_or_else(|| MrhError::Config(format!("summary has no '{key}' table")))
    };
    let strata: Vec<usize> = match kind {
        PlotKind::Ratio => {
            if summary.n_strata < 2 {
                return Err(MrhError::Config("hazard ratio plots need at least two strata".into()));
            }
            (1..summary.n_strata).collect()
        }
        _ => (0..summary.n_strata).collect(),
    };
    if smooth.is_some() && matches!(kind, PlotKind::Survival | PlotKind::CumulativeHazard) {
        return Err(MrhError::Config("smoothing applies to hazard and ratio plots only".into()));
    }
    let mut per_stratum = Vec::new();
    for &l in &strata {
        let rows: Vec<Vec<f64>> = match kind {
            PlotKind::Hazard | PlotKind::Ratio => {
                let (table, offset) = if kind == PlotKind::Hazard {
                    (need("hazardRate")?, l * j_bins)
                } else {
                    (need("beta")?, summary.n_covariates + (l - 1) * j_bins)
                };
                let rows = &table.rows[offset..offset + j_bins];
                let mut est: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
                let mut lo: Vec<f64> = rows.iter().map(|r| r.lower).collect();
                let mut hi: Vec<f64> = rows.iter().map(|r| r.upper).collect();
                if let Some(df) = smooth {
                    let mid: Vec<f64> = (0..j_bins).map(|j| (j as f64 + 0.5) * width).collect();
                    est = smoothing_spline(&mid, &est, df)?;
                    lo = smoothing_spline(&mid, &lo, df)?;
                    hi = smoothing_spline(&mid, &hi, df)?;
                }
                (0..j_bins).map(|j| vec![j as f64 * width, (j + 1) as f64 * width, est[j], lo[j], hi[j]]).collect()
            }
            PlotKind::Survival | PlotKind::CumulativeHazard => {
                let key = if kind == PlotKind::Survival { "SurvivalCurve" } else { "CumulativeHazard" };
                let table = need(key)?;
                let offset = l * (j_bins + 1);
                (0..=j_bins)
                    .map(|j| {
                        let r = &table.rows[offset + j];
                        let t = if j == j_bins { summary.max_study_time } else { j as f64 * width };
                        vec![t, r.estimate, r.lower, r.upper]
                    })
                    .collect()
            }
        };
        per_stratum.push((l, rows));
    }
    let columns: Vec<String> = match kind {
        PlotKind::Hazard | PlotKind::Ratio => vec!["start", "end", "estimate", "lower", "upper"],
        _ => vec!["time", "estimate", "lower", "upper"],
    }
    .into_iter()
    .map(String::from)
    .collect();
    if combine || per_stratum.len() == 1 {
        let with_stratum = per_stratum.len() > 1;
        let mut cols = columns.clone();
        if with_stratum {
            cols.insert(0, "stratum".into());
        }
        let rows = per_stratum
            .into_iter()
            .flat_map(|(l, rows)| {
                rows.into_iter().map(move |mut r| {
                    if with_stratum {
                        r.insert(0, (l + 1) as f64);
                    }
                    r
                })
            })
            .collect();
        Ok(vec![PlotTable { kind, stratum: None, columns: cols, rows }])
    } else {
        Ok(per_stratum
            .into_iter()
            .map(|(l, rows)| PlotTable { kind, stratum: Some(l), columns: columns.clone(), rows })
            .collect())
    }
}

/// Writes each table to `folder/plotdata_{kind}[_{stratum}].txt`.
pub fn write_plot_tables(tables: &[PlotTable], folder: &Path) -> Result<Vec<PathBuf>> {
    tables
        .iter()
        .map(|t| {
            let path = folder.join(t.file_name());
            std::fs::write(&path, t.to_text()).map_err(|e| MrhError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
