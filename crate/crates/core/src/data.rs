//! Survival datasets, the dyadic time grid, bin-width tables and
//! Kaplan-Meier / Nelson-Aalen estimators.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{MrhError, Result};
use crate::numfmt::{format_r, format_r_column};

/// Names of the NPH factor(s) and the level label of each stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumLabels {
    /// Factor name; merged factors are joined with `:`. `None` without NPH terms.
    pub factor: Option<String>,
    /// One label per stratum, index 0 is stratum 1.
    pub levels: Vec<String>,
}

impl StratumLabels {
    pub fn single() -> Self {
        StratumLabels { factor: None, levels: vec!["1".to_string()] }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Generic labels `1..=n` for an anonymous stratification.
    pub fn numbered(n: usize) -> Self {
        StratumLabels {
            factor: if n > 1 { Some("stratum".to_string()) } else { None },
            levels: (1..=n).map(|l| l.to_string()).collect(),
        }
    }
}

/// Right-censored survival data with PH covariates and NPH strata.
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    events: Vec<bool>,
    covariates: Vec<f64>,
    covariate_names: Vec<String>,
    strata: Vec<usize>,
    labels: StratumLabels,
}

impl SurvivalDataset {
    /// Validates and builds a dataset. `covariates` is row-major (one row per
    /// subject), `strata` holds 0-based stratum indices.
    pub fn new(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: Vec<Vec<f64>>,
        covariate_names: Vec<String>,
        strata: Vec<usize>,
        labels: StratumLabels,
    ) -> Result<Self> {
        let n = times.len();
        if events.len() != n || covariates.len() != n || strata.len() != n {
            return Err(MrhError::data("column lengths differ"));
        }
        let z = covariate_names.len();
        for (i, &t) in times.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(MrhError::data_at(i + 1, format!("time must be positive, got {t}")));
            }
        }
        let mut flat = Vec::with_capacity(n * z);
        for (i, row) in covariates.iter().enumerate() {
            if row.len() != z {
                return Err(MrhError::data_at(i + 1, "covariate row has the wrong length"));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(MrhError::data_at(i + 1, format!("non-finite covariate value {v}")));
            }
            flat.extend_from_slice(row);
        }
        let n_strata = labels.len();
        if n_strata == 0 {
            return Err(MrhError::data("at least one stratum is required"));
        }
        let mut counts = vec![0usize; n_strata];
        for (i, &s) in strata.iter().enumerate() {
            if s >= n_strata {
                return Err(MrhError::data_at(i + 1, format!("stratum index {} out of range", s + 1)));
            }
            counts[s] += 1;
        }
        if n > 0 {
            if let Some(l) = counts.iter().position(|&c| c == 0) {
                return Err(MrhError::data(format!("stratum {} is empty", l + 1)));
            }
        }
        Ok(SurvivalDataset { times, events, covariates: flat, covariate_names, strata, labels })
    }

    /// A single-stratum dataset without covariates.
    pub fn unstratified(times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        let n = times.len();
        SurvivalDataset::new(times, events, vec![Vec::new(); n], Vec::new(), vec![0; n], StratumLabels::single())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn strata(&self) -> &[usize] {
        &self.strata
    }

    pub fn n_strata(&self) -> usize {
        self.labels.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn labels(&self) -> &StratumLabels {
        &self.labels
    }

    /// Covariate row of subject `i`.
    pub fn covariates(&self, i: usize) -> &[f64] {
        let z = self.n_covariates();
        &self.covariates[i * z..(i + 1) * z]
    }

    pub fn stratum_size(&self, stratum: usize) -> usize {
        self.strata.iter().filter(|&&s| s == stratum).count()
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn max_time(&self) -> f64 {
        self.times.iter().cloned().fold(0.0, f64::max)
    }

    /// Subject indices belonging to `stratum`.
    pub fn stratum_members(&self, stratum: usize) -> impl Iterator<Item = usize> + '_ {
        self.strata.iter().enumerate().filter(move |(_, &s)| s == stratum).map(|(i, _)| i)
    }
}

/// Column selection for [`load_dataset`].
#[derive(Debug, Clone, Default)]
pub struct ColumnSpec {
    pub time: String,
    pub delta: String,
    pub covariates: Vec<String>,
    pub nph: Vec<String>,
}

/// Sort key for factor levels: numerically when every level parses as a number.
fn sort_levels(levels: &mut [String]) {
    let numeric: Option<Vec<f64>> = levels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if numeric.is_some() {
        levels.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    } else {
        levels.sort();
    }
}

/// Reads a comma- or tab-delimited file with a header row.
pub fn load_dataset(path: impl AsRef<Path>, columns: &ColumnSpec) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MrhError::io(path, e))?;
    parse_dataset(&text, columns)
}

/// Column names of a dataset file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MrhError::io(path, e))?;
    let first = text.lines().next().unwrap_or("");
    let delimiter = if first.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_reader(first.as_bytes());
    let headers = reader.headers().map_err(|e| MrhError::Format(format!("unreadable header: {e}")))?;
    Ok(headers.iter().map(String::from).collect())
}

/// Parses delimited text; see [`load_dataset`].
pub fn parse_dataset(text: &str, columns: &ColumnSpec) -> Result<SurvivalDataset> {
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| MrhError::Format(format!("unreadable header: {e}")))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MrhError::Config(format!("column '{name}' not found in dataset")))
    };
    let time_col = find(&columns.time)?;
    let delta_col = find(&columns.delta)?;
    let cov_cols = columns.covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let nph_cols = columns.nph.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut covs = Vec::new();
    let mut nph_values: Vec<Vec<String>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| MrhError::data_at(row, format!("malformed record: {e}")))?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let t: f64 = field(time_col)
            .parse()
            .map_err(|_| MrhError::data_at(row, format!("non-numeric time '{}'", field(time_col))))?;
        if !(t.is_finite() && t > 0.0) {
            return Err(MrhError::data_at(row, format!("time must be positive, got {t}")));
        }
        let d = match field(delta_col).parse::<f64>() {
            Ok(v) if v == 0.0 => false,
            Ok(v) if v == 1.0 => true,
            _ => {
                return Err(MrhError::data_at(
                    row,
                    format!("censoring indicator must be 0 or 1, got '{}'", field(delta_col)),
                ))
            }
        };
        let mut x = Vec::with_capacity(cov_cols.len());
        for (&c, name) in cov_cols.iter().zip(&columns.covariates) {
            let v: f64 = field(c)
                .parse()
                .map_err(|_| MrhError::data_at(row, format!("non-numeric value '{}' in column {name}", field(c))))?;
            x.push(v);
        }
        let levels: Vec<String> = nph_cols.iter().map(|&c| field(c).to_string()).collect();
        if levels.iter().any(|l| l.is_empty() || l == "NA") {
            return Err(MrhError::data_at(row, "missing NPH factor level"));
        }
        times.push(t);
        events.push(d);
        covs.push(x);
        nph_values.push(levels);
    }

    let (strata, labels) = merge_nph_levels(&nph_values, &columns.nph);
    SurvivalDataset::new(times, events, covs, columns.covariates.clone(), strata, labels)
}

/// Merges one or more factor columns into a single interaction stratum.
fn merge_nph_levels(values: &[Vec<String>], names: &[String]) -> (Vec<usize>, StratumLabels) {
    if names.is_empty() {
        return (vec![0; values.len()], StratumLabels::single());
    }
    let ranks: Vec<BTreeMap<String, usize>> = (0..names.len())
        .map(|c| {
            let mut levels: Vec<String> = values.iter().map(|v| v[c].clone()).collect();
            sort_levels(&mut levels);
            levels.dedup();
            levels.into_iter().enumerate().map(|(r, l)| (l, r)).collect()
        })
        .collect();
    let keys: Vec<Vec<usize>> =
        values.iter().map(|v| v.iter().enumerate().map(|(c, l)| ranks[c][l]).collect()).collect();
    let mut combos: Vec<Vec<usize>> = keys.clone();
    combos.sort();
    combos.dedup();
    let index: BTreeMap<&Vec<usize>, usize> = combos.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let strata = keys.iter().map(|k| index[k]).collect();
    let levels = combos
        .iter()
        .map(|k| {
            k.iter()
                .enumerate()
                .map(|(c, &r)| ranks[c].iter().find(|(_, &v)| v == r).unwrap().0.clone())
                .collect::<Vec<_>>()
                .join(":")
        })
        .collect();
    (strata, StratumLabels { factor: Some(names.join(":")), levels })
}

/// Equal-width dyadic partition of `(0, max_study_time]` into `2^depth` bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    depth: u32,
    max_study_time: f64,
}

impl TimeGrid {
    pub fn new(depth: u32, max_study_time: f64) -> Result<Self> {
        if depth > 20 {
            return Err(MrhError::Config(format!("tree depth {depth} is too large")));
        }
        if !(max_study_time.is_finite() && max_study_time > 0.0) {
            return Err(MrhError::Config(format!("maxStudyTime must be positive, got {max_study_time}")));
        }
        Ok(TimeGrid { depth, max_study_time })
    }

    /// Checks that every subject time lies inside the grid.
    pub fn check_dataset(&self, data: &SurvivalDataset) -> Result<()> {
        for (i, &t) in data.times().iter().enumerate() {
            if t > self.max_study_time {
                return Err(MrhError::data_at(
                    i + 1,
                    format!("time {t} exceeds maxStudyTime {}", self.max_study_time),
                ));
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn max_study_time(&self) -> f64 {
        self.max_study_time
    }

    pub fn n_bins(&self) -> usize {
        1 << self.depth
    }

    pub fn bin_width(&self) -> f64 {
        self.max_study_time / self.n_bins() as f64
    }

    /// Boundary `t_j`, `j = 0..=J`.
    pub fn boundary(&self, j: usize) -> f64 {
        if j == self.n_bins() {
            self.max_study_time
        } else {
            j as f64 * self.bin_width()
        }
    }

    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.n_bins()).map(|j| self.boundary(j)).collect()
    }

    /// 1-based bin containing `t` under right-closed bins `(t_{j-1}, t_j]`,
    /// with the fraction of that bin elapsed at `t`.
    pub fn bin_index(&self, t: f64) -> Result<(usize, f64)> {
        if !(t > 0.0 && t <= self.max_study_time) {
            return Err(MrhError::Domain(format!(
                "time {t} outside (0, {}]",
                self.max_study_time
            )));
        }
        let j_max = self.n_bins();
        let mut x = t / self.bin_width();
        let r = x.round();
        if r >= 1.0 && (x - r).abs() <= 1e-9 * r {
            x = r;
        }
        let j = (x.ceil() as usize).clamp(1, j_max);
        let fraction = (x - (j - 1) as f64).clamp(f64::MIN_POSITIVE, 1.0);
        Ok((j, fraction))
    }
}

/// Time units understood by [`find_bin_width`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Seconds,
    Minutes,
    Hours,
    Days,
    Weeks,
    Months,
    Years,
}

impl TimeUnit {
    pub const ALL: [TimeUnit; 7] = [
        TimeUnit::Seconds,
        TimeUnit::Minutes,
        TimeUnit::Hours,
        TimeUnit::Days,
        TimeUnit::Weeks,
        TimeUnit::Months,
        TimeUnit::Years,
    ];

    /// Length of one unit in seconds (365.25-day year).
    pub fn seconds(self) -> f64 {
        const DAY: f64 = 86_400.0;
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Minutes => 60.0,
            TimeUnit::Hours => 3_600.0,
            TimeUnit::Days => DAY,
            TimeUnit::Weeks => 7.0 * DAY,
            TimeUnit::Months => 365.25 / 12.0 * DAY,
            TimeUnit::Years => 365.25 * DAY,
        }
    }

    pub fn column_name(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "secs",
            TimeUnit::Minutes => "mins",
            TimeUnit::Hours => "hours",
            TimeUnit::Days => "days",
            TimeUnit::Weeks => "weeks",
            TimeUnit::Months => "months",
            TimeUnit::Years => "years",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "seconds",
            TimeUnit::Minutes => "minutes",
            other => other.column_name(),
        }
    }

    /// Converts `value` expressed in `self` into `target` units.
    pub fn convert(self, value: f64, target: TimeUnit) -> f64 {
        value * self.seconds() / target.seconds()
    }
}

impl std::str::FromStr for TimeUnit {
    type Err = MrhError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "s" => TimeUnit::Seconds,
            "min" => TimeUnit::Minutes,
            "h" => TimeUnit::Hours,
            "d" => TimeUnit::Days,
            "w" => TimeUnit::Weeks,
            "mo" => TimeUnit::Months,
            "y" => TimeUnit::Years,
            other => {
                return Err(MrhError::Config(format!(
                    "unknown time unit '{other}' (expected s, min, h, d, w, mo or y)"
                )))
            }
        })
    }
}

/// Summary of observed times and candidate bin widths for `M = 2..=10`.
#[derive(Debug, Clone)]
pub struct BinWidthTable {
    pub unit: TimeUnit,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// `(M, widths in the order of TimeUnit::ALL)`.
    pub rows: Vec<(u32, [f64; 7])>,
}

pub fn find_bin_width(times: &[f64], unit: TimeUnit) -> Result<BinWidthTable> {
    if times.is_empty() {
        return Err(MrhError::data("no survival times supplied"));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(MrhError::data(format!("times must be positive, got {t}")));
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) { 0.5 * (sorted[mid - 1] + sorted[mid]) } else { sorted[mid] };
    let max = sorted[sorted.len() - 1];
    let rows = (2..=10u32)
        .map(|m| {
            let width = max / f64::from(1u32 << m);
            let mut out = [0.0; 7];
            for (slot, target) in out.iter_mut().zip(TimeUnit::ALL) {
                *slot = unit.convert(width, target);
            }
            (m, out)
        })
        .collect();
    Ok(BinWidthTable { unit, mean, median, min: sorted[0], max, rows })
}

impl fmt::Display for BinWidthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = self.unit.long_name();
        writeln!(f, "The mean failure time is  {} {unit}", format_r(self.mean))?;
        writeln!(f, "The median failure time is  {} {unit}", format_r(self.median))?;
        writeln!(f, "The range of failure times is  {} to {} {unit}", format_r(self.min), format_r(self.max))?;
        writeln!(f, " ")?;
        let row_names: Vec<String> = self.rows.iter().map(|(m, _)| format!("M{m}")).collect();
        let name_width = row_names.iter().map(String::len).max().unwrap_or(0);
        let columns: Vec<Vec<String>> = (0..7)
            .map(|c| format_r_column(&self.rows.iter().map(|(_, w)| w[c]).collect::<Vec<_>>()))
            .collect();
        let widths: Vec<usize> = TimeUnit::ALL
            .iter()
            .zip(&columns)
            .map(|(u, col)| col.iter().map(String::len).chain([u.column_name().len()]).max().unwrap())
            .collect();
        write!(f, "{:name_width$}", "")?;
        for (u, w) in TimeUnit::ALL.iter().zip(&widths) {
            write!(f, " {:>w$}", u.column_name())?;
        }
        writeln!(f)?;
        for (r, name) in row_names.iter().enumerate() {
            write!(f, "{name:<name_width$}")?;
            for (col, w) in columns.iter().zip(&widths) {
                write!(f, " {:>w$}", col[r])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// One step of a product-limit curve.
#[derive(Debug, Clone, PartialEq)]
pub struct KmStep {
    pub time: f64,
    pub survival: f64,
    pub n_risk: usize,
    pub n_event: usize,
}

#[derive(Debug, Clone)]
pub struct KmCurve {
    /// 0-based stratum, `None` for the pooled curve.
    pub stratum: Option<usize>,
    pub steps: Vec<KmStep>,
}

fn product_limit(times: &[f64], events: &[bool]) -> Vec<KmStep> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut at_risk = times.len();
    let mut survival = 1.0;
    let mut steps = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0;
        let mut leaving = 0;
        while i < order.len() && times[order[i]] == t {
            deaths += usize::from(events[order[i]]);
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            survival *= 1.0 - deaths as f64 / at_risk as f64;
            steps.push(KmStep { time: t, survival, n_risk: at_risk, n_event: deaths });
        }
        at_risk -= leaving;
    }
    steps
}

/// Kaplan-Meier curves, pooled or one per stratum.
pub fn km_estimate(data: &SurvivalDataset, stratified: bool) -> Vec<KmCurve> {
    if !stratified {
        return vec![KmCurve { stratum: None, steps: product_limit(data.times(), data.events()) }];
    }
    (0..data.n_strata())
        .map(|l| {
            let idx: Vec<usize> = data.stratum_members(l).collect();
            let t: Vec<f64> = idx.iter().map(|&i| data.times()[i]).collect();
            let e: Vec<bool> = idx.iter().map(|&i| data.events()[i]).collect();
            KmCurve { stratum: Some(l), steps: product_limit(&t, &e) }
        })
        .collect()
}

/// Nelson-Aalen cumulative hazard of one stratum evaluated at `t`.
pub fn nelson_aalen_at(data: &SurvivalDataset, stratum: usize, t: f64) -> f64 {
    let mut times: Vec<(f64, bool)> =
        data.stratum_members(stratum).map(|i| (data.times()[i], data.events()[i])).collect();
    times.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut at_risk = times.len();
    let mut cum = 0.0;
    let mut i = 0;
    while i < times.len() && times[i].0 <= t {
        let ti = times[i].0;
        let mut deaths = 0;
        let mut leaving = 0;
        while i < times.len() && times[i].0 == ti {
            deaths += usize::from(times[i].1);
            leaving += 1;
            i += 1;
        }
        cum += deaths as f64 / at_risk as f64;
        at_risk -= leaving;
    }
    cum
}
