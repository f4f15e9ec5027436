//! Free-parameter identities and their chain-file column names.
//!
//! Names follow `H00_l`, `Rmp{m}.{p}_l`, `beta.{covariate}`, `a_l`,
//! `lambda_l`, `k_l` and `gammamp{m}.{p}_l`, with `l` the 1-based stratum.

use std::fmt;

use crate::error::{MrhError, Result};
use crate::model::ParameterState;
use crate::tree::{splits_to_increments, SplitId};

/// One free parameter. Strata and coefficients are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamId {
    Total(usize),
    Split(usize, SplitId),
    Beta(usize),
    A(usize),
    Lambda(usize),
    K(usize),
    Gamma(usize, SplitId),
}

impl ParamId {
    pub fn stratum(self) -> Option<usize> {
        match self {
            ParamId::Beta(_) => None,
            ParamId::Total(l)
            | ParamId::Split(l, _)
            | ParamId::A(l)
            | ParamId::Lambda(l)
            | ParamId::K(l)
            | ParamId::Gamma(l, _) => Some(l),
        }
    }

    fn group_rank(self) -> u8 {
        match self {
            ParamId::Total(_) => 0,
            ParamId::Split(..) => 1,
            ParamId::Beta(_) => 2,
            ParamId::A(_) => 3,
            ParamId::Lambda(_) => 4,
            ParamId::K(_) => 5,
            ParamId::Gamma(..) => 6,
        }
    }
}

/// Ordered column set of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    ids: Vec<ParamId>,
    covariate_names: Vec<String>,
    n_strata: usize,
    depth: u32,
}

/// What the layout should contain beyond totals, unpruned splits and coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampledHypers {
    pub a: bool,
    pub lambda: bool,
    pub k: bool,
    pub gamma: bool,
}

impl ParamLayout {
    /// Columns of a model with the given pruning masks (one per stratum).
    pub fn new(depth: u32, pruned: &[Vec<SplitId>], covariate_names: &[String], hypers: SampledHypers) -> Self {
        let n_strata = pruned.len();
        let free = |l: usize| SplitId::all(depth).filter(move |id| !pruned[l].contains(id));
        let mut ids: Vec<ParamId> = (0..n_strata).map(ParamId::Total).collect();
        for l in 0..n_strata {
            ids.extend(free(l).map(|id| ParamId::Split(l, id)));
        }
        ids.extend((0..covariate_names.len()).map(ParamId::Beta));
        if hypers.a {
            ids.extend((0..n_strata).map(ParamId::A));
        }
        if hypers.lambda {
            ids.extend((0..n_strata).map(ParamId::Lambda));
        }
        if hypers.k {
            ids.extend((0..n_strata).map(ParamId::K));
        }
        if hypers.gamma {
            for l in 0..n_strata {
                ids.extend(free(l).map(|id| ParamId::Gamma(l, id)));
            }
        }
        ParamLayout { ids, covariate_names: covariate_names.to_vec(), n_strata, depth }
    }

    /// Rebuilds a layout from column names. `depth` overrides the depth
    /// inferred from the deepest split column.
    pub fn from_names(names: &[String], depth: Option<u32>) -> Result<Self> {
        let mut ids = Vec::with_capacity(names.len());
        let mut covariate_names = Vec::new();
        for name in names {
            let id = if let Some(cov) = name.strip_prefix("beta.") {
                if cov.is_empty() {
                    return Err(MrhError::Format(format!("unknown column name '{name}'")));
                }
                covariate_names.push(cov.to_string());
                ParamId::Beta(covariate_names.len() - 1)
            } else {
                parse_stratum_name(name)?
            };
            ids.push(id);
        }
        let n_strata = ids.iter().filter_map(|id| id.stratum()).max().map_or(0, |l| l + 1);
        if n_strata == 0 || (0..n_strata).any(|l| !ids.contains(&ParamId::Total(l))) {
            return Err(MrhError::Format("every stratum needs an H00 column".into()));
        }
        let deepest = ids
            .iter()
            .filter_map(|id| match id {
                ParamId::Split(_, s) | ParamId::Gamma(_, s) => Some(s.level),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let depth = match depth {
            Some(d) if d < deepest => {
                return Err(MrhError::Config(format!("depth {d} is smaller than split level {deepest} in the chain")))
            }
            Some(d) => d,
            None => deepest,
        };
        let mut seen = ids.clone();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(MrhError::Format("duplicate column names".into()));
        }
        Ok(ParamLayout { ids, covariate_names, n_strata, depth })
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_strata(&self) -> usize {
        self.n_strata
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn position(&self, id: ParamId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn name(&self, id: ParamId) -> String {
        match id {
            ParamId::Total(l) => format!("H00_{}", l + 1),
            ParamId::Split(l, s) => format!("Rmp{s}_{}", l + 1),
            ParamId::Beta(r) => format!("beta.{}", self.covariate_names[r]),
            ParamId::A(l) => format!("a_{}", l + 1),
            ParamId::Lambda(l) => format!("lambda_{}", l + 1),
            ParamId::K(l) => format!("k_{}", l + 1),
            ParamId::Gamma(l, s) => format!("gammamp{s}_{}", l + 1),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.ids.iter().map(|&id| self.name(id)).collect()
    }

    /// Splits of stratum `l` that have no column, i.e. pruned.
    pub fn pruned(&self, l: usize) -> Vec<SplitId> {
        SplitId::all(self.depth).filter(|&s| self.position(ParamId::Split(l, s)).is_none()).collect()
    }

    pub fn hypers(&self) -> SampledHypers {
        let has = |f: fn(&ParamId) -> bool| self.ids.iter().any(f);
        SampledHypers {
            a: has(|id| matches!(id, ParamId::A(_))),
            lambda: has(|id| matches!(id, ParamId::Lambda(_))),
            k: has(|id| matches!(id, ParamId::K(_))),
            gamma: has(|id| matches!(id, ParamId::Gamma(..))),
        }
    }

    /// Same columns regardless of order.
    pub fn same_columns(&self, other: &ParamLayout) -> bool {
        let mut a = self.names();
        let mut b = other.names();
        a.sort();
        b.sort();
        a == b
    }

    /// Column order used for grouping in reports: parameter kind, then stratum.
    pub fn sort_key(id: ParamId) -> (u8, ParamId) {
        (id.group_rank(), id)
    }

    /// Reads the values of the layout's parameters from a state.
    pub fn extract(&self, state: &ParameterState) -> Vec<f64> {
        self.ids
            .iter()
            .map(|&id| match id {
                ParamId::Total(l) => state.trees[l].total,
                ParamId::Split(l, s) => state.trees[l].split(s),
                ParamId::Beta(r) => state.beta[r],
                ParamId::A(l) => state.trees[l].a,
                ParamId::Lambda(l) => state.trees[l].lambda,
                ParamId::K(l) => state.trees[l].k,
                ParamId::Gamma(l, s) => state.trees[l].gamma(s),
            })
            .collect()
    }

    /// Writes the values of a row into `state`; parameters without a column are left untouched.
    pub fn apply(&self, row: &[f64], state: &mut ParameterState) {
        for (&id, &v) in self.ids.iter().zip(row) {
            match id {
                ParamId::Total(l) => state.trees[l].total = v,
                ParamId::Split(l, s) => state.trees[l].set_split(s, v),
                ParamId::Beta(r) => state.beta[r] = v,
                ParamId::A(l) => state.trees[l].a = v,
                ParamId::Lambda(l) => state.trees[l].lambda = v,
                ParamId::K(l) => state.trees[l].k = v,
                ParamId::Gamma(l, s) => state.trees[l].set_gamma(s, v),
            }
        }
    }

    /// Per-stratum hazard increments implied by one row (missing splits are 0.5).
    pub fn increments(&self, row: &[f64]) -> Vec<Vec<f64>> {
        let n_splits = (1usize << self.depth) - 1;
        let mut totals = vec![f64::NAN; self.n_strata];
        let mut splits = vec![vec![0.5; n_splits]; self.n_strata];
        for (&id, &v) in self.ids.iter().zip(row) {
            match id {
                ParamId::Total(l) => totals[l] = v,
                ParamId::Split(l, s) => splits[l][s.index()] = v,
                _ => {}
            }
        }
        totals.iter().zip(&splits).map(|(&h, r)| splits_to_increments(h, r, self.depth)).collect()
    }

    /// Coefficient values of one row.
    pub fn betas(&self, row: &[f64]) -> Vec<f64> {
        let mut beta = vec![0.0; self.covariate_names.len()];
        for (&id, &v) in self.ids.iter().zip(row) {
            if let ParamId::Beta(r) = id {
                beta[r] = v;
            }
        }
        beta
    }
}

fn parse_stratum_name(name: &str) -> Result<ParamId> {
    let bad = || MrhError::Format(format!("unknown column name '{name}'"));
    let (stem, stratum) = name.rsplit_once('_').ok_or_else(bad)?;
    let l: usize = stratum.parse().map_err(|_| bad())?;
    if l == 0 {
        return Err(bad());
    }
    let l = l - 1;
    let split = |s: &str| s.parse::<SplitId>().map_err(|_| bad());
    Ok(match stem {
        "H00" => ParamId::Total(l),
        "a" => ParamId::A(l),
        "lambda" => ParamId::Lambda(l),
        "k" => ParamId::K(l),
        s if s.starts_with("gammamp") => ParamId::Gamma(l, split(&s["gammamp".len()..])?),
        s if s.starts_with("Rmp") => ParamId::Split(l, split(&s["Rmp".len()..])?),
        _ => return Err(bad()),
    })
}

impl fmt::Display for ParamLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.names().join(" "))
    }
}
