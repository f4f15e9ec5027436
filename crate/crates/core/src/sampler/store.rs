use crate::diagnostics::ChainMatrix;
use crate::error::{MrhError, Result};
use crate::params::ParamLayout;

/// Retained samples of one chain, row-major, plus the burn-in and thinning
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStore {
    layout: ParamLayout,
    values: Vec<f64>,
    pub burn_in: usize,
    pub thin: usize,
    /// Iterations completed, including burn-in.
    pub completed: usize,
    pub converged: bool,
}

impl ChainStore {
    /// An empty store; `completed` starts at `burn_in`.
    pub fn new(layout: ParamLayout, burn_in: usize, thin: usize) -> Self {
        assert!(thin >= 1, "thin must be at least 1");
        ChainStore { layout, values: Vec::new(), burn_in, thin, completed: burn_in, converged: false }
    }

    pub fn from_rows(layout: ParamLayout, rows: &[Vec<f64>], burn_in: usize, thin: usize) -> Result<Self> {
        let mut store = ChainStore::new(layout, burn_in, thin);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != store.n_cols() {
                return Err(MrhError::Format(format!(
                    "row {} has {} values, expected {}",
                    i + 1,
                    row.len(),
                    store.n_cols()
                )));
            }
            store.push_row(row);
        }
        Ok(store)
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn names(&self) -> Vec<String> {
        self.layout.names()
    }

    pub fn n_cols(&self) -> usize {
        self.layout.len()
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_cols().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks(self.n_cols().max(1))
    }

    pub fn last_row(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.row(self.n_rows() - 1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.names().iter().position(|n| n == name).map(|j| self.column(j))
    }

    /// Appends one retained draw and advances `completed` by one thinning interval.
    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n_cols(), "row width does not match the layout");
        self.values.extend_from_slice(row);
        self.completed += self.thin;
    }

    pub fn to_matrix(&self) -> ChainMatrix {
        let columns = (0..self.n_cols()).map(|j| self.column(j)).collect();
        ChainMatrix { names: self.names(), columns }
    }

    /// Thinned view that drops the first `skip` rows and keeps every `stride`-th after.
    pub fn view(&self, skip: usize, stride: usize) -> ChainStore {
        assert!(stride >= 1);
        let mut out = ChainStore::new(self.layout.clone(), self.burn_in + skip * self.thin, self.thin * stride);
        let mut r = skip + stride;
        while r <= self.n_rows() {
            out.push_row(self.row(r - 1));
            r += stride;
        }
        out.completed = self.completed;
        out.converged = self.converged;
        out
    }

    /// Same samples with columns reordered to `layout`, which must hold the same names.
    pub fn reorder(&self, layout: &ParamLayout) -> Result<ChainStore> {
        if !self.layout.same_columns(layout) {
            return Err(MrhError::Config("chains have incompatible column sets".into()));
        }
        let names = self.names();
        let map: Vec<usize> =
            layout.names().iter().map(|n| names.iter().position(|m| m == n).expect("same columns")).collect();
        let mut out = self.clone();
        out.layout = layout.clone();
        out.values = self.rows().flat_map(|r| map.iter().map(move |&j| r[j])).collect();
        Ok(out)
    }

    /// Keeps only the last `n` rows.
    pub fn tail(&self, n: usize) -> ChainStore {
        let skip = self.n_rows().saturating_sub(n);
        let mut out = self.clone();
        out.values = self.values[skip * self.n_cols()..].to_vec();
        out.burn_in += skip * self.thin;
        out
    }
}
