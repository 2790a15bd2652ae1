//! Finite-sample conditional-independence decisions and the provider
//! interface that lets the discovery engine run identically on oracle
//! answers or data.
//!
//! The default statistical backend is the partial-correlation Fisher-z
//! test, exact for the linear-Gaussian simulator preset. Indicator queries
//! pool observational and one interventional regime with an appended 0/1
//! column. A conditional-permutation two-sample test is available for
//! nonlinear mechanisms.

use crate::classes::AugmentedDag;
use crate::data::Table;
use crate::graph::VertexId;
use crate::oracle::{oracle_ci, oracle_psi_do_ci, CiQuery, OracleError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::RwLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CiError {
    #[error("need more than {need} rows, have {have}")]
    TooFewSamples { need: usize, have: usize },
    #[error("rank-deficient conditioning set, offending columns {0:?}")]
    SingularConditioning(Vec<String>),
    #[error("column index {0} out of range")]
    BadColumn(usize),
    #[error("datasets have different schemas: {0:?} vs {1:?}")]
    SchemaMismatch(Vec<String>, Vec<String>),
    #[error("indicator column is constant; both regimes must be present")]
    DegenerateIndicator,
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("invalid regime {0}")]
    BadRegime(usize),
}

/// Outcome of one conditional-independence decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub statistic: f64,
    pub p_value: f64,
    pub independent: bool,
    pub alpha: f64,
    pub effective_n: usize,
}

fn center(col: &[f64]) -> Vec<f64> {
    let m = col.iter().sum::<f64>() / col.len() as f64;
    col.iter().map(|v| v - m).collect()
}

fn corr_centered(a: &[f64], b: &[f64]) -> f64 {
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|y| y * y).sum();
    let denom = (saa * sbb).sqrt();
    if denom < 1e-12 {
        0.0
    } else {
        sab / denom
    }
}

/// Solves the symmetric system `gram * beta = rhs` in place; `Err(col)` on a
/// vanishing pivot (rank-deficient regressors).
fn solve_sym(mut gram: Vec<Vec<f64>>, mut rhs: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, usize> {
    let k = gram.len();
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&a, &b| gram[a][col].abs().partial_cmp(&gram[b][col].abs()).unwrap())
            .unwrap();
        if gram[pivot_row][col].abs() < 1e-9 {
            return Err(col);
        }
        gram.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        let p = gram[col][col];
        for g in gram[col].iter_mut() {
            *g /= p;
        }
        for r in rhs[col].iter_mut() {
            *r /= p;
        }
        for row in 0..k {
            if row == col {
                continue;
            }
            let f = gram[row][col];
            if f == 0.0 {
                continue;
            }
            let pivot = gram[col].clone();
            for (g, pv) in gram[row].iter_mut().zip(&pivot) {
                *g -= f * pv;
            }
            let pivot_rhs = rhs[col].clone();
            for (r, pv) in rhs[row].iter_mut().zip(&pivot_rhs) {
                *r -= f * pv;
            }
        }
    }
    Ok(rhs)
}

/// Partial correlation of `x` and `y` given `z`: correlates the residuals of
/// both after least-squares regression on the centered conditioning columns.
/// `Err(col)` reports a rank-deficient conditioning column.
fn partial_correlation(x: &[f64], y: &[f64], z: &[&[f64]]) -> Result<f64, usize> {
    let xc = center(x);
    let yc = center(y);
    if z.is_empty() {
        return Ok(corr_centered(&xc, &yc));
    }
    let zc: Vec<Vec<f64>> = z.iter().map(|c| center(c)).collect();
    let k = zc.len();
    // Normalize the Gram matrix so the pivot threshold is scale-free.
    let norms: Vec<f64> = zc
        .iter()
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>()).sqrt().max(1e-12))
        .collect();
    let zn: Vec<Vec<f64>> = zc
        .iter()
        .zip(&norms)
        .map(|(c, &n)| c.iter().map(|v| v / n).collect())
        .collect();
    let mut gram = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let s: f64 = zn[i].iter().zip(&zn[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = s;
            gram[j][i] = s;
        }
    }
    let rhs: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let bx: f64 = zn[i].iter().zip(&xc).map(|(a, b)| a * b).sum();
            let by: f64 = zn[i].iter().zip(&yc).map(|(a, b)| a * b).sum();
            vec![bx, by]
        })
        .collect();
    let beta = solve_sym(gram, rhs)?;
    let mut rx = xc;
    let mut ry = yc;
    for i in 0..k {
        for (r, &zv) in rx.iter_mut().zip(&zn[i]) {
            *r -= beta[i][0] * zv;
        }
        for (r, &zv) in ry.iter_mut().zip(&zn[i]) {
            *r -= beta[i][1] * zv;
        }
    }
    Ok(corr_centered(&rx, &ry))
}

fn two_sided_p(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * (1.0 - normal.cdf(z.abs()))
}

/// Fisher-z partial-correlation test between columns `x` and `y` of `table`
/// given `cond`. Deterministic given the data.
pub fn ci_test(
    table: &Table,
    x: usize,
    y: usize,
    cond: &[usize],
    alpha: f64,
) -> Result<CiResult, CiError> {
    for &c in [x, y].iter().chain(cond) {
        if c >= table.n_cols() {
            return Err(CiError::BadColumn(c));
        }
    }
    let n = table.n_rows();
    if n <= cond.len() + 3 {
        return Err(CiError::TooFewSamples {
            need: cond.len() + 4,
            have: n,
        });
    }
    let z: Vec<&[f64]> = cond.iter().map(|&c| table.col(c)).collect();
    let r = partial_correlation(table.col(x), table.col(y), &z).map_err(|_col| {
        let names: Vec<String> = cond
            .iter()
            .map(|&c| table.names()[c].clone())
            .collect();
        CiError::SingularConditioning(names)
    })?;
    let r = r.clamp(-(1.0 - 1e-7), 1.0 - 1e-7);
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln() * ((n - cond.len() - 3) as f64).sqrt();
    let p_value = two_sided_p(z);
    Ok(CiResult {
        statistic: z,
        p_value,
        independent: p_value > alpha,
        alpha,
        effective_n: n,
    })
}

/// Stacks the observational and one interventional table with an appended
/// 0/1 indicator column (0 = observational row).
pub fn pool_with_indicator(obs: &Table, intv: &Table) -> Result<Table, CiError> {
    if obs.names() != intv.names() {
        return Err(CiError::SchemaMismatch(
            obs.names().to_vec(),
            intv.names().to_vec(),
        ));
    }
    if obs.n_rows() == 0 || intv.n_rows() == 0 {
        return Err(CiError::DegenerateIndicator);
    }
    let mut names = obs.names().to_vec();
    names.push("psi".to_string());
    let mut cols: Vec<Vec<f64>> = (0..obs.n_cols())
        .map(|c| {
            let mut col = obs.col(c).to_vec();
            col.extend_from_slice(intv.col(c));
            col
        })
        .collect();
    let mut psi = vec![0.0; obs.n_rows()];
    psi.extend(std::iter::repeat_n(1.0, intv.n_rows()));
    cols.push(psi);
    Ok(Table::from_columns(names, cols))
}

/// Indicator invariance test: pools the two regimes and tests the indicator
/// column against `target_col` given `cond`.
pub fn psi_ci_test(
    obs: &Table,
    intv: &Table,
    target_col: usize,
    cond: &[usize],
    alpha: f64,
) -> Result<CiResult, CiError> {
    let pooled = pool_with_indicator(obs, intv)?;
    let psi_col = pooled.n_cols() - 1;
    ci_test(&pooled, psi_col, target_col, cond, alpha)
}

/// Conditional-permutation two-sample test for the indicator column, for
/// mechanisms where a linear statistic is too weak. Conditioning columns are
/// discretized into quantile bins and indicator labels are permuted within
/// bins.
pub fn psi_permutation_test(
    obs: &Table,
    intv: &Table,
    target_col: usize,
    cond: &[usize],
    alpha: f64,
    n_perm: usize,
) -> Result<CiResult, CiError> {
    let pooled = pool_with_indicator(obs, intv)?;
    let n = pooled.n_rows();
    if n <= cond.len() + 3 {
        return Err(CiError::TooFewSamples {
            need: cond.len() + 4,
            have: n,
        });
    }
    let psi: Vec<bool> = pooled
        .col(pooled.n_cols() - 1)
        .iter()
        .map(|&v| v > 0.5)
        .collect();
    let y = pooled.col(target_col);

    // Bin id per row over the conditioning grid.
    let bins_per_col = 5usize.min(1 + n / 50).max(2);
    let mut cell = vec![0usize; n];
    for &c in cond {
        let col = pooled.col(c);
        let mut sorted: Vec<f64> = col.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cuts: Vec<f64> = (1..bins_per_col)
            .map(|b| sorted[(b * n / bins_per_col).min(n - 1)])
            .collect();
        for (i, &v) in col.iter().enumerate() {
            let b = cuts.iter().take_while(|&&cut| v > cut).count();
            cell[i] = cell[i] * bins_per_col + b;
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &c) in cell.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    let mut group_rows: Vec<Vec<usize>> = groups.into_values().collect();
    group_rows.sort();

    let stat = |labels: &[bool]| -> f64 {
        let mut t = 0.0;
        for rows in &group_rows {
            let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
            for &r in rows {
                if labels[r] {
                    s1 += y[r];
                    n1 += 1;
                } else {
                    s0 += y[r];
                    n0 += 1;
                }
            }
            if n1 == 0 || n0 == 0 {
                continue;
            }
            let w = rows.len() as f64 / n as f64;
            t += w * (s1 / n1 as f64 - s0 / n0 as f64).abs();
        }
        t
    };

    let observed = stat(&psi);
    let mut hasher = DefaultHasher::new();
    (target_col, cond, n).hash(&mut hasher);
    let mut rng = ChaCha8Rng::seed_from_u64(hasher.finish());
    let mut labels = psi.clone();
    let mut exceed = 0usize;
    for _ in 0..n_perm {
        for rows in &group_rows {
            // Within-cell shuffle keeps the conditioning distribution fixed.
            let mut vals: Vec<bool> = rows.iter().map(|&r| labels[r]).collect();
            vals.shuffle(&mut rng);
            for (&r, v) in rows.iter().zip(vals) {
                labels[r] = v;
            }
        }
        if stat(&labels) >= observed {
            exceed += 1;
        }
    }
    let p_value = (1 + exceed) as f64 / (1 + n_perm) as f64;
    Ok(CiResult {
        statistic: observed,
        p_value,
        independent: p_value > alpha,
        alpha,
        effective_n: n,
    })
}

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum QueryKind {
    XvsX,
    Psi,
    PsiDo,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    kind: QueryKind,
    regime: usize,
    x: usize,
    y: usize,
    cond: Vec<usize>,
}

/// Concurrent-reader, single-writer decision cache.
#[derive(Debug, Default)]
struct CiCache {
    map: RwLock<HashMap<CacheKey, CiResult>>,
}

impl CiCache {
    fn get_or_insert_with<E>(
        &self,
        key: CacheKey,
        compute: impl FnOnce() -> Result<CiResult, E>,
    ) -> Result<CiResult, E> {
        if let Some(hit) = self.map.read().expect("cache lock").get(&key) {
            return Ok(*hit);
        }
        let value = compute()?;
        self.map.write().expect("cache lock").insert(key, value);
        Ok(value)
    }
}

/// One interface for oracle and statistical backends: variables are the
/// observed columns `0..n_vars`, regimes are `1..=K`.
pub trait CiProvider: Sync {
    fn n_vars(&self) -> usize;
    fn var_names(&self) -> Vec<String>;
    /// Target sets per regime, in column indices.
    fn regime_targets(&self) -> Vec<BTreeSet<usize>>;
    /// True = independent, for observational X-vs-X queries.
    fn x_independent(&self, x: usize, y: usize, cond: &[usize]) -> Result<bool, CiError>;
    /// True = invariant, for indicator-vs-variable queries.
    fn psi_independent(&self, regime: usize, x: usize, cond: &[usize]) -> Result<bool, CiError>;
    /// Marginal invariance of `x` under the regime with its targets severed
    /// from their parents.
    fn psi_do_independent(&self, regime: usize, x: usize) -> Result<bool, CiError>;
}

/// Adapts the graph oracle to the provider interface so the discovery
/// engine runs identically on ground truth or data.
pub struct OracleProvider {
    aug: AugmentedDag,
    observed: Vec<VertexId>,
    cache: CiCache,
}

impl OracleProvider {
    pub fn new(aug: AugmentedDag) -> Self {
        let observed = aug.observed();
        Self {
            aug,
            observed,
            cache: CiCache::default(),
        }
    }

    pub fn augmented(&self) -> &AugmentedDag {
        &self.aug
    }

    fn vid(&self, col: usize) -> Result<VertexId, CiError> {
        self.observed
            .get(col)
            .copied()
            .ok_or(CiError::BadColumn(col))
    }

    fn to_result(independent: bool) -> CiResult {
        CiResult {
            statistic: if independent { 0.0 } else { f64::INFINITY },
            p_value: if independent { 1.0 } else { 0.0 },
            independent,
            alpha: 0.5,
            effective_n: 0,
        }
    }
}

impl CiProvider for OracleProvider {
    fn n_vars(&self) -> usize {
        self.observed.len()
    }

    fn var_names(&self) -> Vec<String> {
        self.observed
            .iter()
            .map(|&v| self.aug.graph().vertex(v).name.clone())
            .collect()
    }

    fn regime_targets(&self) -> Vec<BTreeSet<usize>> {
        let pos: HashMap<VertexId, usize> = self
            .observed
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        self.aug
            .targets()
            .iter()
            .map(|t| t.iter().map(|v| pos[v]).collect())
            .collect()
    }

    fn x_independent(&self, x: usize, y: usize, cond: &[usize]) -> Result<bool, CiError> {
        let mut cond_sorted = cond.to_vec();
        cond_sorted.sort_unstable();
        let key = CacheKey {
            kind: QueryKind::XvsX,
            regime: 0,
            x: x.min(y),
            y: x.max(y),
            cond: cond_sorted.clone(),
        };
        let r = self.cache.get_or_insert_with(key, || {
            let q = CiQuery::vars(
                [self.vid(x)?],
                [self.vid(y)?],
                cond_sorted
                    .iter()
                    .map(|&c| self.vid(c))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            Ok::<_, CiError>(Self::to_result(oracle_ci(&self.aug, &q)?))
        })?;
        Ok(r.independent)
    }

    fn psi_independent(&self, regime: usize, x: usize, cond: &[usize]) -> Result<bool, CiError> {
        let mut cond_sorted = cond.to_vec();
        cond_sorted.sort_unstable();
        let key = CacheKey {
            kind: QueryKind::Psi,
            regime,
            x,
            y: 0,
            cond: cond_sorted.clone(),
        };
        let r = self.cache.get_or_insert_with(key, || {
            let q = CiQuery::psi(
                regime,
                [self.vid(x)?],
                cond_sorted
                    .iter()
                    .map(|&c| self.vid(c))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            Ok::<_, CiError>(Self::to_result(oracle_ci(&self.aug, &q)?))
        })?;
        Ok(r.independent)
    }

    fn psi_do_independent(&self, regime: usize, x: usize) -> Result<bool, CiError> {
        let key = CacheKey {
            kind: QueryKind::PsiDo,
            regime,
            x,
            y: 0,
            cond: Vec::new(),
        };
        let r = self.cache.get_or_insert_with(key, || {
            Ok::<_, CiError>(Self::to_result(oracle_psi_do_ci(
                &self.aug,
                regime,
                self.vid(x)?,
            )?))
        })?;
        Ok(r.independent)
    }
}

/// Statistical test used by [`DataProvider`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TestMethod {
    FisherZ,
    /// Conditional permutation for indicator queries (X-vs-X queries still
    /// use Fisher-z).
    Permutation { n_perm: usize },
}

/// Finite-sample provider over one table per regime (index 0 is
/// observational).
pub struct DataProvider {
    tables: Vec<Table>,
    targets: Vec<BTreeSet<usize>>,
    alpha: f64,
    method: TestMethod,
    cache: CiCache,
}

impl DataProvider {
    pub fn new(
        tables: Vec<Table>,
        targets: Vec<BTreeSet<usize>>,
        alpha: f64,
        method: TestMethod,
    ) -> Result<Self, CiError> {
        if tables.is_empty() {
            return Err(CiError::BadRegime(0));
        }
        for t in &tables[1..] {
            if t.names() != tables[0].names() {
                return Err(CiError::SchemaMismatch(
                    tables[0].names().to_vec(),
                    t.names().to_vec(),
                ));
            }
        }
        if targets.len() + 1 != tables.len() {
            return Err(CiError::BadRegime(targets.len()));
        }
        Ok(Self {
            tables,
            targets,
            alpha,
            method,
            cache: CiCache::default(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn table(&self, regime: usize) -> Result<&Table, CiError> {
        self.tables.get(regime).ok_or(CiError::BadRegime(regime))
    }

    fn psi_result(&self, regime: usize, x: usize, cond: &[usize]) -> Result<CiResult, CiError> {
        let obs = self.table(0)?;
        let intv = self.table(regime)?;
        match self.method {
            TestMethod::FisherZ => psi_ci_test(obs, intv, x, cond, self.alpha),
            TestMethod::Permutation { n_perm } => {
                psi_permutation_test(obs, intv, x, cond, self.alpha, n_perm)
            }
        }
    }
}

impl CiProvider for DataProvider {
    fn n_vars(&self) -> usize {
        self.tables[0].n_cols()
    }

    fn var_names(&self) -> Vec<String> {
        self.tables[0].names().to_vec()
    }

    fn regime_targets(&self) -> Vec<BTreeSet<usize>> {
        self.targets.clone()
    }

    fn x_independent(&self, x: usize, y: usize, cond: &[usize]) -> Result<bool, CiError> {
        let mut cond_sorted = cond.to_vec();
        cond_sorted.sort_unstable();
        let key = CacheKey {
            kind: QueryKind::XvsX,
            regime: 0,
            x: x.min(y),
            y: x.max(y),
            cond: cond_sorted.clone(),
        };
        let r = self
            .cache
            .get_or_insert_with(key, || ci_test(self.table(0)?, x, y, &cond_sorted, self.alpha))?;
        Ok(r.independent)
    }

    fn psi_independent(&self, regime: usize, x: usize, cond: &[usize]) -> Result<bool, CiError> {
        let mut cond_sorted = cond.to_vec();
        cond_sorted.sort_unstable();
        let key = CacheKey {
            kind: QueryKind::Psi,
            regime,
            x,
            y: 0,
            cond: cond_sorted.clone(),
        };
        let r = self
            .cache
            .get_or_insert_with(key, || self.psi_result(regime, x, &cond_sorted))?;
        Ok(r.independent)
    }

    fn psi_do_independent(&self, regime: usize, x: usize) -> Result<bool, CiError> {
        // The best data realization of the severed-regime query is the
        // pooled marginal comparison; exact disambiguation needs the oracle.
        self.psi_independent(regime, x, &[])
    }
}
