//! Support counting and the pruned traversal of the itemset lattice.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Itemset};
use crate::error::{Error, Result};
use crate::threshold::{mask_to_subset, subsets_of_size, Mode, ThresholdEngine};

/// Observed counts of every cell of one marginal table.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportIndex {
    subset: Vec<usize>,
    counts: HashMap<Itemset, u64>,
}

impl SupportIndex {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn get(&self, d: &Itemset) -> u64 {
        self.counts.get(d).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Observed cells in canonical order.
    pub fn cells(&self) -> Vec<(&Itemset, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|(d, &c)| (d, c)).collect();
        v.sort_by(|a, b| a.0.canonical_cmp(b.0));
        v
    }
}

/// Counts every observed cell of the table over `subset` in one pass.
pub fn count_support(ds: &Dataset, subset: &[usize]) -> Result<SupportIndex> {
    if subset.is_empty() || subset.windows(2).any(|w| w[0] >= w[1]) || subset.iter().any(|&j| j >= ds.p()) {
        return Err(Error::Domain("subset must be non-empty, strictly increasing and in range".into()));
    }
    let mut counts = HashMap::new();
    for row in ds.rows() {
        *counts.entry(Itemset::from_row(subset, row)).or_insert(0u64) += 1;
    }
    Ok(SupportIndex {
        subset: subset.to_vec(),
        counts,
    })
}

/// One flagged itemset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagRecord {
    pub itemset: Itemset,
    pub support: u64,
    pub sigma: f64,
    /// Flagged because a flagged frequent superset implies it, not by its
    /// own test.
    pub implied: bool,
}

impl FlagRecord {
    pub fn len(&self) -> usize {
        self.itemset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.itemset.is_empty()
    }
}

/// Flagged itemsets and, for every observation, the ones it contains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagSet {
    pub mode: Mode,
    pub maxlen: usize,
    pub records: Vec<FlagRecord>,
    /// Per observation, indices into `records` in canonical itemset order.
    pub by_row: Vec<Vec<usize>>,
}

impl FlagSet {
    pub fn n(&self) -> usize {
        self.by_row.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = &FlagRecord> + '_ {
        self.by_row[i].iter().map(move |&k| &self.records[k])
    }

    pub fn flagged_itemsets(&self) -> impl Iterator<Item = &Itemset> + '_ {
        self.records.iter().map(|r| &r.itemset)
    }

    /// Builds the per-row index from a list of records.
    pub fn from_records(ds: &Dataset, mode: Mode, maxlen: usize, mut records: Vec<FlagRecord>) -> Self {
        records.sort_by(|a, b| a.itemset.canonical_cmp(&b.itemset));
        let mut by_row = vec![Vec::new(); ds.n()];
        for (k, rec) in records.iter().enumerate() {
            for (i, row) in ds.rows().enumerate() {
                if rec.itemset.contained_in(row) {
                    by_row[i].push(k);
                }
            }
        }
        Self {
            mode,
            maxlen,
            records,
            by_row,
        }
    }
}

/// Work counters for one search.
#[derive(Debug, Default)]
pub struct SearchCounters {
    subsets_visited: AtomicU64,
    subsets_materialized: AtomicU64,
    cells_tested: AtomicU64,
    cells_implied: AtomicU64,
    candidates_pruned: AtomicU64,
    thresholds_skipped: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct CounterSnapshot {
    /// Variable subsets considered.
    pub subsets_visited: u64,
    /// Subsets whose support counts were built.
    pub subsets_materialized: u64,
    /// Cells compared with their threshold.
    pub cells_tested: u64,
    /// Cells flagged without a test because a flagged superset implies them.
    pub cells_implied: u64,
    /// (observation, subset) candidates skipped because the observation's
    /// projection contains a flagged itemset.
    pub candidates_pruned: u64,
    /// Materialized subsets where no cell could flag, found without
    /// computing the full half-width.
    pub thresholds_skipped: u64,
}

impl SearchCounters {
    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            subsets_visited: self.subsets_visited.load(Ordering::Relaxed),
            subsets_materialized: self.subsets_materialized.load(Ordering::Relaxed),
            cells_tested: self.cells_tested.load(Ordering::Relaxed),
            cells_implied: self.cells_implied.load(Ordering::Relaxed),
            candidates_pruned: self.candidates_pruned.load(Ordering::Relaxed),
            thresholds_skipped: self.thresholds_skipped.load(Ordering::Relaxed),
        }
    }

    fn add(&self, c: &AtomicU64, v: u64) {
        c.fetch_add(v, Ordering::Relaxed);
    }
}

/// Rows grouped by the cell of one table they fall in.
struct Groups {
    /// `(cell key, row)` sorted by key then row.
    keyed: Vec<(u64, u32)>,
    /// Start offsets of each group in `keyed`, plus a final sentinel.
    starts: Vec<usize>,
}

impl Groups {
    fn build(ds: &Dataset, subset: &[usize], rows: impl Iterator<Item = usize>) -> Self {
        let mut keyed: Vec<(u64, u32)> = rows
            .map(|i| {
                let row = ds.row(i);
                let key = subset.iter().fold(0u64, |k, &j| {
                    k * ds.level_count(j) as u64 + (row[j] - 1) as u64
                });
                (key, i as u32)
            })
            .collect();
        keyed.sort_unstable();
        let mut starts = Vec::new();
        for (t, w) in keyed.iter().enumerate() {
            if t == 0 || keyed[t - 1].0 != w.0 {
                starts.push(t);
            }
        }
        starts.push(keyed.len());
        Self { keyed, starts }
    }

    fn len(&self) -> usize {
        self.starts.len() - 1
    }

    fn rows(&self, g: usize) -> impl Iterator<Item = usize> + '_ {
        self.keyed[self.starts[g]..self.starts[g + 1]]
            .iter()
            .map(|&(_, i)| i as usize)
    }

    fn support(&self, g: usize) -> u64 {
        (self.starts[g + 1] - self.starts[g]) as u64
    }

    fn representative(&self, g: usize) -> usize {
        self.keyed[self.starts[g]].1 as usize
    }
}

fn cell_probability_of_row(engine: &ThresholdEngine, subset: &[usize], row: &[u32]) -> f64 {
    let model = engine.model();
    let mut prob = 1.0;
    for &j in subset {
        prob *= model.probability(j, row[j]);
    }
    prob
}

/// Flags found in one subset: the records and, for each, its rows.
struct SubsetFlags {
    mask: u64,
    found: Vec<(FlagRecord, Vec<usize>)>,
}

fn check_inputs(ds: &Dataset, engine: &ThresholdEngine, maxlen: usize) -> Result<()> {
    if ds.p() > 64 {
        return Err(Error::Config(format!("{} variables; at most 64 are supported", ds.p())));
    }
    if engine.n() != ds.n() as u64 {
        return Err(Error::Config(format!(
            "threshold engine built for n = {}, dataset has {} rows",
            engine.n(),
            ds.n()
        )));
    }
    engine.model().check_compatible(ds)?;
    if maxlen == 0 || maxlen > ds.p() {
        return Err(Error::Config(format!("maxlen {maxlen} outside [1, {}]", ds.p())));
    }
    Ok(())
}

/// Tests every alive cell of one table for infrequency.
fn infrequent_subset(
    ds: &Dataset,
    engine: &ThresholdEngine,
    mask: u64,
    prune: bool,
    row_flags: &[Vec<u64>],
    counters: &SearchCounters,
) -> Result<SubsetFlags> {
    counters.add(&counters.subsets_visited, 1);
    let subset = mask_to_subset(mask);
    let alive: Vec<usize> = if prune {
        (0..ds.n())
            .filter(|&i| row_flags[i].iter().all(|&m| m & !mask != 0))
            .collect()
    } else {
        (0..ds.n()).collect()
    };
    counters.add(&counters.candidates_pruned, (ds.n() - alive.len()) as u64);
    let mut out = SubsetFlags { mask, found: Vec::new() };
    if alive.is_empty() {
        return Ok(out);
    }
    engine.check_table_size(mask)?;
    counters.add(&counters.subsets_materialized, 1);
    let groups = Groups::build(ds, &subset, alive.into_iter());
    let n = engine.n() as f64;
    let probs: Vec<f64> = (0..groups.len())
        .map(|g| cell_probability_of_row(engine, &subset, ds.row(groups.representative(g))))
        .collect();
    counters.add(&counters.cells_tested, groups.len() as u64);
    // A cell flags only if c ≤ n·p − supp, so the search for c can stop
    // once it passes the largest such slack.
    let slack = (0..groups.len())
        .map(|g| n * probs[g] - groups.support(g) as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let table = if slack < 0.0 {
        None
    } else {
        engine.table_if_c_at_most(mask, slack.floor() as u64)?
    };
    let Some(table) = table else {
        counters.add(&counters.thresholds_skipped, 1);
        return Ok(out);
    };
    for g in 0..groups.len() {
        let sigma = table.sigma_from_probability(probs[g]);
        let supp = groups.support(g);
        if supp as f64 <= sigma {
            let rep = ds.row(groups.representative(g));
            out.found.push((
                FlagRecord {
                    itemset: Itemset::from_row(&subset, rep),
                    support: supp,
                    sigma,
                    implied: false,
                },
                groups.rows(g).collect(),
            ));
        }
    }
    Ok(out)
}

/// Bottom-up search for highly infrequent itemsets of length up to
/// `maxlen`. With `prune`, an itemset containing a flagged itemset is
/// neither tested nor flagged.
pub fn search_infrequent(
    ds: &Dataset,
    engine: &ThresholdEngine,
    maxlen: usize,
    prune: bool,
    counters: &SearchCounters,
) -> Result<FlagSet> {
    check_inputs(ds, engine, maxlen)?;
    let mut row_flags: Vec<Vec<u64>> = vec![Vec::new(); ds.n()];
    let mut records = Vec::new();
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); ds.n()];
    for level in 1..=maxlen {
        let masks = subsets_of_size(ds.p(), level);
        let results: Vec<SubsetFlags> = masks
            .par_iter()
            .map(|&mask| infrequent_subset(ds, engine, mask, prune, &row_flags, counters))
            .collect::<Result<_>>()?;
        for res in results {
            for (rec, rows) in res.found {
                let k = records.len();
                for i in rows {
                    row_flags[i].push(res.mask);
                    by_row[i].push(k);
                }
                records.push(rec);
            }
        }
        log::debug!("level {level}: {} itemsets flagged so far", records.len());
    }
    Ok(finish(Mode::Infrequent, maxlen, records, by_row))
}

/// Tests, or marks as implied, every cell of one table for frequency.
fn frequent_subset(
    ds: &Dataset,
    engine: &ThresholdEngine,
    mask: u64,
    prune: bool,
    row_flags: &[Vec<u64>],
    counters: &SearchCounters,
) -> Result<SubsetFlags> {
    counters.add(&counters.subsets_visited, 1);
    engine.check_table_size(mask)?;
    counters.add(&counters.subsets_materialized, 1);
    let subset = mask_to_subset(mask);
    let groups = Groups::build(ds, &subset, 0..ds.n());
    let n = engine.n() as f64;
    let mut implied = vec![false; groups.len()];
    if prune {
        for (g, flag) in implied.iter_mut().enumerate() {
            *flag = groups
                .rows(g)
                .any(|i| row_flags[i].iter().any(|&m| mask & !m == 0));
        }
    }
    let probs: Vec<f64> = (0..groups.len())
        .map(|g| cell_probability_of_row(engine, &subset, ds.row(groups.representative(g))))
        .collect();
    let n_implied = implied.iter().filter(|&&x| x).count() as u64;
    counters.add(&counters.cells_implied, n_implied);
    counters.add(&counters.cells_tested, groups.len() as u64 - n_implied);
    let mut out = SubsetFlags { mask, found: Vec::new() };
    // A tested cell flags only if c + 2γ ≤ supp − n·p; implied cells need
    // their threshold whatever c is.
    let table = if n_implied > 0 {
        Some(engine.table_for_mask(mask)?)
    } else {
        let slack = (0..groups.len())
            .map(|g| groups.support(g) as f64 - n * probs[g])
            .fold(f64::NEG_INFINITY, f64::max);
        if slack < 0.0 {
            None
        } else {
            engine.table_if_c_at_most(mask, slack.floor() as u64)?
        }
    };
    let Some(table) = table else {
        counters.add(&counters.thresholds_skipped, 1);
        return Ok(out);
    };
    for g in 0..groups.len() {
        let sigma = table.sigma_from_probability(probs[g]);
        let supp = groups.support(g);
        if implied[g] || supp as f64 >= sigma {
            let rep = ds.row(groups.representative(g));
            out.found.push((
                FlagRecord {
                    itemset: Itemset::from_row(&subset, rep),
                    support: supp,
                    sigma,
                    implied: implied[g],
                },
                groups.rows(g).collect(),
            ));
        }
    }
    Ok(out)
}

/// Top-down search for highly frequent itemsets from length `maxlen` down to
/// one. With `prune`, every subset of a tested-and-flagged itemset is flagged
/// without its own test and recorded with its actual support and threshold.
pub fn search_frequent(
    ds: &Dataset,
    engine: &ThresholdEngine,
    maxlen: usize,
    prune: bool,
    counters: &SearchCounters,
) -> Result<FlagSet> {
    check_inputs(ds, engine, maxlen)?;
    // Masks of tested-and-flagged itemsets per row; implied ones add nothing
    // because their subsets are implied by the same superset.
    let mut row_flags: Vec<Vec<u64>> = vec![Vec::new(); ds.n()];
    let mut records = Vec::new();
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); ds.n()];
    for level in (1..=maxlen).rev() {
        let masks = subsets_of_size(ds.p(), level);
        let results: Vec<SubsetFlags> = masks
            .par_iter()
            .map(|&mask| frequent_subset(ds, engine, mask, prune, &row_flags, counters))
            .collect::<Result<_>>()?;
        for res in results {
            for (rec, rows) in res.found {
                let k = records.len();
                for i in rows {
                    if !rec.implied {
                        row_flags[i].push(res.mask);
                    }
                    by_row[i].push(k);
                }
                records.push(rec);
            }
        }
        log::debug!("level {level}: {} itemsets flagged so far", records.len());
    }
    Ok(finish(Mode::Frequent, maxlen, records, by_row))
}

/// Dispatches on the engine's mode.
pub fn search(
    ds: &Dataset,
    engine: &ThresholdEngine,
    maxlen: usize,
    prune: bool,
    counters: &SearchCounters,
) -> Result<FlagSet> {
    match engine.mode() {
        Mode::Infrequent => search_infrequent(ds, engine, maxlen, prune, counters),
        Mode::Frequent => search_frequent(ds, engine, maxlen, prune, counters),
    }
}

/// Sorts records canonically and rewrites the row index to match.
fn finish(
    mode: Mode,
    maxlen: usize,
    records: Vec<FlagRecord>,
    by_row: Vec<Vec<usize>>,
) -> FlagSet {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].itemset.canonical_cmp(&records[b].itemset));
    let mut rank = vec![0; records.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let mut slots: Vec<Option<FlagRecord>> = records.into_iter().map(Some).collect();
    let records: Vec<FlagRecord> = order.iter().map(|&old| slots[old].take().expect("each record moved once")).collect();
    let by_row = by_row
        .into_iter()
        .map(|ks| {
            let mut v: Vec<usize> = ks.into_iter().map(|k| rank[k]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    FlagSet {
        mode,
        maxlen,
        records,
        by_row,
    }
}
