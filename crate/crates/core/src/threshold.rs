//! Per-itemset support thresholds and the maximal itemset length.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::ci::{find_c_bounded, CellSpec, NuMethod};
use crate::data::ProbabilityModel;
use crate::error::{Error, Result};

pub const DEFAULT_CELL_CAP: u64 = 10_000_000;
pub const DEFAULT_SUBSET_CAP: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Infrequent,
    Frequent,
}

/// How the `σ ≥ 2` sparsity condition is quantified when choosing maxlen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MaxlenRule {
    /// Size `M` is admissible when at least one cell of at least one
    /// `M`-way table has `σ ≥ 2`.
    #[default]
    AnyCell,
    /// Size `M` is admissible only when every cell of every `M`-way table has
    /// `σ ≥ 2`.
    AllCells,
}

/// Bit mask of a sorted variable subset.
pub fn subset_mask(subset: &[usize]) -> u64 {
    subset.iter().fold(0u64, |m, &j| m | (1u64 << j))
}

pub fn mask_to_subset(mut mask: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        let j = mask.trailing_zeros() as usize;
        out.push(j);
        mask &= mask - 1;
    }
    out
}

/// All `k`-subsets of `0..p` as masks, in lexicographic order of their
/// sorted index lists.
pub fn subsets_of_size(p: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    if k == 0 || k > p {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(subset_mask(&idx));
        let mut i = k;
        while i > 0 && idx[i - 1] == p - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for t in i..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Thresholds shared by every cell of one marginal table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTable {
    pub subset: Vec<usize>,
    pub n: u64,
    pub mode: Mode,
    pub c: u64,
    pub gamma: f64,
    pub cells: u128,
    pub min_probability: f64,
    pub max_probability: f64,
}

impl ThresholdTable {
    /// `σ_d` for a cell of probability `p_d`: `n·p_d − c` for infrequent
    /// itemsets, `n·p_d + c + 2γ` for frequent ones.
    pub fn sigma_from_probability(&self, p_d: f64) -> f64 {
        sigma(self.mode, self.n, self.c, self.gamma, p_d)
    }

    pub fn min_sigma(&self) -> f64 {
        self.sigma_from_probability(self.min_probability)
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigma_from_probability(self.max_probability)
    }

    /// Every cell of the table reaches the sample size, so every observed
    /// itemset on these variables is flagged in infrequent mode.
    pub fn saturated(&self) -> bool {
        self.min_sigma() >= self.n as f64
    }
}

fn sigma(mode: Mode, n: u64, c: u64, gamma: f64, p_d: f64) -> f64 {
    let m = n as f64 * p_d;
    match mode {
        Mode::Infrequent => m - c as f64,
        Mode::Frequent => m + c as f64 + 2.0 * gamma,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxlenDecision {
    pub maxlen: usize,
    pub rule: MaxlenRule,
    /// A subset of size `maxlen + 1` that failed the rule, when there is one.
    pub violating_subset: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy)]
struct SubsetCi {
    c: u64,
    gamma: f64,
}

/// Computes and caches the half-width `c` of every marginal table it is
/// asked about. Safe to share between threads.
#[derive(Debug)]
pub struct ThresholdEngine {
    model: ProbabilityModel,
    n: u64,
    alpha: f64,
    mode: Mode,
    method: NuMethod,
    cell_cap: u64,
    subset_cap: u64,
    cache: Mutex<HashMap<u64, SubsetCi>>,
}

impl ThresholdEngine {
    pub fn new(model: ProbabilityModel, n: u64, alpha: f64, mode: Mode) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::Config(format!("alpha {alpha} outside (0, 0.5]")));
        }
        if n == 0 {
            return Err(Error::Domain("sample size must be positive".into()));
        }
        if model.p() > 64 {
            return Err(Error::Config(format!("{} variables; at most 64 are supported", model.p())));
        }
        Ok(Self {
            model,
            n,
            alpha,
            mode,
            method: NuMethod::default(),
            cell_cap: DEFAULT_CELL_CAP,
            subset_cap: DEFAULT_SUBSET_CAP,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_method(mut self, method: NuMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_cell_cap(mut self, cap: u64) -> Self {
        self.cell_cap = cap;
        self
    }

    pub fn with_subset_cap(mut self, cap: u64) -> Self {
        self.subset_cap = cap;
        self
    }

    pub fn model(&self) -> &ProbabilityModel {
        &self.model
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn method(&self) -> NuMethod {
        self.method
    }

    /// Confidence level at which `c` is searched: the one-sided intervals
    /// use the two-sided half-width at `1 − 2α`.
    pub fn level(&self) -> f64 {
        1.0 - 2.0 * self.alpha
    }

    pub fn cell_count(&self, mask: u64) -> u128 {
        mask_to_subset(mask)
            .iter()
            .map(|&j| self.model.pi(j).len() as u128)
            .product()
    }

    fn extreme_probabilities(&self, mask: u64) -> (f64, f64) {
        let mut lo = 1.0;
        let mut hi = 1.0;
        for j in mask_to_subset(mask) {
            let pi = self.model.pi(j);
            lo *= pi.iter().cloned().fold(f64::INFINITY, f64::min);
            hi *= pi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
        (lo, hi)
    }

    /// Upper bound `n·max_d p_d` on every `σ` of the table, before `c` is
    /// subtracted.
    pub fn expected_max(&self, mask: u64) -> f64 {
        self.n as f64 * self.extreme_probabilities(mask).1
    }

    /// Fails with `TableExplosion` when the table has more cells than the cap.
    pub fn check_table_size(&self, mask: u64) -> Result<()> {
        let cells = self.cell_count(mask);
        if cells > self.cell_cap as u128 {
            return Err(Error::TableExplosion {
                subset: mask_to_subset(mask),
                cells,
                cap: self.cell_cap,
            });
        }
        Ok(())
    }

    fn cell_spec(&self, mask: u64) -> Result<CellSpec> {
        self.check_table_size(mask)?;
        CellSpec::new(self.model.kronecker(&mask_to_subset(mask)), self.n)
    }

    fn cached(&self, mask: u64) -> Option<SubsetCi> {
        self.cache.lock().expect("threshold cache poisoned").get(&mask).copied()
    }

    fn ci(&self, mask: u64) -> Result<SubsetCi> {
        if let Some(ci) = self.cached(mask) {
            return Ok(ci);
        }
        let spec = self.cell_spec(mask)?;
        let (c, gamma) = find_c_bounded(&spec, self.level(), self.method, u64::MAX)?
            .ok_or(Error::CiSearchFailure { n: self.n, level: self.level() })?;
        let ci = SubsetCi { c, gamma };
        self.cache.lock().expect("threshold cache poisoned").insert(mask, ci);
        Ok(ci)
    }

    /// Half-width for the table, or `None` if it is known to exceed `max_c`.
    fn ci_bounded(&self, mask: u64, max_c: u64) -> Result<Option<SubsetCi>> {
        if let Some(ci) = self.cached(mask) {
            return Ok((ci.c <= max_c).then_some(ci));
        }
        let spec = self.cell_spec(mask)?;
        match find_c_bounded(&spec, self.level(), self.method, max_c)? {
            Some((c, gamma)) => {
                let ci = SubsetCi { c, gamma };
                self.cache.lock().expect("threshold cache poisoned").insert(mask, ci);
                Ok(Some(ci))
            }
            None => Ok(None),
        }
    }

    fn table_from(&self, mask: u64, ci: SubsetCi, mode: Mode) -> ThresholdTable {
        let (lo, hi) = self.extreme_probabilities(mask);
        ThresholdTable {
            subset: mask_to_subset(mask),
            n: self.n,
            mode,
            c: ci.c,
            gamma: ci.gamma,
            cells: self.cell_count(mask),
            min_probability: lo,
            max_probability: hi,
        }
    }

    /// Threshold table for a subset given as a bit mask.
    pub fn table_for_mask(&self, mask: u64) -> Result<ThresholdTable> {
        if mask == 0 || (self.model.p() < 64 && mask >> self.model.p() != 0) {
            return Err(Error::Domain(format!("invalid variable subset mask {mask:#x}")));
        }
        let ci = self.ci(mask)?;
        Ok(self.table_from(mask, ci, self.mode))
    }

    /// Threshold table for a subset, or `None` when its half-width exceeds
    /// `max_c`. Cheaper than [`Self::table_for_mask`] when `max_c` is small.
    pub fn table_if_c_at_most(&self, mask: u64, max_c: u64) -> Result<Option<ThresholdTable>> {
        Ok(self
            .ci_bounded(mask, max_c)?
            .map(|ci| self.table_from(mask, ci, self.mode)))
    }

    pub fn table(&self, subset: &[usize]) -> Result<ThresholdTable> {
        if subset.is_empty() || subset.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("subset must be non-empty and strictly increasing".into()));
        }
        if subset.iter().any(|&j| j >= self.model.p()) {
            return Err(Error::Domain("subset refers to an unknown variable".into()));
        }
        self.table_for_mask(subset_mask(subset))
    }

    /// Number of subsets whose half-width has been computed.
    pub fn tables_computed(&self) -> usize {
        self.cache.lock().expect("threshold cache poisoned").len()
    }

    /// Every table computed so far, ordered by subset size then subset.
    pub fn computed_tables(&self) -> Vec<ThresholdTable> {
        let mut entries: Vec<(u64, SubsetCi)> = self
            .cache
            .lock()
            .expect("threshold cache poisoned")
            .iter()
            .map(|(&m, &ci)| (m, ci))
            .collect();
        entries.sort_by_key(|&(m, _)| (m.count_ones(), mask_to_subset(m)));
        entries
            .into_iter()
            .map(|(m, ci)| self.table_from(m, ci, self.mode))
            .collect()
    }

    /// `(size, min c, max c)` over all cached tables, by subset size.
    pub fn c_ranges(&self) -> Vec<(usize, u64, u64)> {
        let cache = self.cache.lock().expect("threshold cache poisoned");
        let mut by_size: std::collections::BTreeMap<usize, (u64, u64)> = Default::default();
        for (mask, ci) in cache.iter() {
            let e = by_size
                .entry(mask.count_ones() as usize)
                .or_insert((u64::MAX, 0));
            e.0 = e.0.min(ci.c);
            e.1 = e.1.max(ci.c);
        }
        by_size.into_iter().map(|(k, (lo, hi))| (k, lo, hi)).collect()
    }

    fn check_subset_count(&self, size: usize) -> Result<()> {
        let count = binomial(self.model.p(), size);
        if count > self.subset_cap as u128 {
            return Err(Error::SubsetExplosion {
                size,
                count,
                cap: self.subset_cap,
            });
        }
        Ok(())
    }

    /// Largest itemset length at which the sparsity condition `σ ≥ 2` holds,
    /// judged with infrequent-mode thresholds regardless of the engine mode.
    /// Sizes are swept upward and the first failing size ends the sweep; the
    /// result is never below one.
    pub fn determine_maxlen(&self, rule: MaxlenRule) -> Result<MaxlenDecision> {
        let p = self.model.p();
        let mut maxlen = 1;
        let mut violating = None;
        for size in 1..=p {
            self.check_subset_count(size)?;
            let masks = subsets_of_size(p, size);
            let outcome = match rule {
                MaxlenRule::AnyCell => self.any_cell_passes(&masks)?,
                MaxlenRule::AllCells => self.all_cells_pass(&masks)?,
            };
            match outcome {
                None => maxlen = size,
                Some(mask) => {
                    violating = Some(mask_to_subset(mask));
                    break;
                }
            }
        }
        log::debug!("maxlen {maxlen} under {rule:?}");
        Ok(MaxlenDecision {
            maxlen,
            rule,
            violating_subset: violating,
        })
    }

    /// `None` if some table reaches `σ ≥ 2`, otherwise a witness of failure.
    fn any_cell_passes(&self, masks: &[u64]) -> Result<Option<u64>> {
        let mut ranked: Vec<(f64, u64)> = masks.iter().map(|&m| (self.expected_max(m), m)).collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(bound, mask) in &ranked {
            if bound < 2.0 {
                break;
            }
            let max_c = (bound - 2.0).floor() as u64;
            if let Some(ci) = self.ci_bounded(mask, max_c)? {
                if bound - ci.c as f64 >= 2.0 {
                    return Ok(None);
                }
            }
        }
        Ok(Some(ranked[0].1))
    }

    /// `None` if every cell of every table has `σ ≥ 2`, otherwise the first
    /// table that fails.
    fn all_cells_pass(&self, masks: &[u64]) -> Result<Option<u64>> {
        for &mask in masks {
            let floor = self.n as f64 * self.extreme_probabilities(mask).0;
            if floor < 2.0 {
                return Ok(Some(mask));
            }
            let max_c = (floor - 2.0).floor() as u64;
            match self.ci_bounded(mask, max_c)? {
                Some(ci) if floor - ci.c as f64 >= 2.0 => {}
                _ => return Ok(Some(mask)),
            }
        }
        Ok(None)
    }
}

/// Threshold table for one subset, computed without a cache.
pub fn sigma_for_subset(
    model: &ProbabilityModel,
    n: u64,
    subset: &[usize],
    alpha: f64,
    mode: Mode,
) -> Result<ThresholdTable> {
    ThresholdEngine::new(model.clone(), n, alpha, mode)?.table(subset)
}

/// Shared handle used by the search routines.
pub type SharedEngine = Arc<ThresholdEngine>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::{find_c_with, CellSpec};

    fn model(pi: Vec<Vec<f64>>) -> ProbabilityModel {
        ProbabilityModel::from_vectors(pi).unwrap()
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets_of_size(4, 2).len(), 6);
        assert_eq!(mask_to_subset(subsets_of_size(4, 2)[0]), vec![0, 1]);
        assert_eq!(mask_to_subset(*subsets_of_size(4, 2).last().unwrap()), vec![2, 3]);
        assert_eq!(subsets_of_size(3, 4).len(), 0);
        assert_eq!(binomial(20, 9), 167_960);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn single_variable_sigmas_share_c() {
        let m = model(vec![vec![0.9, 0.1]]);
        let t = sigma_for_subset(&m, 100, &[0], 0.05, Mode::Infrequent).unwrap();
        let spec = CellSpec::new(vec![0.9, 0.1], 100).unwrap();
        let (c, _) = find_c_with(&spec, 0.9, NuMethod::Exact).unwrap();
        assert_eq!(t.c, c);
        assert!((t.sigma_from_probability(0.9) - (90.0 - c as f64)).abs() < 1e-12);
        assert!((t.sigma_from_probability(0.1) - (10.0 - c as f64)).abs() < 1e-12);
        assert!((t.min_sigma() - (10.0 - c as f64)).abs() < 1e-12);
    }

    #[test]
    fn sigma_arithmetic() {
        let t = ThresholdTable {
            subset: vec![0],
            n: 100,
            mode: Mode::Infrequent,
            c: 6,
            gamma: 0.25,
            cells: 2,
            min_probability: 0.0,
            max_probability: 0.4,
        };
        assert_eq!(t.sigma_from_probability(0.4), 34.0);
        assert_eq!(t.sigma_from_probability(0.0), -6.0);
        let f = ThresholdTable { mode: Mode::Frequent, ..t };
        assert_eq!(f.sigma_from_probability(0.4), 46.5);
    }

    #[test]
    fn sigma_increases_with_probability() {
        let m = model(vec![vec![0.5, 0.3, 0.2], vec![0.6, 0.4]]);
        let t = sigma_for_subset(&m, 200, &[0, 1], 0.05, Mode::Infrequent).unwrap();
        let probs = m.kronecker(&[0, 1]);
        let mut pairs: Vec<_> = probs.iter().map(|&p| (p, t.sigma_from_probability(p))).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pairs.windows(2) {
            if w[1].0 > w[0].0 {
                assert!(w[1].1 > w[0].1);
            }
        }
    }

    #[test]
    fn table_explosion_is_reported() {
        let m = model(vec![vec![0.5, 0.5]; 4]);
        let e = ThresholdEngine::new(m, 50, 0.05, Mode::Infrequent)
            .unwrap()
            .with_cell_cap(8);
        match e.table(&[0, 1, 2, 3]) {
            Err(Error::TableExplosion { subset, cells, cap }) => {
                assert_eq!(subset, vec![0, 1, 2, 3]);
                assert_eq!(cells, 16);
                assert_eq!(cap, 8);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn maxlen_single_variable() {
        let m = model(vec![vec![0.5, 0.5]]);
        let e = ThresholdEngine::new(m, 100, 0.05, Mode::Infrequent).unwrap();
        let d = e.determine_maxlen(MaxlenRule::AllCells).unwrap();
        assert_eq!(d.maxlen, 1);
        assert!(d.violating_subset.is_none());
    }

    #[test]
    fn maxlen_floor_is_one() {
        let m = model(vec![vec![0.99, 0.01], vec![0.5, 0.5]]);
        let e = ThresholdEngine::new(m, 20, 0.05, Mode::Infrequent).unwrap();
        let d = e.determine_maxlen(MaxlenRule::AllCells).unwrap();
        assert_eq!(d.maxlen, 1);
        assert_eq!(d.violating_subset, Some(vec![0]));
    }

    #[test]
    fn maxlen_rules_are_ordered() {
        let m = model(vec![
            vec![0.7, 0.2, 0.1],
            vec![0.5, 0.5],
            vec![0.6, 0.4],
            vec![0.8, 0.2],
            vec![0.4, 0.3, 0.3],
        ]);
        let e = ThresholdEngine::new(m, 300, 0.05, Mode::Infrequent).unwrap();
        let all = e.determine_maxlen(MaxlenRule::AllCells).unwrap().maxlen;
        let any = e.determine_maxlen(MaxlenRule::AnyCell).unwrap().maxlen;
        assert!(all <= any);
        // Brute-force recheck of both answers.
        for size in 1..=5 {
            let mut any_ok = false;
            let mut all_ok = true;
            for mask in subsets_of_size(5, size) {
                let t = e.table_for_mask(mask).unwrap();
                any_ok |= t.max_sigma() >= 2.0;
                all_ok &= t.min_sigma() >= 2.0;
            }
            if size <= any {
                assert!(any_ok, "size {size}");
            } else if size == any + 1 {
                assert!(!any_ok, "size {size}");
            }
            if size <= all {
                assert!(all_ok, "size {size}");
            } else if size == all + 1 {
                assert!(!all_ok, "size {size}");
            }
        }
    }

    #[test]
    fn frequent_and_infrequent_share_c() {
        let m = model(vec![vec![0.7, 0.3], vec![0.5, 0.5]]);
        let a = sigma_for_subset(&m, 80, &[0, 1], 0.05, Mode::Infrequent).unwrap();
        let b = sigma_for_subset(&m, 80, &[0, 1], 0.05, Mode::Frequent).unwrap();
        assert_eq!(a.c, b.c);
        assert!(b.sigma_from_probability(0.35) > a.sigma_from_probability(0.35));
    }

    #[test]
    fn c_ranges_report() {
        let m = model(vec![vec![0.5, 0.5], vec![0.6, 0.4], vec![0.3, 0.7]]);
        let e = ThresholdEngine::new(m, 100, 0.05, Mode::Infrequent).unwrap();
        for mask in subsets_of_size(3, 2) {
            e.table_for_mask(mask).unwrap();
        }
        assert_eq!(e.tables_computed(), 3);
        let ranges = e.c_ranges();
        assert_eq!(ranges.len(), 1);
        assert_eq!(ranges[0].0, 2);
        assert!(ranges[0].1 <= ranges[0].2);
    }
}
