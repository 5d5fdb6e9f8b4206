//! End-to-end scoring run: thresholds, maxlen, lattice search and scores.

use serde::{Deserialize, Serialize};

use crate::ci::NuMethod;
use crate::data::{Dataset, ProbabilityModel};
use crate::error::{Error, Result};
use crate::lattice::{search, CounterSnapshot, FlagSet, SearchCounters};
use crate::score::{report, ScoreReport};
use crate::threshold::{MaxlenDecision, MaxlenRule, Mode, ThresholdEngine, DEFAULT_CELL_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub mode: Mode,
    pub alpha: f64,
    pub r: f64,
    pub prune: bool,
    /// Replaces the computed maxlen when set.
    pub max_len: Option<usize>,
    pub maxlen_rule: MaxlenRule,
    pub nu_method: NuMethod,
    pub cell_cap: u64,
    /// Worker threads for the lattice search; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            mode: Mode::Infrequent,
            alpha: 0.05,
            r: 2.0,
            prune: true,
            max_len: None,
            maxlen_rule: MaxlenRule::AnyCell,
            nu_method: NuMethod::default(),
            cell_cap: DEFAULT_CELL_CAP,
            threads: None,
        }
    }
}

impl Config {
    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::Config(format!("alpha {} outside (0, 0.5]", self.alpha)));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::Config(format!("r must be positive, got {}", self.r)));
        }
        if self.r > 3.0 {
            log::warn!("r = {} is well above the recommended range; long itemsets will barely count", self.r);
        }
        if let Some(m) = self.max_len {
            if m == 0 || m > p {
                return Err(Error::Config(format!("max_len {m} outside [1, {p}]")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.cell_cap == 0 {
            return Err(Error::Config("cell_cap must be positive".into()));
        }
        Ok(())
    }
}

/// Range of half-widths `c` over the tables of one subset size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CRange {
    pub size: usize,
    pub min_c: u64,
    pub max_c: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    /// Computed maxlen, absent when overridden.
    pub maxlen_decision: Option<MaxlenDecision>,
    pub maxlen: usize,
    pub flags: FlagSet,
    pub report: ScoreReport,
    pub counters: CounterSnapshot,
    pub tables_thresholded: usize,
    pub c_ranges: Vec<CRange>,
    /// Infrequent tables whose every threshold reaches `n`, so that every
    /// observed itemset on them is flagged.
    pub saturated_subsets: Vec<Vec<usize>>,
}

/// Scores every observation of `ds` under `model`.
pub fn analyze(ds: &Dataset, model: &ProbabilityModel, config: &Config) -> Result<Analysis> {
    config.validate(ds.p())?;
    model.check_compatible(ds)?;
    let run = || -> Result<Analysis> {
        let engine = ThresholdEngine::new(model.clone(), ds.n() as u64, config.alpha, config.mode)?
            .with_method(config.nu_method)
            .with_cell_cap(config.cell_cap);
        let (maxlen_decision, maxlen) = match config.max_len {
            Some(m) => (None, m),
            None => {
                let d = engine.determine_maxlen(config.maxlen_rule)?;
                let m = d.maxlen;
                (Some(d), m)
            }
        };
        log::info!("maxlen = {maxlen}");
        let counters = SearchCounters::default();
        let flags = search(ds, &engine, maxlen, config.prune, &counters)?;
        let report = report(&flags, config.r, ds.p())?;
        let saturated_subsets = if config.mode == Mode::Infrequent {
            engine
                .computed_tables()
                .into_iter()
                .filter(|t| t.saturated())
                .map(|t| t.subset)
                .collect()
        } else {
            Vec::new()
        };
        for s in &saturated_subsets {
            log::warn!("every threshold of the table over {s:?} reaches n; all its itemsets score");
        }
        Ok(Analysis {
            maxlen_decision,
            maxlen,
            counters: counters.snapshot(),
            tables_thresholded: engine.tables_computed(),
            c_ranges: engine
                .c_ranges()
                .into_iter()
                .map(|(size, min_c, max_c)| CRange { size, min_c, max_c })
                .collect(),
            saturated_subsets,
            flags,
            report,
        })
    };
    match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}
