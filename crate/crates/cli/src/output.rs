//! Result files of a scoring run.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use sono::{Analysis, CRange, CounterSnapshot, Dataset, MaxlenDecision, ModelSource};

use crate::config::RunConfig;

#[derive(Serialize)]
struct FlaggedItemset {
    itemset: String,
    support: u64,
    sigma: f64,
    implied: bool,
}

#[derive(Serialize)]
pub struct RunRecord<'a> {
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub n: usize,
    pub p: usize,
    pub dropped_rows: usize,
    pub model: ModelSource,
    pub maxlen: usize,
    pub maxlen_decision: Option<&'a MaxlenDecision>,
    pub c_ranges: &'a [CRange],
    pub counters: &'a CounterSnapshot,
    pub tables_thresholded: usize,
    pub saturated_subsets: &'a [Vec<usize>],
    pub nonzero_scores: usize,
    flagged: Vec<FlaggedItemset>,
}

impl<'a> RunRecord<'a> {
    pub fn new(config: &'a RunConfig, ds: &Dataset, model: ModelSource, a: &'a Analysis) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            config,
            n: ds.n(),
            p: ds.p(),
            dropped_rows: ds.dropped_rows(),
            model,
            maxlen: a.maxlen,
            maxlen_decision: a.maxlen_decision.as_ref(),
            c_ranges: &a.c_ranges,
            counters: &a.counters,
            tables_thresholded: a.tables_thresholded,
            saturated_subsets: &a.saturated_subsets,
            nonzero_scores: a.report.nonzero(),
            flagged: a
                .flags
                .records
                .iter()
                .map(|r| FlaggedItemset {
                    itemset: r.itemset.display(ds).to_string(),
                    support: r.support,
                    sigma: r.sigma,
                    implied: r.implied,
                })
                .collect(),
        }
    }
}

/// `row,score,depth`, rows numbered from 1 in input order.
pub fn write_scores(path: &Path, a: &Analysis) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["row", "score", "depth"])?;
    for (i, (s, d)) in a.report.scores.iter().zip(&a.report.depths).enumerate() {
        w.write_record([(i + 1).to_string(), s.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One column per variable.
pub fn write_contributions(path: &Path, ds: &Dataset, a: &Analysis) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["row".to_string()];
    header.extend(ds.variable_names().iter().cloned());
    w.write_record(&header)?;
    for (i, row) in a.report.contributions.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, record: &RunRecord) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(record)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
