//! Scores, depths and per-variable contributions from flagged itemsets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{FlagRecord, FlagSet};
use crate::threshold::{binomial, Mode};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub mode: Mode,
    pub r: f64,
    pub maxlen: usize,
    pub scores: Vec<f64>,
    pub depths: Vec<f64>,
    /// `n × p`, row `i` splitting `scores[i]` across variables.
    pub contributions: Vec<Vec<f64>>,
}

impl ScoreReport {
    pub fn nonzero(&self) -> usize {
        self.scores.iter().filter(|&&s| s > 0.0).count()
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Config(format!("exponent r must be positive, got {r}")));
    }
    Ok(())
}

fn check_record(rec: &FlagRecord, mode: Mode, maxlen: usize) -> Result<()> {
    if rec.support == 0 {
        return Err(Error::Inconsistent(format!("flagged itemset with zero support ({:?})", rec.itemset)));
    }
    match mode {
        Mode::Infrequent => {
            if !(rec.support as f64 <= rec.sigma) {
                return Err(Error::Inconsistent(format!(
                    "support {} above threshold {} on an infrequent flag",
                    rec.support, rec.sigma
                )));
            }
        }
        Mode::Frequent => {
            if !(rec.sigma > 0.0) {
                return Err(Error::Inconsistent(format!(
                    "non-positive threshold {} on a frequent flag",
                    rec.sigma
                )));
            }
            if rec.len() > maxlen {
                return Err(Error::Inconsistent(format!(
                    "itemset of length {} exceeds maxlen {maxlen}",
                    rec.len()
                )));
            }
        }
    }
    Ok(())
}

/// The score term of one flagged itemset.
pub fn term(rec: &FlagRecord, r: f64, mode: Mode, maxlen: usize) -> f64 {
    let len = rec.len() as f64;
    match mode {
        Mode::Infrequent => rec.sigma / (rec.support as f64 * len.powf(r)),
        Mode::Frequent => {
            rec.support as f64 / (rec.sigma * ((maxlen - rec.len() + 1) as f64).powf(r))
        }
    }
}

/// Length weight entering the depth average.
fn depth_weight(rec: &FlagRecord, mode: Mode, maxlen: usize) -> f64 {
    match mode {
        Mode::Infrequent => rec.len() as f64,
        Mode::Frequent => (maxlen - rec.len() + 1) as f64,
    }
}

/// Per-observation scores. Terms are summed in canonical itemset order.
pub fn score(flags: &FlagSet, r: f64) -> Result<Vec<f64>> {
    check_r(r)?;
    (0..flags.n())
        .map(|i| {
            let mut acc = CompensatedSum::default();
            for rec in flags.row(i) {
                check_record(rec, flags.mode, flags.maxlen)?;
                acc.add(term(rec, r, flags.mode, flags.maxlen));
            }
            Ok(acc.value())
        })
        .collect()
}

/// Mean flagged-itemset length (infrequent) or mean `maxlen − |d| + 1`
/// (frequent); zero when nothing is flagged.
pub fn depth(flags: &FlagSet) -> Vec<f64> {
    (0..flags.n())
        .map(|i| {
            let k = flags.by_row[i].len();
            if k == 0 {
                return 0.0;
            }
            let mut acc = CompensatedSum::default();
            for rec in flags.row(i) {
                acc.add(depth_weight(rec, flags.mode, flags.maxlen));
            }
            acc.value() / k as f64
        })
        .collect()
}

/// `n × p` matrix splitting every score term equally across the variables
/// of its itemset.
pub fn contributions(flags: &FlagSet, r: f64, p: usize) -> Result<Vec<Vec<f64>>> {
    check_r(r)?;
    (0..flags.n())
        .map(|i| {
            let mut acc = vec![CompensatedSum::default(); p];
            for rec in flags.row(i) {
                check_record(rec, flags.mode, flags.maxlen)?;
                let share = term(rec, r, flags.mode, flags.maxlen) / rec.len() as f64;
                for j in rec.itemset.variables() {
                    if j >= p {
                        return Err(Error::Inconsistent(format!("variable {j} outside 0..{p}")));
                    }
                    acc[j].add(share);
                }
            }
            Ok(acc.iter().map(CompensatedSum::value).collect())
        })
        .collect()
}

pub fn report(flags: &FlagSet, r: f64, p: usize) -> Result<ScoreReport> {
    Ok(ScoreReport {
        mode: flags.mode,
        r,
        maxlen: flags.maxlen,
        scores: score(flags, r)?,
        depths: depth(flags),
        contributions: contributions(flags, r, p)?,
    })
}

/// Largest attainable score when `σ_d / supp(d)` is at most `n − 1`:
/// `p(n − 1)` below `p = 2^{r+1} + 1`, otherwise
/// `(n − 1)·C(p, k)/k^r` with `k = min(maxlen, ⌊(p − r)/2⌋)`.
pub fn max_score_bound(n: u64, p: usize, r: f64, maxlen: usize) -> f64 {
    let scale = n.saturating_sub(1) as f64;
    if (p as f64) < 2f64.powf(r + 1.0) + 1.0 {
        return p as f64 * scale;
    }
    let k = (((p as f64 - r) / 2.0).floor() as usize).min(maxlen).max(1);
    scale * binomial(p, k) as f64 / (k as f64).powf(r)
}

/// Pearson correlation of two contribution columns; `None` if either is
/// constant.
pub fn column_correlation(contrib: &[Vec<f64>], a: usize, b: usize) -> Option<f64> {
    let n = contrib.len() as f64;
    let ma = contrib.iter().map(|row| row[a]).sum::<f64>() / n;
    let mb = contrib.iter().map(|row| row[b]).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for row in contrib {
        let (x, y) = (row[a] - ma, row[b] - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Variable pairs ordered by decreasing correlation of their contributions.
pub fn correlated_pairs(contrib: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let p = contrib.first().map_or(0, Vec::len);
    let mut pairs = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            if let Some(rho) = column_correlation(contrib, a, b) {
                pairs.push((a, b, rho));
            }
        }
    }
    pairs.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    pairs
}
