//! Exhaustive lattice walker: every subset, every cell, nested loops.

use crate::ci::{find_c_with, CellSpec, NuMethod};
use crate::data::{Dataset, Itemset, ProbabilityModel};
use crate::error::{Error, Result};
use crate::lattice::FlagRecord;
use crate::score::ScoreReport;
use crate::threshold::{MaxlenRule, Mode};

pub const MAX_ROWS: usize = 500;
pub const MAX_VARS: usize = 8;
pub const MAX_CELLS: u64 = 100_000;

#[derive(Debug, Clone)]
pub struct WalkerConfig {
    pub alpha: f64,
    pub r: f64,
    pub mode: Mode,
    pub prune: bool,
    pub max_len: Option<usize>,
    pub maxlen_rule: MaxlenRule,
    pub nu_method: NuMethod,
}

impl Default for WalkerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            r: 2.0,
            mode: Mode::Infrequent,
            prune: true,
            max_len: None,
            maxlen_rule: MaxlenRule::AnyCell,
            nu_method: NuMethod::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WalkerOutput {
    pub maxlen: usize,
    /// Flagged itemsets in canonical order.
    pub records: Vec<FlagRecord>,
    pub report: ScoreReport,
}

/// Every cell of the table over `vars`, as code vectors, last variable
/// fastest.
fn all_cells(ds: &Dataset, vars: &[usize]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut codes = vec![1u32; vars.len()];
    loop {
        out.push(codes.clone());
        let mut t = vars.len();
        loop {
            if t == 0 {
                return out;
            }
            t -= 1;
            if (codes[t] as usize) < ds.level_count(vars[t]) {
                codes[t] += 1;
                for later in codes.iter_mut().skip(t + 1) {
                    *later = 1;
                }
                break;
            }
        }
    }
}

fn subsets(p: usize, size: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << p))
        .filter(|m| m.count_ones() as usize == size)
        .map(|m| (0..p).filter(|&j| m & (1 << j) != 0).collect())
        .collect()
}

fn probability(model: &ProbabilityModel, vars: &[usize], codes: &[u32]) -> f64 {
    let mut prob = 1.0;
    for (&j, &c) in vars.iter().zip(codes) {
        prob *= model.pi(j)[c as usize - 1];
    }
    prob
}

fn support(ds: &Dataset, vars: &[usize], codes: &[u32]) -> u64 {
    let mut count = 0;
    for i in 0..ds.n() {
        let mut hit = true;
        for (&j, &c) in vars.iter().zip(codes) {
            if ds.code(i, j) != c {
                hit = false;
                break;
            }
        }
        if hit {
            count += 1;
        }
    }
    count
}

/// `(c, γ)` of the table over `vars`; cell probabilities listed by nested
/// loops.
fn half_width(ds: &Dataset, model: &ProbabilityModel, vars: &[usize], alpha: f64, method: NuMethod) -> Result<(u64, f64)> {
    let probs: Vec<f64> = all_cells(ds, vars)
        .iter()
        .map(|codes| probability(model, vars, codes))
        .collect();
    let spec = CellSpec::new(probs, ds.n() as u64)?;
    find_c_with(&spec, 1.0 - 2.0 * alpha, method)
}

fn sigma(mode: Mode, n: usize, c: u64, gamma: f64, prob: f64) -> f64 {
    let m = n as f64 * prob;
    match mode {
        Mode::Infrequent => m - c as f64,
        Mode::Frequent => m + c as f64 + 2.0 * gamma,
    }
}

fn brute_maxlen(ds: &Dataset, model: &ProbabilityModel, cfg: &WalkerConfig) -> Result<usize> {
    let mut maxlen = 1;
    for size in 1..=ds.p() {
        let mut any = false;
        let mut all = true;
        for vars in subsets(ds.p(), size) {
            let (c, _) = half_width(ds, model, &vars, cfg.alpha, cfg.nu_method)?;
            for codes in all_cells(ds, &vars) {
                let s = sigma(Mode::Infrequent, ds.n(), c, 0.0, probability(model, &vars, &codes));
                any |= s >= 2.0;
                all &= s >= 2.0;
            }
        }
        let ok = match cfg.maxlen_rule {
            MaxlenRule::AnyCell => any,
            MaxlenRule::AllCells => all,
        };
        if !ok {
            break;
        }
        maxlen = size;
    }
    Ok(maxlen)
}

fn itemset(vars: &[usize], codes: &[u32]) -> Itemset {
    Itemset::new(vars.iter().copied().zip(codes.iter().copied()).collect()).expect("valid cell")
}

/// Scores `ds` by exhaustive enumeration. Refuses inputs above desk scale.
pub fn walker(ds: &Dataset, model: &ProbabilityModel, cfg: &WalkerConfig) -> Result<WalkerOutput> {
    if ds.n() > MAX_ROWS || ds.p() > MAX_VARS {
        return Err(Error::OracleRefusal(format!(
            "{}×{} exceeds the walker limit of {MAX_ROWS}×{MAX_VARS}",
            ds.n(),
            ds.p()
        )));
    }
    let full: u64 = (0..ds.p()).map(|j| ds.level_count(j) as u64).product();
    if full > MAX_CELLS {
        return Err(Error::OracleRefusal(format!("{full} cells in the full table exceeds {MAX_CELLS}")));
    }
    if !(cfg.r > 0.0) {
        return Err(Error::Config("r must be positive".into()));
    }
    model.check_compatible(ds)?;
    let maxlen = match cfg.max_len {
        Some(m) => m,
        None => brute_maxlen(ds, model, cfg)?,
    };
    let n = ds.n();
    let levels: Vec<usize> = match cfg.mode {
        Mode::Infrequent => (1..=maxlen).collect(),
        Mode::Frequent => (1..=maxlen).rev().collect(),
    };
    let mut records: Vec<FlagRecord> = Vec::new();
    for size in levels {
        let mut found = Vec::new();
        for vars in subsets(ds.p(), size) {
            let (c, gamma) = half_width(ds, model, &vars, cfg.alpha, cfg.nu_method)?;
            for codes in all_cells(ds, &vars) {
                let supp = support(ds, &vars, &codes);
                if supp == 0 {
                    continue;
                }
                let d = itemset(&vars, &codes);
                let s = sigma(cfg.mode, n, c, gamma, probability(model, &vars, &codes));
                match cfg.mode {
                    Mode::Infrequent => {
                        let blocked = cfg.prune && records.iter().any(|f| f.itemset.is_subset_of(&d));
                        if !blocked && supp as f64 <= s {
                            found.push(FlagRecord { itemset: d, support: supp, sigma: s, implied: false });
                        }
                    }
                    Mode::Frequent => {
                        let implied = cfg.prune
                            && records.iter().any(|f| !f.implied && d.is_subset_of(&f.itemset));
                        if implied || supp as f64 >= s {
                            found.push(FlagRecord { itemset: d, support: supp, sigma: s, implied });
                        }
                    }
                }
            }
        }
        // Flags of one level only affect later levels.
        records.extend(found);
    }
    records.sort_by(|a, b| a.itemset.canonical_cmp(&b.itemset));

    let p = ds.p();
    let mut scores = vec![0.0; n];
    let mut depths = vec![0.0; n];
    let mut contributions = vec![vec![0.0; p]; n];
    for i in 0..n {
        let row = ds.row(i);
        let mut count = 0usize;
        let mut length_total = 0.0;
        for f in records.iter().filter(|f| f.itemset.contained_in(row)) {
            let len = f.itemset.len();
            let t = match cfg.mode {
                Mode::Infrequent => f.sigma / (f.support as f64 * (len as f64).powf(cfg.r)),
                Mode::Frequent => f.support as f64 / (f.sigma * ((maxlen - len + 1) as f64).powf(cfg.r)),
            };
            scores[i] += t;
            for j in f.itemset.variables() {
                contributions[i][j] += t / len as f64;
            }
            count += 1;
            length_total += match cfg.mode {
                Mode::Infrequent => len as f64,
                Mode::Frequent => (maxlen - len + 1) as f64,
            };
        }
        if count > 0 {
            depths[i] = length_total / count as f64;
        }
    }
    Ok(WalkerOutput {
        maxlen,
        records,
        report: ScoreReport {
            mode: cfg.mode,
            r: cfg.r,
            maxlen,
            scores,
            depths,
            contributions,
        },
    })
}
