//! Reference implementations and the suites that compare them with the
//! production path.
//!
//! Nothing here is tuned for speed. The walker enumerates the lattice with
//! nested loops, [`exact`] computes `ν` by convolution and by brute
//! Multinomial enumeration, and [`propositions`] solves the score
//! maximisation problem exactly.

pub mod exact;
pub mod propositions;
pub mod walker;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ci::{find_c_with, intervals_with, nu_with, CellSpec, NuMethod, Sidedness};
use crate::data::{Dataset, Itemset, ProbabilityModel};
use crate::detector::{analyze, Config};
use crate::error::Result;
use crate::threshold::Mode;
use walker::{walker, WalkerConfig};

#[derive(Debug, Clone, Serialize)]
pub struct OracleConfig {
    /// Largest full-table cell count handed to the walker.
    pub max_cells: u64,
    pub seed: u64,
    pub datasets: usize,
    pub nu_tolerance: f64,
    pub score_tolerance: f64,
    pub coverage_simulations: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_cells: walker::MAX_CELLS,
            seed: 20_240_611,
            datasets: 50,
            nu_tolerance: 2e-3,
            score_tolerance: 1e-9,
            coverage_simulations: 10_000,
        }
    }
}

/// One randomly generated scoring problem.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub dataset: Dataset,
    pub alpha: f64,
    pub r: f64,
    pub mode: Mode,
    pub prune: bool,
}

/// Rows drawn around a few prototypes, so that some cells are common and
/// some are rare, plus uniform noise rows.
pub fn random_dataset(rng: &mut impl Rng, max_n: usize, max_p: usize, max_levels: usize) -> Dataset {
    let n = rng.gen_range(12..=max_n);
    let p = rng.gen_range(2..=max_p);
    let levels: Vec<usize> = (0..p).map(|_| rng.gen_range(2..=max_levels)).collect();
    let protos: Vec<Vec<u32>> = (0..rng.gen_range(1..=3))
        .map(|_| levels.iter().map(|&l| rng.gen_range(1..=l as u32)).collect())
        .collect();
    let keep = rng.gen_range(0.5..0.95);
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let proto = &protos[rng.gen_range(0..protos.len())];
            proto
                .iter()
                .zip(&levels)
                .map(|(&code, &l)| if rng.gen_bool(keep) { code } else { rng.gen_range(1..=l as u32) })
                .collect()
        })
        .collect();
    // Level counts from the data, so that every declared level is observed.
    let mut rows = rows;
    for (j, &l) in levels.iter().enumerate() {
        for code in 1..=l as u32 {
            if !rows.iter().any(|row| row[j] == code) {
                let i = rng.gen_range(0..rows.len());
                rows[i][j] = code;
            }
        }
    }
    Dataset::from_codes(&rows, &levels).expect("generated codes are in range")
}

/// The randomized suite: datasets with `n ≤ 200`, `p ≤ 6`, at most four
/// levels, crossed with `α`, `r`, mode and pruning.
pub fn random_cases(seed: u64, count: usize) -> Vec<RandomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|t| RandomCase {
            dataset: random_dataset(&mut rng, 200, 6, 4),
            alpha: if t % 2 == 0 { 0.05 } else { 0.1 },
            r: if (t / 2) % 2 == 0 { 1.0 } else { 2.0 },
            mode: if (t / 4) % 2 == 0 { Mode::Infrequent } else { Mode::Frequent },
            prune: (t / 8) % 2 == 0 || t % 3 == 0,
        })
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Outcome of one walker-versus-production comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub n: usize,
    pub p: usize,
    pub mode: Mode,
    pub maxlen_fast: usize,
    pub maxlen_walker: usize,
    pub flags_fast: usize,
    pub flags_walker: usize,
    /// Same itemsets with the same supports.
    pub flags_equal: bool,
    pub max_score_err: f64,
    pub max_depth_err: f64,
    pub max_contribution_err: f64,
    /// Largest relative gap between a score and its contribution row sum.
    pub max_row_sum_err: f64,
    pub max_score: f64,
}

impl Comparison {
    pub fn passed(&self, tol: f64) -> bool {
        self.maxlen_fast == self.maxlen_walker
            && self.flags_equal
            && self.max_score_err <= tol
            && self.max_depth_err <= tol
            && self.max_contribution_err <= tol
            && self.max_row_sum_err <= tol
    }
}

/// Runs both paths with the empirical model.
pub fn compare(case: &RandomCase) -> Result<Comparison> {
    compare_with(case, 0.0)
}

/// As [`compare`], with `score_offset` added to every production score
/// before comparing. Used to check that the harness notices a discrepancy.
pub fn compare_with(case: &RandomCase, score_offset: f64) -> Result<Comparison> {
    let ds = &case.dataset;
    let model = ProbabilityModel::empirical(ds);
    let config = Config {
        mode: case.mode,
        alpha: case.alpha,
        r: case.r,
        prune: case.prune,
        ..Config::default()
    };
    let mut fast = analyze(ds, &model, &config)?;
    if score_offset != 0.0 {
        for s in fast.report.scores.iter_mut() {
            *s += score_offset;
        }
    }
    let slow = walker(
        ds,
        &model,
        &WalkerConfig {
            alpha: case.alpha,
            r: case.r,
            mode: case.mode,
            prune: case.prune,
            ..WalkerConfig::default()
        },
    )?;
    let as_map = |recs: &mut dyn Iterator<Item = (Itemset, u64)>| recs.collect::<BTreeMap<_, _>>();
    let fast_set = as_map(&mut fast.flags.records.iter().map(|r| (r.itemset.clone(), r.support)));
    let slow_set = as_map(&mut slow.records.iter().map(|r| (r.itemset.clone(), r.support)));
    let (fr, sr) = (&fast.report, &slow.report);
    let mut cmp = Comparison {
        n: ds.n(),
        p: ds.p(),
        mode: case.mode,
        maxlen_fast: fast.maxlen,
        maxlen_walker: slow.maxlen,
        flags_fast: fast_set.len(),
        flags_walker: slow_set.len(),
        flags_equal: fast_set == slow_set,
        max_score_err: 0.0,
        max_depth_err: 0.0,
        max_contribution_err: 0.0,
        max_row_sum_err: 0.0,
        max_score: 0.0,
    };
    for i in 0..ds.n() {
        cmp.max_score_err = cmp.max_score_err.max(rel_err(fr.scores[i], sr.scores[i]));
        cmp.max_depth_err = cmp.max_depth_err.max(rel_err(fr.depths[i], sr.depths[i]));
        for j in 0..ds.p() {
            cmp.max_contribution_err = cmp
                .max_contribution_err
                .max(rel_err(fr.contributions[i][j], sr.contributions[i][j]));
        }
        let row: f64 = fr.contributions[i].iter().sum();
        cmp.max_row_sum_err = cmp.max_row_sum_err.max(rel_err(row, fr.scores[i]));
        cmp.max_score = cmp.max_score.max(fr.scores[i]);
    }
    Ok(cmp)
}

/// Skewed probabilities in the style of `(0.6, 0.3, 0.1)`.
pub fn skewed_probs(k: usize) -> Vec<f64> {
    match k {
        1 => vec![1.0],
        2 => vec![0.7, 0.3],
        3 => vec![0.6, 0.3, 0.1],
        _ => {
            let w: Vec<f64> = (0..k).map(|i| 0.5f64.powi(i as i32)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NuPoint {
    pub k: usize,
    pub n: u64,
    pub skewed: bool,
    pub c: u64,
    pub exact: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CPoint {
    pub k: usize,
    pub n: u64,
    pub skewed: bool,
    pub level: f64,
    pub c_exact: u64,
    pub c_method: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NuBattery {
    pub method: NuMethod,
    pub points: usize,
    pub max_deviation: f64,
    /// Largest deviation for each `(k, skewed)` family.
    pub by_family: Vec<(usize, bool, f64)>,
    pub worst: Option<NuPoint>,
    pub max_c_difference: u64,
    pub worst_c: Option<CPoint>,
}

impl NuBattery {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_deviation <= tol && self.max_c_difference <= 1
    }
}

/// Compares `ν` from `method` against the exact oracle for every
/// `k ∈ {2, 3, 5}`, `n ∈ {10, 20, 50, 100}`, uniform and skewed cells and
/// every `c` in `0..=n`; half-widths are compared at levels 0.9 and 0.95.
pub fn nu_battery(method: NuMethod) -> Result<NuBattery> {
    let mut out = NuBattery {
        method,
        points: 0,
        max_deviation: 0.0,
        by_family: Vec::new(),
        worst: None,
        max_c_difference: 0,
        worst_c: None,
    };
    for k in [2usize, 3, 5] {
        for n in [10u64, 20, 50, 100] {
            for skewed in [false, true] {
                let spec = if skewed {
                    CellSpec::new(skewed_probs(k), n)?
                } else {
                    CellSpec::uniform(k, n)?
                };
                let family = match out.by_family.iter().position(|f| f.0 == k && f.1 == skewed) {
                    Some(t) => t,
                    None => {
                        out.by_family.push((k, skewed, 0.0));
                        out.by_family.len() - 1
                    }
                };
                for c in 0..=n {
                    let exact = exact::exact_nu(&spec, c)?;
                    let value = nu_with(&spec, c, method);
                    out.points += 1;
                    let dev = (value - exact).abs();
                    out.by_family[family].2 = out.by_family[family].2.max(dev);
                    if dev > out.max_deviation || out.worst.is_none() {
                        out.max_deviation = out.max_deviation.max(dev);
                        out.worst = Some(NuPoint { k, n, skewed, c, exact, value });
                    }
                }
                for level in [0.9, 0.95] {
                    let (c_exact, _) = exact::exact_find_c(&spec, level)?;
                    let (c_method, _) = find_c_with(&spec, level, method)?;
                    let diff = c_exact.abs_diff(c_method);
                    if diff > out.max_c_difference || out.worst_c.is_none() {
                        out.max_c_difference = out.max_c_difference.max(diff);
                        out.worst_c = Some(CPoint { k, n, skewed, level, c_exact, c_method });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Coverage {
    pub k: usize,
    pub n: u64,
    pub alpha: f64,
    pub c: u64,
    pub gamma: f64,
    pub simulations: usize,
    /// Draws whose proportions all fall inside the two-sided intervals.
    pub covered: usize,
    /// Draws whose counts all fall inside `[n·p_i − c, n·p_i + c]`.
    pub covered_symmetric: usize,
}

impl Coverage {
    pub fn rate(&self) -> f64 {
        self.covered as f64 / self.simulations as f64
    }

    pub fn symmetric_rate(&self) -> f64 {
        self.covered_symmetric as f64 / self.simulations as f64
    }
}

/// Simultaneous coverage of the two-sided intervals of `k` equiprobable
/// cells, estimated from Multinomial draws.
pub fn coverage_simulation(k: usize, n: u64, alpha: f64, simulations: usize, seed: u64) -> Result<Coverage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = CellSpec::uniform(k, n)?;
    let ci = intervals_with(&spec, alpha, Sidedness::TwoSided, NuMethod::default())?;
    let nf = n as f64;
    let mut covered = 0;
    let mut covered_symmetric = 0;
    for _ in 0..simulations {
        let mut counts = vec![0u64; k];
        for _ in 0..n {
            counts[rng.gen_range(0..k)] += 1;
        }
        // Compared on the count scale, with room for rounding in the endpoints.
        let inside = counts.iter().enumerate().all(|(i, &x)| {
            let x = x as f64;
            nf * ci.lower[i] - 1e-9 <= x && x <= nf * ci.upper[i] + 1e-9
        });
        let symmetric = counts
            .iter()
            .all(|&x| (x as f64 - nf / k as f64).abs() <= ci.c as f64);
        covered += inside as usize;
        covered_symmetric += symmetric as usize;
    }
    Ok(Coverage {
        k,
        n,
        alpha,
        c: ci.c,
        gamma: ci.gamma,
        simulations,
        covered,
        covered_symmetric,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub comparisons: Vec<Comparison>,
    pub failures: Vec<String>,
    pub nu: NuBattery,
    pub coverage: Coverage,
    pub propositions_passed: bool,
    pub proposition_failures: Vec<(usize, f64)>,
}

impl SuiteReport {
    pub fn passed(&self, cfg: &OracleConfig) -> bool {
        self.failures.is_empty()
            && self.comparisons.iter().all(|c| c.passed(cfg.score_tolerance))
            && self.nu.passed(cfg.nu_tolerance)
            && (0.94..=0.99).contains(&self.coverage.rate())
            && self.propositions_passed
    }
}

/// Every suite with its default battery.
pub fn run_suite(cfg: &OracleConfig, nu_method: NuMethod, propositions_p: usize) -> Result<SuiteReport> {
    let mut comparisons = Vec::new();
    let mut failures = Vec::new();
    for (t, case) in random_cases(cfg.seed, cfg.datasets).iter().enumerate() {
        let full: u64 = case.dataset.level_counts().iter().map(|&l| l as u64).product();
        if full > cfg.max_cells {
            continue;
        }
        match compare(case) {
            Ok(c) => comparisons.push(c),
            Err(e) => failures.push(format!("dataset {t}: {e}")),
        }
    }
    let nu = nu_battery(nu_method)?;
    let coverage = coverage_simulation(5, 100, 0.05, cfg.coverage_simulations, cfg.seed)?;
    let props = propositions::check_propositions(2..=propositions_p, &[1.0, 2.0, 3.0]);
    Ok(SuiteReport {
        comparisons,
        failures,
        nu,
        coverage,
        propositions_passed: props.passed(),
        proposition_failures: props.failures().map(|c| (c.p, c.r)).collect(),
    })
}
