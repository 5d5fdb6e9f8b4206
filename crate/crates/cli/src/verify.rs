//! The `verify` subcommand: oracle suites with a plain-text report.

use std::io::Write;

use anyhow::Context;
use sono::oracle::{self, propositions, OracleConfig};
use sono::NuMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Walker,
    Nu,
    Coverage,
    Propositions,
}

pub struct VerifyOptions {
    pub oracle: OracleConfig,
    pub suites: Vec<Suite>,
    pub nu_method: NuMethod,
    pub p_max: usize,
    pub score_offset: f64,
}

/// Runs the chosen suites and writes the report. Returns whether every
/// check passed.
pub fn run(opts: &VerifyOptions, out: &mut impl Write) -> anyhow::Result<bool> {
    let cfg = &opts.oracle;
    let mut all = true;
    let mut line = |ok: bool, text: String, out: &mut dyn Write| -> anyhow::Result<()> {
        all &= ok;
        writeln!(out, "{} {text}", if ok { "PASS" } else { "FAIL" })?;
        Ok(())
    };
    if opts.suites.contains(&Suite::Walker) {
        let cases = oracle::random_cases(cfg.seed, cfg.datasets);
        let mut bad = Vec::new();
        let mut worst = 0.0f64;
        for (k, case) in cases.iter().enumerate() {
            let c = oracle::compare_with(case, opts.score_offset).with_context(|| format!("dataset {k}"))?;
            worst = worst.max(c.max_score_err).max(c.max_depth_err).max(c.max_contribution_err);
            if !c.passed(cfg.score_tolerance) {
                bad.push(k);
            }
        }
        line(
            bad.is_empty(),
            format!(
                "walker: {} seeded datasets, {} mismatched {:?}, max relative difference {worst:.1e}",
                cases.len(),
                bad.len(),
                bad
            ),
            out,
        )?;
    }
    if opts.suites.contains(&Suite::Nu) {
        let b = oracle::nu_battery(opts.nu_method)?;
        let w = b.worst.as_ref().expect("battery is non-empty");
        line(
            b.passed(cfg.nu_tolerance),
            format!(
                "nu ({:?}): {} points, max deviation {:.2e} at k={} n={} c={} (tolerance {:.0e}), max c difference {}",
                opts.nu_method, b.points, b.max_deviation, w.k, w.n, w.c, cfg.nu_tolerance, b.max_c_difference
            ),
            out,
        )?;
        for (k, skewed, d) in &b.by_family {
            writeln!(out, "     k={k} {}: {d:.2e}", if *skewed { "skewed" } else { "uniform" })?;
        }
    }
    if opts.suites.contains(&Suite::Coverage) {
        let c = oracle::coverage_simulation(5, 100, 0.05, cfg.coverage_simulations, cfg.seed)?;
        line(
            (0.94..=0.99).contains(&c.rate()),
            format!(
                "coverage: k=5, n=100, alpha=0.05, {} draws, two-sided coverage {:.4}",
                c.simulations,
                c.rate()
            ),
            out,
        )?;
    }
    if opts.suites.contains(&Suite::Propositions) {
        let r = propositions::check_propositions(2..=opts.p_max, &[1.0, 2.0, 3.0]);
        let failures: Vec<String> = r.failures().map(|c| format!("(p={}, r={})", c.p, c.r)).collect();
        line(
            r.passed(),
            format!(
                "propositions: p in [2, {}], r in {{1, 2, 3}}, {} case(s) fail {}",
                opts.p_max,
                failures.len(),
                failures.join(" ")
            ),
            out,
        )?;
    }
    Ok(all)
}
