//! Exact `ν(c)`: truncated-Poisson convolution and direct Multinomial
//! enumeration.

use statrs::function::gamma::ln_gamma;

use crate::ci::CellSpec;
use crate::error::{Error, Result};

/// Multiply-adds allowed for one convolution.
pub const MAX_WORK: f64 = 1e9;
pub const MAX_STATES: f64 = 1e6;
pub const SELF_CHECK_TOL: f64 = 1e-12;

fn ln_fact(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

fn ranges(spec: &CellSpec, c: u64) -> Vec<(u64, u64)> {
    let n = spec.n() as f64;
    spec.probs()
        .iter()
        .map(|&p| {
            let m = n * p;
            let r = m.round();
            let m = if (m - r).abs() <= 1e-9 * m.max(1.0) { r } else { m };
            let lo = (m - c as f64).ceil().max(0.0) as u64;
            let hi = ((m + c as f64).floor() as u64).min(spec.n());
            (lo, hi)
        })
        .collect()
}

/// Levin's identity with the sum's pmf computed by convolution.
pub fn nu_by_convolution(spec: &CellSpec, c: u64) -> f64 {
    let n = spec.n();
    if c >= n {
        return 1.0;
    }
    let rs = ranges(spec, c);
    if rs.iter().any(|&(lo, hi)| lo > hi) {
        return 0.0;
    }
    let mut dist = vec![0.0; n as usize + 1];
    dist[0] = 1.0;
    let mut log_mass_total = 0.0;
    for (&p, &(lo, hi)) in spec.probs().iter().zip(&rs) {
        let lambda = n as f64 * p;
        let pmf: Vec<f64> = (lo..=hi)
            .map(|y| {
                if lambda == 0.0 {
                    if y == 0 { 1.0 } else { 0.0 }
                } else {
                    (y as f64 * lambda.ln() - lambda - ln_fact(y)).exp()
                }
            })
            .collect();
        let mass: f64 = pmf.iter().sum();
        if mass == 0.0 {
            return 0.0;
        }
        log_mass_total += mass.ln();
        let mut next = vec![0.0; n as usize + 1];
        for (s, &ds) in dist.iter().enumerate() {
            if ds == 0.0 {
                continue;
            }
            for (t, &w) in pmf.iter().enumerate() {
                let idx = s + lo as usize + t;
                if idx > n as usize {
                    break;
                }
                next[idx] += ds * w / mass;
            }
        }
        dist = next;
    }
    let log_atom = n as f64 * (n as f64).ln() - n as f64 - ln_fact(n);
    let sum_pmf = dist[n as usize];
    if sum_pmf <= 0.0 {
        return 0.0;
    }
    (log_mass_total + sum_pmf.ln() - log_atom).exp().min(1.0)
}

/// Sum of Multinomial probabilities over every count vector inside the
/// ranges.
pub fn nu_by_enumeration(spec: &CellSpec, c: u64) -> f64 {
    let n = spec.n();
    let rs = ranges(spec, c);
    let k = rs.len();
    let ln_n = ln_fact(n);
    let probs = spec.probs();
    let mut total = 0.0;
    let mut counts = vec![0u64; k];
    fn recurse(
        i: usize,
        remaining: u64,
        counts: &mut Vec<u64>,
        rs: &[(u64, u64)],
        probs: &[f64],
        ln_n: f64,
        total: &mut f64,
    ) {
        let k = rs.len();
        if i == k - 1 {
            counts[i] = remaining;
            if remaining < rs[i].0 || remaining > rs[i].1 {
                return;
            }
            let mut lp = ln_n;
            for (t, &x) in counts.iter().enumerate() {
                lp -= ln_fact(x);
                if x > 0 {
                    if probs[t] == 0.0 {
                        return;
                    }
                    lp += x as f64 * probs[t].ln();
                }
            }
            *total += lp.exp();
            return;
        }
        let hi = rs[i].1.min(remaining);
        for x in rs[i].0..=hi {
            counts[i] = x;
            recurse(i + 1, remaining - x, counts, rs, probs, ln_n, total);
        }
    }
    if rs.iter().all(|&(lo, hi)| lo <= hi) {
        recurse(0, n, &mut counts, &rs, probs, ln_n, &mut total);
    }
    total.min(1.0)
}

/// Number of count vectors of `k` cells summing to `n`.
pub fn state_count(k: usize, n: u64) -> f64 {
    (ln_fact(n + k as u64 - 1) - ln_fact(n) - ln_fact(k as u64 - 1)).exp()
}

/// Exact `ν(c)`. When both routes are within their caps their results must
/// agree to `1e-12`; otherwise the available route is used.
pub fn exact_nu(spec: &CellSpec, c: u64) -> Result<f64> {
    if c >= spec.n() {
        return Ok(1.0);
    }
    let work: f64 = ranges(spec, c)
        .iter()
        .map(|&(lo, hi)| (spec.n() + 1) as f64 * (hi.saturating_sub(lo) + 1) as f64)
        .sum();
    let conv_ok = work <= MAX_WORK;
    let enum_ok = state_count(spec.k(), spec.n()) <= MAX_STATES;
    match (conv_ok, enum_ok) {
        (true, true) => {
            let a = nu_by_convolution(spec, c);
            let b = nu_by_enumeration(spec, c);
            if (a - b).abs() > SELF_CHECK_TOL {
                return Err(Error::Inconsistent(format!(
                    "exact ν routes disagree at c = {c}: {a} vs {b}"
                )));
            }
            Ok(a)
        }
        (true, false) => Ok(nu_by_convolution(spec, c)),
        (false, true) => Ok(nu_by_enumeration(spec, c)),
        (false, false) => Err(Error::OracleRefusal(format!(
            "convolution work {work:.0} and state space both exceed the caps"
        ))),
    }
}

/// `(c, γ)` from an upward sweep of exact `ν`, with the same bracketing and
/// clamping as the shipped search.
pub fn exact_find_c(spec: &CellSpec, level: f64) -> Result<(u64, f64)> {
    let mut prev = exact_nu(spec, 0)?;
    if prev >= level {
        return Ok((0, 0.0));
    }
    for c in 0..spec.n() {
        let next = exact_nu(spec, c + 1)?.max(prev);
        if next > level {
            return Ok((c, (level - prev) / (next - prev)));
        }
        prev = next;
    }
    Err(Error::CiSearchFailure { n: spec.n(), level })
}
