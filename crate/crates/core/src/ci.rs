//! Simultaneous confidence intervals for Multinomial proportions.
//!
//! `ν(c)`, the probability that every cell count lies within `c` of its
//! expected count, is evaluated through Levin's representation: a product of
//! truncated Poisson masses times the probability that the sum of the
//! truncated variables equals `n`, divided by the Poisson(n) atom at `n`. The
//! sum's pmf is approximated by a fourth-order Edgeworth series, or computed
//! exactly by convolution when the truncation box or the convolution itself
//! is small.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Truncation boxes with at most this many lattice points use the exact
/// convolution under [`NuMethod::Auto`].
pub const EXACT_BOX_LIMIT: f64 = 1e5;

/// Convolutions costing at most this many multiply-adds are also done
/// exactly under [`NuMethod::Auto`].
pub const EXACT_WORK_LIMIT: f64 = 5e4;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Cell probabilities of one marginal table and the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    probs: Vec<f64>,
    n: u64,
}

impl CellSpec {
    pub fn new(probs: Vec<f64>, n: u64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("cell specification needs at least one cell".into()));
        }
        if n == 0 {
            return Err(Error::Domain("sample size must be positive".into()));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Domain("cell probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        // Long Kronecker products accumulate rounding; 1e-12 per cell is ample.
        let tol = 1e-12 * (probs.len() as f64).max(1.0);
        if (total - 1.0).abs() > tol {
            return Err(Error::Domain(format!("cell probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs, n })
    }

    pub fn uniform(k: usize, n: u64) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k], n)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// Expected counts `n·p_i`, snapped to the nearest integer when within
    /// rounding distance of it.
    pub fn expected_counts(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.probs.iter().map(|&p| snap(n * p)).collect()
    }

    /// Integer truncation bounds `[ceil(m_i - c), floor(m_i + c)]`, clipped
    /// to `[0, n]`.
    pub fn truncation_bounds(&self, c: u64) -> Vec<(i64, i64)> {
        let n = self.n as i64;
        self.expected_counts()
            .into_iter()
            .map(|m| bounds(m, c, n))
            .collect()
    }
}

fn snap(m: f64) -> f64 {
    let r = m.round();
    if (m - r).abs() <= 1e-9 * m.abs().max(1.0) {
        r
    } else {
        m
    }
}

fn bounds(m: f64, c: u64, n: i64) -> (i64, i64) {
    let c = c as f64;
    let lo = ((m - c).ceil() as i64).max(0);
    let hi = ((m + c).floor() as i64).min(n);
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NuMethod {
    /// Exact convolution where it is cheap, Edgeworth otherwise.
    Auto,
    #[default]
    Edgeworth,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    TwoSided,
    UpperOneSided,
    LowerOneSided,
}

/// Simultaneous intervals for every cell of a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimCi {
    pub c: u64,
    pub gamma: f64,
    pub alpha: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sidedness: Sidedness,
}

/// Moments of `Y | a ≤ Y ≤ b` for `Y ~ Poisson(lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedPoissonMoments {
    pub lambda: f64,
    pub lower: u64,
    pub upper: u64,
    pub mean: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub mass: f64,
    pub log_mass: f64,
}

/// Fills `buf` with the normalised truncated pmf on `a..=b` and returns the
/// log of the untruncated mass of that range. Weights are built by ratio
/// recurrences outward from the mode, so every one lies in `[0, 1]` before
/// normalisation and only the anchor needs a log-factorial.
fn truncated_pmf(
    lambda: f64,
    ln_lambda: f64,
    a: u64,
    b: u64,
    ln_fact: impl Fn(u64) -> f64,
    buf: &mut Vec<f64>,
) -> Option<f64> {
    buf.clear();
    buf.resize((b - a + 1) as usize, 0.0);
    if lambda == 0.0 {
        if a == 0 {
            buf[0] = 1.0;
            return Some(0.0);
        }
        return None;
    }
    let y0 = (lambda.floor() as u64).clamp(a, b);
    let i0 = (y0 - a) as usize;
    buf[i0] = 1.0;
    for i in i0..buf.len() - 1 {
        let y = a + i as u64;
        buf[i + 1] = buf[i] * lambda / (y + 1) as f64;
    }
    for i in (1..=i0).rev() {
        let y = a + i as u64;
        buf[i - 1] = buf[i] * y as f64 / lambda;
    }
    let total: f64 = buf.iter().sum();
    for w in buf.iter_mut() {
        *w /= total;
    }
    let log_anchor = y0 as f64 * ln_lambda - lambda - ln_fact(y0);
    let log_mass = log_anchor + total.ln();
    log_mass.is_finite().then_some(log_mass)
}

fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

fn moments_from_pmf(lambda: f64, a: u64, b: u64, w: &[f64], log_mass: f64) -> TruncatedPoissonMoments {
    let mean: f64 = w.iter().enumerate().map(|(i, &p)| (a + i as u64) as f64 * p).sum();
    let (mut mu2, mut mu3, mut mu4) = (0.0, 0.0, 0.0);
    for (i, &p) in w.iter().enumerate() {
        let d = (a + i as u64) as f64 - mean;
        let d2 = d * d;
        mu2 += d2 * p;
        mu3 += d2 * d * p;
        mu4 += d2 * d2 * p;
    }
    TruncatedPoissonMoments {
        lambda,
        lower: a,
        upper: b,
        mean,
        mu2,
        mu3,
        mu4,
        mass: log_mass.exp(),
        log_mass,
    }
}

/// Mean, central moments 2–4 and mass of a Poisson truncated to `[a, b]`.
/// `lambda = 0` is accepted and treated as a point mass at zero.
pub fn truncated_poisson_moments(lambda: f64, a: u64, b: u64) -> Result<TruncatedPoissonMoments> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("Poisson mean must be finite and non-negative, got {lambda}")));
    }
    if b < a {
        return Err(Error::Domain(format!("empty truncation range [{a}, {b}]")));
    }
    let mut buf = Vec::with_capacity((b - a + 1) as usize);
    let log_mass = truncated_pmf(lambda, lambda.ln(), a, b, ln_factorial, &mut buf).ok_or(Error::DegenerateTruncation {
        lambda,
        lower: a,
        upper: b,
    })?;
    Ok(moments_from_pmf(lambda, a, b, &buf, log_mass))
}

#[derive(Debug, Clone, Copy, Default)]
struct Cumulants {
    mean: f64,
    var: f64,
    k3: f64,
    k4: f64,
}

impl Cumulants {
    fn add(&mut self, m: &TruncatedPoissonMoments) {
        self.mean += m.mean;
        self.var += m.mu2;
        self.k3 += m.mu3;
        self.k4 += m.mu4 - 3.0 * m.mu2 * m.mu2;
    }

    fn density(&self, target: f64) -> f64 {
        let sd = self.var.sqrt();
        let z = (target - self.mean) / sd;
        let g1 = self.k3 / (self.var * sd);
        let g2 = self.k4 / (self.var * self.var);
        let z2 = z * z;
        let he3 = z * (z2 - 3.0);
        let he4 = z2 * z2 - 6.0 * z2 + 3.0;
        let he6 = z2 * z2 * z2 - 15.0 * z2 * z2 + 45.0 * z2 - 15.0;
        let poly = 1.0 + g1 * he3 / 6.0 + g2 * he4 / 24.0 + g1 * g1 * he6 / 72.0;
        poly * INV_SQRT_2PI * (-0.5 * z2).exp() / sd
    }
}

/// Fourth-order Edgeworth approximation of `P(Σ T_i = target)` for
/// independent truncated Poisson variables. May be slightly negative far in
/// the tails.
pub fn edgeworth_sum_density(moments: &[TruncatedPoissonMoments], target: u64) -> Result<f64> {
    if moments.is_empty() {
        return Err(Error::Domain("no truncated variables to sum".into()));
    }
    let mut cum = Cumulants::default();
    for m in moments {
        cum.add(m);
    }
    if !(cum.var > 0.0) {
        return Err(Error::DegenerateTruncation {
            lambda: moments[0].lambda,
            lower: moments[0].lower,
            upper: moments[0].upper,
        });
    }
    Ok(cum.density(target as f64))
}

fn log_poisson_atom(n: u64) -> f64 {
    let n = n as f64;
    n * n.ln() - n - ln_gamma(n + 1.0)
}

/// Reusable evaluator of `ν(c)` for one table.
#[derive(Debug, Clone)]
pub struct NuEvaluator {
    m: Vec<f64>,
    inv_m: Vec<f64>,
    /// `⌊m_i⌋`, the mode of each untruncated Poisson.
    mode: Vec<u64>,
    /// `Σ_i ln P(Y_i = ⌊m_i⌋)`.
    log_mode_mass: f64,
    /// `ln k!` for `k = 0..=n`.
    ln_fact: Vec<f64>,
    /// `1/k` for `k = 0..=n` (entry 0 unused).
    inv_int: Vec<f64>,
    n: u64,
    method: NuMethod,
    log_atom: f64,
}

impl NuEvaluator {
    pub fn new(spec: &CellSpec, method: NuMethod) -> Self {
        let mut ln_fact = Vec::with_capacity(spec.n as usize + 1);
        let mut acc = 0.0;
        ln_fact.push(0.0);
        for k in 1..=spec.n {
            acc += (k as f64).ln();
            ln_fact.push(acc);
        }
        let k = spec.k();
        let (mut m, mut inv_m, mut mode) = (Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k));
        let mut log_mode_mass = 0.0;
        let nf = spec.n as f64;
        for &p in &spec.probs {
            let x = snap(nf * p);
            let y0 = x.floor() as u64;
            if y0 > 0 {
                log_mode_mass += y0 as f64 * x.ln() - x - ln_fact[y0 as usize];
            } else {
                log_mode_mass -= x;
            }
            m.push(x);
            inv_m.push(1.0 / x);
            mode.push(y0);
        }
        let inv_int = (0..=spec.n).map(|k| if k == 0 { 0.0 } else { 1.0 / k as f64 }).collect();
        Self {
            m,
            inv_m,
            mode,
            log_mode_mass,
            ln_fact,
            inv_int,
            n: spec.n,
            method,
            log_atom: log_poisson_atom(spec.n),
        }
    }

    pub fn nu(&self, c: u64) -> f64 {
        if c >= self.n {
            return 1.0;
        }
        let n = self.n as i64;
        // At c = 0 every range is empty unless the expected count is an
        // integer.
        if c == 0 && self.m.iter().any(|&m| m.fract() != 0.0) {
            return 0.0;
        }
        let exact = match self.method {
            NuMethod::Exact => true,
            NuMethod::Edgeworth => false,
            NuMethod::Auto => {
                let mut box_size = 1.0f64;
                let mut work = 0.0f64;
                for &m in &self.m {
                    let (lo, hi) = bounds(m, c, n);
                    let width = (hi - lo + 1).max(0) as f64;
                    box_size *= width;
                    work += (n + 1) as f64 * width;
                    if box_size > EXACT_BOX_LIMIT && work > EXACT_WORK_LIMIT {
                        break;
                    }
                }
                box_size <= EXACT_BOX_LIMIT || work <= EXACT_WORK_LIMIT
            }
        };
        if !exact && c >= 1 {
            return self.nu_edgeworth_wide(c);
        }
        let mut bounds_v = Vec::with_capacity(self.m.len());
        for &m in &self.m {
            let (lo, hi) = bounds(m, c, n);
            if lo > hi {
                return 0.0;
            }
            bounds_v.push((lo as u64, hi as u64));
        }
        let mut buf = Vec::new();
        let mut log_prod = 0.0;
        let ln_fact = |k: u64| self.ln_fact[k as usize];
        let density = if exact {
            let lo_sum: u64 = bounds_v.iter().map(|b| b.0).sum();
            if lo_sum > self.n {
                return 0.0;
            }
            // dist[s] = P(Σ T = lo_sum + s), restricted to sums ≤ n.
            let span = (self.n - lo_sum) as usize;
            let mut dist = vec![0.0; span + 1];
            dist[0] = 1.0;
            let mut reach = 0usize;
            for (&m, &(a, b)) in self.m.iter().zip(&bounds_v) {
                match truncated_pmf(m, m.ln(), a, b, ln_fact, &mut buf) {
                    Some(lm) => log_prod += lm,
                    None => return 0.0,
                }
                let width = (b - a) as usize;
                let new_reach = (reach + width).min(span);
                let mut next = vec![0.0; span + 1];
                for s in 0..=reach {
                    let ds = dist[s];
                    if ds == 0.0 {
                        continue;
                    }
                    for (y, &w) in buf.iter().enumerate() {
                        if s + y > span {
                            break;
                        }
                        next[s + y] += ds * w;
                    }
                }
                dist = next;
                reach = new_reach;
            }
            dist[span]
        } else {
            let mut cum = Cumulants::default();
            for (&m, &(a, b)) in self.m.iter().zip(&bounds_v) {
                let Some(lm) = truncated_pmf(m, m.ln(), a, b, ln_fact, &mut buf) else {
                    return 0.0;
                };
                log_prod += lm;
                cum.add(&moments_from_pmf(m, a, b, &buf, lm));
            }
            if cum.var > 0.0 {
                cum.density(self.n as f64).max(0.0)
            } else if (cum.mean - self.n as f64).abs() < 0.5 {
                // Every cell pinned to one value: the sum is deterministic.
                1.0
            } else {
                0.0
            }
        };
        self.finish(log_prod, density)
    }

    fn finish(&self, log_prod: f64, density: f64) -> f64 {
        if density <= 0.0 {
            return 0.0;
        }
        (log_prod + density.ln() - self.log_atom).exp().clamp(0.0, 1.0)
    }

    /// Edgeworth branch for `c ≥ 1`. Every truncation range then contains
    /// the cell's mode, so weights are built outward from it and the
    /// log-masses share the precomputed mode terms.
    fn nu_edgeworth_wide(&self, c: u64) -> f64 {
        let mut cells = self.fresh_cells();
        self.edgeworth_at(&mut cells, c)
    }

    fn fresh_cells(&self) -> Vec<CellSums> {
        self.mode.iter().map(|&y0| CellSums::new(y0)).collect()
    }

    /// Extends every cell's sums to the ranges for `c` and evaluates. Sums
    /// only ever grow, so a sweep over increasing `c` reuses them and gets
    /// bit-for-bit the values of a fresh evaluation.
    fn edgeworth_at(&self, cells: &mut [CellSums], c: u64) -> f64 {
        let n = self.n as i64;
        let mut cum = Cumulants::default();
        let mut log_totals = 0.0;
        let mut prod = 1.0;
        for (i, &m) in self.m.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let (lo, hi) = bounds(m, c, n);
            let cell = &mut cells[i];
            cell.extend(m, self.inv_m[i], lo as u64, hi as u64, &self.inv_int);
            let [s0, s1, s2, s3, s4] = cell.totals();
            prod *= s0;
            if prod > 1e200 {
                log_totals += prod.ln();
                prod = 1.0;
            }
            let inv = 1.0 / s0;
            let (e1, e2, e3, e4) = (s1 * inv, s2 * inv, s3 * inv, s4 * inv);
            let e1sq = e1 * e1;
            let mu2 = (e2 - e1sq).max(0.0);
            let mu3 = e3 - 3.0 * e1 * e2 + 2.0 * e1sq * e1;
            let mu4 = e4 - 4.0 * e1 * e3 + 6.0 * e1sq * e2 - 3.0 * e1sq * e1sq;
            cum.mean += cell.y0 as f64 + e1;
            cum.var += mu2;
            cum.k3 += mu3;
            cum.k4 += mu4 - 3.0 * mu2 * mu2;
        }
        log_totals += prod.ln();
        let density = if cum.var > 0.0 {
            cum.density(self.n as f64).max(0.0)
        } else if (cum.mean - self.n as f64).abs() < 0.5 {
            1.0
        } else {
            0.0
        };
        self.finish(self.log_mode_mass + log_totals, density)
    }
}

/// Power sums `Σ w_y (y − y0)^j`, `j = 0..4`, of one cell's Poisson weights
/// relative to the mode `y0`, kept separately above and below the mode.
#[derive(Debug, Clone)]
struct CellSums {
    y0: u64,
    /// Current range `[a, b]`.
    a: u64,
    b: u64,
    w_up: f64,
    w_down: f64,
    up: [f64; 5],
    down: [f64; 5],
}

impl CellSums {
    fn new(y0: u64) -> Self {
        Self {
            y0,
            a: y0,
            b: y0,
            w_up: 1.0,
            w_down: 1.0,
            up: [1.0, 0.0, 0.0, 0.0, 0.0],
            down: [0.0; 5],
        }
    }

    fn extend(&mut self, m: f64, inv_m: f64, a: u64, b: u64, inv_int: &[f64]) {
        for y in self.b + 1..=b {
            self.w_up *= m * inv_int[y as usize];
            accumulate(&mut self.up, self.w_up, (y - self.y0) as f64);
        }
        self.b = self.b.max(b);
        for y in (a..self.a).rev() {
            self.w_down *= (y + 1) as f64 * inv_m;
            accumulate(&mut self.down, self.w_down, -((self.y0 - y) as f64));
        }
        self.a = self.a.min(a);
    }

    fn totals(&self) -> [f64; 5] {
        std::array::from_fn(|j| self.up[j] + self.down[j])
    }
}

fn accumulate(s: &mut [f64; 5], w: f64, d: f64) {
    let d2 = d * d;
    s[0] += w;
    s[1] += w * d;
    s[2] += w * d2;
    s[3] += w * d2 * d;
    s[4] += w * d2 * d2;
}

/// `ν(c)` with the default method.
pub fn nu(spec: &CellSpec, c: u64) -> f64 {
    NuEvaluator::new(spec, NuMethod::default()).nu(c)
}

pub fn nu_with(spec: &CellSpec, c: u64, method: NuMethod) -> f64 {
    NuEvaluator::new(spec, method).nu(c)
}

fn check_level(level: f64) -> Result<()> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Domain(format!("confidence level {level} outside [0, 1)")));
    }
    Ok(())
}

/// Smallest `c` with `ν(c) < level < ν(c+1)` and the interpolation weight
/// `γ = (level − ν(c)) / (ν(c+1) − ν(c))`. Sweeps upward from zero, taking
/// the running maximum so the swept `ν` is nondecreasing. Returns `(0, 0)`
/// when `ν(0)` already reaches the level.
pub fn find_c(spec: &CellSpec, level: f64) -> Result<(u64, f64)> {
    find_c_with(spec, level, NuMethod::default())
}

pub fn find_c_with(spec: &CellSpec, level: f64, method: NuMethod) -> Result<(u64, f64)> {
    find_c_bounded(spec, level, method, u64::MAX)?.ok_or(Error::CiSearchFailure {
        n: spec.n,
        level,
    })
}

/// As [`find_c_with`], but gives up with `None` as soon as `c` is known to
/// exceed `max_c`.
pub fn find_c_bounded(
    spec: &CellSpec,
    level: f64,
    method: NuMethod,
    max_c: u64,
) -> Result<Option<(u64, f64)>> {
    check_level(level)?;
    let eval = NuEvaluator::new(spec, method);
    let mut prev = eval.nu(0);
    if prev >= level {
        return Ok(Some((0, 0.0)));
    }
    let mut cells = (method == NuMethod::Edgeworth).then(|| eval.fresh_cells());
    for c in 0..spec.n {
        if c > max_c {
            return Ok(None);
        }
        let next = match cells.as_mut() {
            Some(cells) if c + 1 < spec.n => eval.edgeworth_at(cells, c + 1),
            _ => eval.nu(c + 1),
        }
        .max(prev);
        if next > level {
            return Ok(Some((c, (level - prev) / (next - prev))));
        }
        prev = next;
    }
    if max_c < spec.n {
        return Ok(None);
    }
    Err(Error::CiSearchFailure { n: spec.n, level })
}

/// Simultaneous intervals at confidence `1 − alpha`. One-sided intervals use
/// the half-width found at `1 − 2·alpha`. Endpoints are not clamped.
pub fn intervals(spec: &CellSpec, alpha: f64, sidedness: Sidedness) -> Result<SimCi> {
    intervals_with(spec, alpha, sidedness, NuMethod::default())
}

pub fn intervals_with(
    spec: &CellSpec,
    alpha: f64,
    sidedness: Sidedness,
    method: NuMethod,
) -> Result<SimCi> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 0.5]")));
    }
    let level = match sidedness {
        Sidedness::TwoSided => 1.0 - alpha,
        _ => 1.0 - 2.0 * alpha,
    };
    let (c, gamma) = find_c_with(spec, level, method)?;
    let n = spec.n as f64;
    let cf = c as f64;
    let (lower, upper) = match sidedness {
        Sidedness::TwoSided => (
            spec.probs.iter().map(|p| p - cf / n).collect(),
            spec.probs.iter().map(|p| p + (cf + 2.0 * gamma) / n).collect(),
        ),
        Sidedness::UpperOneSided => (
            spec.probs.iter().map(|p| p - cf / n).collect(),
            vec![1.0; spec.k()],
        ),
        Sidedness::LowerOneSided => (
            vec![0.0; spec.k()],
            spec.probs.iter().map(|p| p + (cf + 2.0 * gamma) / n).collect(),
        ),
    };
    Ok(SimCi {
        c,
        gamma,
        alpha,
        lower,
        upper,
        sidedness,
    })
}
