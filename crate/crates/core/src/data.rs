//! Datasets of nominal observations, their level encodings, and the
//! product-Multinomial probability model assumed to have generated them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do with a row that contains a missing-value marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    DropRow,
    /// Keep the marker as an ordinary level.
    AsLevel,
}

/// How level codes `1..=ℓ` are assigned to the raw labels of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LevelOrder {
    #[default]
    FirstAppearance,
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub delimiter: u8,
    pub has_header: bool,
    pub missing_markers: Vec<String>,
    pub missing: MissingPolicy,
    pub level_order: LevelOrder,
    /// Columns removed before encoding, by name.
    pub drop_columns: Vec<String>,
    /// Strip surrounding whitespace from every field. Off by default: labels
    /// are matched exactly as written.
    pub trim: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            missing_markers: vec!["?".to_string(), String::new()],
            missing: MissingPolicy::DropRow,
            level_order: LevelOrder::FirstAppearance,
            drop_columns: Vec::new(),
            trim: false,
        }
    }
}

/// An `n × p` matrix of 1-based level codes with per-variable vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    codes: Vec<u32>,
    variable_names: Vec<String>,
    level_labels: Vec<Vec<String>>,
    dropped_rows: usize,
}

impl Dataset {
    /// Builds a dataset from raw string records. `header` supplies the
    /// variable names; without one, columns are named `V1..Vp`.
    pub fn from_records(
        header: Option<Vec<String>>,
        records: Vec<Vec<String>>,
        opts: &IngestOptions,
    ) -> Result<Self> {
        let width = match (&header, records.first()) {
            (Some(h), _) => h.len(),
            (None, Some(r)) => r.len(),
            (None, None) => return Err(Error::EmptyDataset { dropped: 0 }),
        };
        if width == 0 {
            return Err(Error::Ingestion("table has no columns".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if r.len() != width {
                return Err(Error::Ingestion(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    r.len(),
                    width
                )));
            }
        }
        let names: Vec<String> = header.unwrap_or_else(|| (1..=width).map(|j| format!("V{j}")).collect());

        let mut keep = Vec::with_capacity(width);
        for drop in &opts.drop_columns {
            if !names.iter().any(|n| n == drop) {
                return Err(Error::Ingestion(format!("cannot drop unknown column {drop:?}")));
            }
        }
        for (j, name) in names.iter().enumerate() {
            if !opts.drop_columns.iter().any(|d| d == name) {
                keep.push(j);
            }
        }
        if keep.is_empty() {
            return Err(Error::Ingestion("every column was dropped".into()));
        }
        let variable_names: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
        let mut seen = HashMap::new();
        for name in &variable_names {
            if seen.insert(name.as_str(), ()).is_some() {
                return Err(Error::Ingestion(format!("duplicate variable name {name:?}")));
            }
        }

        let is_missing = |s: &str| opts.missing_markers.iter().any(|m| m == s);
        let mut kept_rows: Vec<Vec<&str>> = Vec::with_capacity(records.len());
        let mut dropped = 0;
        for r in &records {
            let row: Vec<&str> = keep
                .iter()
                .map(|&j| if opts.trim { r[j].trim() } else { r[j].as_str() })
                .collect();
            if opts.missing == MissingPolicy::DropRow && row.iter().any(|s| is_missing(s)) {
                dropped += 1;
                continue;
            }
            kept_rows.push(row);
        }
        if kept_rows.is_empty() {
            return Err(Error::EmptyDataset { dropped });
        }

        let p = keep.len();
        let n = kept_rows.len();
        let mut level_labels = Vec::with_capacity(p);
        let mut lookups: Vec<HashMap<&str, u32>> = Vec::with_capacity(p);
        for j in 0..p {
            let mut labels: Vec<&str> = Vec::new();
            let mut index: HashMap<&str, u32> = HashMap::new();
            for row in &kept_rows {
                if !index.contains_key(row[j]) {
                    index.insert(row[j], 0);
                    labels.push(row[j]);
                }
            }
            if opts.level_order == LevelOrder::Lexicographic {
                labels.sort_unstable();
            }
            for (code, l) in labels.iter().enumerate() {
                index.insert(l, code as u32 + 1);
            }
            level_labels.push(labels.iter().map(|s| s.to_string()).collect::<Vec<_>>());
            lookups.push(index);
        }
        let mut codes = Vec::with_capacity(n * p);
        for row in &kept_rows {
            for (j, s) in row.iter().enumerate() {
                codes.push(lookups[j][s]);
            }
        }
        Ok(Self {
            n,
            p,
            codes,
            variable_names,
            level_labels,
            dropped_rows: dropped,
        })
    }

    pub fn read_csv<R: Read>(reader: R, opts: &IngestOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(opts.delimiter)
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        let header = if opts.has_header {
            if records.is_empty() {
                return Err(Error::Ingestion("missing header row".into()));
            }
            let h = records.remove(0);
            Some(if opts.trim {
                h.into_iter().map(|s| s.trim().to_string()).collect()
            } else {
                h
            })
        } else {
            None
        };
        Self::from_records(header, records, opts)
    }

    pub fn from_path(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), opts)
    }

    /// Builds a dataset directly from level codes; labels are the codes
    /// themselves and variables are named `V1..Vp`.
    pub fn from_codes(rows: &[Vec<u32>], level_counts: &[usize]) -> Result<Self> {
        let p = level_counts.len();
        if rows.is_empty() {
            return Err(Error::EmptyDataset { dropped: 0 });
        }
        if p == 0 {
            return Err(Error::Ingestion("table has no columns".into()));
        }
        let mut codes = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Ingestion(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    row.len(),
                    p
                )));
            }
            for (j, &c) in row.iter().enumerate() {
                if c == 0 || c as usize > level_counts[j] {
                    return Err(Error::Domain(format!(
                        "code {c} of variable {j} outside 1..={}",
                        level_counts[j]
                    )));
                }
                codes.push(c);
            }
        }
        if level_counts.contains(&0) {
            return Err(Error::Domain("every variable needs at least one level".into()));
        }
        Ok(Self {
            n: rows.len(),
            p,
            codes,
            variable_names: (1..=p).map(|j| format!("V{j}")).collect(),
            level_labels: level_counts
                .iter()
                .map(|&l| (1..=l).map(|c| c.to_string()).collect())
                .collect(),
            dropped_rows: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.codes[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.codes.chunks_exact(self.p)
    }

    pub fn code(&self, i: usize, j: usize) -> u32 {
        self.codes[i * self.p + j]
    }

    pub fn level_count(&self, j: usize) -> usize {
        self.level_labels[j].len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.level_labels.iter().map(Vec::len).collect()
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variable_names.iter().position(|v| v == name)
    }

    pub fn level_labels(&self, j: usize) -> &[String] {
        &self.level_labels[j]
    }

    pub fn label(&self, j: usize, code: u32) -> &str {
        &self.level_labels[j][code as usize - 1]
    }

    /// Rows removed by the missing-value policy during ingestion.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// Per-level frequencies of variable `j`.
    pub fn column_counts(&self, j: usize) -> Vec<u64> {
        let mut counts = vec![0u64; self.level_count(j)];
        for row in self.rows() {
            counts[row[j] as usize - 1] += 1;
        }
        counts
    }

    /// Registers a level that does not occur in the data and returns its code.
    pub fn add_level(&mut self, j: usize, label: &str) -> u32 {
        if let Some(pos) = self.level_labels[j].iter().position(|l| l == label) {
            return pos as u32 + 1;
        }
        self.level_labels[j].push(label.to_string());
        self.level_labels[j].len() as u32
    }

    pub fn decode_row(&self, i: usize) -> Vec<&str> {
        self.row(i)
            .iter()
            .enumerate()
            .map(|(j, &c)| self.label(j, c))
            .collect()
    }

    /// Writes the decoded table (with a header row) as CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.variable_names)?;
        for i in 0..self.n {
            w.write_record(self.decode_row(i))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A set of `(variable, level code)` pairs over distinct variables, kept in
/// canonical order (strictly increasing variable index).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Itemset {
    entries: Vec<(usize, u32)>,
}

impl Itemset {
    pub fn new(mut entries: Vec<(usize, u32)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("an itemset needs at least one entry".into()));
        }
        entries.sort_unstable();
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain("itemset repeats a variable".into()));
        }
        if entries.iter().any(|&(_, c)| c == 0) {
            return Err(Error::Domain("level codes start at 1".into()));
        }
        Ok(Self { entries })
    }

    /// The cell of the table over `subset` (sorted) that row `row` falls in.
    pub fn from_row(subset: &[usize], row: &[u32]) -> Self {
        Self {
            entries: subset.iter().map(|&j| (j, row[j])).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(j, _)| j)
    }

    pub fn contained_in(&self, row: &[u32]) -> bool {
        self.entries.iter().all(|&(j, c)| row[j] == c)
    }

    /// True when every entry of `self` is also an entry of `other`.
    pub fn is_subset_of(&self, other: &Itemset) -> bool {
        let mut it = other.entries.iter();
        self.entries.iter().all(|e| it.any(|o| o == e))
    }

    /// Canonical order used for reproducible term ordering: by length, then
    /// lexicographically by entries.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.entries.cmp(&other.entries))
    }

    pub fn display<'a>(&'a self, ds: &'a Dataset) -> impl fmt::Display + 'a {
        DisplayItemset { set: self, ds }
    }
}

struct DisplayItemset<'a> {
    set: &'a Itemset,
    ds: &'a Dataset,
}

impl fmt::Display for DisplayItemset<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, &(j, c)) in self.set.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{}={}", self.ds.variable_names[j], self.ds.label(j, c))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSource {
    Empirical,
    UserSupplied,
}

/// Per-variable level probabilities; cells of any marginal table get the
/// product of their factors (independence).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityModel {
    pi: Vec<Vec<f64>>,
    source: ModelSource,
}

impl ProbabilityModel {
    /// Observed level proportions.
    pub fn empirical(ds: &Dataset) -> Self {
        let n = ds.n() as f64;
        let pi = (0..ds.p())
            .map(|j| ds.column_counts(j).into_iter().map(|c| c as f64 / n).collect())
            .collect();
        Self {
            pi,
            source: ModelSource::Empirical,
        }
    }

    /// User-supplied vectors. Each must be non-negative and sum to one within
    /// `1e-9`; vectors are renormalised so sums hold to rounding error.
    pub fn from_vectors(pi: Vec<Vec<f64>>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::Domain("probability model needs at least one variable".into()));
        }
        let mut out = Vec::with_capacity(pi.len());
        for (j, v) in pi.into_iter().enumerate() {
            if v.is_empty() {
                return Err(Error::Domain(format!("variable {j} has no levels")));
            }
            if v.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::Domain(format!("variable {j} has a probability outside [0, 1]")));
            }
            let total: f64 = v.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "probabilities of variable {j} sum to {total}, not 1"
                )));
            }
            out.push(v.into_iter().map(|x| x / total).collect());
        }
        Ok(Self {
            pi: out,
            source: ModelSource::UserSupplied,
        })
    }

    /// Overrides the empirical vectors of the named variables with labelled
    /// probabilities. Labels absent from the data are added to the dataset's
    /// vocabulary as unobserved levels; every observed level of an overridden
    /// variable must be listed.
    pub fn with_overrides(
        ds: &mut Dataset,
        overrides: &BTreeMap<String, BTreeMap<String, f64>>,
    ) -> Result<Self> {
        let mut model = Self::empirical(ds);
        if overrides.is_empty() {
            return Ok(model);
        }
        for (name, levels) in overrides {
            let j = ds
                .variable_index(name)
                .ok_or_else(|| Error::Domain(format!("unknown variable {name:?} in probabilities")))?;
            for label in levels.keys() {
                ds.add_level(j, label);
            }
            let mut v = vec![f64::NAN; ds.level_count(j)];
            for (label, &prob) in levels {
                let code = ds.add_level(j, label);
                v[code as usize - 1] = prob;
            }
            if let Some(pos) = v.iter().position(|x| x.is_nan()) {
                return Err(Error::Domain(format!(
                    "level {:?} of variable {name:?} has no probability",
                    ds.level_labels(j)[pos]
                )));
            }
            model.pi[j] = v;
        }
        let mut model = Self::from_vectors(model.pi)?;
        model.source = ModelSource::UserSupplied;
        Ok(model)
    }

    pub fn source(&self) -> ModelSource {
        self.source
    }

    pub fn p(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self, j: usize) -> &[f64] {
        &self.pi[j]
    }

    pub fn probability(&self, j: usize, code: u32) -> f64 {
        self.pi[j][code as usize - 1]
    }

    pub fn max_probability(&self, j: usize) -> f64 {
        self.pi[j].iter().copied().fold(0.0, f64::max)
    }

    pub fn min_probability(&self, j: usize) -> f64 {
        self.pi[j].iter().copied().fold(1.0, f64::min)
    }

    /// Checks that the model covers every variable and level of `ds`.
    pub fn check_compatible(&self, ds: &Dataset) -> Result<()> {
        if self.p() != ds.p() {
            return Err(Error::Domain(format!(
                "model has {} variables, dataset has {}",
                self.p(),
                ds.p()
            )));
        }
        for j in 0..ds.p() {
            if self.pi[j].len() != ds.level_count(j) {
                return Err(Error::Domain(format!(
                    "variable {j}: model has {} levels, dataset has {}",
                    self.pi[j].len(),
                    ds.level_count(j)
                )));
            }
        }
        Ok(())
    }

    /// Product of the level probabilities of the itemset's entries.
    pub fn cell_probability(&self, d: &Itemset) -> Result<f64> {
        let mut prob = 1.0;
        for &(j, c) in d.entries() {
            let v = self
                .pi
                .get(j)
                .ok_or_else(|| Error::Domain(format!("variable {j} not in model")))?;
            let x = v.get(c as usize - 1).ok_or_else(|| {
                Error::Domain(format!("level {c} of variable {j} outside 1..={}", v.len()))
            })?;
            prob *= x;
        }
        Ok(prob)
    }

    /// All cell probabilities of the table over `subset`, in Kronecker order
    /// (last variable varying fastest).
    pub fn kronecker(&self, subset: &[usize]) -> Vec<f64> {
        let mut out = vec![1.0];
        for &j in subset {
            let v = &self.pi[j];
            let mut next = Vec::with_capacity(out.len() * v.len());
            for &a in &out {
                next.extend(v.iter().map(|&b| a * b));
            }
            out = next;
        }
        out
    }
}

/// Free-function form of [`ProbabilityModel::cell_probability`].
pub fn cell_probability(model: &ProbabilityModel, d: &Itemset) -> Result<f64> {
    model.cell_probability(d)
}
