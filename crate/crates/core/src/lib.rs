//! Nominal outlyingness scores for categorical data.
//!
//! Each itemset (a cell of some marginal contingency table) gets its own
//! support threshold from simultaneous Multinomial confidence intervals under
//! an independence model. Observations are scored by the itemsets they
//! contain that are unusually rare (or unusually common), found by a pruned
//! search over the itemset lattice.
//!
//! ```
//! use sono::{analyze, Config, Dataset, ProbabilityModel};
//!
//! let rows: Vec<Vec<u32>> = (0..40).map(|i| vec![1 + i % 2, 1 + i % 2]).collect();
//! let mut rows = rows;
//! rows.push(vec![1, 2]);
//! let ds = Dataset::from_codes(&rows, &[2, 2]).unwrap();
//! let model = ProbabilityModel::empirical(&ds);
//! let run = analyze(&ds, &model, &Config::default()).unwrap();
//! assert_eq!(run.report.scores.len(), 41);
//! ```

pub mod ci;
pub mod data;
pub mod detector;
pub mod error;
pub mod lattice;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod score;
pub mod threshold;

pub use ci::{
    edgeworth_sum_density, find_c, find_c_bounded, find_c_with, intervals, intervals_with, nu, nu_with,
    truncated_poisson_moments, CellSpec, NuEvaluator, NuMethod, Sidedness, SimCi, TruncatedPoissonMoments,
};
pub use data::{
    cell_probability, Dataset, IngestOptions, Itemset, LevelOrder, MissingPolicy, ModelSource, ProbabilityModel,
};
pub use detector::{analyze, Analysis, CRange, Config};
pub use error::{Error, Result};
pub use lattice::{
    count_support, search, search_frequent, search_infrequent, CounterSnapshot, FlagRecord, FlagSet,
    SearchCounters, SupportIndex,
};
pub use score::{contributions, depth, max_score_bound, report, score, ScoreReport};
pub use threshold::{
    sigma_for_subset, MaxlenDecision, MaxlenRule, Mode, ThresholdEngine, ThresholdTable,
};
