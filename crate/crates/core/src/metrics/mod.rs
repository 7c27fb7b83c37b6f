//! Effectiveness labels, correlation measures, split generation and the
//! paired t-test.

mod correlation;
mod effectiveness;
mod splits;
mod ttest;

pub use correlation::{kendall_tau_b, or_zero_if_degenerate, pearson};
pub use effectiveness::{average_precision, precision_at_k, LabelKind, QueryLabel};
pub use splits::{make_splits, Split, SplitPlan, DEFAULT_SPLITS};
pub use ttest::{paired_t_test, TTest};
