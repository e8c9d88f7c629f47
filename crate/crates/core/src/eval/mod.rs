//! Label taxonomy, cross-validation protocol and evaluation metrics.

pub mod cohort;
pub mod crossval;
pub mod folds;
pub mod manifest;
pub mod metrics;
pub mod phase;
pub mod svg;
pub mod taxonomy;

pub use cohort::{cohort_csv, cohort_report, CohortRow, COHORT_COLUMNS, COHORT_HEADERS};
pub use crossval::{pooled_metrics, run_crossval, CrossvalResult, FoldOutcome, PooledMetrics};
pub use folds::{make_folds, manifest_folds, FoldAssignment, FoldOptions, Split};
pub use manifest::{DatasetManifest, ManifestRow};
pub use metrics::{macro_f1, micro_accuracy, normalized_confusion, qwk, ConfusionMatrix};
pub use phase::{qwk_by_phase, MouseSeries, Phase, PhaseTable, SeriesPoint};
pub use svg::confusion_svg;
pub use taxonomy::{collapse_to_3, Condition, PainLabel, ThreeClass, Timepoint, N_CLASSES};
