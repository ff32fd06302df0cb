//! Evaluation: per-image ash presence, the confusion-matrix metric suite,
//! training curves and checkpoint comparison grids.

mod ash;
mod compare;
mod confusion;
mod masks;
mod plots;

pub use ash::{ash_presence, dark_fraction, luminance, AshThresholds};
pub use compare::{compare_checkpoints, Comparison, COMPARE_DIR, INDEX_FILE};
pub use confusion::{compute_confusion, compute_metrics, ConfusionMatrix, MetricReport};
pub use masks::{
    evaluate_masks, read_truth_csv, write_evaluation, ImageOutcome, MaskEvaluation, CONFUSION_FILE,
};
pub use plots::{load_history, plot_history, History, PlotReport, PLOTS_DIR, SERIES_FILE};
