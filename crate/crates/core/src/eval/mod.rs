//! Segmentation metrics, the random-forest baseline and the TP/FN diagnostic.

pub mod diagnostic;
pub mod forest;
pub mod metrics;
pub mod report;

pub use diagnostic::{dataset_tp_fn_series, l2_distance, tp_fn_mean_series, TpFnSeries};
pub use forest::{pixel_feature_len, rf_predict, rf_train, RfHyper, RfModel};
pub use metrics::{compute_metrics, confusion_counts, ConfusionCounts, Metrics};
pub use report::{
    evaluate_scenario, patch_counts, predict_dataset, predict_with, score_masks, summarize, Averaging, EvalEntry,
    EvalReport, Predictor,
};
