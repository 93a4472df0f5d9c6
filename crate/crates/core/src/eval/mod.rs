//! Frame metrics, multi-seed reports, the edge-case and tactile analyses,
//! and comparison tables and plots.

mod compare;
mod edge;
mod evaluate;
mod metrics;
mod report;
mod stats;
mod tactile;

pub use compare::{compare, CompareOutput, SUMMARY_FILE, TABLE_FILE};
pub use edge::{
    centroid, centroid_error, edge_case_analysis, frame_diagonal, overlay_mask, segment_object, write_bundle,
    EdgeCaseBundle, EdgeOptions, EdgeTrial, OVERLAY_RGB,
};
pub use evaluate::{
    common_kind, eval_windows, evaluate, evaluate_models, load_models, predict_windows, EvalOptions, LoadedModel,
    WindowPrediction,
};
pub use metrics::{
    gaussian_window_1d, mae, mae_frame, mse_frame, psnr, ssim, tactile_mae, PSNR_CAP_DB, SSIM_K1, SSIM_K2,
    SSIM_SIGMA, SSIM_WINDOW,
};
pub use report::{Metric, MetricReport, MetricRow, ReportMeta, SeedAccumulator, SeedScores};
pub use stats::{mean, summarize, variance, welch_greater, Summary};
pub use tactile::{
    central_normal_taxels, contact_onsets, read_traces, tactile_eval, write_traces, Onset, TactileEvaluation,
    TraceRow, ONSET_NOISE_MULTIPLE,
};
