use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::evaluate::{common_kind, eval_windows, evaluate_models, predict_windows, EvalOptions, LoadedModel};
use super::metrics::tactile_mae;
use super::report::MetricReport;
use crate::episode::{normalize_tactile, Episode, TactileFrame, TAXEL_COLS, TAXEL_ROWS};
use crate::error::{Error, Result};

/// Normal-force channel of the four central taxels.
pub fn central_normal_taxels() -> Vec<usize> {
    let mut out = Vec::new();
    for r in 1..TAXEL_ROWS - 1 {
        for c in 1..TAXEL_COLS - 1 {
            out.push(TactileFrame::index(r, c, 0));
        }
    }
    out
}

/// One taxel value of one predicted step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub model: String,
    pub seed: u64,
    pub episode: usize,
    /// Frame index within the episode.
    pub frame: usize,
    pub step: usize,
    pub taxel: usize,
    pub truth: f32,
    pub predicted: f32,
    /// Normalized no-contact value of this taxel.
    pub rest: f32,
    /// Level above which the taxel counts as in contact.
    pub threshold: f32,
}

pub struct TactileEvaluation {
    pub report: MetricReport,
    /// Per-step tactile MAE of always predicting the rest frame.
    pub rest_baseline: Vec<f64>,
    pub traces: Vec<TraceRow>,
}

/// Contact threshold in units of the sensor's rest noise.
pub const ONSET_NOISE_MULTIPLE: f32 = 5.0;

/// Tactile-prediction evaluation: the full metric report, the constant rest
/// baseline, and traces of `taxels` over the first window of every episode.
pub fn tactile_eval(
    models: &[LoadedModel],
    episodes: &[Episode],
    rest: &TactileFrame,
    rest_noise_sigma: f32,
    split: &str,
    opts: &EvalOptions,
    taxels: &[usize],
) -> Result<TactileEvaluation> {
    let (kind, context) = common_kind(models)?;
    if !kind.predicts_tactile() {
        return Err(Error::Contract(format!("{kind} does not predict tactile frames")));
    }
    let report = evaluate_models(models, episodes, rest, split, opts)?;

    let first = &models[0];
    let norm = first.norm();
    let rest_n = normalize_tactile(rest, &norm);
    let windows = eval_windows(episodes, first, rest, opts)?;
    let mut rest_baseline = vec![0.0; opts.horizon];
    for w in &windows {
        for (k, truth) in w.target_tactile.iter().enumerate() {
            rest_baseline[k] += tactile_mae(&rest_n, truth);
        }
    }
    rest_baseline.iter_mut().for_each(|v| *v /= windows.len() as f64);

    let mut traces = Vec::new();
    for m in models {
        let norm = m.norm();
        let rest_n = normalize_tactile(rest, &norm);
        let first_windows: Vec<_> = episodes
            .iter()
            .map(|ep| {
                let w = EvalOptions {
                    window_stride: usize::MAX,
                    ..opts.clone()
                };
                eval_windows(std::slice::from_ref(ep), m, rest, &w).map(|mut v| v.remove(0))
            })
            .collect::<Result<_>>()?;
        let preds = predict_windows(&m.model, &first_windows, opts.batch_size, opts.noise_seed)?;
        for (e, (w, p)) in first_windows.iter().zip(&preds).enumerate() {
            let pt = p.tactile.as_ref().expect("tactile-predicting kind");
            for (k, (truth, predicted)) in w.target_tactile.iter().zip(pt).take(opts.horizon).enumerate() {
                for &taxel in taxels {
                    let range = norm.max[taxel] - norm.min[taxel];
                    let sigma = if range > 0.0 { rest_noise_sigma / range } else { 0.0 };
                    traces.push(TraceRow {
                        model: report.model.clone(),
                        seed: m.info.seed,
                        episode: e,
                        frame: context + k,
                        step: k + 1,
                        taxel,
                        truth: truth.taxels[taxel],
                        predicted: predicted.taxels[taxel],
                        rest: rest_n.taxels[taxel],
                        threshold: rest_n.taxels[taxel] + ONSET_NOISE_MULTIPLE * sigma,
                    });
                }
            }
        }
    }
    Ok(TactileEvaluation {
        report,
        rest_baseline,
        traces,
    })
}

pub fn write_traces(rows: &[TraceRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// First step at which a trace rises above its threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Onset {
    pub seed: u64,
    pub episode: usize,
    pub taxel: usize,
    pub truth: Option<usize>,
    pub predicted: Option<usize>,
}

impl Onset {
    /// Whether both onsets exist and differ by at most `tolerance` steps.
    pub fn within(&self, tolerance: usize) -> bool {
        match (self.truth, self.predicted) {
            (Some(a), Some(b)) => a.abs_diff(b) <= tolerance,
            _ => false,
        }
    }
}

/// Contact onsets per (seed, episode, taxel) trace, in trace order.
pub fn contact_onsets(rows: &[TraceRow]) -> Vec<Onset> {
    let mut out: Vec<Onset> = Vec::new();
    for r in rows {
        let pos = out
            .iter()
            .position(|o| o.seed == r.seed && o.episode == r.episode && o.taxel == r.taxel);
        let o = match pos {
            Some(i) => &mut out[i],
            None => {
                out.push(Onset {
                    seed: r.seed,
                    episode: r.episode,
                    taxel: r.taxel,
                    truth: None,
                    predicted: None,
                });
                out.last_mut().expect("just pushed")
            }
        };
        if o.truth.is_none() && r.truth > r.threshold {
            o.truth = Some(r.step);
        }
        if o.predicted.is_none() && r.predicted > r.threshold {
            o.predicted = Some(r.step);
        }
    }
    out
}
