use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::evaluate::{eval_windows, predict_windows, EvalOptions, LoadedModel};
use super::stats::mean;
use crate::episode::{save_frame_png, Episode, FrictionLayout, SceneFrame, TactileFrame, SCENE_CHANNELS};
use crate::error::{Error, Result};
use crate::pushsim::{object_mask, render_labels, rgb, PixelLabel, Trajectory, BACKGROUND_RGB, OBJECT_RGB, PUSHER_RGB};

/// Highlight colour for the true object location.
pub const OVERLAY_RGB: [f32; 3] = [1.0, 0.9, 0.0];
const OVERLAY_ALPHA: f32 = 0.5;

/// Pixels whose nearest palette colour is the object colour.
pub fn segment_object(frame: &SceneFrame) -> Vec<bool> {
    let palette = [rgb(BACKGROUND_RGB), rgb(OBJECT_RGB), rgb(PUSHER_RGB)];
    frame
        .pixels()
        .chunks(SCENE_CHANNELS)
        .map(|px| {
            let dist = |c: &[f32; 3]| (0..3).map(|i| (px[i] - c[i]).powi(2)).sum::<f32>();
            let nearest = (0..3)
                .min_by(|&a, &b| dist(&palette[a]).total_cmp(&dist(&palette[b])))
                .expect("non-empty palette");
            nearest == PixelLabel::Object as usize
        })
        .collect()
}

/// Mean `(row, col)` of the set pixels.
pub fn centroid(mask: &[bool], width: usize) -> Option<(f64, f64)> {
    let (mut r, mut c, mut n) = (0.0, 0.0, 0usize);
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        r += (i / width) as f64;
        c += (i % width) as f64;
        n += 1;
    }
    (n > 0).then(|| (r / n as f64, c / n as f64))
}

pub fn frame_diagonal(frame: &SceneFrame) -> f64 {
    ((frame.height() * frame.height() + frame.width() * frame.width()) as f64).sqrt()
}

/// Distance in pixels between the segmented object in `pred` and the visible
/// object pixels in `labels`; the frame diagonal when either is empty.
pub fn centroid_error(pred: &SceneFrame, labels: &[PixelLabel]) -> f64 {
    let w = pred.width();
    let truth: Vec<bool> = labels.iter().map(|&l| l == PixelLabel::Object).collect();
    match (centroid(&segment_object(pred), w), centroid(&truth, w)) {
        (Some(a), Some(b)) => ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
        _ => frame_diagonal(pred),
    }
}

/// Blends [`OVERLAY_RGB`] over the masked pixels.
pub fn overlay_mask(frame: &SceneFrame, mask: &[bool]) -> SceneFrame {
    let mut px = frame.pixels().to_vec();
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        for c in 0..SCENE_CHANNELS {
            let v = &mut px[i * SCENE_CHANNELS + c];
            *v = (1.0 - OVERLAY_ALPHA) * *v + OVERLAY_ALPHA * OVERLAY_RGB[c];
        }
    }
    SceneFrame::from_clamped(frame.height(), frame.width(), px).expect("same shape as the source frame")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeOptions {
    /// Steps ahead of the last context frame.
    pub step: usize,
    pub window_stride: usize,
    pub batch_size: usize,
    pub noise_seed: u64,
}

impl Default for EdgeOptions {
    fn default() -> Self {
        Self {
            step: 5,
            window_stride: 1,
            batch_size: 16,
            noise_seed: 0,
        }
    }
}

/// One model on one trial.
#[derive(Clone, Debug)]
pub struct EdgeTrial {
    pub model: String,
    pub layout: FrictionLayout,
    /// Start of the window shown in the images: the first frame in contact.
    pub window_start: usize,
    /// Episode frame shown, `window_start + context + step - 1`.
    pub frame: usize,
    /// Prediction of the first checkpoint.
    pub predicted: SceneFrame,
    pub truth: SceneFrame,
    /// `predicted` with the true object footprint highlighted.
    pub overlay: SceneFrame,
    /// Per checkpoint: `(seed, centroid error averaged over all windows)`.
    pub seed_errors: Vec<(u64, f64)>,
}

impl EdgeTrial {
    pub fn centroid_error(&self) -> f64 {
        mean(&self.seed_errors.iter().map(|e| e.1).collect::<Vec<_>>())
    }
}

#[derive(Clone, Debug)]
pub struct EdgeCaseBundle {
    pub step: usize,
    pub trials: Vec<EdgeTrial>,
}

impl EdgeCaseBundle {
    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.trials {
            if !out.contains(&t.model) {
                out.push(t.model.clone());
            }
        }
        out
    }

    /// Centroid error of `model` averaged over trials and seeds.
    pub fn mean_centroid_error(&self, model: &str) -> Option<f64> {
        let errs: Vec<f64> = self.trials.iter().filter(|t| t.model == model).map(EdgeTrial::centroid_error).collect();
        (!errs.is_empty()).then(|| mean(&errs))
    }

    /// Per-seed centroid error of `model` averaged over trials.
    pub fn seed_centroid_errors(&self, model: &str) -> Vec<(u64, f64)> {
        let trials: Vec<&EdgeTrial> = self.trials.iter().filter(|t| t.model == model).collect();
        let Some(first) = trials.first() else {
            return Vec::new();
        };
        (0..first.seed_errors.len())
            .map(|k| {
                let v: Vec<f64> = trials.iter().map(|t| t.seed_errors[k].1).collect();
                (first.seed_errors[k].0, mean(&v))
            })
            .collect()
    }
}

/// Predicts the edge-case suite with every model and scores object location
/// `step` frames ahead. Errors are averaged over all windows of a trial; the
/// images come from the window starting at the first contact frame.
pub fn edge_case_analysis(
    models: &[(String, Vec<LoadedModel>)],
    suite: &[(Episode, Trajectory)],
    rest: &TactileFrame,
    opts: &EdgeOptions,
) -> Result<EdgeCaseBundle> {
    if opts.step == 0 {
        return Err(Error::Config("edge-case step must be positive".into()));
    }
    let mut trials = Vec::new();
    for (label, ckpts) in models {
        if ckpts.is_empty() {
            return Err(Error::Config(format!("model {label} has no checkpoints")));
        }
        for (ep, traj) in suite {
            let eval_opts = EvalOptions {
                horizon: opts.step,
                window_stride: opts.window_stride,
                batch_size: opts.batch_size,
                noise_seed: opts.noise_seed,
                ..EvalOptions::default()
            };
            let mut seed_errors = Vec::new();
            let mut shown = None;
            for ckpt in ckpts {
                let context = ckpt.model.config().context;
                let windows = eval_windows(std::slice::from_ref(ep), ckpt, rest, &eval_opts)?;
                let preds = predict_windows(&ckpt.model, &windows, opts.batch_size, opts.noise_seed)?;
                let offset = context + opts.step - 1;
                let errs: Vec<f64> = preds
                    .iter()
                    .enumerate()
                    .map(|(w, p)| {
                        let f = w * opts.window_stride + offset;
                        centroid_error(&p.scene[opts.step - 1], &render_labels(&traj.objects[f], &traj.pushers[f]))
                    })
                    .collect();
                seed_errors.push((ckpt.info.seed, mean(&errs)));
                if shown.is_none() {
                    let onset = traj.contacts.iter().position(|c| c.in_contact).unwrap_or(0);
                    let start = onset.min(ep.len() - offset - 1);
                    let single = EvalOptions {
                        window_stride: 1,
                        ..eval_opts.clone()
                    };
                    let w = eval_windows(std::slice::from_ref(ep), ckpt, rest, &single)?.swap_remove(start);
                    let p = predict_windows(&ckpt.model, std::slice::from_ref(&w), 1, opts.noise_seed)?;
                    shown = Some((start, p[0].scene[opts.step - 1].clone()));
                }
            }
            let (start, predicted) = shown.expect("at least one checkpoint");
            let frame = start + ckpts[0].model.config().context + opts.step - 1;
            let mask = object_mask(&traj.objects[frame]);
            trials.push(EdgeTrial {
                model: label.clone(),
                layout: ep.meta.friction_layout,
                window_start: start,
                frame,
                overlay: overlay_mask(&predicted, &mask),
                predicted,
                truth: ep.scene[frame].clone(),
                seed_errors,
            });
        }
    }
    Ok(EdgeCaseBundle { step: opts.step, trials })
}

#[derive(Serialize)]
struct ErrorRow<'a> {
    model: &'a str,
    layout: &'a str,
    seed: u64,
    centroid_error: f64,
}

/// Writes predicted, true and overlay PNGs per trial plus
/// `centroid_errors.csv`.
pub fn write_bundle(bundle: &EdgeCaseBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut csv = csv::Writer::from_path(dir.join("centroid_errors.csv"))?;
    for t in &bundle.trials {
        let stem = format!("{}_{}", t.model, t.layout.name());
        save_frame_png(&t.predicted, &dir.join(format!("{stem}_predicted.png")))?;
        save_frame_png(&t.truth, &dir.join(format!("{stem}_truth.png")))?;
        save_frame_png(&t.overlay, &dir.join(format!("{stem}_overlay.png")))?;
        for &(seed, err) in &t.seed_errors {
            csv.serialize(ErrorRow {
                model: &t.model,
                layout: t.layout.name(),
                seed,
                centroid_error: err,
            })?;
        }
    }
    csv.flush().map_err(|e| Error::io(dir, e))
}
