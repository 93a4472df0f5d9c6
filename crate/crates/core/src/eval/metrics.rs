use crate::episode::{SceneFrame, TactileFrame, SCENE_CHANNELS};
use crate::error::{Error, Result};

/// PSNR reported for identical frames.
pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_shapes(pred: &SceneFrame, gt: &SceneFrame) -> Result<()> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::Contract(format!(
            "frame shapes differ: {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    Ok(())
}

/// Mean absolute difference over all pixels and channels of one frame.
pub fn mae_frame(pred: &SceneFrame, gt: &SceneFrame) -> Result<f64> {
    check_shapes(pred, gt)?;
    let sum: f64 = pred
        .pixels()
        .iter()
        .zip(gt.pixels())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Mean absolute difference over every pixel of every frame.
pub fn mae(pred: &[SceneFrame], gt: &[SceneFrame]) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::Contract(format!(
            "sequence lengths differ or are empty: {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, g) in pred.iter().zip(gt) {
        sum += mae_frame(p, g)? * p.len() as f64;
        count += p.len();
    }
    Ok(sum / count as f64)
}

pub fn mse_frame(pred: &SceneFrame, gt: &SceneFrame) -> Result<f64> {
    check_shapes(pred, gt)?;
    let sum: f64 = pred
        .pixels()
        .iter()
        .zip(gt.pixels())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Peak signal-to-noise ratio with a peak value of 1, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr(pred: &SceneFrame, gt: &SceneFrame) -> Result<f64> {
    let mse = mse_frame(pred, gt)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP_DB))
}

pub fn gaussian_window_1d(size: usize, sigma: f64) -> Vec<f64> {
    let centre = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - centre;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn channel(frame: &SceneFrame, c: usize) -> Vec<f64> {
    frame.pixels().iter().skip(c).step_by(SCENE_CHANNELS).map(|&v| v as f64).collect()
}

fn ssim_terms(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64) -> f64 {
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Valid-mode separable filter of a `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..n).map(|i| k[i] * plane[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|i| k[i] * rows[(r + i) * ow + c]).sum();
        }
    }
    out
}

fn ssim_channel(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let vx = x.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n;
        let vy = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / n;
        let cxy = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
        return ssim_terms(mx, my, vx, vy, cxy);
    }
    let k = gaussian_window_1d(SSIM_WINDOW, SSIM_SIGMA);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, h, w, &k);
    let my = filter_valid(y, h, w, &k);
    let sxx = filter_valid(&xx, h, w, &k);
    let syy = filter_valid(&yy, h, w, &k);
    let sxy = filter_valid(&xy, h, w, &k);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (a, b) = (mx[i], my[i]);
            ssim_terms(a, b, sxx[i] - a * a, syy[i] - b * b, sxy[i] - a * b)
        })
        .sum();
    total / mx.len() as f64
}

/// Structural similarity: Gaussian-weighted local statistics over every
/// valid window position, averaged per channel and then over channels.
/// Frames smaller than the window are treated as one uniform window.
pub fn ssim(pred: &SceneFrame, gt: &SceneFrame) -> Result<f64> {
    check_shapes(pred, gt)?;
    let (h, w) = (pred.height(), pred.width());
    let total: f64 = (0..SCENE_CHANNELS)
        .map(|c| ssim_channel(&channel(pred, c), &channel(gt, c), h, w))
        .sum();
    Ok(total / SCENE_CHANNELS as f64)
}

/// Mean absolute difference over the 48 taxel values.
pub fn tactile_mae(pred: &TactileFrame, gt: &TactileFrame) -> f64 {
    let sum: f64 = pred
        .taxels
        .iter()
        .zip(gt.taxels.iter())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    sum / pred.taxels.len() as f64
}
