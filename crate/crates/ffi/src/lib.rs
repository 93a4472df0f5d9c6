//! C ABI over the simulator, the frame metrics and model checkpoints.
//!
//! Every function returns a [`SpotsStatus`]. On failure the message is kept
//! per thread and can be read with [`spots_last_error_message`]. Handles are
//! opaque and must be released with their `_free` function.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access the function
//! documents: strings NUL-terminated, buffers at least `len` elements long,
//! handles obtained from this library and not yet freed. Null pointers are
//! reported as [`SpotsStatus::NullPointer`]; anything else is undefined
//! behaviour.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::str::FromStr;

use spotslab::episode::{load_episode, save_episode, Episode, FrictionLayout, SceneFrame, TactileFrame, SCENE_CHANNELS, TACTILE_DIM};
use spotslab::eval::{eval_windows, mae_frame, predict_windows, psnr, ssim, EvalOptions, LoadedModel};
use spotslab::pushsim::{edge_case_suite, generate_dataset, generate_random_episode, DatasetSpec, REST_VALUE};
use spotslab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpotsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Schema = 4,
    Config = 5,
    Contract = 6,
    Checkpoint = 7,
    BufferTooSmall = 8,
    Internal = 9,
    Panic = 10,
}

/// A loaded or generated episode.
pub struct SpotsEpisode {
    inner: Episode,
}

/// A model checkpoint ready for prediction.
pub struct SpotsModel {
    inner: LoadedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SpotsStatus {
    match e {
        Error::Io { .. } => SpotsStatus::Io,
        Error::Schema { .. } | Error::LengthMismatch { .. } | Error::Json(_) | Error::Csv(_) | Error::Image(_) => {
            SpotsStatus::Schema
        }
        Error::Config(_) | Error::Parity { .. } => SpotsStatus::Config,
        Error::Contract(_) => SpotsStatus::Contract,
        Error::Checkpoint(_) => SpotsStatus::Checkpoint,
        _ => SpotsStatus::Internal,
    }
}

struct Failure(SpotsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpotsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SpotsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SpotsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SpotsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SpotsStatus::InvalidArgument, msg.into())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Failure(
            SpotsStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn frame_arg(p: *const f32, height: usize, width: usize, what: &str) -> Result<SceneFrame, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let n = height * width * SCENE_CHANNELS;
    let px = std::slice::from_raw_parts(p, n).to_vec();
    SceneFrame::new(height, width, px).map_err(|e| invalid(format!("{what}: {e}")))
}

fn give<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the full message length in
/// bytes, excluding the terminator. Returns 0 when there is no error.
#[no_mangle]
pub unsafe extern "C" fn spots_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spots_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Simulates one push with a randomised set-up for `layout` (for example
/// `"corner_tl"`).
#[no_mangle]
pub unsafe extern "C" fn spots_episode_generate(layout: *const c_char, seed: u64, out: *mut *mut SpotsEpisode) -> SpotsStatus {
    guard(|| {
        let name = str_arg(layout, "layout")?;
        let layout = FrictionLayout::from_str(name).map_err(|e| invalid(e.to_string()))?;
        let (_, ep) = generate_random_episode(layout, seed)?;
        give(out, SpotsEpisode { inner: ep })
    })
}

/// Trial `index` (0..4) of the edge-case suite.
#[no_mangle]
pub unsafe extern "C" fn spots_episode_edge_case(index: u32, out: *mut *mut SpotsEpisode) -> SpotsStatus {
    guard(|| {
        let mut suite = edge_case_suite()?;
        if index as usize >= suite.len() {
            return Err(invalid(format!("edge case index {index} out of range 0..{}", suite.len())));
        }
        give(out, SpotsEpisode { inner: suite.swap_remove(index as usize) })
    })
}

#[no_mangle]
pub unsafe extern "C" fn spots_episode_load(path: *const c_char, out: *mut *mut SpotsEpisode) -> SpotsStatus {
    guard(|| {
        let ep = load_episode(&PathBuf::from(str_arg(path, "path")?))?;
        give(out, SpotsEpisode { inner: ep })
    })
}

#[no_mangle]
pub unsafe extern "C" fn spots_episode_save(episode: *const SpotsEpisode, path: *const c_char) -> SpotsStatus {
    guard(|| {
        let ep = episode.as_ref().ok_or_else(|| null("episode"))?;
        save_episode(&ep.inner, &PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spots_episode_len(episode: *const SpotsEpisode, out: *mut usize) -> SpotsStatus {
    guard(|| {
        let ep = episode.as_ref().ok_or_else(|| null("episode"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ep.inner.len();
        Ok(())
    })
}

/// Copies frame `index` as row-major `height x width x 3` floats in `[0, 1]`
/// and reports its size.
#[no_mangle]
pub unsafe extern "C" fn spots_episode_scene(
    episode: *const SpotsEpisode,
    index: usize,
    buf: *mut f32,
    len: usize,
    height: *mut usize,
    width: *mut usize,
) -> SpotsStatus {
    guard(|| {
        let ep = episode.as_ref().ok_or_else(|| null("episode"))?;
        let frame = ep
            .inner
            .scene
            .get(index)
            .ok_or_else(|| invalid(format!("frame {index} out of range 0..{}", ep.inner.len())))?;
        if let Some(h) = height.as_mut() {
            *h = frame.height();
        }
        if let Some(w) = width.as_mut() {
            *w = frame.width();
        }
        out_slice(buf, len, frame.len(), "buf")?.copy_from_slice(frame.pixels());
        Ok(())
    })
}

/// Copies the 48 raw taxel values of frame `index`, ordered row, column,
/// channel.
#[no_mangle]
pub unsafe extern "C" fn spots_episode_tactile(episode: *const SpotsEpisode, index: usize, buf: *mut f32, len: usize) -> SpotsStatus {
    guard(|| {
        let ep = episode.as_ref().ok_or_else(|| null("episode"))?;
        let frame = ep
            .inner
            .tactile
            .get(index)
            .ok_or_else(|| invalid(format!("frame {index} out of range 0..{}", ep.inner.len())))?;
        out_slice(buf, len, TACTILE_DIM, "buf")?.copy_from_slice(&frame.taxels);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spots_episode_free(episode: *mut SpotsEpisode) {
    if !episode.is_null() {
        drop(Box::from_raw(episode));
    }
}

/// Writes a dataset described by a JSON dataset spec under `root`.
#[no_mangle]
pub unsafe extern "C" fn spots_dataset_generate(spec_json: *const c_char, root: *const c_char) -> SpotsStatus {
    guard(|| {
        let spec: DatasetSpec = serde_json::from_str(str_arg(spec_json, "spec_json")?)
            .map_err(|e| Failure(SpotsStatus::Schema, format!("dataset spec: {e}")))?;
        generate_dataset(&spec, &PathBuf::from(str_arg(root, "root")?))?;
        Ok(())
    })
}

type FrameMetric = fn(&SceneFrame, &SceneFrame) -> spotslab::Result<f64>;

unsafe fn frame_metric(f: FrameMetric, pred: *const f32, truth: *const f32, height: usize, width: usize, out: *mut f64) -> SpotsStatus {
    guard(|| {
        let a = frame_arg(pred, height, width, "pred")?;
        let b = frame_arg(truth, height, width, "truth")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = f(&a, &b)?;
        Ok(())
    })
}

/// Mean absolute error of two `height x width x 3` frames.
#[no_mangle]
pub unsafe extern "C" fn spots_mae(pred: *const f32, truth: *const f32, height: usize, width: usize, out: *mut f64) -> SpotsStatus {
    frame_metric(mae_frame, pred, truth, height, width, out)
}

/// PSNR in dB with peak 1, capped at 100.
#[no_mangle]
pub unsafe extern "C" fn spots_psnr(pred: *const f32, truth: *const f32, height: usize, width: usize, out: *mut f64) -> SpotsStatus {
    frame_metric(psnr, pred, truth, height, width, out)
}

/// Gaussian-window SSIM averaged over channels.
#[no_mangle]
pub unsafe extern "C" fn spots_ssim(pred: *const f32, truth: *const f32, height: usize, width: usize, out: *mut f64) -> SpotsStatus {
    frame_metric(ssim, pred, truth, height, width, out)
}

#[no_mangle]
pub unsafe extern "C" fn spots_model_load(path: *const c_char, out: *mut *mut SpotsModel) -> SpotsStatus {
    guard(|| {
        let m = LoadedModel::load(&PathBuf::from(str_arg(path, "path")?))?;
        give(out, SpotsModel { inner: m })
    })
}

/// Copies the model kind name (for example `"SPOTS"`) into `buf`.
#[no_mangle]
pub unsafe extern "C" fn spots_model_kind(model: *const SpotsModel, buf: *mut c_char, len: usize) -> SpotsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let name = m.inner.model.kind().name().as_bytes();
        let dst = out_slice(buf, len, name.len() + 1, "buf")?;
        for (d, &s) in dst.iter_mut().zip(name) {
            *d = s as c_char;
        }
        dst[name.len()] = 0;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spots_model_parameter_count(model: *const SpotsModel, out: *mut usize) -> SpotsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = m.inner.model.count_parameters();
        Ok(())
    })
}

/// Predicts `horizon` frames of `episode` from the context that starts at
/// frame `start`, sampling latents from the prior with `noise_seed`. Writes
/// `horizon x height x width x 3` floats.
#[no_mangle]
pub unsafe extern "C" fn spots_model_predict(
    model: *const SpotsModel,
    episode: *const SpotsEpisode,
    start: usize,
    horizon: usize,
    noise_seed: u64,
    buf: *mut f32,
    len: usize,
) -> SpotsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let ep = episode.as_ref().ok_or_else(|| null("episode"))?;
        if horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        let opts = EvalOptions {
            horizon,
            window_stride: 1,
            ..EvalOptions::default()
        };
        let rest = TactileFrame::filled(REST_VALUE);
        let mut windows = eval_windows(std::slice::from_ref(&ep.inner), &m.inner, &rest, &opts)?;
        if start >= windows.len() {
            return Err(invalid(format!("start {start} leaves fewer than {horizon} frames to predict")));
        }
        let window = windows.swap_remove(start);
        let pred = predict_windows(&m.inner.model, std::slice::from_ref(&window), 1, noise_seed)?;
        let frames = &pred[0].scene;
        let per = frames[0].len();
        let dst = out_slice(buf, len, per * frames.len(), "buf")?;
        for (k, f) in frames.iter().enumerate() {
            dst[k * per..(k + 1) * per].copy_from_slice(f.pixels());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spots_model_free(model: *mut SpotsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
