//! C ABI for the panotrack core.
//!
//! Every fallible call returns a [`PtStatus`]; on failure a message is kept
//! per thread and can be read with [`pt_last_error_message`]. Objects are
//! opaque handles released by their `_free` function. Strings returned to
//! the caller are owned by the caller and must be released with
//! [`pt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::Vector3;
use panotrack::association::{self, CostMatrix, CostMode, Embedding};
use panotrack::geometry::{self, Location, PanoramaRig};
use panotrack::io::{self, GroundTruthRecord, ReadError, TrackletRecord};
use panotrack::metrics::{self, EvalParams, LabeledPoint};
use panotrack::tracker::{AppearanceUpdate, TrackerConfig, TrackingPipeline};
use panotrack::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or a record that does not match its schema.
    Schema = 3,
    /// A parameter or configuration outside its valid range.
    InvalidArgument = 4,
    /// Evaluation had no ground truth left to score.
    EmptyGroundTruth = 5,
    /// A point behind the camera, an unknown view or a degenerate pose.
    Geometry = 6,
    /// Frames pushed out of order.
    FrameOrder = 7,
    Panic = 8,
}

/// A camera rig. Create with `pt_rig_from_json` or `pt_rig_quad`.
pub struct PtRig(PanoramaRig);

/// A streaming tracker bound to a copy of a rig.
pub struct PtTracker(TrackingPipeline);

/// Tracker settings. Obtain defaults from `pt_tracker_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PtTrackerConfig {
    /// A match is accepted only when its cost is strictly below this.
    pub epsilon: f64,
    /// Frames a track survives without a match.
    pub max_lifespan: u32,
    /// Cross-view duplicate merge radius in meters; 0 disables merging.
    pub merge_radius_m: f64,
    pub body_height_m: f64,
    /// Non-zero to associate on trajectory cost alone.
    pub trajectory_only: u8,
    /// Weight kept on a track's old appearance; negative keeps the latest.
    pub ema_beta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PtStatus, msg: impl Into<String>) -> PtStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> PtStatus {
    match e {
        Error::UnknownView(_)
        | Error::BehindCamera { .. }
        | Error::InsufficientKeypoints
        | Error::NonPositiveHeight(_)
        | Error::DegenerateHeight(_) => PtStatus::Geometry,
        Error::NonMonotoneFrame { .. } => PtStatus::FrameOrder,
        Error::EmptyGroundTruth => PtStatus::EmptyGroundTruth,
        Error::DuplicateRecord { .. } => PtStatus::Schema,
        _ => PtStatus::InvalidArgument,
    }
}

fn from_core(e: Error) -> PtStatus {
    let status = status_of(&e);
    fail(status, e.to_string())
}

fn from_read(e: ReadError) -> PtStatus {
    match e {
        ReadError::Io(e) => fail(PtStatus::Schema, e.to_string()),
        ReadError::Schema(lines) => {
            let text: Vec<String> = lines.iter().map(ToString::to_string).collect();
            fail(PtStatus::Schema, text.join("; "))
        }
    }
}

/// Runs `f`, turning panics into `PtStatus::Panic` and clearing the error
/// message on success.
fn guard(f: impl FnOnce() -> Result<(), PtStatus>) -> PtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PtStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => fail(PtStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, PtStatus> {
    if p.is_null() {
        return Err(fail(PtStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|e| fail(PtStatus::InvalidUtf8, e.to_string()))
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, PtStatus> {
    p.as_mut().ok_or_else(|| fail(PtStatus::NullPointer, "null output pointer"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, PtStatus> {
    p.as_ref().ok_or_else(|| fail(PtStatus::NullPointer, "null handle"))
}

fn into_c_string(s: String) -> Result<*mut c_char, PtStatus> {
    CString::new(s).map(CString::into_raw).map_err(|_| fail(PtStatus::InvalidArgument, "output contains NUL"))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a rig description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pt_rig_from_json(json: *const c_char, out: *mut *mut PtRig) -> PtStatus {
    guard(|| {
        let out = out_arg(out)?;
        let text = str_arg(json)?;
        let rig: PanoramaRig =
            serde_json::from_str(text).map_err(|e| fail(PtStatus::Schema, e.to_string()))?;
        rig.validate().map_err(from_core)?;
        *out = Box::into_raw(Box::new(PtRig(rig)));
        Ok(())
    })
}

/// Four views at yaw 0, 90, 180 and 270 degrees with a 90 degree field of view.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pt_rig_quad(
    width: u32,
    height: u32,
    body_height_m: f64,
    out: *mut *mut PtRig,
) -> PtStatus {
    guard(|| {
        let out = out_arg(out)?;
        let rig = PanoramaRig::quad(width, height, body_height_m);
        rig.validate().map_err(from_core)?;
        *out = Box::into_raw(Box::new(PtRig(rig)));
        Ok(())
    })
}

/// # Safety
/// `rig` must come from a rig constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pt_rig_free(rig: *mut PtRig) {
    if !rig.is_null() {
        drop(Box::from_raw(rig));
    }
}

/// Number of views in the rig, 0 for NULL.
///
/// # Safety
/// `rig` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pt_rig_view_count(rig: *const PtRig) -> usize {
    rig.as_ref().map_or(0, |r| r.0.views.len())
}

/// Pixel coordinates of a panorama-frame point in one view.
///
/// # Safety
/// `rig` must be a live handle; `out_u` and `out_v` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pt_project(
    rig: *const PtRig,
    view_id: u32,
    x: f64,
    y: f64,
    z: f64,
    out_u: *mut f64,
    out_v: *mut f64,
) -> PtStatus {
    guard(|| {
        let rig = handle(rig)?;
        let (u, v) = (out_arg(out_u)?, out_arg(out_v)?);
        let p = geometry::project(&rig.0, view_id, &Vector3::new(x, y, z)).map_err(from_core)?;
        (*u, *v) = (p.u, p.v);
        Ok(())
    })
}

/// Ground-plane location from a reference column and pixel height.
///
/// # Safety
/// `rig` must be a live handle; `out_x` and `out_z` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pt_localize(
    rig: *const PtRig,
    view_id: u32,
    u_ref: f64,
    pixel_height: f64,
    out_x: *mut f64,
    out_z: *mut f64,
) -> PtStatus {
    guard(|| {
        let rig = handle(rig)?;
        let (x, z) = (out_arg(out_x)?, out_arg(out_z)?);
        let loc = geometry::localize(&rig.0, view_id, u_ref, pixel_height).map_err(from_core)?;
        (*x, *z) = (loc.x, loc.z);
        Ok(())
    })
}

unsafe fn embedding(p: *const f64, dim: usize) -> Result<Embedding, PtStatus> {
    if p.is_null() {
        return Err(fail(PtStatus::NullPointer, "null embedding"));
    }
    Embedding::new(std::slice::from_raw_parts(p, dim).to_vec()).map_err(from_core)
}

/// One minus the cosine similarity of two vectors of length `dim`.
///
/// # Safety
/// `a` and `b` must point to `dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pt_appearance_cost(
    a: *const f64,
    b: *const f64,
    dim: usize,
    out: *mut f64,
) -> PtStatus {
    guard(|| {
        let out = out_arg(out)?;
        *out = association::appearance_cost(&embedding(a, dim)?, &embedding(b, dim)?).map_err(from_core)?;
        Ok(())
    })
}

/// Motion cost between a predicted and a detected ground-plane location.
#[no_mangle]
pub extern "C" fn pt_trajectory_cost(px: f64, pz: f64, dx: f64, dz: f64, body_height_m: f64) -> f64 {
    association::trajectory_cost(&Location::new(px, pz), &Location::new(dx, dz), body_height_m)
}

/// Minimum-cost assignment over a row-major `rows` x `cols` matrix.
/// `row_to_col[i]` receives the matched column of row `i`, or -1.
///
/// # Safety
/// `costs` must hold `rows * cols` doubles; `row_to_col` must hold `rows` slots.
#[no_mangle]
pub unsafe extern "C" fn pt_solve_assignment(
    costs: *const f64,
    rows: usize,
    cols: usize,
    row_to_col: *mut i64,
) -> PtStatus {
    guard(|| {
        if rows == 0 {
            return Ok(());
        }
        if costs.is_null() || row_to_col.is_null() {
            return Err(fail(PtStatus::NullPointer, "null matrix or output"));
        }
        let len =
            rows.checked_mul(cols).ok_or_else(|| fail(PtStatus::InvalidArgument, "matrix too large"))?;
        let data = std::slice::from_raw_parts(costs, len).to_vec();
        let matrix = CostMatrix::new(rows, cols, data).map_err(from_core)?;
        let a = association::solve_assignment(&matrix).map_err(from_core)?;
        let out = std::slice::from_raw_parts_mut(row_to_col, rows);
        out.fill(-1);
        for (r, c) in a.matches {
            out[r] = c as i64;
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pt_tracker_config_default() -> PtTrackerConfig {
    let d = TrackerConfig::default();
    PtTrackerConfig {
        epsilon: d.epsilon,
        max_lifespan: d.max_lifespan,
        merge_radius_m: d.merge_radius_m,
        body_height_m: d.body_height_m,
        trajectory_only: 0,
        ema_beta: -1.0,
    }
}

impl From<&PtTrackerConfig> for TrackerConfig {
    fn from(c: &PtTrackerConfig) -> Self {
        TrackerConfig {
            epsilon: c.epsilon,
            max_lifespan: c.max_lifespan,
            merge_radius_m: c.merge_radius_m,
            body_height_m: c.body_height_m,
            cost_mode: if c.trajectory_only != 0 { CostMode::TrajectoryOnly } else { CostMode::Combined },
            appearance: if c.ema_beta < 0.0 {
                AppearanceUpdate::Latest
            } else {
                AppearanceUpdate::Ema { beta: c.ema_beta }
            },
            ..TrackerConfig::default()
        }
    }
}

/// Creates a tracker. `config` may be NULL for defaults.
///
/// # Safety
/// `rig` must be a live handle, `config` NULL or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_tracker_new(
    rig: *const PtRig,
    config: *const PtTrackerConfig,
    out: *mut *mut PtTracker,
) -> PtStatus {
    guard(|| {
        let out = out_arg(out)?;
        let rig = handle(rig)?;
        let config = config.as_ref().map_or_else(TrackerConfig::default, TrackerConfig::from);
        let pipeline = TrackingPipeline::new(config, &rig.0).map_err(from_core)?;
        *out = Box::into_raw(Box::new(PtTracker(pipeline)));
        Ok(())
    })
}

/// # Safety
/// `tracker` must come from `pt_tracker_new` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pt_tracker_free(tracker: *mut PtTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Feeds one frame of detections (JSON Lines, the same records the command
/// line reads; the `frame` field of each record is ignored in favour of
/// `frame`). On success `*out_jsonl` receives the tracklet records for every
/// frame stepped, including skipped-over empty frames. Detections whose pose
/// cannot be localized are dropped; their count goes to `*out_skipped` when
/// that pointer is non-NULL.
///
/// # Safety
/// `tracker` must be a live handle, `detections_jsonl` a NUL-terminated
/// string, `out_jsonl` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_tracker_push_json(
    tracker: *mut PtTracker,
    frame: u64,
    detections_jsonl: *const c_char,
    out_jsonl: *mut *mut c_char,
    out_skipped: *mut usize,
) -> PtStatus {
    guard(|| {
        let out = out_arg(out_jsonl)?;
        let tracker = tracker.as_mut().ok_or_else(|| fail(PtStatus::NullPointer, "null handle"))?;
        let text = str_arg(detections_jsonl)?;
        let detections = io::read_detections(text.as_bytes())
            .map_err(from_read)?
            .into_iter()
            .map(|(_, mut d)| {
                d.frame = frame;
                d
            })
            .collect();
        let result = tracker.0.push_frame(frame, detections).map_err(from_core)?;
        let mut buf = Vec::new();
        io::write_jsonl(&mut buf, result.tracklets.iter().map(TrackletRecord::from))
            .map_err(|e| fail(PtStatus::InvalidArgument, e.to_string()))?;
        if let Some(n) = out_skipped.as_mut() {
            *n = result.skipped.len();
        }
        *out = into_c_string(String::from_utf8(buf).expect("serde_json writes UTF-8"))?;
        Ok(())
    })
}

fn labeled(text: &str) -> Result<Vec<LabeledPoint>, PtStatus> {
    Ok(io::read_jsonl::<GroundTruthRecord, _>(text.as_bytes())
        .map_err(from_read)?
        .into_iter()
        .map(|(_, r)| r.into())
        .collect())
}

/// Scores predictions against ground truth, both as JSON Lines with at
/// least `frame`, `id`, `x` and `z`. `*out_report_json` receives the report
/// as a JSON object. Uses the default localization-precision thresholds
/// and no radius filter.
///
/// # Safety
/// Both inputs must be NUL-terminated strings; `out_report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_evaluate_json(
    gt_jsonl: *const c_char,
    pred_jsonl: *const c_char,
    dist_threshold_m: f64,
    out_report_json: *mut *mut c_char,
) -> PtStatus {
    guard(|| {
        let out = out_arg(out_report_json)?;
        let gt = labeled(str_arg(gt_jsonl)?)?;
        let pred = labeled(str_arg(pred_jsonl)?)?;
        let params = EvalParams { dist_threshold_m, ..EvalParams::default() };
        let report = metrics::evaluate(&gt, &pred, &params).map_err(from_core)?;
        let json =
            serde_json::to_string(&report).map_err(|e| fail(PtStatus::InvalidArgument, e.to_string()))?;
        *out = into_c_string(json)?;
        Ok(())
    })
}
