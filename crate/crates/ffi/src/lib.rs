//! C interface to `rkhs-motion`.
//!
//! Scenes and trajectories are opaque handles created and destroyed through
//! this API. Every fallible function returns an [`RmStatus`]; on failure the
//! message is available from [`rm_last_error`] on the same thread. Strings
//! returned by the library are released with [`rm_string_free`].
//!
//! The header `include/rkhs_motion.h` is generated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rkhs_motion::config::{self, PlanConfig};
use rkhs_motion::kernels::KernelConfig;
use rkhs_motion::objective::{self, legendre_rule, ReduceOp};
use rkhs_motion::optimizer;
use rkhs_motion::trajectory::KernelTrajectory;
use rkhs_motion::world::{generate_scene, Scene, SceneTemplate};
use rkhs_motion::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or a buffer had the wrong length.
    InvalidArgument = 2,
    /// Text input (TOML or UTF-8) could not be parsed.
    Parse = 3,
    /// Settings or scene were rejected by validation.
    Config = 4,
    /// A linear solve or root iteration failed.
    Numerical = 5,
    /// Unexpected internal failure; the message has details.
    Internal = 6,
}

/// Opaque scene handle.
pub struct RmScene(Scene);

/// Opaque trajectory handle.
pub struct RmTrajectory(KernelTrajectory);

/// Summary of a [`rm_plan`] run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RmPlanSummary {
    pub iterations: usize,
    /// Obstacle cost under the dense path-integral reference.
    pub dense_cost: f64,
    /// Smallest signed body-point distance over 2000 samples.
    pub clearance: f64,
    /// 1 when `clearance > 0`.
    pub collision_free: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RmStatus {
    match e {
        Error::Domain(_) | Error::Dimension { .. } | Error::BodyPoint { .. } => RmStatus::InvalidArgument,
        Error::Parse(_) => RmStatus::Parse,
        Error::Config(_) | Error::Unsupported(_) | Error::Scene(_) | Error::Generation(_) => RmStatus::Config,
        Error::Factorization(_)
        | Error::Singular(_)
        | Error::Quadrature(_)
        | Error::SupportOverflow { .. }
        | Error::DuplicateTime(_) => RmStatus::Numerical,
        _ => RmStatus::Internal,
    }
}

struct Failure(RmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> RmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside rkhs-motion".into());
            RmStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(RmStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: String) -> Failure {
    Failure(RmStatus::InvalidArgument, msg)
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(RmStatus::Parse, format!("{what}: {e}")))
}

unsafe fn optional_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> FfiResult {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn buffer<'a>(p: *mut f64, len: usize, want: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len != want {
        return Err(invalid(format!("{what} has length {len}, expected {want}")));
    }
    if want == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn rm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn rm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a scene from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_scene_from_toml(toml: *const c_char, out: *mut *mut RmScene) -> RmStatus {
    guard(|| {
        let scene = Scene::from_toml(text(toml, "toml")?)?;
        put(out, Box::into_raw(Box::new(RmScene(scene))), "out")
    })
}

/// Generate a random scene for the bundled 3-link arm.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_scene_generate(seed: u64, obstacles: usize, out: *mut *mut RmScene) -> RmStatus {
    guard(|| {
        let scene = generate_scene(seed, obstacles, &SceneTemplate::planar_3dof())?;
        put(out, Box::into_raw(Box::new(RmScene(scene))), "out")
    })
}

/// Serialize a scene to TOML. Free the result with [`rm_string_free`].
///
/// # Safety
/// `scene` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_scene_to_toml(scene: *const RmScene, out: *mut *mut c_char) -> RmStatus {
    guard(|| {
        let s = deref(scene, "scene")?.0.to_toml()?;
        let c = CString::new(s).map_err(|e| Failure(RmStatus::Internal, e.to_string()))?;
        put(out, c.into_raw(), "out")
    })
}

/// Joint count of the scene's arm.
///
/// # Safety
/// `scene` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_scene_dof(scene: *const RmScene, out: *mut usize) -> RmStatus {
    guard(|| put(out, deref(scene, "scene")?.0.arm().dof(), "out"))
}

/// Destroy a scene. Null is ignored.
///
/// # Safety
/// `scene` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rm_scene_free(scene: *mut RmScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Optimize a trajectory for `scene`. `config_toml` holds plan settings in
/// the CLI's config format and may be null for the defaults. `summary` may be
/// null.
///
/// # Safety
/// Pointers must be valid as described; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_plan(
    scene: *const RmScene,
    config_toml: *const c_char,
    out: *mut *mut RmTrajectory,
    summary: *mut RmPlanSummary,
) -> RmStatus {
    guard(|| {
        let scene = &deref(scene, "scene")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg: PlanConfig = match optional_text(config_toml, "config")? {
            Some(t) => config::parse(t, "config")?,
            None => PlanConfig::default(),
        };
        let (opt, spec) = cfg.validate(scene.arm().dof())?;
        let (xi, trace) = optimizer::optimize(scene, &opt, &spec)?;
        if !summary.is_null() {
            let clearance = objective::min_clearance(&xi, scene, 2000)?;
            summary.write(RmPlanSummary {
                iterations: trace.iterations(),
                dense_cost: objective::u_obs(&xi, scene, ReduceOp::dense_reference())?,
                clearance,
                collision_free: i32::from(clearance > 0.0),
            });
        }
        put(out, Box::into_raw(Box::new(RmTrajectory(xi))), "out")
    })
}

/// Joint count of a trajectory.
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_trajectory_dof(traj: *const RmTrajectory, out: *mut usize) -> RmStatus {
    guard(|| put(out, deref(traj, "trajectory")?.0.spec().dof(), "out"))
}

/// Configuration at time `t ∈ [0, 1]` into `q[0..len]`, `len` = dof.
///
/// # Safety
/// `traj` must be a live handle; `q` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rm_trajectory_eval(traj: *const RmTrajectory, t: f64, q: *mut f64, len: usize) -> RmStatus {
    guard(|| {
        let xi = &deref(traj, "trajectory")?.0;
        let value = xi.eval(t)?;
        buffer(q, len, value.len(), "q")?.copy_from_slice(value.as_slice());
        Ok(())
    })
}

/// Number of kernel sections.
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_trajectory_support_len(traj: *const RmTrajectory, out: *mut usize) -> RmStatus {
    guard(|| put(out, deref(traj, "trajectory")?.0.support_len(), "out"))
}

/// Support times into `times[0..n]` and coefficients row-major into
/// `coeffs[0..n*dof]`, where `n` is the support length.
///
/// # Safety
/// `traj` must be a live handle; buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn rm_trajectory_support(
    traj: *const RmTrajectory,
    times: *mut f64,
    times_len: usize,
    coeffs: *mut f64,
    coeffs_len: usize,
) -> RmStatus {
    guard(|| {
        let xi = &deref(traj, "trajectory")?.0;
        let d = xi.spec().dof();
        let n = xi.support_len();
        let times = buffer(times, times_len, n, "times")?;
        let coeffs = buffer(coeffs, coeffs_len, n * d, "coeffs")?;
        for (i, (t, a)) in xi.sections().enumerate() {
            times[i] = t;
            coeffs[i * d..(i + 1) * d].copy_from_slice(a.as_slice());
        }
        Ok(())
    })
}

/// Destroy a trajectory. Null is ignored.
///
/// # Safety
/// `traj` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rm_trajectory_free(traj: *mut RmTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Gauss-Legendre rule with `n` nodes on `[0, 1]`.
///
/// # Safety
/// `nodes` and `weights` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rm_quadrature(n: usize, nodes: *mut f64, weights: *mut f64) -> RmStatus {
    guard(|| {
        let rule = legendre_rule(n)?;
        buffer(nodes, n, n, "nodes")?.copy_from_slice(&rule.nodes);
        buffer(weights, n, n, "weights")?.copy_from_slice(&rule.weights);
        Ok(())
    })
}

/// Scalar kernel value `k(t, s)` for a kernel described by a TOML table
/// (keys `family`, `sigma`, ...); null gives the default kernel.
///
/// # Safety
/// `kernel_toml` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_kernel_eval(kernel_toml: *const c_char, t: f64, s: f64, out: *mut f64) -> RmStatus {
    guard(|| {
        let cfg: KernelConfig = match optional_text(kernel_toml, "kernel")? {
            Some(text) => config::parse(text, "kernel")?,
            None => KernelConfig::default(),
        };
        put(out, cfg.build(1)?.eval_scalar(t, s)?, "out")
    })
}
