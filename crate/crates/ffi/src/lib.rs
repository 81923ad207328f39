//! C ABI for `invtori`.
//!
//! Every fallible function returns an [`InvtoriStatus`]. On failure a
//! message is stored per thread and can be read with
//! [`invtori_last_error`]. Handles are opaque and must be released with the
//! matching `_free` function. Array arguments are `(pointer, length)` pairs
//! of `double`s laid out as `q1..qd, p1..pd` for phase points.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DVector;

use invtori::config::RunConfig;
use invtori::fixtures::{fixture, named_basemap, Fixture};
use invtori::genfun::{ExtensionMap, GeneratingFunction, SolverOptions, DEFAULT_ORDER};
use invtori::hamiltonian::vector_field;
use invtori::homology::{homology_iterate, HomologyAction, OrbitClass};
use invtori::integrate::{flow_point, FlowOptions};
use invtori::symplectic::PhasePoint;
use invtori::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvtoriStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A string argument is not valid UTF-8.
    InvalidUtf8 = 3,
    UnknownName = 4,
    Config = 5,
    /// A numerical routine failed to converge or lost accuracy.
    Numerical = 6,
    Overflow = 7,
    NotUnimodular = 8,
    Io = 9,
    /// The library panicked; the message holds the payload.
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvtoriOrbitClass {
    FiniteOrbit = 0,
    ParabolicGrowth = 1,
    HyperbolicGrowth = 2,
}

/// A named example system: a Hamiltonian and a parametrized submanifold.
pub struct InvtoriFixture {
    inner: Fixture,
}

/// The symplectic extension of a base map.
pub struct InvtoriExtension {
    inner: ExtensionMap,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> InvtoriStatus {
    match err {
        Error::UnknownFixture(_) | Error::UnknownBaseMap(_) => InvtoriStatus::UnknownName,
        Error::Config(_) => InvtoriStatus::Config,
        Error::Io(_) => InvtoriStatus::Io,
        Error::Overflow { .. } => InvtoriStatus::Overflow,
        Error::NotUnimodular { .. } => InvtoriStatus::NotUnimodular,
        Error::DimensionMismatch { .. } | Error::InvalidArgument(_) | Error::QuadratureOrder { .. } => {
            InvtoriStatus::InvalidArgument
        }
        _ => InvtoriStatus::Numerical,
    }
}

struct Failure(InvtoriStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(InvtoriStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, converting errors and panics into a status and a message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> InvtoriStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            InvtoriStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&msg);
            InvtoriStatus::Panic
        }
    }
}

/// # Safety
/// `s` must be null or a nul-terminated string.
unsafe fn str_arg<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(InvtoriStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn slice_arg<'a>(p: *const f64, len: usize, want: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    if len != want {
        return Err(Failure(InvtoriStatus::InvalidArgument, format!("`{name}` needs {want} values, got {len}")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable doubles.
unsafe fn out_arg<'a>(p: *mut f64, len: usize, want: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    if len < want {
        return Err(Failure(InvtoriStatus::InvalidArgument, format!("`{name}` holds {len} values, needs {want}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, want))
}

fn write_point(x: &PhasePoint, out: &mut [f64]) {
    let d = x.dim();
    out[..d].copy_from_slice(x.q.as_slice());
    out[d..2 * d].copy_from_slice(x.p.as_slice());
}

/// Message of the last failed call on this thread, or null after a
/// success. Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn invtori_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn invtori_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates the fixture called `name`.
///
/// # Safety
/// `name` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn invtori_fixture_new(name: *const c_char, out: *mut *mut InvtoriFixture) -> InvtoriStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let fx = fixture(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(InvtoriFixture { inner: fx }));
        Ok(())
    })
}

/// Releases a fixture. Null is ignored.
///
/// # Safety
/// `fx` must come from [`invtori_fixture_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn invtori_fixture_free(fx: *mut InvtoriFixture) {
    if !fx.is_null() {
        drop(Box::from_raw(fx));
    }
}

/// Configuration-space dimension `d` (phase points have `2d` entries), or
/// 0 for a null handle.
///
/// # Safety
/// `fx` must be null or a live fixture handle.
#[no_mangle]
pub unsafe extern "C" fn invtori_fixture_dim(fx: *const InvtoriFixture) -> usize {
    fx.as_ref().map_or(0, |f| f.inner.hamiltonian.dim())
}

/// Parameter dimension of the fixture's submanifold, or 0 for null.
///
/// # Safety
/// `fx` must be null or a live fixture handle.
#[no_mangle]
pub unsafe extern "C" fn invtori_fixture_param_dim(fx: *const InvtoriFixture) -> usize {
    fx.as_ref().map_or(0, |f| f.inner.manifold.param_dim())
}

/// Writes the point `j(θ)` of the submanifold into `out` (`2d` values).
///
/// # Safety
/// `theta` must hold `theta_len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn invtori_fixture_embed(
    fx: *const InvtoriFixture,
    theta: *const f64,
    theta_len: usize,
    out: *mut f64,
    out_len: usize,
) -> InvtoriStatus {
    guard(|| {
        let f = &fx.as_ref().ok_or_else(|| null("fx"))?.inner;
        let k = f.manifold.param_dim();
        let d = f.hamiltonian.dim();
        let th = slice_arg(theta, theta_len, k, "theta")?;
        let out = out_arg(out, out_len, 2 * d, "out")?;
        write_point(&f.manifold.embed(&DVector::from_column_slice(th)), out);
        Ok(())
    })
}

/// Writes `X_H(x)` into `out`.
///
/// # Safety
/// `x` must hold `x_len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn invtori_fixture_vector_field(
    fx: *const InvtoriFixture,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> InvtoriStatus {
    guard(|| {
        let f = &fx.as_ref().ok_or_else(|| null("fx"))?.inner;
        let d = f.hamiltonian.dim();
        let x = slice_arg(x, x_len, 2 * d, "x")?;
        let out = out_arg(out, out_len, 2 * d, "out")?;
        let v = vector_field(f.hamiltonian.as_ref(), &PhasePoint::from_slices(&x[..d], &x[d..])?)?;
        out[..d].copy_from_slice(v.dq.as_slice());
        out[d..].copy_from_slice(v.dp.as_slice());
        Ok(())
    })
}

/// Flows `x` for time `t` and writes `φ_t(x)` into `out`. A positive
/// `step` overrides the fixture's integration step; closed-form flows are
/// used when available.
///
/// # Safety
/// `x` must hold `x_len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn invtori_fixture_flow(
    fx: *const InvtoriFixture,
    x: *const f64,
    x_len: usize,
    t: f64,
    step: f64,
    out: *mut f64,
    out_len: usize,
) -> InvtoriStatus {
    guard(|| {
        let f = &fx.as_ref().ok_or_else(|| null("fx"))?.inner;
        let d = f.hamiltonian.dim();
        let x = slice_arg(x, x_len, 2 * d, "x")?;
        let out = out_arg(out, out_len, 2 * d, "out")?;
        let opts = FlowOptions {
            step: if step > 0.0 { step } else { f.flow_step },
            energy_tol: None,
            ..FlowOptions::default()
        };
        let end = flow_point(f.hamiltonian.as_ref(), &PhasePoint::from_slices(&x[..d], &x[d..])?, t, &opts)?;
        write_point(&end, out);
        Ok(())
    })
}

/// Builds the extension of a named base map (`identity`, `sine-0.05`,
/// `translation(0.1,0.2)`, ...) on `T^dim`, with the default quadrature and
/// solver settings.
///
/// # Safety
/// `basemap` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn invtori_extension_new(
    basemap: *const c_char,
    dim: usize,
    out: *mut *mut InvtoriExtension,
) -> InvtoriStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let base = named_basemap(str_arg(basemap, "basemap")?, dim)?;
        let ext = ExtensionMap::new(GeneratingFunction::new(base, DEFAULT_ORDER)?, SolverOptions::default())?;
        *out = Box::into_raw(Box::new(InvtoriExtension { inner: ext }));
        Ok(())
    })
}

/// Releases an extension. Null is ignored.
///
/// # Safety
/// `ext` must come from [`invtori_extension_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn invtori_extension_free(ext: *mut InvtoriExtension) {
    if !ext.is_null() {
        drop(Box::from_raw(ext));
    }
}

/// Dimension `d` of the base torus, or 0 for null.
///
/// # Safety
/// `ext` must be null or a live extension handle.
#[no_mangle]
pub unsafe extern "C" fn invtori_extension_dim(ext: *const InvtoriExtension) -> usize {
    ext.as_ref().map_or(0, |e| e.inner.dim())
}

/// Writes `F(q, p)` into `out` as `Q1..Qd, P1..Pd`.
///
/// # Safety
/// `x` must hold `x_len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn invtori_extension_apply(
    ext: *const InvtoriExtension,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> InvtoriStatus {
    guard(|| {
        let e = &ext.as_ref().ok_or_else(|| null("ext"))?.inner;
        let d = e.dim();
        let x = slice_arg(x, x_len, 2 * d, "x")?;
        let out = out_arg(out, out_len, 2 * d, "out")?;
        let r = e.solve(&DVector::from_column_slice(&x[..d]), &DVector::from_column_slice(&x[d..]))?;
        out[..d].copy_from_slice(r.q.as_slice());
        out[d..].copy_from_slice(r.p.as_slice());
        Ok(())
    })
}

/// Classifies the orbit of `v0` under the row-major matrix `a` over `n`
/// steps. `growth` receives `|Aⁿ v0| / |Aⁿ⁻¹ v0|` and `angle` the limit
/// direction in `[0, ½)`, both NaN for bounded orbits; either may be null.
///
/// # Safety
/// `a` must point to 4 and `v0` to 2 integers; `class` must be valid.
#[no_mangle]
pub unsafe extern "C" fn invtori_homology_classify(
    a: *const i64,
    v0: *const i64,
    n: usize,
    class: *mut InvtoriOrbitClass,
    growth: *mut f64,
    angle: *mut f64,
) -> InvtoriStatus {
    guard(|| {
        if a.is_null() || v0.is_null() || class.is_null() {
            return Err(null(if a.is_null() { "a" } else if v0.is_null() { "v0" } else { "class" }));
        }
        let a = std::slice::from_raw_parts(a, 4);
        let v = std::slice::from_raw_parts(v0, 2);
        let h = HomologyAction::new([[a[0], a[1]], [a[2], a[3]]], [v[0], v[1]])?;
        let orbit = homology_iterate(&h, n)?;
        *class = match orbit.classification {
            OrbitClass::FiniteOrbit => InvtoriOrbitClass::FiniteOrbit,
            OrbitClass::ParabolicGrowth => InvtoriOrbitClass::ParabolicGrowth,
            OrbitClass::HyperbolicGrowth => InvtoriOrbitClass::HyperbolicGrowth,
        };
        if let Some(g) = growth.as_mut() {
            *g = orbit.growth_rate.unwrap_or(f64::NAN);
        }
        if let Some(t) = angle.as_mut() {
            *t = orbit.limit_direction.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Runs a TOML configuration, writing its report files. `passed` receives
/// whether every check passed; a failed check is not an error.
///
/// # Safety
/// `config` must be a nul-terminated string and `passed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn invtori_run_config(config: *const c_char, passed: *mut bool) -> InvtoriStatus {
    guard(|| {
        if passed.is_null() {
            return Err(null("passed"));
        }
        let mut cfg = RunConfig::from_toml(str_arg(config, "config")?)?;
        cfg.apply_env();
        *passed = invtori::run::run(&cfg)?.passed;
        Ok(())
    })
}
