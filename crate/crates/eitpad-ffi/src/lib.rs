//! C ABI over the eitpad toolkit.
//!
//! Conventions, uniform across the surface:
//!
//! - Every object lives behind an opaque handle created by an
//!   `eitpad_*_new`-style call and released by the matching `eitpad_*_free`.
//!   Handles are plain heap pointers; they are not reference counted and
//!   must not be freed twice or used across a free.
//! - Fallible calls return [`EitpadStatus`]; `EITPAD_STATUS_OK` is zero.
//!   On failure the output pointer is left untouched and a human-readable
//!   message is stored per thread, retrievable via
//!   [`eitpad_last_error_message`] until the next failing call on that
//!   thread.
//! - Buffers are provided by the caller together with their length, which
//!   must match exactly what the object expects (channel count, element
//!   count); a mismatch is reported, never truncated.
//! - All functions are panic-safe: a panic inside the library is caught
//!   and surfaced as `EITPAD_STATUS_INTERNAL` rather than unwinding into C.
//!
//! The build script regenerates `include/eitpad.h` from these definitions.

use eitpad::channels::{default_plan, ChannelPlan};
use eitpad::electrodes::{place_grid, ElectrodeSet, GridLayout};
use eitpad::error::Error;
use eitpad::forward::{jacobian, solve_forward};
use eitpad::frames::FrameVector;
use eitpad::geometry::cylinder::generate_cylinder_mesh;
use eitpad::geometry::io::load_mesh;
use eitpad::geometry::Mesh;
use eitpad::inverse::reconstruct;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result code of a fallible call. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EitpadStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument failed validation; see `eitpad_last_error_message`.
    InvalidArgument = 2,
    /// A file could not be read or parsed.
    Io = 3,
    /// A linear system could not be solved.
    Numeric = 4,
    /// Unexpected internal failure (caught panic).
    Internal = 5,
}

/// Simulation domain: tetrahedral or triangular finite-element mesh.
pub struct EitpadMesh(Mesh);

/// Electrode pad bound to the surface of a specific mesh.
pub struct EitpadPad(ElectrodeSet);

/// Measurement schedule: a list of four-pole channels.
pub struct EitpadPlan(ChannelPlan);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: EitpadStatus, message: &str) -> EitpadStatus {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NULs removed above");
    });
    status
}

fn fail_error(e: &Error) -> EitpadStatus {
    let status = match e {
        Error::Io(_) | Error::MeshFormat { .. } => EitpadStatus::Io,
        Error::Singular(_) => EitpadStatus::Numeric,
        _ => EitpadStatus::InvalidArgument,
    };
    fail(status, &e.to_string())
}

/// Run an FFI body, converting panics into `Internal`.
fn guarded(body: impl FnOnce() -> EitpadStatus) -> EitpadStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(EitpadStatus::Internal, "internal panic"),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eitpad_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread. Never null;
/// empty string when nothing failed yet.
#[no_mangle]
pub extern "C" fn eitpad_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Generate a cylindrical mesh (axis along z from 0 to `height_mm`) with
/// roughly `target_elements` tetrahedra and uniform conductivity
/// `sigma_s_m`, and store the handle in `*out`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn eitpad_mesh_cylinder(
    radius_mm: f64,
    height_mm: f64,
    target_elements: usize,
    sigma_s_m: f64,
    out: *mut *mut EitpadMesh,
) -> EitpadStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EitpadStatus::NullArgument, "out is null");
        }
        let built = generate_cylinder_mesh(radius_mm, height_mm, target_elements)
            .and_then(|m| m.with_uniform_conductivity(sigma_s_m));
        match built {
            Ok(mesh) => {
                unsafe { *out = Box::into_raw(Box::new(EitpadMesh(mesh))) };
                EitpadStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Load a mesh from the plain-text format described in the toolkit docs.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as in
/// [`eitpad_mesh_cylinder`].
#[no_mangle]
pub unsafe extern "C" fn eitpad_mesh_load(
    path: *const c_char,
    out: *mut *mut EitpadMesh,
) -> EitpadStatus {
    guarded(|| {
        if path.is_null() || out.is_null() {
            return fail(EitpadStatus::NullArgument, "path or out is null");
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                return fail(EitpadStatus::InvalidArgument, "path is not valid UTF-8")
            }
        };
        match load_mesh(path) {
            Ok(mesh) => {
                unsafe { *out = Box::into_raw(Box::new(EitpadMesh(mesh))) };
                EitpadStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Release a mesh. Passing null is a no-op.
///
/// # Safety
/// `mesh` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eitpad_mesh_free(mesh: *mut EitpadMesh) {
    if !mesh.is_null() {
        drop(unsafe { Box::from_raw(mesh) });
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn eitpad_mesh_node_count(mesh: *const EitpadMesh) -> usize {
    match unsafe { mesh.as_ref() } {
        Some(m) => m.0.node_count(),
        None => 0,
    }
}

/// Number of elements, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn eitpad_mesh_element_count(mesh: *const EitpadMesh) -> usize {
    match unsafe { mesh.as_ref() } {
        Some(m) => m.0.element_count(),
        None => 0,
    }
}

/// Drape a rows x cols electrode grid (pitch `spacing_mm`) over the mesh
/// surface. `origin_xyz` anchors the pad centre (nearest surface point);
/// `orientation_xyz` is the in-plane direction columns advance along. Both
/// point at 3 doubles.
///
/// # Safety
/// `mesh` must be a live handle; `origin_xyz` and `orientation_xyz` must
/// point at 3 readable doubles; `out` at writable pointer storage.
#[no_mangle]
pub unsafe extern "C" fn eitpad_pad_place(
    mesh: *const EitpadMesh,
    rows: usize,
    cols: usize,
    spacing_mm: f64,
    origin_xyz: *const f64,
    orientation_xyz: *const f64,
    out: *mut *mut EitpadPad,
) -> EitpadStatus {
    guarded(|| {
        if mesh.is_null() || origin_xyz.is_null() || orientation_xyz.is_null() || out.is_null()
        {
            return fail(EitpadStatus::NullArgument, "a required pointer is null");
        }
        let mesh = unsafe { &(*mesh).0 };
        let origin = unsafe { [*origin_xyz, *origin_xyz.add(1), *origin_xyz.add(2)] };
        let orientation = unsafe {
            [
                *orientation_xyz,
                *orientation_xyz.add(1),
                *orientation_xyz.add(2),
            ]
        };
        let placed = GridLayout::new(rows, cols, spacing_mm).and_then(|layout| {
            place_grid(
                mesh,
                &layout.with_origin(origin).with_orientation(orientation),
            )
        });
        match placed {
            Ok(electrodes) => {
                unsafe { *out = Box::into_raw(Box::new(EitpadPad(electrodes))) };
                EitpadStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Release a pad. Passing null is a no-op.
///
/// # Safety
/// `pad` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eitpad_pad_free(pad: *mut EitpadPad) {
    if !pad.is_null() {
        drop(unsafe { Box::from_raw(pad) });
    }
}

/// Number of electrodes, or 0 for a null handle.
///
/// # Safety
/// `pad` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn eitpad_pad_electrode_count(pad: *const EitpadPad) -> usize {
    match unsafe { pad.as_ref() } {
        Some(p) => p.0.len(),
        None => 0,
    }
}

/// Build the default measurement schedule for the pad's grid: opposite
/// rectangle edges plus diagonal channels, deduplicated.
///
/// # Safety
/// `pad` must be a live handle; `out` must point at writable pointer
/// storage.
#[no_mangle]
pub unsafe extern "C" fn eitpad_plan_default(
    pad: *const EitpadPad,
    out: *mut *mut EitpadPlan,
) -> EitpadStatus {
    guarded(|| {
        if pad.is_null() || out.is_null() {
            return fail(EitpadStatus::NullArgument, "pad or out is null");
        }
        let pad = unsafe { &(*pad).0 };
        match default_plan(pad.layout()) {
            Ok(plan) => {
                unsafe { *out = Box::into_raw(Box::new(EitpadPlan(plan))) };
                EitpadStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Release a plan. Passing null is a no-op.
///
/// # Safety
/// `plan` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eitpad_plan_free(plan: *mut EitpadPlan) {
    if !plan.is_null() {
        drop(unsafe { Box::from_raw(plan) });
    }
}

/// Number of channels, or 0 for a null handle.
///
/// # Safety
/// `plan` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn eitpad_plan_channel_count(plan: *const EitpadPlan) -> usize {
    match unsafe { plan.as_ref() } {
        Some(p) => p.0.len(),
        None => 0,
    }
}

fn check_pad_on_mesh(mesh: &Mesh, pad: &ElectrodeSet) -> Result<(), EitpadStatus> {
    if pad.nodes().iter().any(|&n| n >= mesh.node_count()) {
        return Err(fail(
            EitpadStatus::InvalidArgument,
            "pad was placed on a different mesh (electrode node out of range)",
        ));
    }
    Ok(())
}

/// Solve the forward problem: voltages for every channel of `plan` when
/// driving `current_a` amperes, written to `out_voltages` (length
/// `out_len`, which must equal the channel count).
///
/// # Safety
/// Handles must be live; `out_voltages` must point at `out_len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn eitpad_solve(
    mesh: *const EitpadMesh,
    pad: *const EitpadPad,
    plan: *const EitpadPlan,
    current_a: f64,
    out_voltages: *mut f64,
    out_len: usize,
) -> EitpadStatus {
    guarded(|| {
        if mesh.is_null() || pad.is_null() || plan.is_null() || out_voltages.is_null() {
            return fail(EitpadStatus::NullArgument, "a required pointer is null");
        }
        let (mesh, pad, plan) = unsafe { (&(*mesh).0, &(*pad).0, &(*plan).0) };
        if let Err(status) = check_pad_on_mesh(mesh, pad) {
            return status;
        }
        if out_len != plan.len() {
            return fail(
                EitpadStatus::InvalidArgument,
                &format!("out_len is {out_len}, plan has {} channels", plan.len()),
            );
        }
        match solve_forward(mesh, pad, plan, current_a) {
            Ok(frame) => {
                let values = frame.values();
                unsafe {
                    std::ptr::copy_nonoverlapping(values.as_ptr(), out_voltages, values.len())
                };
                EitpadStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Difference imaging: reconstruct per-element conductivity change from
/// per-ampere channel voltage changes (`delta_per_ampere`, length
/// `delta_len` = channel count). `lambda <= 0` picks the Jacobian-scaled
/// default; `p` in [0, 1] is the sensitivity-normalization exponent.
/// Writes one value per mesh element to `out_values` (`out_len` must equal
/// the element count).
///
/// # Safety
/// Handles must be live; `delta_per_ampere` must point at `delta_len`
/// readable doubles and `out_values` at `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn eitpad_reconstruct(
    mesh: *const EitpadMesh,
    pad: *const EitpadPad,
    plan: *const EitpadPlan,
    delta_per_ampere: *const f64,
    delta_len: usize,
    lambda: f64,
    p: f64,
    out_values: *mut f64,
    out_len: usize,
) -> EitpadStatus {
    guarded(|| {
        if mesh.is_null()
            || pad.is_null()
            || plan.is_null()
            || delta_per_ampere.is_null()
            || out_values.is_null()
        {
            return fail(EitpadStatus::NullArgument, "a required pointer is null");
        }
        let (mesh, pad, plan) = unsafe { (&(*mesh).0, &(*pad).0, &(*plan).0) };
        if let Err(status) = check_pad_on_mesh(mesh, pad) {
            return status;
        }
        if delta_len != plan.len() {
            return fail(
                EitpadStatus::InvalidArgument,
                &format!("delta_len is {delta_len}, plan has {} channels", plan.len()),
            );
        }
        if out_len != mesh.element_count() {
            return fail(
                EitpadStatus::InvalidArgument,
                &format!(
                    "out_len is {out_len}, mesh has {} elements",
                    mesh.element_count()
                ),
            );
        }
        let delta = unsafe { std::slice::from_raw_parts(delta_per_ampere, delta_len) };
        let delta = match FrameVector::new(delta.to_vec()) {
            Ok(f) => f,
            Err(e) => return fail_error(&e),
        };
        let lambda = if lambda <= 0.0 { None } else { Some(lambda) };
        let field = jacobian(mesh, pad, plan)
            .and_then(|j| reconstruct(&j, &delta, lambda, p));
        match field {
            Ok(field) => {
                let values = field.values();
                unsafe {
                    std::ptr::copy_nonoverlapping(values.as_ptr(), out_values, values.len())
                };
                EitpadStatus::Ok
            }
            Err(e) => fail_error(&e),
        }
    })
}
