//! Exercises the C surface exactly as a C caller would: raw pointers,
//! caller-owned buffers, status codes, and the thread-local error message.

use eitpad_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(eitpad_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

fn make_cylinder(sigma: f64) -> *mut EitpadMesh {
    let mut mesh: *mut EitpadMesh = ptr::null_mut();
    let status =
        unsafe { eitpad_mesh_cylinder(120.0, 280.0, 3000, sigma, &mut mesh) };
    assert_eq!(status, EitpadStatus::Ok, "{}", last_error());
    assert!(!mesh.is_null());
    mesh
}

fn make_pad(mesh: *const EitpadMesh) -> *mut EitpadPad {
    let origin = [120.0, 0.0, 140.0];
    let orientation = [0.0, 1.0, 0.0];
    let mut pad: *mut EitpadPad = ptr::null_mut();
    let status = unsafe {
        eitpad_pad_place(
            mesh,
            3,
            3,
            60.0,
            origin.as_ptr(),
            orientation.as_ptr(),
            &mut pad,
        )
    };
    assert_eq!(status, EitpadStatus::Ok, "{}", last_error());
    pad
}

#[test]
fn version_is_a_sane_semver_string() {
    let version = unsafe { CStr::from_ptr(eitpad_version()) }.to_str().unwrap();
    assert!(version.split('.').count() >= 2, "odd version: {version}");
}

#[test]
fn mesh_lifecycle_and_counts() {
    let mesh = make_cylinder(0.2);
    unsafe {
        assert!(eitpad_mesh_node_count(mesh) > 100);
        assert!(eitpad_mesh_element_count(mesh) > 2000);
        eitpad_mesh_free(mesh);
        // Null queries and frees are defined no-ops.
        assert_eq!(eitpad_mesh_node_count(ptr::null()), 0);
        eitpad_mesh_free(ptr::null_mut());
    }
}

#[test]
fn bad_arguments_set_status_and_message() {
    let mut mesh: *mut EitpadMesh = ptr::null_mut();
    let status = unsafe { eitpad_mesh_cylinder(-5.0, 280.0, 3000, 0.2, &mut mesh) };
    assert_eq!(status, EitpadStatus::InvalidArgument);
    assert!(last_error().contains("radius"), "message: {}", last_error());
    assert!(mesh.is_null(), "failed call must not write the handle");

    let status =
        unsafe { eitpad_mesh_cylinder(120.0, 280.0, 3000, 0.2, ptr::null_mut()) };
    assert_eq!(status, EitpadStatus::NullArgument);
}

#[test]
fn missing_file_reports_io() {
    let path = CString::new("/nonexistent/such.mesh").unwrap();
    let mut mesh: *mut EitpadMesh = ptr::null_mut();
    let status = unsafe { eitpad_mesh_load(path.as_ptr(), &mut mesh) };
    assert_eq!(status, EitpadStatus::Io);
    assert!(!last_error().is_empty());
}

#[test]
fn mesh_file_round_trip_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("disc.mesh");
    let mesh = eitpad::geometry::disc::generate_disc_mesh(50.0, 300).unwrap();
    eitpad::geometry::io::save_mesh(&mesh, &path).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle: *mut EitpadMesh = ptr::null_mut();
    let status = unsafe { eitpad_mesh_load(cpath.as_ptr(), &mut handle) };
    assert_eq!(status, EitpadStatus::Ok, "{}", last_error());
    unsafe {
        assert_eq!(eitpad_mesh_node_count(handle), mesh.node_count());
        assert_eq!(eitpad_mesh_element_count(handle), mesh.element_count());
        eitpad_mesh_free(handle);
    }
}

#[test]
fn pad_and_plan_on_a_3x3_grid() {
    let mesh = make_cylinder(0.2);
    let pad = make_pad(mesh);
    unsafe {
        assert_eq!(eitpad_pad_electrode_count(pad), 9);
        let mut plan: *mut EitpadPlan = ptr::null_mut();
        assert_eq!(eitpad_plan_default(pad, &mut plan), EitpadStatus::Ok);
        assert_eq!(eitpad_plan_channel_count(plan), 48);
        eitpad_plan_free(plan);
        eitpad_pad_free(pad);
        eitpad_mesh_free(mesh);
    }
}

#[test]
fn solve_fills_the_buffer_and_scales_with_current() {
    let mesh = make_cylinder(0.2);
    let pad = make_pad(mesh);
    let mut plan: *mut EitpadPlan = ptr::null_mut();
    unsafe {
        assert_eq!(eitpad_plan_default(pad, &mut plan), EitpadStatus::Ok);
        let n = eitpad_plan_channel_count(plan);

        // Wrong buffer length is rejected, not truncated.
        let mut short = vec![0.0; n - 1];
        let status = eitpad_solve(mesh, pad, plan, 1e-3, short.as_mut_ptr(), short.len());
        assert_eq!(status, EitpadStatus::InvalidArgument);

        let mut v1 = vec![0.0; n];
        let mut v2 = vec![0.0; n];
        assert_eq!(
            eitpad_solve(mesh, pad, plan, 1e-3, v1.as_mut_ptr(), n),
            EitpadStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(
            eitpad_solve(mesh, pad, plan, 2e-3, v2.as_mut_ptr(), n),
            EitpadStatus::Ok
        );
        assert!(v1.iter().all(|v| v.is_finite()));
        assert!(v1.iter().any(|v| *v != 0.0));
        for (a, b) in v1.iter().zip(&v2) {
            assert!(
                (b - 2.0 * a).abs() <= 1e-12 * a.abs().max(1e-30),
                "doubling the current must double the voltage: {a} vs {b}"
            );
        }

        eitpad_plan_free(plan);
        eitpad_pad_free(pad);
        eitpad_mesh_free(mesh);
    }
}

#[test]
fn reconstruct_returns_a_field_per_element() {
    let mesh = make_cylinder(0.2);
    let pad = make_pad(mesh);
    let mut plan: *mut EitpadPlan = ptr::null_mut();
    unsafe {
        assert_eq!(eitpad_plan_default(pad, &mut plan), EitpadStatus::Ok);
        let n = eitpad_plan_channel_count(plan);
        let elements = eitpad_mesh_element_count(mesh);

        // A zero difference signal reconstructs to the zero field.
        let delta = vec![0.0; n];
        let mut field = vec![1.0; elements];
        let status = eitpad_reconstruct(
            mesh,
            pad,
            plan,
            delta.as_ptr(),
            n,
            0.0, // auto lambda
            0.5,
            field.as_mut_ptr(),
            elements,
        );
        assert_eq!(status, EitpadStatus::Ok, "{}", last_error());
        assert!(field.iter().all(|v| *v == 0.0));

        // A structured signal produces a finite nonzero field.
        let delta: Vec<f64> = (0..n).map(|i| 1e-4 * ((i as f64 * 0.7).sin())).collect();
        let status = eitpad_reconstruct(
            mesh,
            pad,
            plan,
            delta.as_ptr(),
            n,
            0.0,
            0.5,
            field.as_mut_ptr(),
            elements,
        );
        assert_eq!(status, EitpadStatus::Ok, "{}", last_error());
        assert!(field.iter().all(|v| v.is_finite()));
        assert!(field.iter().any(|v| *v != 0.0));

        // Out-of-range regularization exponent is rejected.
        let status = eitpad_reconstruct(
            mesh,
            pad,
            plan,
            delta.as_ptr(),
            n,
            0.0,
            1.5,
            field.as_mut_ptr(),
            elements,
        );
        assert_eq!(status, EitpadStatus::InvalidArgument);

        eitpad_plan_free(plan);
        eitpad_pad_free(pad);
        eitpad_mesh_free(mesh);
    }
}

#[test]
fn pad_from_another_mesh_is_rejected() {
    let coarse = make_cylinder(0.2);
    let fine = {
        let mut mesh: *mut EitpadMesh = ptr::null_mut();
        let status =
            unsafe { eitpad_mesh_cylinder(120.0, 280.0, 12000, 0.2, &mut mesh) };
        assert_eq!(status, EitpadStatus::Ok);
        mesh
    };
    // Pad bound to the fine mesh: its node ids overflow the coarse mesh.
    let pad = make_pad(fine);
    let mut plan: *mut EitpadPlan = ptr::null_mut();
    unsafe {
        assert_eq!(eitpad_plan_default(pad, &mut plan), EitpadStatus::Ok);
        let n = eitpad_plan_channel_count(plan);
        let mut v = vec![0.0; n];
        let status = eitpad_solve(coarse, pad, plan, 1e-3, v.as_mut_ptr(), n);
        assert_eq!(status, EitpadStatus::InvalidArgument);
        assert!(last_error().contains("different mesh"), "{}", last_error());
        eitpad_plan_free(plan);
        eitpad_pad_free(pad);
        eitpad_mesh_free(fine);
        eitpad_mesh_free(coarse);
    }
}

#[test]
fn generated_header_declares_the_surface() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/eitpad.h"
    ))
    .expect("build script generates include/eitpad.h");
    for symbol in [
        "eitpad_version",
        "eitpad_last_error_message",
        "eitpad_mesh_cylinder",
        "eitpad_mesh_load",
        "eitpad_mesh_free",
        "eitpad_pad_place",
        "eitpad_plan_default",
        "eitpad_solve",
        "eitpad_reconstruct",
        "EITPAD_STATUS_OK",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}
