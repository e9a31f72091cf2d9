use std::ffi::{c_char, CString};
use std::process::Command;
use std::ptr;

use stokes_saddle_ffi::*;

fn assemble(dims: [usize; 3]) -> *mut SspSystem {
    let mut sys = ptr::null_mut();
    let st = unsafe { ssp_system_assemble_channel(dims[0], dims[1], dims[2], 100.0, 0.01, 0, &mut sys) };
    assert_eq!(st, SspStatus::Ok);
    assert!(!sys.is_null());
    sys
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { ssp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn dims_apply_and_rhs() {
    let sys = assemble([4, 2, 2]);
    let (mut n_u, mut n_p) = (0, 0);
    assert_eq!(unsafe { ssp_system_dims(sys, &mut n_u, &mut n_p) }, SspStatus::Ok);
    assert_eq!((n_u, n_p), (3, 45));
    let n = 3 * n_u + n_p;
    let x = vec![0.0; n];
    let mut y = vec![1.0; n];
    assert_eq!(unsafe { ssp_system_apply(sys, x.as_ptr(), y.as_mut_ptr(), n) }, SspStatus::Ok);
    assert!(y.iter().all(|&v| v == 0.0));
    let mut d = vec![0.0; n];
    assert_eq!(unsafe { ssp_system_rhs(sys, d.as_mut_ptr(), n) }, SspStatus::Ok);
    assert!(d.iter().any(|&v| v != 0.0));
    unsafe { ssp_system_free(sys) };
}

#[test]
fn solve_reports_residual() {
    let sys = assemble([4, 2, 2]);
    let n = 3 * 3 + 45;
    let opts = ssp_solve_options_default();
    let mut x = vec![0.0; n];
    let mut stats = SspSolveStats::default();
    let st = unsafe { ssp_solve(sys, &opts, x.as_mut_ptr(), n, &mut stats) };
    assert_eq!(st, SspStatus::Ok, "{}", last_error());
    assert_eq!(stats.converged, 1);
    assert!(stats.rres <= 1e-5 && stats.beta > 0.0 && stats.inner_a_solves > 0);
    unsafe { ssp_system_free(sys) };
}

#[test]
fn errors_are_reported() {
    let mut sys = ptr::null_mut();
    let st = unsafe { ssp_system_assemble_channel(2, 2, 2, -1.0, 0.01, 0, &mut sys) };
    assert_eq!(st, SspStatus::InvalidArgument);
    assert!(sys.is_null());
    assert!(last_error().contains("alpha"));

    let sys = assemble([2, 2, 2]);
    let mut y = vec![0.0; 3];
    let st = unsafe { ssp_system_rhs(sys, y.as_mut_ptr(), y.len()) };
    assert_eq!(st, SspStatus::DimensionMismatch);
    assert_eq!(unsafe { ssp_system_dims(sys, ptr::null_mut(), ptr::null_mut()) }, SspStatus::NullPointer);
    assert_eq!(unsafe { ssp_system_dims(ptr::null(), ptr::null_mut(), ptr::null_mut()) }, SspStatus::NullPointer);
    unsafe { ssp_system_free(sys) };
    unsafe { ssp_system_free(ptr::null_mut()) };
}

#[test]
fn export_writes_files() {
    let sys = assemble([2, 2, 2]);
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ssp_system_export(sys, path.as_ptr()) }, SspStatus::Ok);
    assert!(dir.path().join("A.mtx").exists() && dir.path().join("Q.mtx").exists());
    unsafe { ssp_system_free(sys) };
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/stokes_saddle.h");
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror", header]).output() else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
