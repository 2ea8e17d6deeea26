use std::ffi::{CStr, CString};
use std::ptr;

use csa_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(csa_last_error()) }.to_string_lossy().into_owned()
}

fn simulate(beta: &[f64], count: usize, seed: u64) -> *mut CsaSequence {
    let mut seq = ptr::null_mut();
    let s = unsafe { csa_simulate(0.05, beta.as_ptr(), beta.len(), 2, 1.0, count, seed, &mut seq) };
    assert_eq!(s, CsaStatus::Ok, "{}", last_error());
    seq
}

#[test]
fn simulate_replay_fit_round_trip() {
    let seq = simulate(&[3.0, 8.0], 300, 4);
    unsafe {
        assert_eq!(csa_sequence_len(seq), 300);
        assert_eq!(csa_sequence_dim(seq), 2);
        assert!(!csa_sequence_jammed(seq));
        let mut coords = vec![0.0; 600];
        assert_eq!(csa_sequence_coords(seq, coords.as_mut_ptr(), 600), CsaStatus::Ok);
        assert!(coords.iter().all(|c| c.abs() <= 0.5));
        assert_eq!(csa_sequence_coords(seq, coords.as_mut_ptr(), 10), CsaStatus::BufferTooSmall);
        assert!(last_error().contains("need 600"));

        let mut traj = ptr::null_mut();
        assert_eq!(csa_replay(seq, 2, 0.0, &mut traj), CsaStatus::Ok);
        assert_eq!(csa_trajectory_len(traj), 300);
        assert_eq!(csa_trajectory_order(traj), 2);
        let mut t = [0u64; 3];
        assert_eq!(csa_trajectory_t(traj, t.as_mut_ptr(), 3), CsaStatus::Ok);
        assert_eq!(t.iter().sum::<u64>(), 300);

        let mut ll = 0.0;
        assert_eq!(csa_log_likelihood(traj, [3.0, 8.0].as_ptr(), 2, &mut ll), CsaStatus::Ok);
        assert!(ll.is_finite());
        assert_eq!(csa_log_likelihood(traj, [3.0].as_ptr(), 1, &mut ll), CsaStatus::InvalidArgument);
        assert_eq!(csa_log_likelihood(traj, [-3.0, 1.0].as_ptr(), 2, &mut ll), CsaStatus::InvalidArgument);

        let mut fit = ptr::null_mut();
        assert_eq!(csa_fit(traj, &mut fit), CsaStatus::Ok, "{}", last_error());
        assert!(csa_fit_converged(fit));
        let mut b = [0.0; 2];
        assert_eq!(csa_fit_beta(fit, b.as_mut_ptr(), 2), CsaStatus::Ok);
        let (mut lo, mut hi) = ([0.0; 2], [0.0; 2]);
        assert_eq!(csa_fit_intervals(fit, 0.95, lo.as_mut_ptr(), hi.as_mut_ptr(), 2), CsaStatus::Ok);
        for j in 0..2 {
            assert!(lo[j] < b[j] && b[j] < hi[j]);
        }
        assert_eq!(
            csa_fit_intervals(fit, 1.5, lo.as_mut_ptr(), hi.as_mut_ptr(), 2),
            CsaStatus::InvalidArgument
        );
        csa_fit_free(fit);
        csa_trajectory_free(traj);
        csa_sequence_free(seq);
    }
}

#[test]
fn file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("s.csv").to_str().unwrap()).unwrap();
    let seq = simulate(&[2.0], 50, 9);
    unsafe {
        assert_eq!(csa_sequence_write(seq, path.as_ptr()), CsaStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(csa_sequence_read(path.as_ptr(), &mut back), CsaStatus::Ok);
        let (mut a, mut b) = (vec![0.0; 100], vec![0.0; 100]);
        csa_sequence_coords(seq, a.as_mut_ptr(), 100);
        csa_sequence_coords(back, b.as_mut_ptr(), 100);
        assert_eq!(a, b);
        csa_sequence_free(back);

        let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(csa_sequence_read(missing.as_ptr(), &mut out), CsaStatus::Io);
        assert!(out.is_null());
        let garbage = dir.path().join("bad.csv");
        std::fs::write(&garbage, "not a header\n").unwrap();
        let garbage = CString::new(garbage.to_str().unwrap()).unwrap();
        assert_eq!(csa_sequence_read(garbage.as_ptr(), &mut out), CsaStatus::Parse);
        assert!(last_error().contains(":1:"));
        assert_eq!(csa_sequence_read(ptr::null(), &mut out), CsaStatus::NullPointer);

        let mut traj = ptr::null_mut();
        assert_eq!(csa_replay(seq, 0, 0.0, &mut traj), CsaStatus::Data);
        csa_sequence_free(seq);
    }
}

#[test]
fn hard_core_data_has_no_positive_mle() {
    let seq = simulate(&[], 40, 2);
    unsafe {
        let mut traj = ptr::null_mut();
        assert_eq!(csa_replay(seq, 1, 0.0, &mut traj), CsaStatus::Ok);
        let mut fit = ptr::null_mut();
        assert_eq!(csa_fit(traj, &mut fit), CsaStatus::NoPositiveMle);
        assert!(last_error().contains("beta_1"));
        assert!(!fit.is_null());
        assert!(!csa_fit_converged(fit));
        csa_fit_free(fit);
        csa_trajectory_free(traj);
        csa_sequence_free(seq);
    }
}

#[test]
fn invalid_arguments_and_nulls() {
    let mut seq = ptr::null_mut();
    unsafe {
        assert_eq!(csa_simulate(-1.0, ptr::null(), 0, 2, 1.0, 5, 1, &mut seq), CsaStatus::InvalidArgument);
        assert_eq!(csa_simulate(0.1, ptr::null(), 0, 7, 1.0, 5, 1, &mut seq), CsaStatus::InvalidArgument);
        assert_eq!(csa_simulate(0.1, ptr::null(), 2, 2, 1.0, 5, 1, &mut seq), CsaStatus::NullPointer);
        assert_eq!(
            csa_simulate(0.1, [0.0].as_ptr(), 1, 2, 1.0, 5, 1, &mut seq),
            CsaStatus::InvalidArgument
        );
        assert!(seq.is_null());
        assert_eq!(csa_sequence_len(ptr::null()), 0);
        csa_sequence_free(ptr::null_mut());
        csa_trajectory_free(ptr::null_mut());
        csa_fit_free(ptr::null_mut());
        assert_eq!(CStr::from_ptr(csa_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/csa.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from csa.h");
    }
    assert!(header.contains("typedef struct CsaSequence CsaSequence;"));
    assert!(header.contains("CSA_STATUS_NO_POSITIVE_MLE = 7"));
}

/// Compiles and runs the C example against the shared library when a C
/// compiler is available.
#[test]
fn c_program_links_and_runs() {
    use std::process::Command;
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    if !lib_dir.join("libcsa_ffi.so").exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or shared library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("examples/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(lib_dir)
        .arg("-lcsa_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).env("LD_LIBRARY_PATH", lib_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("beta_1 = "));
}
