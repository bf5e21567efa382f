use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use nullgvn_ffi::*;

const LISTING: &str = include_str!("../../core/corpus/equal_paths.ir");

fn parse(text: &str, transformed: bool) -> Result<*mut NgProgram, (NgStatus, String)> {
    let src = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    match unsafe { ng_program_parse(src.as_ptr(), transformed, &mut out) } {
        NgStatus::Ok => Ok(out),
        s => Err((s, last_error())),
    }
}

fn last_error() -> String {
    let p = ng_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn take_string(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { ng_string_free(p) };
    s
}

fn report(p: *const NgProgram, level: NgLevel) -> *mut NgReport {
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ng_analyze(p, level, NgSolver::Worklist, &mut r) }, NgStatus::Ok);
    r
}

#[test]
fn analysis_through_handles() {
    let p = parse(LISTING, false).unwrap();
    let ssa = report(p, NgLevel::Ssa);
    let gvn = report(p, NgLevel::Gvn);
    unsafe {
        assert_eq!(ng_report_asserts_total(ssa), 1);
        assert_eq!(ng_report_asserts_unproved(ssa), 1);
        assert_eq!(ng_report_asserts_unproved(gvn), 0);
        let mut v = NgVerdict::Unproved;
        assert_eq!(ng_report_verdict(gvn, 0, &mut v), NgStatus::Ok);
        assert_eq!(v, NgVerdict::Safe);
        assert_eq!(ng_report_verdict(gvn, 1, &mut v), NgStatus::OutOfRange);
        assert!(last_error().contains("assertion 1"));

        let mut json = ptr::null_mut();
        assert_eq!(ng_report_json(ssa, &mut json), NgStatus::Ok);
        let value: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(value["per_assert"][0]["verdict"], "UNPROVED");

        ng_report_free(ssa);
        ng_report_free(gvn);
        ng_program_free(p);
    }
}

#[test]
fn transformed_text_reparses() {
    let p = parse(LISTING, false).unwrap();
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(ng_program_transform(p, NgLevel::Gvn, &mut t), NgStatus::Ok);
        let mut text = ptr::null_mut();
        assert_eq!(ng_program_print(t, &mut text), NgStatus::Ok);
        let text = take_string(text);
        assert!(text.contains("gvnTmp__gvn"));

        let (status, _) = parse(&text, false).unwrap_err();
        assert_eq!(status, NgStatus::ParseError);
        let back = parse(&text, true).unwrap();
        assert_eq!(ng_report_asserts_unproved(report(back, NgLevel::None)), 0);
        ng_program_free(back);
        ng_program_free(t);
        ng_program_free(p);
    }
}

#[test]
fn errors_are_reported() {
    let (status, msg) = parse("procedure main() { L1: goto L9; }", false).unwrap_err();
    assert_eq!(status, NgStatus::ParseError);
    assert!(msg.contains("L9"), "{msg}");

    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(ng_program_parse(ptr::null(), false, &mut out), NgStatus::NullArgument);
        let bad = [0xffu8, 0];
        assert_eq!(ng_program_parse(bad.as_ptr().cast(), false, &mut out), NgStatus::InvalidUtf8);
        let mut r = ptr::null_mut();
        assert_eq!(ng_analyze(ptr::null(), NgLevel::Gvn, NgSolver::Naive, &mut r), NgStatus::NullArgument);
        assert_eq!(ng_report_asserts_total(ptr::null()), 0);
        ng_program_free(ptr::null_mut());
        ng_report_free(ptr::null_mut());
        ng_string_free(ptr::null_mut());
    }
    // A successful call clears the message.
    let p = parse(LISTING, false).unwrap();
    assert!(ng_last_error().is_null());
    unsafe { ng_program_free(p) };
}

#[test]
fn generated_programs_agree_with_core() {
    for seed in 0..20 {
        let mut p = ptr::null_mut();
        unsafe {
            assert_eq!(ng_program_generate(seed, &mut p), NgStatus::Ok);
            let r = report(p, NgLevel::Gvn);
            let core = nullgvn::corpus::generate(&nullgvn::corpus::GeneratorConfig::default().with_seed(seed)).unwrap();
            let expected = nullgvn::pipeline::analyze(&core, Default::default()).unwrap().report;
            assert_eq!(ng_report_asserts_unproved(r), expected.asserts_unproved);
            ng_report_free(r);
            ng_program_free(p);
        }
    }
}

const C_CLIENT: &str = r#"
#include <stdio.h>
#include <string.h>
#include "nullgvn.h"

static const char *SRC =
    "procedure main() { var x; var y; L1: x := new(1); y := x; assert (y != Null); return; }";

int main(void) {
    NgProgram *p = NULL;
    NgReport *r = NULL;
    if (ng_program_parse(SRC, false, &p) != NG_STATUS_OK) return 10;
    if (ng_analyze(p, NG_LEVEL_GVN, NG_SOLVER_WORKLIST, &r) != NG_STATUS_OK) return 11;
    if (ng_report_asserts_total(r) != 1 || ng_report_asserts_unproved(r) != 0) return 12;
    NgProgram *bad = NULL;
    if (ng_program_parse("procedure", false, &bad) != NG_STATUS_PARSE_ERROR) return 13;
    if (ng_last_error() == NULL || strlen(ng_last_error()) == 0) return 14;
    ng_report_free(r);
    ng_program_free(p);
    puts("ok");
    return 0;
}
"#;

#[test]
fn header_serves_a_c_client() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let lib_dir: PathBuf = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    assert!(lib_dir.join("libnullgvn_ffi.so").exists() || lib_dir.join("libnullgvn_ffi.dylib").exists());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let exe = dir.path().join("client");
    std::fs::write(&src, C_CLIENT).unwrap();
    let cc = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lnullgvn_ffi")
        .output()
        .unwrap();
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).env("DYLD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
