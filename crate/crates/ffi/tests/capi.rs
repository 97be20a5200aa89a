use std::ffi::{CStr, CString};
use std::ptr;

use ordcbpv_ffi::*;

const TWO: &str = "match new () {\n  inl r -> match new () { inl s -> delete s; delete r | inr i -> i; delete r }\n| inr i -> i\n}";
const THREE: &str = include_str!("../../core/corpus/three_alloc.afn");
const P: &str = include_str!("../../core/corpus/counterexample_p.ord");

fn program(src: &str, mode: OrdMode) -> Result<*mut OrdProgram, (OrdStatus, String)> {
    let src = CString::new(src).unwrap();
    let mut p = ptr::null_mut();
    let s = unsafe { ord_program_new(src.as_ptr(), mode, ptr::null(), &mut p) };
    if s == OrdStatus::Ok {
        Ok(p)
    } else {
        assert!(p.is_null());
        let msg = unsafe { CStr::from_ptr(ord_last_error()) }.to_str().unwrap().to_owned();
        Err((s, msg))
    }
}

fn run(p: *const OrdProgram, l: &[u32]) -> (String, Vec<u32>) {
    let mut r = ptr::null_mut();
    let s = unsafe { ord_program_run(p, l.as_ptr(), l.len(), 100_000, &mut r) };
    assert_eq!(s, OrdStatus::Ok);
    unsafe {
        let v = CStr::from_ptr(ord_run_value(r)).to_str().unwrap().to_owned();
        let fl = std::slice::from_raw_parts(ord_run_freelist(r), ord_run_freelist_len(r)).to_vec();
        assert!(ord_run_steps(r) > 0);
        ord_run_free(r);
        (v, fl)
    }
}

#[test]
fn ordered_program_restores_freelist() {
    let p = program(TWO, OrdMode::Ordered).unwrap();
    assert_eq!(run(p, &[0, 1]), ("()".into(), vec![0, 1]));
    assert_eq!(run(p, &[]), ("()".into(), vec![]));
    unsafe { ord_program_free(p) };
}

#[test]
fn counterexample_needs_linear_mode() {
    let (s, msg) = program(P, OrdMode::Ordered).unwrap_err();
    assert_eq!(s, OrdStatus::TypeError);
    assert!(!msg.is_empty());
    let p = program(P, OrdMode::Linear).unwrap();
    assert_eq!(run(p, &[0, 1]), ("()".into(), vec![1, 0]));
    unsafe { ord_program_free(p) };
}

#[test]
fn affine_program_unwinds() {
    let p = program(THREE, OrdMode::NoMove).unwrap();
    assert_eq!(run(p, &[0, 1]), ("inr ()".into(), vec![0, 1]));
    assert_eq!(run(p, &[0, 1, 2]), ("inl ()".into(), vec![0, 1, 2]));
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ord_program_target(p, &mut s) }, OrdStatus::Ok);
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    assert!(text.starts_with("-- type: "));
    unsafe {
        ord_string_free(s);
        ord_program_free(p);
    }
}

#[test]
fn error_codes() {
    assert_eq!(program("match (", OrdMode::Ordered).unwrap_err().0, OrdStatus::ParseError);
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { ord_program_new(ptr::null(), OrdMode::Ordered, ptr::null(), &mut p) },
        OrdStatus::NullArgument
    );
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { ord_program_new(bad.as_ptr().cast(), OrdMode::Ordered, ptr::null(), &mut p) },
        OrdStatus::InvalidUtf8
    );
    let q = program(TWO, OrdMode::Ordered).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ord_program_run(q, ptr::null(), 0, 3, &mut r) }, OrdStatus::FuelExhausted);
    assert!(r.is_null());
    unsafe {
        ord_program_free(q);
        ord_program_free(ptr::null_mut());
        ord_run_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/ordcbpv.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
