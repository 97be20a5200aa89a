//! C ABI over the checker, machine and elaborator.
//!
//! Handles are opaque and owned by the caller until passed to the matching
//! `_free`. Every fallible call returns an [`OrdStatus`]; the message for the
//! last failure on the calling thread is available from [`ord_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ordcbpv::affine::{check_affine, AffineMode, ExceptionConfig};
use ordcbpv::elaborate::affine_program;
use ordcbpv::harness::{declared_type, with_deep_stack};
use ordcbpv::machine::{run, Outcome};
use ordcbpv::surface::{parse_program, parse_type, pretty_print, Dialect};
use ordcbpv::syntax::{erase_all, erase_polarities, polarity, Expr, Type};
use ordcbpv::typecheck::{check_core, Mode};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrdStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    TypeError = 4,
    Stuck = 5,
    FuelExhausted = 6,
    InvalidArgument = 7,
    Panic = 8,
}

/// `Ordered` and `Linear` read core source, `NoMove` and `WithMove` affine.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrdMode {
    Ordered = 0,
    Linear = 1,
    NoMove = 2,
    WithMove = 3,
}

/// A checked program: its closed target term and type.
pub struct OrdProgram {
    target: Expr,
    ty: Type,
}

/// Result of running a program to a final state.
pub struct OrdRun {
    value: CString,
    freelist: Vec<u32>,
    steps: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: OrdStatus, msg: impl Into<String>) -> OrdStatus {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
    status
}

fn guard(f: impl FnOnce() -> Result<(), (OrdStatus, String)>) -> OrdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OrdStatus::Ok,
        Ok(Err((s, m))) => fail(s, m),
        Err(_) => fail(OrdStatus::Panic, "internal panic"),
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, (OrdStatus, String)> {
    if p.is_null() {
        return Err((OrdStatus::NullArgument, "null string".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (OrdStatus::InvalidUtf8, e.to_string()))
}

fn build(src: &str, mode: OrdMode, ty: Option<&str>) -> Result<OrdProgram, (OrdStatus, String)> {
    let dialect = match mode {
        OrdMode::Ordered | OrdMode::Linear => Dialect::Core,
        OrdMode::NoMove | OrdMode::WithMove => Dialect::Affine,
    };
    let parse_err = |e: String| (OrdStatus::ParseError, e);
    let e = parse_program(src, dialect).map_err(|e| parse_err(e.to_string()))?;
    let ty = match ty {
        Some(t) => parse_type(t).map_err(|e| parse_err(e.to_string()))?,
        None => declared_type(src).map_err(parse_err)?,
    };
    let type_err = |e: String| (OrdStatus::TypeError, e);
    let (target, ty) = match mode {
        OrdMode::Ordered | OrdMode::Linear => {
            let m = if mode == OrdMode::Ordered { Mode::Ordered } else { Mode::Linear };
            let d = check_core(&vec![], &e, &ty, m).map_err(|e| type_err(e.to_string()))?;
            (d.to_expr(), ty)
        }
        OrdMode::NoMove | OrdMode::WithMove => {
            let m = if mode == OrdMode::NoMove { AffineMode::NoMove } else { AffineMode::WithMove };
            let cfg = ExceptionConfig::default();
            let d = check_affine(&vec![], &e, &ty, m, &cfg).map_err(|e| type_err(e.to_string()))?;
            affine_program(&d, m, &cfg).map_err(|e| type_err(e.to_string()))?
        }
    };
    Ok(OrdProgram { target, ty })
}

/// Parses and typechecks `source` in `mode`. `ty` may be null, in which case
/// a `-- type:` header or `1` is used. On success `*out` owns a new program.
///
/// # Safety
/// `source` and a non-null `ty` must be NUL-terminated strings; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn ord_program_new(
    source: *const c_char,
    mode: OrdMode,
    ty: *const c_char,
    out: *mut *mut OrdProgram,
) -> OrdStatus {
    guard(|| {
        if out.is_null() {
            return Err((OrdStatus::NullArgument, "null out pointer".into()));
        }
        *out = ptr::null_mut();
        let src = text(source)?.to_owned();
        let ty = if ty.is_null() { None } else { Some(text(ty)?.to_owned()) };
        let p = with_deep_stack(move || build(&src, mode, ty.as_deref()))?;
        *out = Box::into_raw(Box::new(p));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or come from [`ord_program_new`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn ord_program_free(p: *mut OrdProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Writes the program's target term as a newly allocated string; release it
/// with [`ord_string_free`].
///
/// # Safety
/// `p` must be a live program and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ord_program_target(p: *const OrdProgram, out: *mut *mut c_char) -> OrdStatus {
    guard(|| {
        if p.is_null() || out.is_null() {
            return Err((OrdStatus::NullArgument, "null argument".into()));
        }
        let p = &*p;
        let s = format!("-- type: {}\n{}\n", p.ty, pretty_print(&erase_polarities(&p.target)));
        *out = CString::new(s).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// Runs the program from the `len` resources at `freelist` for at most
/// `fuel` steps. On success `*out` owns a new run.
///
/// # Safety
/// `p` must be a live program, `freelist` valid for `len` reads (or null
/// with `len == 0`), and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ord_program_run(
    p: *const OrdProgram,
    freelist: *const u32,
    len: usize,
    fuel: usize,
    out: *mut *mut OrdRun,
) -> OrdStatus {
    guard(|| {
        if p.is_null() || out.is_null() || (freelist.is_null() && len > 0) {
            return Err((OrdStatus::NullArgument, "null argument".into()));
        }
        *out = ptr::null_mut();
        let l: Vec<u32> = if len == 0 {
            vec![]
        } else {
            std::slice::from_raw_parts(freelist, len).to_vec()
        };
        let p = &*p;
        let (e, pol) = (p.target.clone(), polarity(&p.ty));
        let r = with_deep_stack(move || {
            let (o, tr) = run(&e, pol, l, fuel, None).map_err(|e| (OrdStatus::InvalidArgument, e.to_string()))?;
            match o {
                Outcome::Final { value, freelist } => Ok(OrdRun {
                    value: CString::new(pretty_print(&erase_all(&value))).unwrap_or_default(),
                    freelist,
                    steps: tr.steps(),
                }),
                Outcome::Stuck { reason, .. } => Err((OrdStatus::Stuck, reason)),
                Outcome::FuelExhausted(_) => Err((OrdStatus::FuelExhausted, format!("no final state within {fuel} steps"))),
            }
        })?;
        *out = Box::into_raw(Box::new(r));
        Ok(())
    })
}

/// # Safety
/// `r` must be null or come from [`ord_program_run`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn ord_run_free(r: *mut OrdRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// The final value, valid until the run is freed.
///
/// # Safety
/// `r` must be a live run.
#[no_mangle]
pub unsafe extern "C" fn ord_run_value(r: *const OrdRun) -> *const c_char {
    if r.is_null() {
        return ptr::null();
    }
    (*r).value.as_ptr()
}

/// # Safety
/// `r` must be a live run.
#[no_mangle]
pub unsafe extern "C" fn ord_run_steps(r: *const OrdRun) -> usize {
    if r.is_null() {
        return 0;
    }
    (*r).steps
}

/// Final freelist length; the entries are at [`ord_run_freelist`].
///
/// # Safety
/// `r` must be a live run.
#[no_mangle]
pub unsafe extern "C" fn ord_run_freelist_len(r: *const OrdRun) -> usize {
    if r.is_null() {
        return 0;
    }
    (*r).freelist.len()
}

/// # Safety
/// `r` must be a live run.
#[no_mangle]
pub unsafe extern "C" fn ord_run_freelist(r: *const OrdRun) -> *const u32 {
    if r.is_null() {
        return ptr::null();
    }
    (*r).freelist.as_ptr()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ord_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread; empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ord_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
