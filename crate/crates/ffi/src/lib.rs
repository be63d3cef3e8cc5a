//! C ABI for the attestation toolkit.
//!
//! Conventions:
//! - Every function returns an `OpatStatus`; `OPAT_OK` means success.
//! - Handles are opaque; free them with the matching `_free` function.
//! - Output buffers are allocated by this library and must be released
//!   with `opat_buffer_free` / `opat_string_free`.
//! - On any non-OK status, `opat_last_error` returns a human-readable
//!   message for the calling thread, valid until its next FFI call.

use opattest_core::analysis::{analyze, Analysis};
use opattest_core::instrument::{instrument, Instrumented};
use opattest_core::measure::{keys, BlobFile, Nonce};
use opattest_core::mini_ir::{parse_program, Program};
use opattest_core::prover::{Machine, RunConfig};
use opattest_core::verifier::verify;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpatStatus {
    /// Success.
    OpatOk = 0,
    /// A required pointer argument was null or a length was invalid.
    OpatErrInvalidArg = 1,
    /// The program text failed to parse or validate.
    OpatErrParse = 2,
    /// Static analysis rejected the program.
    OpatErrAnalysis = 3,
    /// The modeled run hit a runtime error (bad transfer, step limit...).
    OpatErrRuntime = 4,
    /// The requested operation id never executed.
    OpatErrNoOperation = 5,
    /// The evidence buffer failed to decode.
    OpatErrDecode = 6,
    /// Evidence decoded but verification rejected it; the report JSON
    /// lists the failure classes.
    OpatVerifyFailed = 7,
    /// An internal panic was caught at the boundary.
    OpatErrInternal = 8,
}

use OpatStatus::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error message had NUL").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Message for the last non-OK status on this thread. The pointer stays
/// valid until the thread's next call into this library.
#[no_mangle]
pub extern "C" fn opat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// A parsed, analyzed, instrumented program ready to attest or verify.
pub struct OpatProgram {
    program: Program,
    analysis: Analysis,
    inst: Instrumented,
}

fn guard(body: impl FnOnce() -> OpatStatus) -> OpatStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            OpatErrInternal
        }
    }
}

/// Parses, validates, analyzes and instruments `source` (a
/// NUL-terminated program text). On success `*out` owns the handle.
#[no_mangle]
pub unsafe extern "C" fn opat_program_load(
    source: *const c_char,
    out: *mut *mut OpatProgram,
) -> OpatStatus {
    guard(|| {
        if source.is_null() || out.is_null() {
            set_error("null argument");
            return OpatErrInvalidArg;
        }
        let text = match CStr::from_ptr(source).to_str() {
            Ok(t) => t.to_owned(),
            Err(_) => {
                set_error("source is not valid UTF-8");
                return OpatErrInvalidArg;
            }
        };
        let program = match parse_program(&text) {
            Ok(p) => p,
            Err(diags) => {
                set_error(
                    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "),
                );
                return OpatErrParse;
            }
        };
        let analysis = match analyze(&program, &text) {
            Ok(a) => a,
            Err(diags) => {
                set_error(
                    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "),
                );
                return OpatErrAnalysis;
            }
        };
        let inst = match instrument(&program, &analysis.sites) {
            Ok(i) => i,
            Err(e) => {
                set_error(e.to_string());
                return OpatErrAnalysis;
            }
        };
        *out = Box::into_raw(Box::new(OpatProgram { program, analysis, inst }));
        OpatOk
    })
}

/// Releases a program handle. Passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn opat_program_free(p: *mut OpatProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Derives the 32-byte verifying (public) key from a 32-byte signing
/// seed.
#[no_mangle]
pub unsafe extern "C" fn opat_public_key(
    seed: *const u8,
    out_public: *mut u8,
) -> OpatStatus {
    guard(|| {
        if seed.is_null() || out_public.is_null() {
            set_error("null argument");
            return OpatErrInvalidArg;
        }
        let mut s = [0u8; 32];
        s.copy_from_slice(std::slice::from_raw_parts(seed, 32));
        let key = keys::generate(Some(s));
        std::slice::from_raw_parts_mut(out_public, 32)
            .copy_from_slice(key.verifying_key().as_bytes());
        OpatOk
    })
}

/// Runs the program on `inputs` and returns the signed evidence for
/// `op_id` as a freshly allocated buffer in `*out_buf` / `*out_len`
/// (release with `opat_buffer_free`). `seed` is the 32-byte signing
/// seed, `nonce` the 16-byte challenge nonce.
#[no_mangle]
pub unsafe extern "C" fn opat_attest(
    p: *const OpatProgram,
    inputs: *const i64,
    n_inputs: usize,
    seed: *const u8,
    nonce: *const u8,
    op_id: u32,
    out_buf: *mut *mut u8,
    out_len: *mut usize,
) -> OpatStatus {
    guard(|| {
        if p.is_null()
            || seed.is_null()
            || nonce.is_null()
            || out_buf.is_null()
            || out_len.is_null()
            || (inputs.is_null() && n_inputs > 0)
        {
            set_error("null argument");
            return OpatErrInvalidArg;
        }
        let p = &*p;
        let inputs = if n_inputs == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(inputs, n_inputs).to_vec()
        };
        let mut s = [0u8; 32];
        s.copy_from_slice(std::slice::from_raw_parts(seed, 32));
        let mut n = Nonce::default();
        n.copy_from_slice(std::slice::from_raw_parts(nonce, 16));
        let cfg = RunConfig::new(keys::generate(Some(s)), n);
        let run = Machine::new(&p.program, &p.inst, inputs, vec![], vec![], cfg).run();
        if let Some(e) = run.error {
            set_error(e.to_string());
            return OpatErrRuntime;
        }
        let Some(file) = run.attestations.get(&op_id) else {
            set_error(format!("operation {op_id} did not run"));
            return OpatErrNoOperation;
        };
        let bytes = file.encode().into_boxed_slice();
        *out_len = bytes.len();
        *out_buf = Box::into_raw(bytes) as *mut u8;
        OpatOk
    })
}

/// Verifies an evidence buffer against the program's analysis, a 32-byte
/// verifying key and the 16-byte nonce issued for this challenge.
/// Returns `OPAT_OK` when the evidence passes, `OPAT_VERIFY_FAILED` when
/// it is rejected. When `report_json` is non-null it receives the full
/// verification report as a JSON string in either case (release with
/// `opat_string_free`).
#[no_mangle]
pub unsafe extern "C" fn opat_verify(
    p: *const OpatProgram,
    blob: *const u8,
    blob_len: usize,
    public_key: *const u8,
    nonce: *const u8,
    report_json: *mut *mut c_char,
) -> OpatStatus {
    guard(|| {
        if p.is_null() || blob.is_null() || public_key.is_null() || nonce.is_null() {
            set_error("null argument");
            return OpatErrInvalidArg;
        }
        let p = &*p;
        let mut pk = [0u8; 32];
        pk.copy_from_slice(std::slice::from_raw_parts(public_key, 32));
        let key = match ed25519_dalek::VerifyingKey::from_bytes(&pk) {
            Ok(k) => k,
            Err(e) => {
                set_error(format!("bad public key: {e}"));
                return OpatErrInvalidArg;
            }
        };
        let mut n = Nonce::default();
        n.copy_from_slice(std::slice::from_raw_parts(nonce, 16));
        let file = match BlobFile::decode(std::slice::from_raw_parts(blob, blob_len)) {
            Ok(f) => f,
            Err(e) => {
                set_error(e.to_string());
                return OpatErrDecode;
            }
        };
        let report = verify(&p.analysis.bundle, &key, &n, &file);
        if !report_json.is_null() {
            let json = CString::new(report.to_json())
                .unwrap_or_else(|_| CString::new("{}").unwrap());
            *report_json = json.into_raw();
        }
        if report.pass {
            OpatOk
        } else {
            set_error(
                report
                    .failures
                    .iter()
                    .map(|f| f.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            );
            OpatVerifyFailed
        }
    })
}

/// Releases a buffer returned by `opat_attest`.
#[no_mangle]
pub unsafe extern "C" fn opat_buffer_free(buf: *mut u8, len: usize) {
    if !buf.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf, len)));
    }
}

/// Releases a string returned by `opat_verify`.
#[no_mangle]
pub unsafe extern "C" fn opat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
