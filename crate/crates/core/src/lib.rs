//! Operation-scoped execution attestation over MiniIR modeled programs.
//!
//! The pipeline: parse a MiniIR program, statically analyze it (control
//! flow, points-to, critical variables, instrumentation sites), attach
//! instrumentation tags, execute it on the modeled machine while the
//! measurement engine records control and data events, emit a signed
//! attestation blob, and verify the blob by abstract execution against
//! the exported analysis bundle.

pub mod analysis;
pub mod diag;
pub mod instrument;
pub mod measure;
pub mod mini_ir;
pub mod protocol;
pub mod prover;
pub mod scenario;
pub mod verifier;
