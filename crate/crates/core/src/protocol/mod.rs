//! Challenge-response protocol over TCP. The verifier picks a fresh
//! nonce per challenge; the prover binds each attestation segment to it,
//! so captured evidence cannot be replayed against a later challenge.

pub mod client;
pub mod frame;
pub mod server;

pub use client::{challenge, challenge_with_nonce};
pub use frame::{Frame, FrameType, MAX_PAYLOAD};
pub use server::{serve, serve_once, ProverConfig, ServerHandle};
