//! Verifier-side TCP client: issue a challenge and verify the returned
//! attestation.

use super::frame::{encode_challenge, Frame, FrameType};
use crate::analysis::AnalysisBundle;
use crate::measure::blob::{BlobFile, Nonce};
use crate::verifier::{verify, VerificationReport};
use ed25519_dalek::VerifyingKey;
use rand::RngCore;
use std::io;
use std::net::{TcpStream, ToSocketAddrs};

/// Sends one challenge and returns the attestation the prover answered
/// with. The nonce must be fresh per call; see [`challenge`].
pub fn challenge_with_nonce<A: ToSocketAddrs>(
    addr: A,
    op_id: u32,
    nonce: &Nonce,
) -> io::Result<BlobFile> {
    let mut stream = TcpStream::connect(addr)?;
    Frame::new(FrameType::Challenge, encode_challenge(op_id, nonce)).write_to(&mut stream)?;
    let resp = Frame::read_from(&mut stream)?;
    match resp.kind {
        FrameType::Attestation => BlobFile::decode(&resp.payload)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string())),
        FrameType::Error => Err(io::Error::other(String::from_utf8_lossy(&resp.payload).into_owned())),
        FrameType::Challenge => {
            Err(io::Error::new(io::ErrorKind::InvalidData, "peer sent a challenge back"))
        }
    }
}

/// Full challenge-response round: draw a fresh random nonce, challenge
/// the prover, and verify the returned evidence against the bundle.
pub fn challenge<A: ToSocketAddrs>(
    addr: A,
    op_id: u32,
    bundle: &AnalysisBundle,
    key: &VerifyingKey,
) -> io::Result<VerificationReport> {
    let mut nonce: Nonce = [0; 16];
    rand::thread_rng().fill_bytes(&mut nonce);
    let file = challenge_with_nonce(addr, op_id, &nonce)?;
    Ok(verify(bundle, key, &nonce, &file))
}
