//! Wire framing: one byte of frame type, a four-byte big-endian payload
//! length, then the payload. Payloads are capped at 1 MiB so a hostile
//! peer cannot make us allocate unbounded memory.

use std::io::{self, Read, Write};

pub const MAX_PAYLOAD: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameType {
    /// Verifier to prover: 4-byte big-endian operation id followed by a
    /// 16-byte nonce.
    Challenge = 1,
    /// Prover to verifier: an encoded attestation file.
    Attestation = 2,
    /// Either direction: a UTF-8 error message.
    Error = 3,
}

impl FrameType {
    fn from_byte(b: u8) -> Option<FrameType> {
        match b {
            1 => Some(FrameType::Challenge),
            2 => Some(FrameType::Attestation),
            3 => Some(FrameType::Error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameType, payload: Vec<u8>) -> Frame {
        Frame { kind, payload }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "payload too large"));
        }
        w.write_all(&[self.kind as u8])?;
        w.write_all(&(self.payload.len() as u32).to_be_bytes())?;
        w.write_all(&self.payload)?;
        w.flush()
    }

    pub fn read_from<R: Read>(r: &mut R) -> io::Result<Frame> {
        let mut head = [0u8; 5];
        r.read_exact(&mut head)?;
        let kind = FrameType::from_byte(head[0])
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "unknown frame type"))?;
        let len = u32::from_be_bytes([head[1], head[2], head[3], head[4]]) as usize;
        if len > MAX_PAYLOAD {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "frame length exceeds cap"));
        }
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Frame { kind, payload })
    }
}

/// Challenge payload helpers.
pub fn encode_challenge(op_id: u32, nonce: &[u8; 16]) -> Vec<u8> {
    let mut v = Vec::with_capacity(20);
    v.extend_from_slice(&op_id.to_be_bytes());
    v.extend_from_slice(nonce);
    v
}

pub fn decode_challenge(payload: &[u8]) -> Option<(u32, [u8; 16])> {
    if payload.len() != 20 {
        return None;
    }
    let op_id = u32::from_be_bytes(payload[..4].try_into().ok()?);
    let nonce: [u8; 16] = payload[4..].try_into().ok()?;
    Some((op_id, nonce))
}
