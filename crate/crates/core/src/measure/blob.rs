//! Attestation blob encoding, signing, and the segment chain.
//!
//! All integers are little-endian. One segment:
//!
//! ```text
//! version u8 | op_id u32 | segment_index u32 | prev_hash [32] | nonce [16]
//! | addr_bytes u32 | addresses (8 bytes each)
//! | bit_len u32 (bits) | packed branch bits (LSB-first)
//! | ret_hash [32]
//! | cvi_flag u8 | if set: count u8, then (variable_id u64, ret_ctx u64) pairs
//! | sub_count u16 | interrupt sub-records
//! | sig_len u16 | Ed25519 signature over everything before it
//! ```
//!
//! A sub-record covers one interrupt handler invocation:
//!
//! ```text
//! irq_id u32 | handler_entry u64 | resume_addr u64
//! | addr_bytes u32 | addresses | bit_len u32 | bits | ret_hash [32]
//! | sub_count u16 | nested sub-records
//! ```
//!
//! `prev_hash` chains flush segments of one attestation run: segment 0
//! uses all zeroes, segment i+1 carries the BLAKE2s-256 digest of segment
//! i's pre-signature bytes. The same digest doubles as the segment id.

use super::hash::{ReturnHash, HASH_LEN};
use super::trace::{BitTrace, Traces};
use blake2::{Blake2s256, Digest};
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use thiserror::Error;

pub const BLOB_VERSION: u8 = 1;
pub const NONCE_LEN: usize = 16;
/// Default trace capacity before a segment is flushed.
pub const SEGMENT_CAPACITY: usize = 4096;

pub type Nonce = [u8; NONCE_LEN];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubBlob {
    pub irq_id: u32,
    pub handler_entry: u64,
    pub resume_addr: u64,
    pub traces: Traces,
    pub ret_hash: ReturnHash,
    pub children: Vec<SubBlob>,
}

/// (variable id, return-address context) pair recorded on a failed value
/// check.
pub type CviRecord = (u64, u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blob {
    pub version: u8,
    pub op_id: u32,
    pub segment_index: u32,
    pub prev_hash: ReturnHash,
    pub nonce: Nonce,
    pub traces: Traces,
    pub ret_hash: ReturnHash,
    pub cvi_flag: bool,
    pub cvi_records: Vec<CviRecord>,
    pub subs: Vec<SubBlob>,
    pub signature: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("blob truncated at offset {0}")]
    Truncated(usize),
    #[error("unsupported blob version {0}")]
    Version(u8),
    #[error("trailing garbage after blob ({0} bytes)")]
    Trailing(usize),
    #[error("cvi record count {0} exceeds capacity")]
    CviOverflow(usize),
    #[error("malformed bit trace length")]
    BitLength,
    #[error("bad file magic")]
    Magic,
}

fn put_traces(out: &mut Vec<u8>, t: &Traces) {
    out.extend_from_slice(&((t.addrs.len() * 8) as u32).to_le_bytes());
    for a in &t.addrs {
        out.extend_from_slice(&a.to_le_bytes());
    }
    out.extend_from_slice(&t.bits.len.to_le_bytes());
    out.extend_from_slice(&t.bits.bytes);
}

fn put_sub(out: &mut Vec<u8>, s: &SubBlob) {
    out.extend_from_slice(&s.irq_id.to_le_bytes());
    out.extend_from_slice(&s.handler_entry.to_le_bytes());
    out.extend_from_slice(&s.resume_addr.to_le_bytes());
    put_traces(out, &s.traces);
    out.extend_from_slice(&s.ret_hash);
    out.extend_from_slice(&(s.children.len() as u16).to_le_bytes());
    for c in &s.children {
        put_sub(out, c);
    }
}

impl Blob {
    /// Everything that is signed: the blob minus the trailing signature.
    pub fn presign_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(self.version);
        out.extend_from_slice(&self.op_id.to_le_bytes());
        out.extend_from_slice(&self.segment_index.to_le_bytes());
        out.extend_from_slice(&self.prev_hash);
        out.extend_from_slice(&self.nonce);
        put_traces(&mut out, &self.traces);
        out.extend_from_slice(&self.ret_hash);
        out.push(self.cvi_flag as u8);
        if self.cvi_flag {
            out.push(self.cvi_records.len() as u8);
            for (var, ctx) in &self.cvi_records {
                out.extend_from_slice(&var.to_le_bytes());
                out.extend_from_slice(&ctx.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.subs.len() as u16).to_le_bytes());
        for s in &self.subs {
            put_sub(&mut out, s);
        }
        out
    }

    /// Digest chaining this segment to the next one.
    pub fn chain_hash(&self) -> ReturnHash {
        let mut h = Blake2s256::new();
        h.update(self.presign_bytes());
        h.finalize().into()
    }

    pub fn sign(&mut self, key: &SigningKey) {
        let sig: Signature = key.sign(&self.presign_bytes());
        self.signature = sig.to_bytes().to_vec();
    }

    pub fn verify_signature(&self, key: &VerifyingKey) -> bool {
        let Ok(bytes): Result<[u8; 64], _> = self.signature.clone().try_into() else {
            return false;
        };
        key.verify(&self.presign_bytes(), &Signature::from_bytes(&bytes)).is_ok()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.presign_bytes();
        out.extend_from_slice(&(self.signature.len() as u16).to_le_bytes());
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader { buf, pos: 0 };
        let blob = r.blob()?;
        if r.pos != buf.len() {
            return Err(CodecError::Trailing(buf.len() - r.pos));
        }
        Ok(blob)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.buf.len() {
            return Err(CodecError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn hash(&mut self) -> Result<ReturnHash, CodecError> {
        Ok(self.take(HASH_LEN)?.try_into().unwrap())
    }

    fn traces(&mut self) -> Result<Traces, CodecError> {
        let addr_bytes = self.u32()? as usize;
        if addr_bytes % 8 != 0 {
            return Err(CodecError::Truncated(self.pos));
        }
        let mut addrs = Vec::with_capacity(addr_bytes / 8);
        for _ in 0..addr_bytes / 8 {
            addrs.push(self.u64()?);
        }
        let bit_len = self.u32()?;
        let nbytes = (bit_len as usize + 7) / 8;
        let bytes = self.take(nbytes)?.to_vec();
        // Reject set padding bits so every trace has one encoding.
        if bit_len % 8 != 0 {
            let last = *bytes.last().unwrap_or(&0);
            if last >> (bit_len % 8) != 0 {
                return Err(CodecError::BitLength);
            }
        }
        Ok(Traces { addrs, bits: BitTrace { bytes, len: bit_len } })
    }

    fn sub(&mut self, depth: u8) -> Result<SubBlob, CodecError> {
        if depth > 16 {
            return Err(CodecError::Truncated(self.pos));
        }
        let irq_id = self.u32()?;
        let handler_entry = self.u64()?;
        let resume_addr = self.u64()?;
        let traces = self.traces()?;
        let ret_hash = self.hash()?;
        let n = self.u16()?;
        let mut children = Vec::with_capacity(n as usize);
        for _ in 0..n {
            children.push(self.sub(depth + 1)?);
        }
        Ok(SubBlob { irq_id, handler_entry, resume_addr, traces, ret_hash, children })
    }

    fn blob(&mut self) -> Result<Blob, CodecError> {
        let version = self.u8()?;
        if version != BLOB_VERSION {
            return Err(CodecError::Version(version));
        }
        let op_id = self.u32()?;
        let segment_index = self.u32()?;
        let prev_hash = self.hash()?;
        let nonce: Nonce = self.take(NONCE_LEN)?.try_into().unwrap();
        let traces = self.traces()?;
        let ret_hash = self.hash()?;
        let cvi_flag = match self.u8()? {
            0 => false,
            1 => true,
            _ => return Err(CodecError::Truncated(self.pos - 1)),
        };
        let mut cvi_records = Vec::new();
        if cvi_flag {
            let n = self.u8()?;
            for _ in 0..n {
                cvi_records.push((self.u64()?, self.u64()?));
            }
        }
        let sub_count = self.u16()?;
        let mut subs = Vec::with_capacity(sub_count as usize);
        for _ in 0..sub_count {
            subs.push(self.sub(0)?);
        }
        let sig_len = self.u16()? as usize;
        let signature = self.take(sig_len)?.to_vec();
        Ok(Blob {
            version,
            op_id,
            segment_index,
            prev_hash,
            nonce,
            traces,
            ret_hash,
            cvi_flag,
            cvi_records,
            subs,
            signature,
        })
    }
}

/// A full attestation: the ordered flush segments of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlobFile {
    pub segments: Vec<Blob>,
}

const FILE_MAGIC: &[u8; 4] = b"OPAT";

impl BlobFile {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(FILE_MAGIC);
        out.push(BLOB_VERSION);
        out.extend_from_slice(&(self.segments.len() as u16).to_le_bytes());
        for s in &self.segments {
            let bytes = s.encode();
            out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != FILE_MAGIC {
            return Err(CodecError::Magic);
        }
        let version = r.u8()?;
        if version != BLOB_VERSION {
            return Err(CodecError::Version(version));
        }
        let n = r.u16()?;
        let mut segments = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let len = r.u32()? as usize;
            let seg = r.take(len)?;
            segments.push(Blob::decode(seg)?);
        }
        if r.pos != buf.len() {
            return Err(CodecError::Trailing(buf.len() - r.pos));
        }
        Ok(BlobFile { segments })
    }
}
