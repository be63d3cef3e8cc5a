//! Per-operation measurement sessions.
//!
//! A session opens at the operation's begin marker and closes at its end
//! marker. Control events are routed to the innermost active interrupt
//! sub-session, if any; each handler invocation gets its own traces and
//! return-hash chain so the verifier can replay it independently of the
//! interrupted context.
//!
//! When the trace payload reaches the configured capacity the session
//! flushes a signed segment and continues; segments are chained through
//! `prev_hash` so none can be dropped or reordered unnoticed.

use super::blob::{Blob, BlobFile, Nonce, SubBlob, BLOB_VERSION, SEGMENT_CAPACITY};
use super::cvi::CviState;
use super::hash::{hash_update, ReturnHash, INITIAL_HASH};
use super::trace::Traces;
use ed25519_dalek::SigningKey;

#[derive(Debug, Clone)]
struct SubSession {
    irq_id: u32,
    handler_entry: u64,
    resume_addr: u64,
    traces: Traces,
    ret_hash: ReturnHash,
    children: Vec<SubBlob>,
}

#[derive(Debug, Clone)]
pub struct MeasurementSession {
    pub op_id: u32,
    nonce: Nonce,
    capacity: usize,
    traces: Traces,
    ret_hash: ReturnHash,
    segment_index: u32,
    prev_hash: ReturnHash,
    segments: Vec<Blob>,
    subs: Vec<SubBlob>,
    sub_stack: Vec<SubSession>,
}

impl MeasurementSession {
    pub fn new(op_id: u32, nonce: Nonce) -> Self {
        Self::with_capacity(op_id, nonce, SEGMENT_CAPACITY)
    }

    pub fn with_capacity(op_id: u32, nonce: Nonce, capacity: usize) -> Self {
        MeasurementSession {
            op_id,
            nonce,
            capacity,
            traces: Traces::default(),
            ret_hash: INITIAL_HASH,
            segment_index: 0,
            prev_hash: [0; 32],
            segments: Vec::new(),
            subs: Vec::new(),
            sub_stack: Vec::new(),
        }
    }

    pub fn record_branch(&mut self, taken: bool) {
        match self.sub_stack.last_mut() {
            Some(s) => s.traces.bits.push(taken),
            None => self.traces.bits.push(taken),
        }
    }

    pub fn record_indirect(&mut self, dest: u64) {
        match self.sub_stack.last_mut() {
            Some(s) => s.traces.addrs.push(dest),
            None => self.traces.addrs.push(dest),
        }
    }

    pub fn record_return(&mut self, ret_addr: u64) {
        match self.sub_stack.last_mut() {
            Some(s) => s.ret_hash = hash_update(&s.ret_hash, ret_addr),
            None => self.ret_hash = hash_update(&self.ret_hash, ret_addr),
        }
    }

    pub fn enter_interrupt(&mut self, irq_id: u32, handler_entry: u64, resume_addr: u64) {
        self.sub_stack.push(SubSession {
            irq_id,
            handler_entry,
            resume_addr,
            traces: Traces::default(),
            ret_hash: INITIAL_HASH,
            children: Vec::new(),
        });
    }

    /// Closes the innermost interrupt sub-session. Panics if none is
    /// open; the interpreter controls nesting.
    pub fn exit_interrupt(&mut self) {
        let s = self.sub_stack.pop().expect("no open interrupt sub-session");
        let blob = SubBlob {
            irq_id: s.irq_id,
            handler_entry: s.handler_entry,
            resume_addr: s.resume_addr,
            traces: s.traces,
            ret_hash: s.ret_hash,
            children: s.children,
        };
        match self.sub_stack.last_mut() {
            Some(parent) => parent.children.push(blob),
            None => self.subs.push(blob),
        }
    }

    pub fn interrupt_depth(&self) -> usize {
        self.sub_stack.len()
    }

    /// Whether the main trace payload has reached the flush threshold.
    /// Flushing is deferred while an interrupt sub-session is open.
    pub fn should_flush(&self) -> bool {
        self.sub_stack.is_empty() && self.traces.payload_bytes() >= self.capacity
    }

    fn seal_segment(&mut self, cvi: &mut CviState, key: &SigningKey) -> Blob {
        let mut blob = Blob {
            version: BLOB_VERSION,
            op_id: self.op_id,
            segment_index: self.segment_index,
            prev_hash: self.prev_hash,
            nonce: self.nonce,
            traces: std::mem::take(&mut self.traces),
            ret_hash: self.ret_hash,
            cvi_flag: cvi.flag,
            cvi_records: std::mem::take(&mut cvi.records),
            subs: std::mem::take(&mut self.subs),
            signature: vec![],
        };
        blob.sign(key);
        cvi.reset_for_flush();
        self.prev_hash = blob.chain_hash();
        self.segment_index += 1;
        blob
    }

    /// Emits the current segment and resets the trace buffers. The
    /// return-hash chain continues across segments.
    pub fn flush(&mut self, cvi: &mut CviState, key: &SigningKey) {
        let blob = self.seal_segment(cvi, key);
        self.segments.push(blob);
    }

    /// Seals the final segment and returns the whole attestation.
    pub fn finalize(mut self, cvi: &mut CviState, key: &SigningKey) -> BlobFile {
        // A crash inside a handler still produces a decodable blob: any
        // sub-sessions left open are closed as-is.
        while !self.sub_stack.is_empty() {
            self.exit_interrupt();
        }
        let blob = self.seal_segment(cvi, key);
        self.segments.push(blob);
        BlobFile { segments: self.segments }
    }
}
