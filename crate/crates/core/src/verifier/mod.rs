//! Verifier side: signature and chain checks, then abstract execution of
//! the traces over the analysis bundle.

pub mod abstract_exec;
pub mod report;

pub use abstract_exec::{abstract_exec, AbstractOutcome, Span, TraceCursor};
pub use report::{Failure, FailureClass, VerificationReport};

use crate::analysis::AnalysisBundle;
use crate::measure::blob::{BlobFile, Nonce, SubBlob};
use crate::measure::hash::{hash_update, ReturnHash, INITIAL_HASH};
use ed25519_dalek::VerifyingKey;

fn verify_sub(
    bundle: &AnalysisBundle,
    op_id: u32,
    sub: &SubBlob,
    report: &mut VerificationReport,
) {
    match bundle.vector_table.get(&sub.irq_id) {
        Some(entry) if *entry == sub.handler_entry => {}
        Some(entry) => {
            report.fail(
                FailureClass::InterruptMismatch,
                format!(
                    "interrupt {} entered {:#x}, vector table says {:#x}",
                    sub.irq_id, sub.handler_entry, entry
                ),
            );
            return;
        }
        None => {
            report.fail(
                FailureClass::InterruptMismatch,
                format!("interrupt {} is not in the vector table", sub.irq_id),
            );
            return;
        }
    }
    let mut cursor = TraceCursor::new([&sub.traces]);
    let out = abstract_exec(
        bundle,
        op_id,
        Span::Handler { entry: sub.handler_entry, resume: sub.resume_addr },
        &mut cursor,
    );
    if let Some(f) = out.failure {
        report.fail(f.class, format!("interrupt {}: {}", sub.irq_id, f.detail));
        return;
    }
    if !cursor.exhausted() {
        let (b, a) = cursor.leftover();
        report.fail(
            FailureClass::Structure,
            format!("interrupt {}: {b} branch bits and {a} addresses left over", sub.irq_id),
        );
        return;
    }
    if out.ret_hash != sub.ret_hash {
        report.fail(
            FailureClass::HashMismatch,
            format!("interrupt {}: return hash does not match the reconstructed chain", sub.irq_id),
        );
        return;
    }
    for child in &sub.children {
        verify_sub(bundle, op_id, child, report);
    }
}

/// Verifies one attestation (all flush segments of one operation run).
pub fn verify(
    bundle: &AnalysisBundle,
    key: &VerifyingKey,
    expected_nonce: &Nonce,
    file: &BlobFile,
) -> VerificationReport {
    let op_id = file.segments.first().map(|b| b.op_id).unwrap_or(0);
    let mut report = VerificationReport {
        op_id,
        pass: true,
        failures: Vec::new(),
        path: Vec::new(),
        segments: file.segments.len(),
        branch_bits: 0,
        indirect_events: 0,
    };
    if file.segments.is_empty() {
        report.fail(FailureClass::Structure, "attestation has no segments");
        return report;
    }

    for (i, seg) in file.segments.iter().enumerate() {
        if !seg.verify_signature(key) {
            report.fail(FailureClass::Signature, format!("segment {i}: signature invalid"));
        }
    }
    if !report.pass {
        return report;
    }

    for (i, seg) in file.segments.iter().enumerate() {
        if &seg.nonce != expected_nonce {
            report.fail(FailureClass::NonceMismatch, format!("segment {i}: nonce differs"));
        }
    }
    if !report.pass {
        return report;
    }

    let mut prev: ReturnHash = [0; 32];
    for (i, seg) in file.segments.iter().enumerate() {
        if seg.op_id != op_id {
            report.fail(
                FailureClass::SegmentChain,
                format!("segment {i}: operation id {} differs from {}", seg.op_id, op_id),
            );
        }
        if seg.segment_index as usize != i {
            report.fail(
                FailureClass::SegmentChain,
                format!("segment {i}: carries index {}", seg.segment_index),
            );
        }
        if seg.prev_hash != prev {
            report.fail(FailureClass::SegmentChain, format!("segment {i}: chain digest differs"));
        }
        prev = seg.chain_hash();
    }
    if !report.pass {
        return report;
    }

    for seg in &file.segments {
        for sub in &seg.subs {
            verify_sub(bundle, op_id, sub, &mut report);
        }
    }

    let mut cursor = TraceCursor::new(file.segments.iter().map(|b| &b.traces));
    let out = abstract_exec(bundle, op_id, Span::Operation { op_id }, &mut cursor);
    report.path = out.path;
    report.branch_bits = out.branch_bits;
    report.indirect_events = out.indirect_events;
    if let Some(f) = out.failure {
        report.fail(f.class, f.detail);
    } else {
        if !cursor.exhausted() {
            let (b, a) = cursor.leftover();
            report.fail(
                FailureClass::Structure,
                format!("{b} branch bits and {a} addresses left over after the end marker"),
            );
        }
        let final_hash = file.segments.last().map(|b| b.ret_hash).unwrap_or(INITIAL_HASH);
        if out.ret_hash != final_hash {
            report.fail(
                FailureClass::HashMismatch,
                "return hash does not match the reconstructed chain".to_string(),
            );
        }
    }

    for (i, seg) in file.segments.iter().enumerate() {
        if seg.cvi_flag {
            let mut detail = format!("segment {i}: critical variable check failed");
            for (var, ctx) in &seg.cvi_records {
                detail.push_str(&format!("\n    variable {var:#x} in frame returning to {ctx:#x}"));
            }
            report.fail(FailureClass::CviViolation, detail);
        }
    }

    report
}

/// One legal evidence assignment for an operation: trace contents plus
/// the hash a benign run producing it would report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegalProof {
    pub bits: Vec<bool>,
    pub addrs: Vec<u64>,
    pub ret_hash: ReturnHash,
    pub path: Vec<u64>,
}

/// Exhaustively enumerates legal proofs by bounded depth-first search
/// over the bundle. Test oracle: a benign run's evidence must be in this
/// set, and forged evidence must not. Bounds keep pathological graphs
/// from exploding.
pub fn enumerate_legal_proofs(
    bundle: &AnalysisBundle,
    op_id: u32,
    max_events: usize,
    max_proofs: usize,
) -> Vec<LegalProof> {
    use crate::analysis::BundleTerm;
    use std::collections::BTreeSet;

    let Some(scope) = bundle.scopes.iter().find(|s| s.op_id == op_id) else {
        return vec![];
    };
    let Some((_, begin_block)) = bundle.block_of_addr(scope.begin_addr) else {
        return vec![];
    };
    let tagged: BTreeSet<u64> = bundle
        .sites
        .control
        .iter()
        .filter(|s| s.op_id == op_id)
        .map(|s| s.addr)
        .collect();

    struct State {
        pc: u64,
        stack: Vec<u64>,
        bits: Vec<bool>,
        addrs: Vec<u64>,
        hash: ReturnHash,
        path: Vec<u64>,
        skip_before: Option<u64>,
    }
    let mut out = Vec::new();
    let mut work = vec![State {
        pc: begin_block.start,
        stack: vec![],
        bits: vec![],
        addrs: vec![],
        hash: INITIAL_HASH,
        path: vec![],
        skip_before: Some(scope.begin_addr),
    }];
    while let Some(mut st) = work.pop() {
        if out.len() >= max_proofs {
            break;
        }
        if st.bits.len() + st.addrs.len() > max_events || st.path.len() > max_events * 8 + 64 {
            continue;
        }
        let Some((_, block)) = bundle.block_of_addr(st.pc) else { continue };
        st.path.push(block.start);
        let mut ended = false;
        for m in &block.markers {
            if let Some(skip) = st.skip_before {
                if m.addr < skip {
                    continue;
                }
            }
            if m.addr == scope.end_addr && !m.is_begin {
                ended = true;
                break;
            }
        }
        if ended {
            out.push(LegalProof { bits: st.bits, addrs: st.addrs, ret_hash: st.hash, path: st.path });
            continue;
        }
        st.skip_before = None;
        let term_tagged = tagged.contains(&block.term_addr);
        match &block.term {
            BundleTerm::DirectJump { dest } => {
                st.pc = *dest;
                work.push(st);
            }
            BundleTerm::CondBranch { taken, not_taken } => {
                if !term_tagged {
                    continue;
                }
                for (bit, dest) in [(true, *taken), (false, *not_taken)] {
                    let mut s = State {
                        pc: dest,
                        stack: st.stack.clone(),
                        bits: st.bits.clone(),
                        addrs: st.addrs.clone(),
                        hash: st.hash,
                        path: st.path.clone(),
                        skip_before: None,
                    };
                    s.bits.push(bit);
                    work.push(s);
                }
            }
            BundleTerm::DirectCall { callee_entry, cont } => {
                st.stack.push(*cont);
                st.pc = *callee_entry;
                work.push(st);
            }
            BundleTerm::IndirectCall { cont } => {
                if !term_tagged {
                    continue;
                }
                let Some(set) = bundle.target_sets.get(&block.term_addr) else { continue };
                for dest in set {
                    let mut s = State {
                        pc: *dest,
                        stack: st.stack.clone(),
                        bits: st.bits.clone(),
                        addrs: st.addrs.clone(),
                        hash: st.hash,
                        path: st.path.clone(),
                        skip_before: None,
                    };
                    s.addrs.push(*dest);
                    s.stack.push(*cont);
                    work.push(s);
                }
            }
            BundleTerm::IndirectJump => {
                if !term_tagged {
                    continue;
                }
                let Some(set) = bundle.target_sets.get(&block.term_addr) else { continue };
                for dest in set {
                    let mut s = State {
                        pc: *dest,
                        stack: st.stack.clone(),
                        bits: st.bits.clone(),
                        addrs: st.addrs.clone(),
                        hash: st.hash,
                        path: st.path.clone(),
                        skip_before: None,
                    };
                    s.addrs.push(*dest);
                    work.push(s);
                }
            }
            BundleTerm::Return => {
                let Some(ret) = st.stack.pop() else { continue };
                if term_tagged {
                    st.hash = hash_update(&st.hash, ret);
                }
                st.pc = ret;
                work.push(st);
            }
            BundleTerm::Halt => continue,
        }
    }
    out
}

/// Convenience: the evidence of one attestation flattened for comparison
/// against enumerated legal proofs.
pub fn flatten_evidence(file: &BlobFile) -> (Vec<bool>, Vec<u64>, ReturnHash) {
    let mut bits = Vec::new();
    let mut addrs = Vec::new();
    for seg in &file.segments {
        bits.extend(seg.traces.bits.iter());
        addrs.extend_from_slice(&seg.traces.addrs);
    }
    let hash = file.segments.last().map(|b| b.ret_hash).unwrap_or(INITIAL_HASH);
    (bits, addrs, hash)
}
