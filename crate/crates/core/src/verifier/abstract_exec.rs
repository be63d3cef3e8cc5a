//! Abstract execution: replaying a trace over the exported control-flow
//! bundle to reconstruct the exact executed path.

use crate::analysis::{AnalysisBundle, BundleBlock, BundleTerm};
use crate::measure::hash::{hash_update, ReturnHash, INITIAL_HASH};
use crate::measure::trace::Traces;
use super::report::FailureClass;
use std::collections::BTreeSet;

/// One verifier-side abstract run's failure, with the path walked so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractFailure {
    pub class: FailureClass,
    pub detail: String,
}

/// Cursor over the concatenated traces of all segments. Each event kind
/// forms one stream across segment boundaries, consumed independently.
pub struct TraceCursor {
    bits: Vec<bool>,
    addrs: Vec<u64>,
    bit: usize,
    addr: usize,
}

impl TraceCursor {
    pub fn new<'a>(segments: impl IntoIterator<Item = &'a Traces>) -> Self {
        let mut bits = Vec::new();
        let mut addrs = Vec::new();
        for t in segments {
            bits.extend(t.bits.iter());
            addrs.extend_from_slice(&t.addrs);
        }
        TraceCursor { bits, addrs, bit: 0, addr: 0 }
    }

    pub fn next_bit(&mut self) -> Option<bool> {
        let b = self.bits.get(self.bit).copied();
        if b.is_some() {
            self.bit += 1;
        }
        b
    }

    pub fn next_addr(&mut self) -> Option<u64> {
        let a = self.addrs.get(self.addr).copied();
        if a.is_some() {
            self.addr += 1;
        }
        a
    }

    /// Unconsumed events left in either stream.
    pub fn leftover(&self) -> (usize, usize) {
        (self.bits.len() - self.bit, self.addrs.len() - self.addr)
    }

    pub fn exhausted(&self) -> bool {
        self.leftover() == (0, 0)
    }
}

pub struct AbstractOutcome {
    pub path: Vec<u64>,
    pub ret_hash: ReturnHash,
    pub failure: Option<AbstractFailure>,
    pub branch_bits: u32,
    pub indirect_events: usize,
    /// Work units spent (one per block visited): lets callers confirm
    /// verification cost is linear in path length.
    pub work: u64,
}

/// Where the abstract run starts and stops.
pub enum Span {
    /// From the operation's begin marker to its end marker.
    Operation { op_id: u32 },
    /// An interrupt handler invocation: from a function entry until the
    /// frame seeded with `resume` returns.
    Handler { entry: u64, resume: u64 },
}

const STEP_LIMIT: u64 = 50_000_000;

/// Replays `cursor` over the bundle. Consumes one trace event per tagged
/// control site on the walked path; any divergence between trace and
/// graph is a failure.
pub fn abstract_exec(
    bundle: &AnalysisBundle,
    op_id: u32,
    span: Span,
    cursor: &mut TraceCursor,
) -> AbstractOutcome {
    let tagged: BTreeSet<u64> = bundle
        .sites
        .control
        .iter()
        .filter(|s| s.op_id == op_id)
        .map(|s| s.addr)
        .collect();

    let mut out = AbstractOutcome {
        path: Vec::new(),
        ret_hash: INITIAL_HASH,
        failure: None,
        branch_bits: 0,
        indirect_events: 0,
        work: 0,
    };
    let fail = |out: &mut AbstractOutcome, class: FailureClass, detail: String| {
        out.failure = Some(AbstractFailure { class, detail });
    };

    // Locate the start block and whether to skip markers before the
    // begin marker in it.
    let (mut pc, begin_addr, end_addr, mut stack): (u64, Option<u64>, Option<u64>, Vec<u64>) =
        match &span {
            Span::Operation { op_id } => {
                let Some(scope) = bundle.scopes.iter().find(|s| s.op_id == *op_id) else {
                    fail(
                        &mut out,
                        FailureClass::Structure,
                        format!("operation {op_id} has no scope in the bundle"),
                    );
                    return out;
                };
                let Some((_, b)) = bundle.block_of_addr(scope.begin_addr) else {
                    fail(&mut out, FailureClass::Structure, "begin marker unmapped".into());
                    return out;
                };
                (b.start, Some(scope.begin_addr), Some(scope.end_addr), Vec::new())
            }
            Span::Handler { entry, resume } => (*entry, None, None, vec![*resume]),
        };

    let mut skip_markers_before = begin_addr;
    let mut steps: u64 = 0;
    'walk: loop {
        steps += 1;
        out.work += 1;
        if steps > STEP_LIMIT {
            fail(&mut out, FailureClass::Structure, "abstract execution step limit".into());
            break;
        }
        let Some((func, block)) = bundle.block_of_addr(pc) else {
            fail(&mut out, FailureClass::Structure, format!("transfer to unmapped {pc:#x}"));
            break;
        };
        let block: &BundleBlock = block;
        out.path.push(block.start);

        // Marker handling: reaching the end marker finishes the span.
        for m in &block.markers {
            if let Some(skip) = skip_markers_before {
                if m.addr < skip {
                    continue;
                }
            }
            if let Some(end) = end_addr {
                if m.addr == end && !m.is_begin {
                    break 'walk;
                }
            }
        }
        skip_markers_before = None;
        let _ = func;

        let term_tagged = tagged.contains(&block.term_addr);
        match &block.term {
            BundleTerm::DirectJump { dest } => pc = *dest,
            BundleTerm::CondBranch { taken, not_taken } => {
                if !term_tagged {
                    fail(
                        &mut out,
                        FailureClass::Structure,
                        format!("untagged branch at {:#x} on the path", block.term_addr),
                    );
                    break;
                }
                let Some(bit) = cursor.next_bit() else {
                    fail(&mut out, FailureClass::Structure, "branch trace exhausted".into());
                    break;
                };
                out.branch_bits += 1;
                pc = if bit { *taken } else { *not_taken };
            }
            BundleTerm::DirectCall { callee_entry, cont } => {
                stack.push(*cont);
                pc = *callee_entry;
            }
            BundleTerm::IndirectCall { cont } => {
                if !term_tagged {
                    fail(
                        &mut out,
                        FailureClass::Structure,
                        format!("untagged indirect call at {:#x}", block.term_addr),
                    );
                    break;
                }
                let Some(dest) = cursor.next_addr() else {
                    fail(&mut out, FailureClass::Structure, "address trace exhausted".into());
                    break;
                };
                out.indirect_events += 1;
                if let Some(set) = bundle.target_sets.get(&block.term_addr) {
                    if !set.contains(&dest) {
                        fail(
                            &mut out,
                            FailureClass::CfiTarget,
                            format!(
                                "indirect call at {:#x} went to {dest:#x}, outside its {} allowed targets",
                                block.term_addr,
                                set.len()
                            ),
                        );
                        break;
                    }
                }
                if bundle.function_of_entry(dest).is_none() {
                    fail(
                        &mut out,
                        FailureClass::CfiTarget,
                        format!("indirect call target {dest:#x} is not a function entry"),
                    );
                    break;
                }
                stack.push(*cont);
                pc = dest;
            }
            BundleTerm::IndirectJump => {
                if !term_tagged {
                    fail(
                        &mut out,
                        FailureClass::Structure,
                        format!("untagged indirect jump at {:#x}", block.term_addr),
                    );
                    break;
                }
                let Some(dest) = cursor.next_addr() else {
                    fail(&mut out, FailureClass::Structure, "address trace exhausted".into());
                    break;
                };
                out.indirect_events += 1;
                if let Some(set) = bundle.target_sets.get(&block.term_addr) {
                    if !set.contains(&dest) {
                        fail(
                            &mut out,
                            FailureClass::CfiTarget,
                            format!(
                                "indirect jump at {:#x} went to {dest:#x}, outside its allowed targets",
                                block.term_addr
                            ),
                        );
                        break;
                    }
                }
                pc = dest;
            }
            BundleTerm::Return => {
                let Some(ret) = stack.pop() else {
                    fail(
                        &mut out,
                        FailureClass::Structure,
                        format!("return at {:#x} below the operation's stack floor", block.term_addr),
                    );
                    break;
                };
                if term_tagged {
                    out.ret_hash = hash_update(&out.ret_hash, ret);
                }
                match &span {
                    Span::Handler { resume, .. } if stack.is_empty() => {
                        // The seeded frame returned: the handler is done.
                        debug_assert_eq!(ret, *resume);
                        break 'walk;
                    }
                    _ => pc = ret,
                }
            }
            BundleTerm::Halt => {
                fail(
                    &mut out,
                    FailureClass::Structure,
                    format!("halt at {:#x} before the operation end marker", block.term_addr),
                );
                break;
            }
        }
    }
    out
}
