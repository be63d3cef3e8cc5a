//! Per-function control-flow graphs with typed edges.

use crate::mini_ir::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    Taken,
    NotTaken,
    Jump,
    /// Candidate edge of an indirect jump (one per address-taken block).
    IndirectJump,
    /// Fallthrough to the continuation block after a call returns.
    CallCont,
}

#[derive(Debug, Clone)]
pub struct Cfg {
    pub func: u32,
    pub succs: Vec<Vec<(u32, EdgeKind)>>,
    pub preds: Vec<Vec<u32>>,
    /// Blocks whose terminator leaves the function (return/halt).
    pub exits: Vec<u32>,
}

/// Blocks of `func` whose address is taken via `blkaddr`.
pub fn address_taken_blocks(f: &Function) -> Vec<u32> {
    let mut out: Vec<u32> = f
        .blocks
        .iter()
        .flat_map(|b| b.body.iter())
        .filter_map(|i| match i.op {
            InstOp::AddrOfBlock { block, .. } => Some(block),
            _ => None,
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn build_cfg(program: &Program) -> Vec<Cfg> {
    program
        .functions
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let n = f.blocks.len();
            let mut succs = vec![Vec::new(); n];
            let mut preds = vec![Vec::new(); n];
            let mut exits = Vec::new();
            let taken_blocks = address_taken_blocks(f);
            for (bi, b) in f.blocks.iter().enumerate() {
                let mut push = |to: u32, kind: EdgeKind, succs: &mut Vec<Vec<(u32, EdgeKind)>>| {
                    succs[bi].push((to, kind));
                    preds[to as usize].push(bi as u32);
                };
                match &b.term.op {
                    TermOp::CondBranch { taken, not_taken, .. } => {
                        push(*taken, EdgeKind::Taken, &mut succs);
                        push(*not_taken, EdgeKind::NotTaken, &mut succs);
                    }
                    TermOp::DirectJump { target } => push(*target, EdgeKind::Jump, &mut succs),
                    TermOp::IndirectJump { .. } => {
                        for t in &taken_blocks {
                            push(*t, EdgeKind::IndirectJump, &mut succs);
                        }
                    }
                    TermOp::DirectCall { cont, .. } | TermOp::IndirectCall { cont, .. } => {
                        push(*cont, EdgeKind::CallCont, &mut succs)
                    }
                    TermOp::Return { .. } | TermOp::Halt => exits.push(bi as u32),
                }
            }
            Cfg { func: fi as u32, succs, preds, exits }
        })
        .collect()
}
