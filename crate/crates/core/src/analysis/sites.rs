//! Operation scopes, instrumentation-site selection, and allowed-target
//! sets for indirect transfers.

use super::cfg::{address_taken_blocks, Cfg};
use super::critical::CriticalSet;
use super::dominance::{compute_dominators, compute_post_dominators};
use super::points_to::{address_taken_functions, Obj, PointsTo};
use crate::diag::Diagnostic;
use crate::mini_ir::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationScope {
    pub op_id: u32,
    pub func: u32,
    pub begin_addr: u64,
    pub end_addr: u64,
    pub begin_block: u32,
    pub end_block: u32,
}

/// Checks that each marker pair satisfies the scoping rule: the begin site
/// dominates the end site and the end site post-dominates the begin site
/// on the function's CFG.
pub fn check_operation_scopes(
    program: &Program,
    cfgs: &[Cfg],
) -> Result<Vec<OperationScope>, Vec<Diagnostic>> {
    let mut scopes = Vec::new();
    let mut diags = Vec::new();
    let mut seen_ops = BTreeSet::new();
    for pair in program.marker_pairs() {
        if !seen_ops.insert(pair.op_id) {
            diags.push(Diagnostic::new(0, 1, format!("operation {} defined more than once", pair.op_id)));
            continue;
        }
        let f = &program.functions[pair.func as usize];
        let block_of = |addr: u64| {
            f.blocks
                .iter()
                .position(|b| b.body.iter().any(|i| i.addr == addr))
                .unwrap() as u32
        };
        let bb = block_of(pair.begin_addr);
        let eb = block_of(pair.end_addr);
        let cfg = &cfgs[pair.func as usize];
        let mut ok = true;
        if bb == eb {
            ok = pair.begin_addr < pair.end_addr;
        } else {
            let dom = compute_dominators(cfg, 0);
            let pdom = compute_post_dominators(cfg);
            if !dom.dominates(bb as usize, eb as usize) {
                diags.push(Diagnostic::new(
                    0,
                    1,
                    format!("operation {}: begin does not dominate end", pair.op_id),
                ));
                ok = false;
            }
            if !pdom.post_dominates(eb as usize, bb as usize) {
                diags.push(Diagnostic::new(
                    0,
                    1,
                    format!("operation {}: end does not post-dominate begin", pair.op_id),
                ));
                ok = false;
            }
        }
        if ok {
            scopes.push(OperationScope {
                op_id: pair.op_id,
                func: pair.func,
                begin_addr: pair.begin_addr,
                end_addr: pair.end_addr,
                begin_block: bb,
                end_block: eb,
            });
        }
    }
    if diags.is_empty() {
        Ok(scopes)
    } else {
        Err(diags)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControlKind {
    CondBranch,
    IndirectCall,
    IndirectJump,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ControlSite {
    pub addr: u64,
    pub kind: ControlKind,
    pub op_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataKind {
    Define,
    Use,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DataSite {
    pub addr: u64,
    pub kind: DataKind,
    /// Analysis node id of the accessed variable (the pointer variable for
    /// pointer-mediated accesses).
    pub node: u32,
    pub name: String,
    pub via_pointer: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SiteList {
    pub control: Vec<ControlSite>,
    pub data: Vec<DataSite>,
}

/// Per indirect-transfer site, the statically allowed destinations.
pub type TargetSets = BTreeMap<u64, BTreeSet<u64>>;

pub fn target_sets(program: &Program, pt: &PointsTo) -> TargetSets {
    let fallback_fns: Vec<u32> = address_taken_functions(program);
    let mut out = TargetSets::new();
    for (fi, f) in program.functions.iter().enumerate() {
        let fi = fi as u32;
        for b in &f.blocks {
            match &b.term.op {
                TermOp::IndirectCall { target, .. } => {
                    let mut set: BTreeSet<u64> = pt
                        .of(fi, *target)
                        .iter()
                        .filter_map(|o| match o {
                            Obj::Fn(g) => Some(program.functions[*g as usize].entry_addr()),
                            _ => None,
                        })
                        .collect();
                    if set.is_empty() {
                        set = fallback_fns
                            .iter()
                            .map(|g| program.functions[*g as usize].entry_addr())
                            .collect();
                    }
                    out.insert(b.term.addr, set);
                }
                TermOp::IndirectJump { target } => {
                    let mut set: BTreeSet<u64> = pt
                        .of(fi, *target)
                        .iter()
                        .filter_map(|o| match o {
                            Obj::Blk(g, blk) if *g == fi => {
                                Some(f.blocks[*blk as usize].addr())
                            }
                            _ => None,
                        })
                        .collect();
                    if set.is_empty() {
                        set = address_taken_blocks(f)
                            .iter()
                            .map(|blk| f.blocks[*blk as usize].addr())
                            .collect();
                    }
                    out.insert(b.term.addr, set);
                }
                _ => {}
            }
        }
    }
    out
}

/// Blocks of `func` reachable from `from` (inclusive) via intraprocedural
/// edges.
fn reachable_blocks(cfg: &Cfg, from: u32) -> BTreeSet<u32> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(b) = stack.pop() {
        if !seen.insert(b) {
            continue;
        }
        for (s, _) in &cfg.succs[b as usize] {
            stack.push(*s);
        }
    }
    seen
}

/// Functions transitively callable from the given blocks of `func`.
fn callable_closure(
    program: &Program,
    pt: &PointsTo,
    func: u32,
    blocks: &BTreeSet<u32>,
) -> BTreeSet<u32> {
    let fallback: Vec<u32> = address_taken_functions(program);
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    let mut frontier: Vec<(u32, Option<&BTreeSet<u32>>)> = vec![(func, Some(blocks))];
    while let Some((fi, filter)) = frontier.pop() {
        let f = &program.functions[fi as usize];
        for (bi, b) in f.blocks.iter().enumerate() {
            if let Some(set) = filter {
                if !set.contains(&(bi as u32)) {
                    continue;
                }
            }
            match &b.term.op {
                TermOp::DirectCall { func: callee, .. } => {
                    if seen.insert(*callee) {
                        frontier.push((*callee, None));
                    }
                }
                TermOp::IndirectCall { target, .. } => {
                    let mut callees: Vec<u32> = pt
                        .of(fi, *target)
                        .iter()
                        .filter_map(|o| match o {
                            Obj::Fn(g) => Some(*g),
                            _ => None,
                        })
                        .collect();
                    if callees.is_empty() {
                        callees = fallback.clone();
                    }
                    for c in callees {
                        if seen.insert(c) {
                            frontier.push((c, None));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    seen
}

fn control_kind(term: &TermOp) -> Option<ControlKind> {
    match term {
        TermOp::CondBranch { .. } => Some(ControlKind::CondBranch),
        TermOp::IndirectCall { .. } => Some(ControlKind::IndirectCall),
        TermOp::IndirectJump { .. } => Some(ControlKind::IndirectJump),
        TermOp::Return { .. } => Some(ControlKind::Return),
        // Direct calls and jumps have statically determinate destinations.
        TermOp::DirectCall { .. } | TermOp::DirectJump { .. } | TermOp::Halt => None,
    }
}

/// Selects the minimal control event set per operation scope and the
/// critical data access sites program-wide.
pub fn select_sites(
    program: &Program,
    cfgs: &[Cfg],
    scopes: &[OperationScope],
    critical: &CriticalSet,
    pt: &PointsTo,
) -> SiteList {
    let mut control: BTreeSet<ControlSite> = BTreeSet::new();
    for scope in scopes {
        let f = &program.functions[scope.func as usize];
        let blocks = reachable_blocks(&cfgs[scope.func as usize], scope.begin_block);
        for bi in &blocks {
            if let Some(kind) = control_kind(&f.blocks[*bi as usize].term.op) {
                control.insert(ControlSite {
                    addr: f.blocks[*bi as usize].term.addr,
                    kind,
                    op_id: scope.op_id,
                });
            }
        }
        let mut extra = callable_closure(program, pt, scope.func, &blocks);
        // Interrupt handlers may preempt the operation at any point, so
        // their events must be measurable too.
        for (_, h) in &program.vectors {
            extra.insert(*h);
            let all: BTreeSet<u32> =
                (0..program.functions[*h as usize].blocks.len() as u32).collect();
            extra.extend(callable_closure(program, pt, *h, &all));
        }
        for callee in extra {
            for b in &program.functions[callee as usize].blocks {
                if let Some(kind) = control_kind(&b.term.op) {
                    control.insert(ControlSite { addr: b.term.addr, kind, op_id: scope.op_id });
                }
            }
        }
    }

    // Critical data sites are not scoped by operations.
    let mut data: BTreeSet<DataSite> = BTreeSet::new();
    let nodes = &pt.nodes;
    for (fi, f) in program.functions.iter().enumerate() {
        let fi = fi as u32;
        for b in &f.blocks {
            for inst in &b.body {
                collect_data_sites(program, pt, critical, fi, inst.addr, &inst.op, &mut data);
            }
            collect_term_data_sites(program, pt, critical, fi, &b.term, &mut data);
        }
    }
    let _ = nodes;
    SiteList { control: control.into_iter().collect(), data: data.into_iter().collect() }
}

fn site(
    program: &Program,
    pt: &PointsTo,
    addr: u64,
    kind: DataKind,
    node: u32,
    via_pointer: bool,
) -> DataSite {
    DataSite { addr, kind, node, name: pt.nodes.describe(program, node), via_pointer }
}

fn collect_data_sites(
    program: &Program,
    pt: &PointsTo,
    critical: &CriticalSet,
    fi: u32,
    addr: u64,
    op: &InstOp,
    out: &mut BTreeSet<DataSite>,
) {
    let n = |v: VarRef| pt.nodes.node(fi, v);
    let mut reads: Vec<u32> = Vec::new();
    let mut writes: Vec<u32> = Vec::new();
    let mut ptr_define: Option<u32> = None;
    let mut ptr_use: Option<u32> = None;
    let opv = |o: &Operand, reads: &mut Vec<u32>| {
        if let Some(v) = o.var() {
            reads.push(n(v));
        }
    };
    match op {
        InstOp::Assign { dest, src } => {
            opv(src, &mut reads);
            writes.push(n(*dest));
        }
        InstOp::Bin { dest, lhs, rhs, .. } => {
            opv(lhs, &mut reads);
            opv(rhs, &mut reads);
            writes.push(n(*dest));
        }
        InstOp::Load { dest, addr: a } => {
            opv(a, &mut reads);
            if let Some(p) = a.var() {
                if critical.pointers.contains(&n(p)) {
                    ptr_use = Some(n(p));
                }
            }
            writes.push(n(*dest));
        }
        InstOp::Store { addr: a, value } => {
            opv(a, &mut reads);
            opv(value, &mut reads);
            if let Some(p) = a.var() {
                if critical.pointers.contains(&n(p)) {
                    ptr_define = Some(n(p));
                }
            }
        }
        InstOp::Elem { dest, base, index } => {
            reads.push(n(*base));
            opv(index, &mut reads);
            writes.push(n(*dest));
        }
        InstOp::AddrOfVar { dest, .. }
        | InstOp::AddrOfFunc { dest, .. }
        | InstOp::AddrOfBlock { dest, .. } => writes.push(n(*dest)),
        InstOp::Input { dest } => writes.push(n(*dest)),
        InstOp::Output { value } => opv(value, &mut reads),
        InstOp::AttestBegin { .. } | InstOp::AttestEnd { .. } => {}
    }
    for r in reads {
        if critical.contains(r) {
            out.insert(site(program, pt, addr, DataKind::Use, r, false));
        }
    }
    for w in writes {
        if critical.contains(w) {
            out.insert(site(program, pt, addr, DataKind::Define, w, false));
        }
    }
    if let Some(p) = ptr_define {
        out.insert(site(program, pt, addr, DataKind::Define, p, true));
    }
    if let Some(p) = ptr_use {
        out.insert(site(program, pt, addr, DataKind::Use, p, true));
    }
}

fn collect_term_data_sites(
    program: &Program,
    pt: &PointsTo,
    critical: &CriticalSet,
    fi: u32,
    term: &Term,
    out: &mut BTreeSet<DataSite>,
) {
    let n = |v: VarRef| pt.nodes.node(fi, v);
    let mut reads: Vec<u32> = Vec::new();
    let opv = |o: &Operand, reads: &mut Vec<u32>| {
        if let Some(v) = o.var() {
            reads.push(n(v));
        }
    };
    let mut writes: Vec<u32> = Vec::new();
    match &term.op {
        TermOp::DirectCall { args, dest, .. } => {
            for a in args {
                opv(a, &mut reads);
            }
            if let Some(d) = dest {
                writes.push(n(*d));
            }
        }
        TermOp::IndirectCall { target, args, dest, .. } => {
            reads.push(n(*target));
            for a in args {
                opv(a, &mut reads);
            }
            if let Some(d) = dest {
                writes.push(n(*d));
            }
        }
        TermOp::IndirectJump { target } => reads.push(n(*target)),
        TermOp::CondBranch { cond, .. } => match cond {
            Cond::Value(o) => opv(o, &mut reads),
            Cond::Cmp(l, _, r) => {
                opv(l, &mut reads);
                opv(r, &mut reads);
            }
        },
        TermOp::Return { value: Some(v) } => opv(v, &mut reads),
        _ => {}
    }
    for r in reads {
        if critical.contains(r) {
            out.insert(site(program, pt, term.addr, DataKind::Use, r, false));
        }
    }
    for w in writes {
        if critical.contains(w) {
            out.insert(site(program, pt, term.addr, DataKind::Define, w, false));
        }
    }
}

/// What an address-based checker would instrument: every memory access.
/// Variables are memory in this machine model, so that is every variable
/// read and write plus the pointed-to access of each load and store.
pub fn count_address_based_sites(program: &Program) -> usize {
    fn opv(o: &Operand) -> usize {
        o.var().map(|_| 1).unwrap_or(0)
    }
    let mut count = 0usize;
    for f in &program.functions {
        for b in &f.blocks {
            for inst in &b.body {
                count += match &inst.op {
                    InstOp::Assign { src, .. } => 1 + opv(src),
                    InstOp::Bin { lhs, rhs, .. } => 1 + opv(lhs) + opv(rhs),
                    // Pointer read, indirect access, destination write.
                    InstOp::Load { addr, .. } => 2 + opv(addr),
                    InstOp::Store { addr, value } => 1 + opv(addr) + opv(value),
                    InstOp::Elem { index, .. } => 2 + opv(index),
                    InstOp::AddrOfVar { .. }
                    | InstOp::AddrOfFunc { .. }
                    | InstOp::AddrOfBlock { .. }
                    | InstOp::Input { .. } => 1,
                    InstOp::Output { value } => opv(value),
                    InstOp::AttestBegin { .. } | InstOp::AttestEnd { .. } => 0,
                };
            }
            count += match &b.term.op {
                TermOp::DirectCall { args, dest, .. } => {
                    args.iter().map(opv).sum::<usize>() + dest.map(|_| 1).unwrap_or(0)
                }
                TermOp::IndirectCall { args, dest, .. } => {
                    1 + args.iter().map(opv).sum::<usize>() + dest.map(|_| 1).unwrap_or(0)
                }
                TermOp::IndirectJump { .. } => 1,
                TermOp::CondBranch { cond, .. } => match cond {
                    Cond::Value(o) => opv(o),
                    Cond::Cmp(l, _, r) => opv(l) + opv(r),
                },
                TermOp::Return { value: Some(v) } => opv(v),
                _ => 0,
            };
        }
    }
    count
}
