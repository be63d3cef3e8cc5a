//! Critical-variable set construction: auto-detected control-dependent
//! variables plus annotated variables, expanded to a fixpoint with
//! pointers to critical data and backward data dependencies.

use super::points_to::{NodeMap, Obj, PointsTo};
use crate::mini_ir::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    AutoControlDependent,
    Annotated,
    PointerExpansion,
    DependencyExpansion,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalSet {
    /// Analysis node ids of all critical variables (pointers included).
    pub members: BTreeSet<u32>,
    /// Subset flagged as critical pointers.
    pub pointers: BTreeSet<u32>,
    pub provenance: BTreeMap<u32, Provenance>,
}

impl CriticalSet {
    pub fn contains(&self, node: u32) -> bool {
        self.members.contains(&node)
    }
}

fn cond_vars(fi: u32, nodes: &NodeMap, c: &Cond, out: &mut BTreeSet<u32>) {
    let ops = match c {
        Cond::Value(o) => vec![o],
        Cond::Cmp(l, _, r) => vec![l, r],
    };
    for o in ops {
        if let Some(v) = o.var() {
            out.insert(nodes.node(fi, v));
        }
    }
}

/// Every variable appearing in a conditional-branch condition.
pub fn detect_control_dependent_vars(program: &Program, nodes: &NodeMap) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for (fi, f) in program.functions.iter().enumerate() {
        for b in &f.blocks {
            if let TermOp::CondBranch { cond, .. } = &b.term.op {
                cond_vars(fi as u32, nodes, cond, &mut out);
            }
        }
    }
    out
}

/// Node ids of variables carrying the `critical` annotation.
pub fn annotated_vars(program: &Program, nodes: &NodeMap) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for (gi, g) in program.globals.iter().enumerate() {
        if g.critical {
            out.insert(gi as u32);
        }
    }
    for (fi, f) in program.functions.iter().enumerate() {
        for si in 0..f.slot_count() {
            if f.slot(si).critical {
                out.insert(nodes.node(fi as u32, VarRef::Local(si)));
            }
        }
    }
    out
}

/// Backward data-dependence edges: `deps[w]` = variables read by some
/// instruction that may define `w` (directly or through a pointer, or via
/// call argument/return binding).
fn dependence_edges(program: &Program, pt: &PointsTo) -> BTreeMap<u32, BTreeSet<u32>> {
    let nodes = &pt.nodes;
    let mut deps: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    fn edge(deps: &mut BTreeMap<u32, BTreeSet<u32>>, w: u32, r: u32) {
        deps.entry(w).or_default().insert(r);
    }
    for (fi, f) in program.functions.iter().enumerate() {
        let fi = fi as u32;
        let n = |v: VarRef| nodes.node(fi, v);
        let opn = |o: &Operand| o.var().map(n);
        for b in &f.blocks {
            for inst in &b.body {
                match &inst.op {
                    InstOp::Assign { dest, src } => {
                        if let Some(r) = opn(src) {
                            edge(&mut deps, n(*dest), r);
                        }
                    }
                    InstOp::Bin { dest, lhs, rhs, .. } => {
                        for o in [lhs, rhs] {
                            if let Some(r) = opn(o) {
                                edge(&mut deps, n(*dest), r);
                            }
                        }
                    }
                    InstOp::Load { dest, addr } => {
                        if let Some(p) = addr.var() {
                            edge(&mut deps, n(*dest), n(p));
                            for o in pt.of(fi, p) {
                                if let Obj::Var(w) = o {
                                    edge(&mut deps, n(*dest), *w);
                                }
                            }
                        }
                    }
                    InstOp::Store { addr, value } => {
                        if let (Some(p), Some(r)) = (addr.var(), value.var().map(n)) {
                            for o in pt.of(fi, p) {
                                if let Obj::Var(w) = o {
                                    edge(&mut deps, *w, r);
                                }
                            }
                        }
                    }
                    InstOp::Elem { dest, base, index } => {
                        edge(&mut deps, n(*dest), n(*base));
                        if let Some(r) = opn(index) {
                            edge(&mut deps, n(*dest), r);
                        }
                    }
                    InstOp::AddrOfVar { .. }
                    | InstOp::AddrOfFunc { .. }
                    | InstOp::AddrOfBlock { .. }
                    | InstOp::AttestBegin { .. }
                    | InstOp::AttestEnd { .. }
                    | InstOp::Input { .. }
                    | InstOp::Output { .. } => {}
                }
            }
            let mut bind = |callee: u32, args: &[Operand], dest: &Option<VarRef>| {
                let cf = &program.functions[callee as usize];
                let base = nodes.func_base[callee as usize];
                for (pi, a) in args.iter().enumerate().take(cf.params.len()) {
                    if let Some(r) = a.var() {
                        deps.entry(base + pi as u32).or_default().insert(nodes.node(fi, r));
                    }
                }
                if let Some(d) = dest {
                    for cb in &cf.blocks {
                        if let TermOp::Return { value: Some(Operand::Var(rv)) } = &cb.term.op {
                            deps.entry(nodes.node(fi, *d))
                                .or_default()
                                .insert(nodes.node(callee, *rv));
                        }
                    }
                }
            };
            match &b.term.op {
                TermOp::DirectCall { func, args, dest, .. } => bind(*func, args, dest),
                TermOp::IndirectCall { target, args, dest, .. } => {
                    let fns: Vec<u32> = pt
                        .of(fi, *target)
                        .iter()
                        .filter_map(|o| match o {
                            Obj::Fn(f) => Some(*f),
                            _ => None,
                        })
                        .collect();
                    for callee in fns {
                        bind(callee, args, dest);
                    }
                }
                _ => {}
            }
        }
    }
    deps
}

/// Expands the initial critical set to a fixpoint under two rules:
/// (a) a variable whose may-point-to set intersects the critical set
/// becomes a critical pointer; (b) every variable on a backward
/// data-dependence path into a definition of a critical variable is added.
pub fn expand_critical_set(
    program: &Program,
    auto: &BTreeSet<u32>,
    annotated: &BTreeSet<u32>,
    pt: &PointsTo,
) -> CriticalSet {
    let mut cs = CriticalSet {
        members: BTreeSet::new(),
        pointers: BTreeSet::new(),
        provenance: BTreeMap::new(),
    };
    for v in auto {
        cs.members.insert(*v);
        cs.provenance.insert(*v, Provenance::AutoControlDependent);
    }
    for v in annotated {
        cs.members.insert(*v);
        cs.provenance.entry(*v).or_insert(Provenance::Annotated);
    }

    let deps = dependence_edges(program, pt);
    let mut changed = true;
    while changed {
        changed = false;
        // (b) backward dependencies of current members.
        let snapshot: Vec<u32> = cs.members.iter().copied().collect();
        for v in &snapshot {
            if let Some(rs) = deps.get(v) {
                for r in rs {
                    if cs.members.insert(*r) {
                        cs.provenance.insert(*r, Provenance::DependencyExpansion);
                        changed = true;
                    }
                }
            }
        }
        // (a) pointers that may reference critical data.
        for node in 0..pt.nodes.total {
            if cs.pointers.contains(&node) {
                continue;
            }
            let hits = pt
                .of_node(node)
                .iter()
                .any(|o| matches!(o, Obj::Var(w) if cs.members.contains(w)));
            if hits {
                cs.pointers.insert(node);
                changed = true;
                if cs.members.insert(node) {
                    cs.provenance.insert(node, Provenance::PointerExpansion);
                }
            }
        }
    }
    cs
}
