//! Flow-insensitive, context-insensitive inclusion-based pointer analysis
//! over MiniIR address-of/assign/load/store, with interprocedural copy
//! edges for call arguments and returns. MiniIR has no record fields, so
//! the analysis is field-insensitive: an array is a single object.

use crate::mini_ir::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Abstract object a pointer value may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Obj {
    /// A variable or array object, by analysis node id.
    Var(u32),
    /// A function entry.
    Fn(u32),
    /// A basic block (function, block).
    Blk(u32, u32),
}

/// Maps (function, VarRef) pairs onto dense analysis node ids: globals
/// first, then each function's slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeMap {
    pub global_count: u32,
    pub func_base: Vec<u32>,
    pub total: u32,
}

impl NodeMap {
    pub fn build(program: &Program) -> Self {
        let global_count = program.globals.len() as u32;
        let mut func_base = Vec::with_capacity(program.functions.len());
        let mut next = global_count;
        for f in &program.functions {
            func_base.push(next);
            next += f.slot_count();
        }
        NodeMap { global_count, func_base, total: next }
    }

    pub fn node(&self, func: u32, v: VarRef) -> u32 {
        match v {
            VarRef::Global(g) => g,
            VarRef::Local(l) => self.func_base[func as usize] + l,
        }
    }

    /// Inverse lookup for reporting.
    pub fn describe(&self, program: &Program, node: u32) -> String {
        if node < self.global_count {
            return format!("@{}", program.globals[node as usize].name);
        }
        for (fi, f) in program.functions.iter().enumerate() {
            let base = self.func_base[fi];
            if node >= base && node < base + f.slot_count() {
                return format!("{}::{}", f.name, f.slot(node - base).name);
            }
        }
        format!("node#{node}")
    }

    pub fn decl<'p>(&self, program: &'p Program, node: u32) -> &'p VarDecl {
        if node < self.global_count {
            return &program.globals[node as usize];
        }
        for (fi, f) in program.functions.iter().enumerate() {
            let base = self.func_base[fi];
            if node >= base && node < base + f.slot_count() {
                return f.slot(node - base);
            }
        }
        panic!("node {node} out of range");
    }
}

#[derive(Debug, Clone)]
pub struct PointsTo {
    pub nodes: NodeMap,
    pub sets: Vec<BTreeSet<Obj>>,
}

impl PointsTo {
    pub fn of(&self, func: u32, v: VarRef) -> &BTreeSet<Obj> {
        &self.sets[self.nodes.node(func, v) as usize]
    }

    pub fn of_node(&self, node: u32) -> &BTreeSet<Obj> {
        &self.sets[node as usize]
    }
}

/// Functions whose address is taken anywhere in the program.
pub fn address_taken_functions(program: &Program) -> Vec<u32> {
    let mut out: Vec<u32> = program
        .functions
        .iter()
        .flat_map(|f| f.blocks.iter())
        .flat_map(|b| b.body.iter())
        .filter_map(|i| match i.op {
            InstOp::AddrOfFunc { func, .. } => Some(func),
            _ => None,
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn points_to(program: &Program) -> PointsTo {
    let nodes = NodeMap::build(program);
    let mut sets: Vec<BTreeSet<Obj>> = vec![BTreeSet::new(); nodes.total as usize];

    fn add(sets: &mut [BTreeSet<Obj>], node: u32, obj: Obj) -> bool {
        sets[node as usize].insert(obj)
    }
    fn union_into(sets: &mut [BTreeSet<Obj>], dst: u32, src: u32) -> bool {
        if dst == src {
            return false;
        }
        let items: Vec<Obj> = sets[src as usize].iter().copied().collect();
        let mut changed = false;
        for o in items {
            changed |= sets[dst as usize].insert(o);
        }
        changed
    }

    // Naive iteration to fixpoint; programs at this scale are small.
    let mut changed = true;
    while changed {
        changed = false;
        for (fi, f) in program.functions.iter().enumerate() {
            let fi = fi as u32;
            let n = |v: VarRef| nodes.node(fi, v);
            for b in &f.blocks {
                for inst in &b.body {
                    match &inst.op {
                        InstOp::AddrOfVar { dest, var } => changed |= add(&mut sets, n(*dest), Obj::Var(n(*var))),
                        InstOp::AddrOfFunc { dest, func } => changed |= add(&mut sets, n(*dest), Obj::Fn(*func)),
                        InstOp::AddrOfBlock { dest, block } => {
                            changed |= add(&mut sets, n(*dest), Obj::Blk(fi, *block))
                        }
                        InstOp::Elem { dest, base, .. } => {
                            let base_node = n(*base);
                            match nodes.decl(program, base_node).kind {
                                VarKind::Array(_) => changed |= add(&mut sets, n(*dest), Obj::Var(base_node)),
                                _ => changed |= union_into(&mut sets, n(*dest), base_node),
                            }
                        }
                        InstOp::Assign { dest, src } => {
                            if let Some(v) = src.var() {
                                changed |= union_into(&mut sets, n(*dest), n(v));
                            }
                        }
                        InstOp::Bin { dest, lhs, rhs, .. } => {
                            // Pointer arithmetic: propagate from either side.
                            for o in [lhs, rhs] {
                                if let Some(v) = o.var() {
                                    changed |= union_into(&mut sets, n(*dest), n(v));
                                }
                            }
                        }
                        InstOp::Load { dest, addr } => {
                            if let Some(p) = addr.var() {
                                let objs: Vec<Obj> = sets[n(p) as usize].iter().copied().collect();
                                for o in objs {
                                    if let Obj::Var(w) = o {
                                        changed |= union_into(&mut sets, n(*dest), w);
                                    }
                                }
                            }
                        }
                        InstOp::Store { addr, value } => {
                            if let (Some(p), Some(v)) = (addr.var(), value.var()) {
                                let objs: Vec<Obj> = sets[n(p) as usize].iter().copied().collect();
                                for o in objs {
                                    if let Obj::Var(w) = o {
                                        changed |= union_into(&mut sets, w, n(v));
                                    }
                                }
                            }
                        }
                        InstOp::AttestBegin { .. }
                        | InstOp::AttestEnd { .. }
                        | InstOp::Input { .. }
                        | InstOp::Output { .. } => {}
                    }
                }
                // Interprocedural copy edges.
                let bind = |sets: &mut Vec<BTreeSet<Obj>>,
                            callee: u32,
                            args: &[Operand],
                            dest: &Option<VarRef>|
                 -> bool {
                    let mut ch = false;
                    let cf = &program.functions[callee as usize];
                    let base = nodes.func_base[callee as usize];
                    for (pi, a) in args.iter().enumerate().take(cf.params.len()) {
                        if let Some(v) = a.var() {
                            ch |= union_into(sets, base + pi as u32, n(v));
                        }
                    }
                    if let Some(d) = dest {
                        for cb in &cf.blocks {
                            if let TermOp::Return { value: Some(Operand::Var(rv)) } = &cb.term.op {
                                ch |= union_into(sets, n(*d), nodes.node(callee, *rv));
                            }
                        }
                    }
                    ch
                };
                match &b.term.op {
                    TermOp::DirectCall { func, args, dest, .. } => {
                        changed |= bind(&mut sets, *func, args, dest);
                    }
                    TermOp::IndirectCall { target, args, dest, .. } => {
                        let fns: Vec<u32> = sets[n(*target) as usize]
                            .iter()
                            .filter_map(|o| match o {
                                Obj::Fn(f) => Some(*f),
                                _ => None,
                            })
                            .collect();
                        for callee in fns {
                            changed |= bind(&mut sets, callee, args, dest);
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    PointsTo { nodes, sets }
}
