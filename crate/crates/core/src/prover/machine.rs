//! The modeled machine: an interpreter over MiniIR with the measurement
//! engine attached, plus fault injection and interrupt delivery.
//!
//! Variables are memory: every global, parameter, and local occupies
//! addressable words, and its word address is its variable id. Frames are
//! carved out of a stack region by call depth, so each recursion level of
//! a local is a distinct variable id.

use crate::analysis::points_to::NodeMap;
use crate::instrument::{DataTag, Instrumented};
use crate::measure::blob::Nonce;
use crate::measure::cvi::{Adjusted, CviState};
use crate::measure::session::MeasurementSession;
use crate::measure::{BlobFile, Bounds, SEGMENT_CAPACITY};
use crate::mini_ir::*;
use ed25519_dalek::SigningKey;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultAction {
    /// Write `value` to the word at memory address `addr`.
    OverwriteVar { addr: u64, value: i64 },
    /// Replace the top frame's saved return address.
    OverwriteReturn { value: u64 },
    /// Redirect the next indirect call or jump to `value`.
    OverwriteIndirectTarget { value: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    /// Code address the trigger watches.
    pub addr: u64,
    /// Fires just before the n-th execution (1-based) of that address.
    pub occurrence: u32,
    pub action: FaultAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterruptSpec {
    pub irq_id: u32,
    /// Delivered before the instruction executed at this step count.
    pub at_step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum RuntimeError {
    #[error("jumped to unmapped code address {0:#x}")]
    UnmappedPc(u64),
    #[error("indirect transfer to {0:#x} which is not a legal destination")]
    BadIndirectTarget(u64),
    #[error("division by zero at {0:#x}")]
    DivByZero(u64),
    #[error("step limit exhausted")]
    StepLimit,
    #[error("return with empty call stack")]
    StackUnderflow,
    #[error("interrupt {0} has no handler in the vector table")]
    NoHandler(u32),
}

pub struct RunConfig {
    pub key: SigningKey,
    pub nonce: Nonce,
    pub step_limit: u64,
    pub segment_capacity: usize,
    /// When false, return addresses are appended to the address trace
    /// instead of folded into the hash chain. Used for overhead
    /// comparisons only.
    pub hash_returns: bool,
}

impl RunConfig {
    pub fn new(key: SigningKey, nonce: Nonce) -> Self {
        RunConfig {
            key,
            nonce,
            step_limit: 50_000_000,
            segment_capacity: SEGMENT_CAPACITY,
            hash_returns: true,
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    /// One attestation per completed (or force-finalized) operation.
    pub attestations: BTreeMap<u32, BlobFile>,
    pub outputs: Vec<i64>,
    /// Start addresses of basic blocks in execution order.
    pub path: Vec<u64>,
    pub steps: u64,
    pub error: Option<RuntimeError>,
}

#[derive(Debug, Clone, Copy)]
enum FrameKind {
    Root,
    Normal {
        ret_addr: u64,
        dest_slot: Option<u64>,
        /// Whether the call site carries a define tag for the result slot.
        define_result: bool,
    },
    Interrupt { resume_pc: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    func: u32,
    base: u64,
    kind: FrameKind,
}

pub struct Machine<'p> {
    program: &'p Program,
    inst: &'p Instrumented,
    loc_index: Vec<Loc>,
    nodes: NodeMap,
    mem: BTreeMap<u64, i64>,
    frames: Vec<Frame>,
    pc: u64,
    steps: u64,
    inputs: VecDeque<i64>,
    outputs: Vec<i64>,
    path: Vec<u64>,
    cvi: CviState,
    sessions: BTreeMap<u32, MeasurementSession>,
    done: BTreeMap<u32, BlobFile>,
    faults: Vec<(FaultSpec, u32)>,
    interrupts: Vec<InterruptSpec>,
    pending_indirect: Option<u64>,
    config: RunConfig,
}

impl<'p> Machine<'p> {
    pub fn new(
        program: &'p Program,
        inst: &'p Instrumented,
        inputs: Vec<i64>,
        faults: Vec<FaultSpec>,
        interrupts: Vec<InterruptSpec>,
        config: RunConfig,
    ) -> Self {
        let mut mem = BTreeMap::new();
        // Program load counts as the initial define for every global, so
        // corruption of a critical global is caught even before the
        // operation writes it.
        let mut cvi = CviState::default();
        for (gi, g) in program.globals.iter().enumerate() {
            let base = program.global_addr(gi as u32);
            for w in 0..g.kind.words() {
                let v = g.init.get(w as usize).copied().unwrap_or(0);
                mem.insert(base + w * WORD, v);
                cvi.define(base + w * WORD, v);
            }
        }
        let entry = program.entry;
        let root = Frame { func: entry, base: STACK_BASE, kind: FrameKind::Root };
        let pc = program.functions[entry as usize].entry_addr();
        Machine {
            program,
            inst,
            loc_index: program.build_loc_index(),
            nodes: NodeMap::build(program),
            mem,
            frames: vec![root],
            pc,
            steps: 0,
            inputs: inputs.into(),
            outputs: Vec::new(),
            path: vec![pc],
            cvi,
            sessions: BTreeMap::new(),
            done: BTreeMap::new(),
            faults: faults.into_iter().map(|f| (f, 0)).collect(),
            interrupts,
            pending_indirect: None,
            config,
        }
    }

    fn frame(&self) -> &Frame {
        self.frames.last().expect("machine always has a frame")
    }

    /// Return-address context of the current frame, used in violation
    /// records.
    fn ctx(&self) -> u64 {
        match self.frame().kind {
            FrameKind::Root => 0,
            FrameKind::Normal { ret_addr, .. } => ret_addr,
            FrameKind::Interrupt { resume_pc } => resume_pc,
        }
    }

    fn var_addr(&self, v: VarRef) -> u64 {
        match v {
            VarRef::Global(g) => self.program.global_addr(g),
            VarRef::Local(l) => {
                let fr = self.frame();
                let f = &self.program.functions[fr.func as usize];
                fr.base + f.slot_offsets[l as usize] * WORD
            }
        }
    }

    fn var_extent(&self, v: VarRef) -> Bounds {
        let start = self.var_addr(v);
        let words = match v {
            VarRef::Global(g) => self.program.globals[g as usize].kind.words(),
            VarRef::Local(l) => {
                let f = &self.program.functions[self.frame().func as usize];
                f.slot(l).kind.words()
            }
        };
        Bounds { start, end: start + words * WORD }
    }

    fn read_mem(&self, addr: u64) -> i64 {
        self.mem.get(&addr).copied().unwrap_or(0)
    }

    fn read(&self, v: VarRef) -> i64 {
        self.read_mem(self.var_addr(v))
    }

    fn eval(&self, o: &Operand) -> i64 {
        match o {
            Operand::Imm(i) => *i,
            Operand::Var(v) => self.read(*v),
        }
    }

    fn write(&mut self, v: VarRef, val: i64) {
        let a = self.var_addr(v);
        self.mem.insert(a, val);
    }

    fn node_addr(&self, node: u32) -> u64 {
        let nm = &self.nodes;
        if node < nm.global_count {
            return self.program.global_addr(node);
        }
        let fr = self.frame();
        let base = nm.func_base[fr.func as usize];
        let f = &self.program.functions[fr.func as usize];
        debug_assert!(node >= base && node < base + f.slot_count());
        fr.base + f.slot_offsets[(node - base) as usize] * WORD
    }

    // --- measurement plumbing -------------------------------------------

    fn each_session(&mut self, addr: u64, f: impl Fn(&mut MeasurementSession)) {
        for (op, s) in self.sessions.iter_mut() {
            if self.inst.control_for(addr, *op).is_some() {
                f(s);
            }
        }
    }

    fn record_branch(&mut self, addr: u64, taken: bool) {
        self.each_session(addr, |s| s.record_branch(taken));
    }

    fn record_indirect(&mut self, addr: u64, dest: u64) {
        self.each_session(addr, |s| s.record_indirect(dest));
    }

    fn record_return(&mut self, addr: u64, ret: u64) {
        let hash = self.config.hash_returns;
        self.each_session(addr, |s| {
            if hash {
                s.record_return(ret);
            } else {
                s.record_indirect(ret);
            }
        });
    }

    fn flush_if_needed(&mut self) {
        for s in self.sessions.values_mut() {
            if s.should_flush() {
                s.flush(&mut self.cvi, &self.config.key);
            }
        }
    }

    // --- CVI plumbing ----------------------------------------------------

    fn cvi_via_pointer(&mut self, node: u32, target: u64, value: i64, define: bool) {
        let ptr_id = self.node_addr(node);
        let ctx = self.ctx();
        match self.cvi.bounds_adjust(ptr_id, target) {
            Some(Adjusted::InBounds) => {
                if define {
                    self.cvi.define(target, value);
                } else {
                    self.cvi.check_use(target, value, ctx);
                }
            }
            Some(Adjusted::Overlap { lo, hi }) => {
                if define {
                    self.cvi.define_bytes(target, value, lo, hi);
                } else {
                    self.cvi.check_use_bytes(target, value, ctx, lo, hi);
                }
            }
            // Out-of-bounds or untracked pointer: record against the
            // pointer itself.
            Some(Adjusted::Disjoint) | None => {
                self.cvi.flag = true;
                if self.cvi.records.len() < crate::measure::cvi::MAX_RECORDS {
                    self.cvi.records.push((ptr_id, ctx));
                }
            }
        }
    }

    /// Pre-execution value checks for `Use` tags at this address.
    fn data_uses(&mut self, addr: u64, op: &InstOp) {
        let tags: Vec<DataTag> = match self.inst.at(addr) {
            Some(t) => t.data.iter().filter(|d| d.kind == crate::analysis::DataKind::Use).cloned().collect(),
            None => return,
        };
        for tag in tags {
            if tag.via_pointer {
                // A load through a critical pointer: check the word about
                // to be read.
                if let InstOp::Load { addr: p, .. } = op {
                    let target = self.eval(p) as u64;
                    let value = self.read_mem(target);
                    self.cvi_via_pointer(tag.node, target, value, false);
                }
            } else {
                let id = self.node_addr(tag.node);
                let value = self.read_mem(id);
                let ctx = self.ctx();
                self.cvi.check_use(id, value, ctx);
            }
        }
    }

    /// Post-execution recording for `Define` tags at this address.
    fn data_defines(&mut self, addr: u64, op: &InstOp) {
        let tags: Vec<DataTag> = match self.inst.at(addr) {
            Some(t) => t.data.iter().filter(|d| d.kind == crate::analysis::DataKind::Define).cloned().collect(),
            None => return,
        };
        for tag in tags {
            if tag.via_pointer {
                if let InstOp::Store { addr: p, value } = op {
                    let target = self.eval(p) as u64;
                    let v = self.eval(value);
                    self.cvi_via_pointer(tag.node, target, v, true);
                }
            } else {
                let id = self.node_addr(tag.node);
                let value = self.read_mem(id);
                self.cvi.define(id, value);
            }
        }
    }

    /// Value checks attached to terminator reads.
    fn term_uses(&mut self, term: &Term) {
        let tags: Vec<DataTag> = match self.inst.at(term.addr) {
            Some(t) => t.data.iter().filter(|d| d.kind == crate::analysis::DataKind::Use).cloned().collect(),
            None => return,
        };
        for tag in tags {
            let id = self.node_addr(tag.node);
            let value = self.read_mem(id);
            let ctx = self.ctx();
            self.cvi.check_use(id, value, ctx);
        }
    }

    // --- faults and interrupts --------------------------------------------

    fn fire_faults(&mut self) {
        let pc = self.pc;
        let mut actions = Vec::new();
        for (spec, count) in self.faults.iter_mut() {
            if spec.addr == pc {
                *count += 1;
                if *count == spec.occurrence {
                    actions.push(spec.action);
                }
            }
        }
        for a in actions {
            match a {
                FaultAction::OverwriteVar { addr, value } => {
                    self.mem.insert(addr, value);
                }
                FaultAction::OverwriteReturn { value } => {
                    if let Some(fr) = self.frames.last_mut() {
                        if let FrameKind::Normal { ret_addr, .. } = &mut fr.kind {
                            *ret_addr = value;
                        }
                    }
                }
                FaultAction::OverwriteIndirectTarget { value } => {
                    self.pending_indirect = Some(value);
                }
            }
        }
    }

    fn fire_interrupts(&mut self) -> Result<(), RuntimeError> {
        let due: Vec<u32> = self
            .interrupts
            .iter()
            .filter(|i| i.at_step == self.steps)
            .map(|i| i.irq_id)
            .collect();
        for irq in due {
            let handler = self
                .program
                .vectors
                .iter()
                .find(|(id, _)| *id == irq)
                .map(|(_, f)| *f)
                .ok_or(RuntimeError::NoHandler(irq))?;
            let entry = self.program.functions[handler as usize].entry_addr();
            let resume = self.pc;
            for s in self.sessions.values_mut() {
                s.enter_interrupt(irq, entry, resume);
            }
            let base = STACK_BASE + self.frames.len() as u64 * FRAME_BYTES;
            self.frames.push(Frame {
                func: handler,
                base,
                kind: FrameKind::Interrupt { resume_pc: resume },
            });
            self.pc = entry;
            self.path.push(entry);
        }
        Ok(())
    }

    // --- execution ---------------------------------------------------------

    fn finalize_all_sessions(&mut self) {
        let key = self.config.key.clone();
        let ids: Vec<u32> = self.sessions.keys().copied().collect();
        for id in ids {
            let s = self.sessions.remove(&id).unwrap();
            self.done.insert(id, s.finalize(&mut self.cvi, &key));
        }
    }

    pub fn run(mut self) -> RunOutput {
        let err = loop {
            match self.step() {
                Ok(true) => {}
                Ok(false) => break None,
                Err(e) => break Some(e),
            }
        };
        // A crashed or truncated run still emits signed (partial)
        // evidence; the verifier rejects it structurally rather than as a
        // missing blob.
        self.finalize_all_sessions();
        RunOutput {
            attestations: self.done,
            outputs: self.outputs,
            path: self.path,
            steps: self.steps,
            error: err,
        }
    }

    /// Executes one instruction. Returns false on orderly termination.
    fn step(&mut self) -> Result<bool, RuntimeError> {
        if self.steps >= self.config.step_limit {
            return Err(RuntimeError::StepLimit);
        }
        self.fire_interrupts()?;
        self.fire_faults();
        self.steps += 1;
        let loc = Program::loc_of_addr(&self.loc_index, self.pc)
            .ok_or(RuntimeError::UnmappedPc(self.pc))?;
        match loc {
            Loc::Body { func, block, idx } => {
                let inst =
                    self.program.functions[func as usize].blocks[block as usize].body[idx as usize].clone();
                // Entering code mid-function via a corrupted transfer can
                // land in a different frame's function; execute in terms
                // of the *current* frame so locals still resolve, unless
                // the functions disagree, in which case re-frame.
                if self.frame().func != func {
                    self.frames.last_mut().unwrap().func = func;
                }
                self.data_uses(inst.addr, &inst.op);
                self.exec_inst(&inst)?;
                self.data_defines(inst.addr, &inst.op);
                self.pc += CODE_STRIDE;
                Ok(true)
            }
            Loc::Term { func, block } => {
                if self.frame().func != func {
                    self.frames.last_mut().unwrap().func = func;
                }
                let term = self.program.functions[func as usize].blocks[block as usize].term.clone();
                self.term_uses(&term);
                let cont = self.exec_term(func, &term)?;
                self.flush_if_needed();
                Ok(cont)
            }
        }
    }

    fn exec_inst(&mut self, inst: &Inst) -> Result<(), RuntimeError> {
        match &inst.op {
            InstOp::Assign { dest, src } => {
                let v = self.eval(src);
                self.write(*dest, v);
                if let Some(s) = src.var() {
                    let (d, sa) = (self.var_addr(*dest), self.var_addr(s));
                    self.cvi.copy_bounds(d, sa);
                }
            }
            InstOp::Bin { dest, op, lhs, rhs } => {
                let a = self.eval(lhs);
                let b = self.eval(rhs);
                let v = match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    BinOp::Div => {
                        if b == 0 {
                            return Err(RuntimeError::DivByZero(inst.addr));
                        }
                        a.wrapping_div(b)
                    }
                    BinOp::Rem => {
                        if b == 0 {
                            return Err(RuntimeError::DivByZero(inst.addr));
                        }
                        a.wrapping_rem(b)
                    }
                    BinOp::Eq => (a == b) as i64,
                    BinOp::Ne => (a != b) as i64,
                    BinOp::Lt => (a < b) as i64,
                    BinOp::Le => (a <= b) as i64,
                    BinOp::Gt => (a > b) as i64,
                    BinOp::Ge => (a >= b) as i64,
                    BinOp::And => ((a != 0) && (b != 0)) as i64,
                    BinOp::Or => ((a != 0) || (b != 0)) as i64,
                };
                self.write(*dest, v);
            }
            InstOp::Load { dest, addr } => {
                let a = self.eval(addr) as u64;
                let v = self.read_mem(a);
                self.write(*dest, v);
                let d = self.var_addr(*dest);
                self.cvi.copy_bounds(d, a);
            }
            InstOp::Store { addr, value } => {
                let a = self.eval(addr) as u64;
                let v = self.eval(value);
                self.mem.insert(a, v);
                if let Some(sv) = value.var() {
                    let s = self.var_addr(sv);
                    self.cvi.copy_bounds(a, s);
                }
            }
            InstOp::AddrOfVar { dest, var } => {
                let a = self.var_addr(*var);
                self.write(*dest, a as i64);
                let b = self.var_extent(*var);
                let d = self.var_addr(*dest);
                self.cvi.register_bounds(d, b);
            }
            InstOp::AddrOfFunc { dest, func } => {
                let a = self.program.functions[*func as usize].entry_addr();
                self.write(*dest, a as i64);
            }
            InstOp::AddrOfBlock { dest, block } => {
                let f = &self.program.functions[self.frame().func as usize];
                let a = f.blocks[*block as usize].addr();
                self.write(*dest, a as i64);
            }
            InstOp::Elem { dest, base, index } => {
                let i = self.eval(index);
                let base_decl_is_array = {
                    let kind = match base {
                        VarRef::Global(g) => self.program.globals[*g as usize].kind,
                        VarRef::Local(l) => {
                            self.program.functions[self.frame().func as usize].slot(*l).kind
                        }
                    };
                    matches!(kind, VarKind::Array(_))
                };
                let (start, bounds) = if base_decl_is_array {
                    let b = self.var_extent(*base);
                    (b.start, b)
                } else {
                    // `base` holds a pointer: index relative to its value,
                    // inheriting its registered referent bounds.
                    let p = self.read(*base) as u64;
                    let pid = self.var_addr(*base);
                    let b = self
                        .cvi
                        .bounds_of(pid)
                        .unwrap_or(Bounds { start: p, end: p + WORD });
                    (p, b)
                };
                let a = start.wrapping_add((i as u64).wrapping_mul(WORD));
                self.write(*dest, a as i64);
                let d = self.var_addr(*dest);
                self.cvi.register_bounds(d, bounds);
            }
            InstOp::AttestBegin { op_id } => {
                let s = MeasurementSession::with_capacity(
                    *op_id,
                    self.config.nonce,
                    self.config.segment_capacity,
                );
                self.sessions.insert(*op_id, s);
            }
            InstOp::AttestEnd { op_id } => {
                if let Some(s) = self.sessions.remove(op_id) {
                    let key = self.config.key.clone();
                    self.done.insert(*op_id, s.finalize(&mut self.cvi, &key));
                }
            }
            InstOp::Input { dest } => {
                let v = self.inputs.pop_front().unwrap_or(0);
                self.write(*dest, v);
            }
            InstOp::Output { value } => {
                let v = self.eval(value);
                self.outputs.push(v);
            }
        }
        Ok(())
    }

    fn block_entry(&mut self, addr: u64) {
        self.pc = addr;
        self.path.push(addr);
    }

    fn push_frame(
        &mut self,
        callee: u32,
        args: &[Operand],
        ret_addr: u64,
        dest: Option<VarRef>,
        call_addr: u64,
    ) {
        let vals: Vec<i64> = args.iter().map(|a| self.eval(a)).collect();
        let arg_bounds: Vec<Option<Bounds>> = args
            .iter()
            .map(|a| a.var().and_then(|v| self.cvi.bounds_of(self.var_addr(v))))
            .collect();
        let dest_slot = dest.map(|d| self.var_addr(d));
        let define_result = dest_slot.is_some()
            && self
                .inst
                .at(call_addr)
                .map(|t| t.data.iter().any(|d| d.kind == crate::analysis::DataKind::Define))
                .unwrap_or(false);
        let base = STACK_BASE + self.frames.len() as u64 * FRAME_BYTES;
        let f = &self.program.functions[callee as usize];
        let offsets = f.slot_offsets.clone();
        let param_count = f.params.len();
        self.frames.push(Frame {
            func: callee,
            base,
            kind: FrameKind::Normal { ret_addr, dest_slot, define_result },
        });
        for (i, v) in vals.into_iter().enumerate().take(param_count) {
            let a = base + offsets[i] * WORD;
            self.mem.insert(a, v);
            // Argument passing is a write the call itself performs, so it
            // counts as a define; otherwise a second call at the same
            // depth would be checked against the previous call's values.
            self.cvi.define(a, v);
            if let Some(b) = arg_bounds[i] {
                self.cvi.register_bounds(a, b);
            }
        }
        let entry = self.program.functions[callee as usize].entry_addr();
        self.block_entry(entry);
    }

    /// Executes a terminator; returns false when the program ends.
    fn exec_term(&mut self, func: u32, term: &Term) -> Result<bool, RuntimeError> {
        let f = &self.program.functions[func as usize];
        let block_addr = |b: u32| f.blocks[b as usize].addr();
        match &term.op {
            TermOp::DirectJump { target } => {
                self.block_entry(block_addr(*target));
            }
            TermOp::CondBranch { cond, taken, not_taken } => {
                let v = match cond {
                    Cond::Value(o) => self.eval(o) != 0,
                    Cond::Cmp(l, op, r) => {
                        let a = self.eval(l);
                        let b = self.eval(r);
                        match op {
                            BinOp::Eq => a == b,
                            BinOp::Ne => a != b,
                            BinOp::Lt => a < b,
                            BinOp::Le => a <= b,
                            BinOp::Gt => a > b,
                            BinOp::Ge => a >= b,
                            _ => unreachable!("parser only allows comparisons"),
                        }
                    }
                };
                self.record_branch(term.addr, v);
                let dest = if v { *taken } else { *not_taken };
                self.block_entry(block_addr(dest));
            }
            TermOp::IndirectJump { target } => {
                let mut dest = self.read(*target) as u64;
                if let Some(o) = self.pending_indirect.take() {
                    dest = o;
                }
                self.record_indirect(term.addr, dest);
                if Program::loc_of_addr(&self.loc_index, dest).is_none() {
                    return Err(RuntimeError::BadIndirectTarget(dest));
                }
                self.block_entry(dest);
            }
            TermOp::DirectCall { func: callee, args, dest, cont } => {
                let ret = block_addr(*cont);
                let args = args.clone();
                let dest = *dest;
                let callee = *callee;
                self.push_frame(callee, &args, ret, dest, term.addr);
            }
            TermOp::IndirectCall { target, args, dest, cont } => {
                let mut fa = self.read(*target) as u64;
                if let Some(o) = self.pending_indirect.take() {
                    fa = o;
                }
                self.record_indirect(term.addr, fa);
                let callee = self
                    .program
                    .functions
                    .iter()
                    .position(|g| g.entry_addr() == fa)
                    .ok_or(RuntimeError::BadIndirectTarget(fa))?;
                let ret = block_addr(*cont);
                let args = args.clone();
                let dest = *dest;
                self.push_frame(callee as u32, &args, ret, dest, term.addr);
            }
            TermOp::Return { value } => {
                let v = value.as_ref().map(|o| self.eval(o));
                let ret_bounds = value
                    .as_ref()
                    .and_then(|o| o.var())
                    .and_then(|rv| self.cvi.bounds_of(self.var_addr(rv)));
                let fr = *self.frame();
                match fr.kind {
                    FrameKind::Root => {
                        // Returning from the entry function ends the run.
                        self.record_return(term.addr, 0);
                        return Ok(false);
                    }
                    FrameKind::Normal { ret_addr, dest_slot, define_result } => {
                        self.record_return(term.addr, ret_addr);
                        self.frames.pop();
                        if let (Some(slot), Some(v)) = (dest_slot, v) {
                            self.mem.insert(slot, v);
                            if define_result {
                                self.cvi.define(slot, v);
                            }
                            if let Some(b) = ret_bounds {
                                self.cvi.register_bounds(slot, b);
                            }
                        }
                        if Program::loc_of_addr(&self.loc_index, ret_addr).is_none() {
                            return Err(RuntimeError::UnmappedPc(ret_addr));
                        }
                        self.block_entry(ret_addr);
                    }
                    FrameKind::Interrupt { resume_pc } => {
                        // The handler's own final return folds the resume
                        // address into its sub-session chain.
                        self.record_return(term.addr, resume_pc);
                        for s in self.sessions.values_mut() {
                            if s.interrupt_depth() > 0 {
                                s.exit_interrupt();
                            }
                        }
                        self.frames.pop();
                        if self.frames.is_empty() {
                            return Err(RuntimeError::StackUnderflow);
                        }
                        self.pc = resume_pc;
                    }
                }
            }
            TermOp::Halt => return Ok(false),
        }
        Ok(true)
    }
}

/// Outcome of an instrumented run next to an uninstrumented-overhead
/// baseline of the same program and inputs.
#[derive(Debug)]
pub struct BenignPair {
    pub hashed: RunOutput,
    pub plain: RunOutput,
    /// Evidence payload bytes (addresses + packed branch bits) per mode.
    pub hashed_bytes: usize,
    pub plain_bytes: usize,
    /// Return events folded into the hash chain in hashed mode.
    pub hashed_return_events: usize,
}

pub fn evidence_bytes(out: &RunOutput) -> usize {
    out.attestations
        .values()
        .flat_map(|f| f.segments.iter())
        .map(|b| b.traces.payload_bytes())
        .sum()
}

/// Runs the same program twice: once with return addresses hashed (the
/// real scheme) and once with them appended to the address trace, to
/// quantify how much the hash chain compresses the evidence.
pub fn run_benign_pair(
    program: &Program,
    inst: &Instrumented,
    inputs: Vec<i64>,
    key: &SigningKey,
    nonce: Nonce,
) -> BenignPair {
    let mk = |hash_returns: bool| {
        let mut cfg = RunConfig::new(key.clone(), nonce);
        cfg.hash_returns = hash_returns;
        // One segment regardless of length, for a fair size comparison.
        cfg.segment_capacity = usize::MAX;
        Machine::new(program, inst, inputs.clone(), vec![], vec![], cfg).run()
    };
    let hashed = mk(true);
    let plain = mk(false);
    let hashed_bytes = evidence_bytes(&hashed);
    let plain_bytes = evidence_bytes(&plain);
    let hashed_addrs: usize = hashed
        .attestations
        .values()
        .flat_map(|f| f.segments.iter())
        .map(|b| b.traces.addrs.len())
        .sum();
    let plain_addrs: usize = plain
        .attestations
        .values()
        .flat_map(|f| f.segments.iter())
        .map(|b| b.traces.addrs.len())
        .sum();
    BenignPair {
        hashed,
        plain,
        hashed_bytes,
        plain_bytes,
        hashed_return_events: plain_addrs - hashed_addrs,
    }
}
