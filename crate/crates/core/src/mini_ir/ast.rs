//! In-memory representation of MiniIR programs.
//!
//! All names are resolved at parse time: operands refer to globals or
//! function-local slots by index, jump targets are block indices, call
//! targets are function indices. Every instruction carries a unique code
//! address assigned densely in declaration order.

use serde::{Deserialize, Serialize};

/// Code address of the first instruction.
pub const CODE_BASE: u64 = 0x1000;
/// Address stride per instruction.
pub const CODE_STRIDE: u64 = 4;
/// Data address of the first global word.
pub const GLOBAL_BASE: u64 = 0x10000;
/// Base of the call-stack region; frames grow upward by depth.
pub const STACK_BASE: u64 = 0x10_0000;
/// Bytes reserved per call frame.
pub const FRAME_BYTES: u64 = 4096;
/// Bytes per word. All values are 64-bit signed integers.
pub const WORD: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Scalar,
    Array(u32),
    Pointer,
}

impl VarKind {
    /// Number of memory words the declaration occupies.
    pub fn words(&self) -> u64 {
        match self {
            VarKind::Array(n) => *n as u64,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    pub critical: bool,
    /// Static initializer words (globals only); locals start zeroed.
    pub init: Vec<i64>,
}

/// Reference to a resolved variable slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarRef {
    Global(u32),
    Local(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operand {
    Var(VarRef),
    Imm(i64),
}

impl Operand {
    pub fn var(&self) -> Option<VarRef> {
        match self {
            Operand::Var(v) => Some(*v),
            Operand::Imm(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

/// Non-terminator instruction payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstOp {
    Assign { dest: VarRef, src: Operand },
    Bin { dest: VarRef, op: BinOp, lhs: Operand, rhs: Operand },
    Load { dest: VarRef, addr: Operand },
    Store { addr: Operand, value: Operand },
    /// dest = address of a variable.
    AddrOfVar { dest: VarRef, var: VarRef },
    /// dest = code address of a function entry.
    AddrOfFunc { dest: VarRef, func: u32 },
    /// dest = code address of a block within the enclosing function.
    AddrOfBlock { dest: VarRef, block: u32 },
    /// dest = address of element `index` of array/pointer `base`.
    Elem { dest: VarRef, base: VarRef, index: Operand },
    AttestBegin { op_id: u32 },
    AttestEnd { op_id: u32 },
    Input { dest: VarRef },
    Output { value: Operand },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inst {
    pub addr: u64,
    pub line: u32,
    pub op: InstOp,
}

/// Branch condition: a single operand (nonzero = taken) or a comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cond {
    Value(Operand),
    Cmp(Operand, BinOp, Operand),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermOp {
    DirectCall {
        func: u32,
        args: Vec<Operand>,
        dest: Option<VarRef>,
        /// Block executed after the call returns.
        cont: u32,
    },
    IndirectCall {
        target: VarRef,
        args: Vec<Operand>,
        dest: Option<VarRef>,
        cont: u32,
    },
    DirectJump { target: u32 },
    IndirectJump { target: VarRef },
    CondBranch { cond: Cond, taken: u32, not_taken: u32 },
    Return { value: Option<Operand> },
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub addr: u64,
    pub line: u32,
    pub op: TermOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub label: String,
    pub body: Vec<Inst>,
    pub term: Term,
}

impl Block {
    /// Address of the block start: its first instruction.
    pub fn addr(&self) -> u64 {
        self.body.first().map(|i| i.addr).unwrap_or(self.term.addr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Function {
    pub name: String,
    pub params: Vec<VarDecl>,
    pub locals: Vec<VarDecl>,
    pub blocks: Vec<Block>,
    /// Word offset of each slot (params then locals) within a frame.
    pub slot_offsets: Vec<u64>,
    /// Total frame words.
    pub frame_words: u64,
}

impl Function {
    pub fn entry_addr(&self) -> u64 {
        self.blocks[0].addr()
    }

    pub fn slot(&self, idx: u32) -> &VarDecl {
        let idx = idx as usize;
        if idx < self.params.len() {
            &self.params[idx]
        } else {
            &self.locals[idx - self.params.len()]
        }
    }

    pub fn slot_count(&self) -> u32 {
        (self.params.len() + self.locals.len()) as u32
    }

    pub fn slot_named(&self, name: &str) -> Option<u32> {
        self.params
            .iter()
            .chain(self.locals.iter())
            .position(|d| d.name == name)
            .map(|i| i as u32)
    }
}

/// Location of an instruction in the program, keyed by code address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loc {
    Body { func: u32, block: u32, idx: u32 },
    Term { func: u32, block: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub globals: Vec<VarDecl>,
    pub functions: Vec<Function>,
    /// Index of the entry function (`main`).
    pub entry: u32,
    /// Interrupt vector table: (interrupt id, handler function index).
    pub vectors: Vec<(u32, u32)>,
    /// Word offset of each global within the data region.
    pub global_offsets: Vec<u64>,
    /// Total instruction count (addresses are dense from CODE_BASE).
    pub inst_count: u64,
}

impl Program {
    pub fn function_named(&self, name: &str) -> Option<u32> {
        self.functions
            .iter()
            .position(|f| f.name == name)
            .map(|i| i as u32)
    }

    pub fn global_named(&self, name: &str) -> Option<u32> {
        self.globals
            .iter()
            .position(|d| d.name == name)
            .map(|i| i as u32)
    }

    pub fn global_addr(&self, idx: u32) -> u64 {
        GLOBAL_BASE + self.global_offsets[idx as usize] * WORD
    }

    /// Bytes occupied by the global data region.
    pub fn global_region_words(&self) -> u64 {
        self.globals.iter().map(|d| d.kind.words()).sum()
    }

    /// Dense address-to-location index for the interpreter and verifier.
    pub fn build_loc_index(&self) -> Vec<Loc> {
        let mut index = Vec::with_capacity(self.inst_count as usize);
        for (fi, f) in self.functions.iter().enumerate() {
            for (bi, b) in f.blocks.iter().enumerate() {
                for (ii, _) in b.body.iter().enumerate() {
                    index.push(Loc::Body {
                        func: fi as u32,
                        block: bi as u32,
                        idx: ii as u32,
                    });
                }
                index.push(Loc::Term {
                    func: fi as u32,
                    block: bi as u32,
                });
            }
        }
        index
    }

    pub fn loc_of_addr(index: &[Loc], addr: u64) -> Option<Loc> {
        if addr < CODE_BASE || (addr - CODE_BASE) % CODE_STRIDE != 0 {
            return None;
        }
        index.get(((addr - CODE_BASE) / CODE_STRIDE) as usize).copied()
    }

    /// All (begin, end) marker pairs found in layout order, per function.
    /// Returns (op_id, func, begin addr, end addr) assuming a validated program.
    pub fn marker_pairs(&self) -> Vec<MarkerPair> {
        let mut pairs = Vec::new();
        for (fi, f) in self.functions.iter().enumerate() {
            let mut open: Option<(u32, u64)> = None;
            for b in &f.blocks {
                for inst in &b.body {
                    match inst.op {
                        InstOp::AttestBegin { op_id } => open = Some((op_id, inst.addr)),
                        InstOp::AttestEnd { op_id } => {
                            if let Some((id, begin)) = open.take() {
                                if id == op_id {
                                    pairs.push(MarkerPair {
                                        op_id,
                                        func: fi as u32,
                                        begin_addr: begin,
                                        end_addr: inst.addr,
                                    });
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
        pairs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkerPair {
    pub op_id: u32,
    pub func: u32,
    pub begin_addr: u64,
    pub end_addr: u64,
}
