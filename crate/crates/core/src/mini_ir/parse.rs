//! Line-oriented parser for the MiniIR text format.
//!
//! The grammar is documented in `docs/minir-format.md`. Parsing resolves
//! every name (globals, locals, labels, functions) and assigns each
//! instruction a code address: `CODE_BASE + CODE_STRIDE * n` in declaration
//! order, so two parses of identical text always produce identical address
//! maps.

use super::ast::*;
use crate::diag::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Global(String),
    Int(i64),
    Punct(&'static str),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Global(s) => format!("`@{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Punct(p) => format!("`{p}`"),
        }
    }
}

const PUNCTS: &[&str] = &[
    "->", "==", "!=", "<=", ">=", "<", ">", "=", ",", "(", ")", "{", "}", "[", "]", ":", "+",
    "-", "*", "/", "%",
];

fn lex_line(line: &str, lineno: u32, diags: &mut Vec<Diagnostic>) -> Vec<(Tok, u32)> {
    let mut toks = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0usize;
    'outer: while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let col = (i + 1) as u32;
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'x')
            {
                i += 1;
            }
            let text = &line[start..i];
            let parsed = if let Some(hexpart) = text.strip_prefix("0x") {
                i64::from_str_radix(hexpart, 16).ok()
            } else {
                text.parse::<i64>().ok()
            };
            match parsed {
                Some(n) => toks.push((Tok::Int(n), col)),
                None => diags.push(Diagnostic::new(lineno, col, format!("bad number `{text}`"))),
            }
            continue;
        }
        if c == '@' || c.is_ascii_alphabetic() || c == '_' {
            let global = c == '@';
            let start = if global { i + 1 } else { i };
            i = start;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            if i == start {
                diags.push(Diagnostic::new(lineno, col, "empty identifier".into()));
                i += 1;
                continue;
            }
            let name = line[start..i].to_string();
            toks.push((if global { Tok::Global(name) } else { Tok::Ident(name) }, col));
            continue;
        }
        for p in PUNCTS {
            if line[i..].starts_with(p) {
                toks.push((Tok::Punct(p), col));
                i += p.len();
                continue 'outer;
            }
        }
        diags.push(Diagnostic::new(lineno, col, format!("unexpected character `{c}`")));
        i += 1;
    }
    toks
}

/// Cursor over one line of tokens.
struct Cur<'a> {
    toks: &'a [(Tok, u32)],
    pos: usize,
    line: u32,
}

impl<'a> Cur<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }
    fn col(&self) -> u32 {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|(_, c)| *c)
            .unwrap_or(1)
    }
    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }
    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }
    fn expect_punct(&mut self, p: &'static str) -> Result<(), Diagnostic> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{p}`")))
        }
    }
    fn expect_ident(&mut self) -> Result<String, Diagnostic> {
        let col = self.col();
        let found = match self.next() {
            Some(Tok::Ident(s)) => return Ok(s.clone()),
            other => other.map(|t| format!(", found {}", t.describe())).unwrap_or_default(),
        };
        Err(Diagnostic::new(self.line, col, format!("expected identifier{found}")))
    }
    fn expect_int(&mut self) -> Result<i64, Diagnostic> {
        let col = self.col();
        match self.next() {
            Some(Tok::Int(n)) => Ok(*n),
            _ => Err(Diagnostic::new(self.line, col, "expected integer".into())),
        }
    }
    fn expect_end(&mut self) -> Result<(), Diagnostic> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.err("trailing tokens".into()))
        }
    }
    fn err(&self, msg: String) -> Diagnostic {
        Diagnostic::new(self.line, self.col(), msg)
    }
}

fn binop_of(tok: &Tok) -> Option<BinOp> {
    Some(match tok {
        Tok::Punct("+") => BinOp::Add,
        Tok::Punct("-") => BinOp::Sub,
        Tok::Punct("*") => BinOp::Mul,
        Tok::Punct("/") => BinOp::Div,
        Tok::Punct("%") => BinOp::Rem,
        Tok::Punct("==") => BinOp::Eq,
        Tok::Punct("!=") => BinOp::Ne,
        Tok::Punct("<") => BinOp::Lt,
        Tok::Punct("<=") => BinOp::Le,
        Tok::Punct(">") => BinOp::Gt,
        Tok::Punct(">=") => BinOp::Ge,
        Tok::Ident(s) if s == "and" => BinOp::And,
        Tok::Ident(s) if s == "or" => BinOp::Or,
        _ => return None,
    })
}

/// Unresolved reference to a block label, patched after a function parses.
struct LabelRef {
    block: usize,
    line: u32,
    col: u32,
    label: String,
    slot: LabelSlot,
}

enum LabelSlot {
    Taken,
    NotTaken,
    JumpTarget,
    CallCont,
    /// `blkaddr` body instruction at index `usize` in the block.
    BlkAddr(usize),
}

struct FuncCtx {
    func: Function,
    label_refs: Vec<LabelRef>,
    current: Option<Block>,
    saw_label: bool,
}

pub struct Parser<'a> {
    source: &'a str,
    diags: Vec<Diagnostic>,
    program: Program,
    func_names: Vec<String>,
    raw_vectors: Vec<(u32, String, u32)>,
}

/// Parse MiniIR source text into a resolved [`Program`].
pub fn parse_program(text: &str) -> Result<Program, Vec<Diagnostic>> {
    Parser::new(text).run()
}

impl<'a> Parser<'a> {
    fn new(source: &'a str) -> Self {
        Parser {
            source,
            diags: Vec::new(),
            program: Program {
                globals: Vec::new(),
                functions: Vec::new(),
                entry: 0,
                vectors: Vec::new(),
                global_offsets: Vec::new(),
                inst_count: 0,
            },
            func_names: Vec::new(),
            raw_vectors: Vec::new(),
        }
    }

    fn run(mut self) -> Result<Program, Vec<Diagnostic>> {
        // Pre-pass: register function names so calls may be forward references.
        for (n, line) in self.source.lines().enumerate() {
            let trimmed = line.trim_start();
            if let Some(rest) = trimmed.strip_prefix("func ") {
                if let Some(name) = rest.split(|c: char| c == '(' || c.is_whitespace()).next() {
                    if !name.is_empty() {
                        if self.func_names.iter().any(|f| f == name) {
                            self.diags.push(Diagnostic::new(
                                (n + 1) as u32,
                                1,
                                format!("duplicate function `{name}`"),
                            ));
                        } else {
                            self.func_names.push(name.to_string());
                        }
                    }
                }
            }
        }

        let lines: Vec<&str> = self.source.lines().collect();
        let mut ctx: Option<FuncCtx> = None;
        for (n, line) in lines.iter().enumerate() {
            let lineno = (n + 1) as u32;
            let toks = lex_line(line, lineno, &mut self.diags);
            if toks.is_empty() {
                continue;
            }
            let mut cur = Cur { toks: &toks, pos: 0, line: lineno };
            let res = if let Some(fc) = ctx.as_mut() {
                self.parse_func_line(&mut cur, fc).map(|closed| {
                    if closed {
                        let fc = ctx.take().unwrap();
                        self.finish_function(fc);
                    }
                })
            } else {
                match self.parse_top_line(&mut cur) {
                    Ok(Some(fc)) => {
                        ctx = Some(fc);
                        Ok(())
                    }
                    Ok(None) => Ok(()),
                    Err(e) => Err(e),
                }
            };
            if let Err(d) = res {
                self.diags.push(d);
            }
        }
        if let Some(fc) = ctx.take() {
            self.diags.push(Diagnostic::new(
                lines.len() as u32,
                1,
                format!("function `{}` not closed with `}}`", fc.func.name),
            ));
            self.finish_function(fc);
        }

        self.resolve_vectors();
        self.finish_program();
        if self.diags.is_empty() {
            Ok(self.program)
        } else {
            Err(self.diags)
        }
    }

    fn parse_top_line(&mut self, cur: &mut Cur) -> Result<Option<FuncCtx>, Diagnostic> {
        if cur.eat_kw("global") {
            self.parse_global(cur, false)?;
            return Ok(None);
        }
        if cur.eat_kw("array") {
            self.parse_global(cur, true)?;
            return Ok(None);
        }
        if cur.eat_kw("vector") {
            let id = cur.expect_int()? as u32;
            let col = cur.col();
            let name = cur.expect_ident()?;
            cur.expect_end()?;
            self.raw_vectors.push((id, name, cur.line));
            let _ = col;
            return Ok(None);
        }
        if cur.eat_kw("func") {
            return Ok(Some(self.parse_func_header(cur)?));
        }
        Err(cur.err("expected `global`, `array`, `vector`, or `func`".into()))
    }

    fn parse_global(&mut self, cur: &mut Cur, is_array: bool) -> Result<(), Diagnostic> {
        let is_ptr = !is_array && cur.eat_kw("ptr");
        let critical = cur.eat_kw("critical");
        let col = cur.col();
        let name = match cur.next() {
            Some(Tok::Global(s)) => s.clone(),
            _ => {
                return Err(Diagnostic::new(
                    cur.line,
                    col,
                    "expected global name (`@name`)".into(),
                ))
            }
        };
        if self.program.globals.iter().any(|g| g.name == name) {
            return Err(Diagnostic::new(cur.line, col, format!("duplicate global `@{name}`")));
        }
        let kind = if is_array {
            cur.expect_punct("[")?;
            let len = cur.expect_int()?;
            cur.expect_punct("]")?;
            if len <= 0 {
                return Err(cur.err("array length must be positive".into()));
            }
            VarKind::Array(len as u32)
        } else if is_ptr {
            VarKind::Pointer
        } else {
            VarKind::Scalar
        };
        let mut init = Vec::new();
        if cur.eat_punct("=") {
            if is_array {
                cur.expect_punct("{")?;
                loop {
                    init.push(self.parse_signed_int(cur)?);
                    if !cur.eat_punct(",") {
                        break;
                    }
                }
                cur.expect_punct("}")?;
                if let VarKind::Array(len) = kind {
                    if init.len() > len as usize {
                        return Err(cur.err("more initializers than array elements".into()));
                    }
                }
            } else {
                init.push(self.parse_signed_int(cur)?);
            }
        }
        cur.expect_end()?;
        self.program.globals.push(VarDecl { name, kind, critical, init });
        Ok(())
    }

    fn parse_signed_int(&mut self, cur: &mut Cur) -> Result<i64, Diagnostic> {
        let neg = cur.eat_punct("-");
        let n = cur.expect_int()?;
        Ok(if neg { -n } else { n })
    }

    fn parse_func_header(&mut self, cur: &mut Cur) -> Result<FuncCtx, Diagnostic> {
        let name = cur.expect_ident()?;
        cur.expect_punct("(")?;
        let mut params = Vec::new();
        if !cur.eat_punct(")") {
            loop {
                let is_ptr = cur.eat_kw("ptr");
                let critical = cur.eat_kw("critical");
                let pname = cur.expect_ident()?;
                params.push(VarDecl {
                    name: pname,
                    kind: if is_ptr { VarKind::Pointer } else { VarKind::Scalar },
                    critical,
                    init: Vec::new(),
                });
                if cur.eat_punct(")") {
                    break;
                }
                cur.expect_punct(",")?;
            }
        }
        cur.expect_punct("{")?;
        cur.expect_end()?;
        Ok(FuncCtx {
            func: Function {
                name,
                params,
                locals: Vec::new(),
                blocks: Vec::new(),
                slot_offsets: Vec::new(),
                frame_words: 0,
            },
            label_refs: Vec::new(),
            current: None,
            saw_label: false,
        })
    }

    /// Returns Ok(true) when the function body is closed by `}`.
    fn parse_func_line(&mut self, cur: &mut Cur, fc: &mut FuncCtx) -> Result<bool, Diagnostic> {
        if cur.eat_punct("}") {
            cur.expect_end()?;
            if fc.current.is_some() {
                return Err(cur.err(format!(
                    "block `{}` missing terminator",
                    fc.current.as_ref().unwrap().label
                )));
            }
            return Ok(true);
        }
        if cur.eat_kw("local") {
            if fc.saw_label {
                return Err(cur.err("locals must be declared before the first block".into()));
            }
            let is_array = cur.eat_kw("array");
            let is_ptr = !is_array && cur.eat_kw("ptr");
            let critical = cur.eat_kw("critical");
            let name = cur.expect_ident()?;
            let kind = if is_array {
                cur.expect_punct("[")?;
                let len = cur.expect_int()?;
                cur.expect_punct("]")?;
                if len <= 0 {
                    return Err(cur.err("array length must be positive".into()));
                }
                VarKind::Array(len as u32)
            } else if is_ptr {
                VarKind::Pointer
            } else {
                VarKind::Scalar
            };
            cur.expect_end()?;
            if fc.func.params.iter().chain(fc.func.locals.iter()).any(|d| d.name == name) {
                return Err(cur.err(format!("duplicate local `{name}`")));
            }
            fc.func.locals.push(VarDecl { name, kind, critical, init: Vec::new() });
            return Ok(false);
        }
        // `label:` block header
        if matches!(cur.peek(), Some(Tok::Ident(_)))
            && matches!(cur.toks.get(cur.pos + 1), Some((Tok::Punct(":"), _)))
        {
            let label = cur.expect_ident()?;
            cur.expect_punct(":")?;
            cur.expect_end()?;
            if fc.current.is_some() {
                return Err(cur.err(format!(
                    "block `{}` missing terminator before label `{label}`",
                    fc.current.as_ref().unwrap().label
                )));
            }
            if fc.func.blocks.iter().any(|b| b.label == label) {
                return Err(cur.err(format!("duplicate label `{label}`")));
            }
            fc.saw_label = true;
            fc.current = Some(Block {
                label,
                body: Vec::new(),
                term: Term { addr: 0, line: cur.line, op: TermOp::Halt },
            });
            return Ok(false);
        }
        if fc.current.is_none() {
            return Err(cur.err("instruction outside any block (missing `label:`)".into()));
        }
        self.parse_instruction(cur, fc)?;
        Ok(false)
    }

    fn resolve_var(&mut self, fc: &FuncCtx, name_tok: &Tok, line: u32, col: u32) -> Result<VarRef, Diagnostic> {
        match name_tok {
            Tok::Global(g) => self
                .program
                .global_named(g)
                .map(VarRef::Global)
                .ok_or_else(|| Diagnostic::new(line, col, format!("unresolved global `@{g}`"))),
            Tok::Ident(l) => fc
                .func
                .slot_named(l)
                .map(VarRef::Local)
                .ok_or_else(|| Diagnostic::new(line, col, format!("unresolved variable `{l}`"))),
            _ => Err(Diagnostic::new(line, col, "expected variable".into())),
        }
    }

    fn parse_var(&mut self, cur: &mut Cur, fc: &FuncCtx) -> Result<VarRef, Diagnostic> {
        let col = cur.col();
        let line = cur.line;
        let tok = cur
            .next()
            .cloned()
            .ok_or_else(|| Diagnostic::new(line, col, "expected variable".into()))?;
        self.resolve_var(fc, &tok, line, col)
    }

    fn parse_operand(&mut self, cur: &mut Cur, fc: &FuncCtx) -> Result<Operand, Diagnostic> {
        let col = cur.col();
        let line = cur.line;
        if cur.eat_punct("-") {
            let n = cur.expect_int()?;
            return Ok(Operand::Imm(-n));
        }
        let tok = cur
            .next()
            .cloned()
            .ok_or_else(|| Diagnostic::new(line, col, "expected operand".into()))?;
        match tok {
            Tok::Int(n) => Ok(Operand::Imm(n)),
            t => Ok(Operand::Var(self.resolve_var(fc, &t, line, col)?)),
        }
    }

    fn parse_args(&mut self, cur: &mut Cur, fc: &FuncCtx) -> Result<Vec<Operand>, Diagnostic> {
        cur.expect_punct("(")?;
        let mut args = Vec::new();
        if cur.eat_punct(")") {
            return Ok(args);
        }
        loop {
            args.push(self.parse_operand(cur, fc)?);
            if cur.eat_punct(")") {
                return Ok(args);
            }
            cur.expect_punct(",")?;
        }
    }

    /// Parse `-> dest then label` tail common to call forms.
    fn parse_call_tail(
        &mut self,
        cur: &mut Cur,
        fc: &mut FuncCtx,
    ) -> Result<(Option<VarRef>, String), Diagnostic> {
        let dest = if cur.eat_punct("->") {
            Some(self.parse_var(cur, fc)?)
        } else {
            None
        };
        if !cur.eat_kw("then") {
            return Err(cur.err("expected `then <label>` after call".into()));
        }
        let label = cur.expect_ident()?;
        Ok((dest, label))
    }

    fn push_term(&mut self, cur: &mut Cur, fc: &mut FuncCtx, op: TermOp) -> Result<(), Diagnostic> {
        cur.expect_end()?;
        let blk = fc.current.as_mut().unwrap();
        blk.term = Term { addr: 0, line: cur.line, op };
        let done = fc.current.take().unwrap();
        fc.func.blocks.push(done);
        Ok(())
    }

    fn label_ref(&mut self, fc: &mut FuncCtx, cur: &Cur, label: String, slot: LabelSlot) {
        fc.label_refs.push(LabelRef {
            block: fc.func.blocks.len(), // index the current block will get
            line: cur.line,
            col: cur.col(),
            label,
            slot,
        });
    }

    fn parse_cond(&mut self, cur: &mut Cur, fc: &FuncCtx) -> Result<Cond, Diagnostic> {
        let lhs = self.parse_operand(cur, fc)?;
        if let Some(op) = cur.peek().and_then(binop_of) {
            cur.pos += 1;
            let rhs = self.parse_operand(cur, fc)?;
            Ok(Cond::Cmp(lhs, op, rhs))
        } else {
            Ok(Cond::Value(lhs))
        }
    }

    fn parse_instruction(&mut self, cur: &mut Cur, fc: &mut FuncCtx) -> Result<(), Diagnostic> {
        // Terminators first.
        if cur.eat_kw("halt") {
            return self.push_term(cur, fc, TermOp::Halt);
        }
        if cur.eat_kw("ret") {
            let value = if cur.peek().is_some() {
                Some(self.parse_operand(cur, fc)?)
            } else {
                None
            };
            return self.push_term(cur, fc, TermOp::Return { value });
        }
        if cur.eat_kw("jump") {
            let label = cur.expect_ident()?;
            self.label_ref(fc, cur, label, LabelSlot::JumpTarget);
            return self.push_term(cur, fc, TermOp::DirectJump { target: u32::MAX });
        }
        if cur.eat_kw("ijump") {
            let target = self.parse_var(cur, fc)?;
            return self.push_term(cur, fc, TermOp::IndirectJump { target });
        }
        if cur.eat_kw("br") {
            let cond = self.parse_cond(cur, fc)?;
            cur.expect_punct(",")?;
            let taken = cur.expect_ident()?;
            cur.expect_punct(",")?;
            let not_taken = cur.expect_ident()?;
            self.label_ref(fc, cur, taken, LabelSlot::Taken);
            self.label_ref(fc, cur, not_taken, LabelSlot::NotTaken);
            return self.push_term(
                cur,
                fc,
                TermOp::CondBranch { cond, taken: u32::MAX, not_taken: u32::MAX },
            );
        }
        if cur.eat_kw("call") {
            let col = cur.col();
            let name = cur.expect_ident()?;
            let func = self
                .func_names
                .iter()
                .position(|f| *f == name)
                .ok_or_else(|| Diagnostic::new(cur.line, col, format!("unresolved function `{name}`")))?
                as u32;
            let args = self.parse_args(cur, fc)?;
            let (dest, cont) = self.parse_call_tail(cur, fc)?;
            self.label_ref(fc, cur, cont, LabelSlot::CallCont);
            return self.push_term(
                cur,
                fc,
                TermOp::DirectCall { func, args, dest, cont: u32::MAX },
            );
        }
        if cur.eat_kw("icall") {
            let target = self.parse_var(cur, fc)?;
            let args = self.parse_args(cur, fc)?;
            let (dest, cont) = self.parse_call_tail(cur, fc)?;
            self.label_ref(fc, cur, cont, LabelSlot::CallCont);
            return self.push_term(
                cur,
                fc,
                TermOp::IndirectCall { target, args, dest, cont: u32::MAX },
            );
        }
        // Non-terminators.
        if cur.eat_kw("store") {
            let addr = self.parse_operand(cur, fc)?;
            cur.expect_punct(",")?;
            let value = self.parse_operand(cur, fc)?;
            return self.push_inst(cur, fc, InstOp::Store { addr, value });
        }
        if cur.eat_kw("output") {
            let value = self.parse_operand(cur, fc)?;
            return self.push_inst(cur, fc, InstOp::Output { value });
        }
        if cur.eat_kw("attest_begin") {
            let id = cur.expect_int()? as u32;
            return self.push_inst(cur, fc, InstOp::AttestBegin { op_id: id });
        }
        if cur.eat_kw("attest_end") {
            let id = cur.expect_int()? as u32;
            return self.push_inst(cur, fc, InstOp::AttestEnd { op_id: id });
        }
        // Assignment forms: `dest = ...`
        let dest = self.parse_var(cur, fc)?;
        cur.expect_punct("=")?;
        if cur.eat_kw("load") {
            let addr = self.parse_operand(cur, fc)?;
            return self.push_inst(cur, fc, InstOp::Load { dest, addr });
        }
        if cur.eat_kw("addr") {
            let var = self.parse_var(cur, fc)?;
            return self.push_inst(cur, fc, InstOp::AddrOfVar { dest, var });
        }
        if cur.eat_kw("fnaddr") {
            let col = cur.col();
            let name = cur.expect_ident()?;
            let func = self
                .func_names
                .iter()
                .position(|f| *f == name)
                .ok_or_else(|| Diagnostic::new(cur.line, col, format!("unresolved function `{name}`")))?
                as u32;
            return self.push_inst(cur, fc, InstOp::AddrOfFunc { dest, func });
        }
        if cur.eat_kw("blkaddr") {
            let label = cur.expect_ident()?;
            let idx = fc.current.as_ref().unwrap().body.len();
            self.label_ref(fc, cur, label, LabelSlot::BlkAddr(idx));
            return self.push_inst(cur, fc, InstOp::AddrOfBlock { dest, block: u32::MAX });
        }
        if cur.eat_kw("elem") {
            let base = self.parse_var(cur, fc)?;
            cur.expect_punct(",")?;
            let index = self.parse_operand(cur, fc)?;
            return self.push_inst(cur, fc, InstOp::Elem { dest, base, index });
        }
        if cur.eat_kw("input") {
            return self.push_inst(cur, fc, InstOp::Input { dest });
        }
        let lhs = self.parse_operand(cur, fc)?;
        if let Some(op) = cur.peek().and_then(binop_of) {
            cur.pos += 1;
            let rhs = self.parse_operand(cur, fc)?;
            return self.push_inst(cur, fc, InstOp::Bin { dest, op, lhs, rhs });
        }
        self.push_inst(cur, fc, InstOp::Assign { dest, src: lhs })
    }

    fn push_inst(&mut self, cur: &mut Cur, fc: &mut FuncCtx, op: InstOp) -> Result<(), Diagnostic> {
        cur.expect_end()?;
        fc.current
            .as_mut()
            .unwrap()
            .body
            .push(Inst { addr: 0, line: cur.line, op });
        Ok(())
    }

    fn finish_function(&mut self, mut fc: FuncCtx) {
        if fc.func.blocks.is_empty() {
            self.diags.push(Diagnostic::new(
                0,
                1,
                format!("function `{}` has no blocks", fc.func.name),
            ));
        }
        // Patch label references now that all blocks of the function exist.
        let labels: Vec<String> = fc.func.blocks.iter().map(|b| b.label.clone()).collect();
        for r in fc.label_refs.drain(..) {
            let Some(target) = labels.iter().position(|l| *l == r.label) else {
                self.diags.push(Diagnostic::new(
                    r.line,
                    r.col,
                    format!("unresolved label `{}`", r.label),
                ));
                continue;
            };
            let target = target as u32;
            let blk = &mut fc.func.blocks[r.block];
            match r.slot {
                LabelSlot::BlkAddr(i) => {
                    if let InstOp::AddrOfBlock { block, .. } = &mut blk.body[i].op {
                        *block = target;
                    }
                }
                slot => match (&mut blk.term.op, slot) {
                    (TermOp::CondBranch { taken, .. }, LabelSlot::Taken) => *taken = target,
                    (TermOp::CondBranch { not_taken, .. }, LabelSlot::NotTaken) => {
                        *not_taken = target
                    }
                    (TermOp::DirectJump { target: t }, LabelSlot::JumpTarget) => *t = target,
                    (TermOp::DirectCall { cont, .. }, LabelSlot::CallCont)
                    | (TermOp::IndirectCall { cont, .. }, LabelSlot::CallCont) => *cont = target,
                    _ => {}
                },
            }
        }
        // Frame layout: params then locals, arrays occupy their length.
        let mut offset = 0u64;
        for d in fc.func.params.iter().chain(fc.func.locals.iter()) {
            fc.func.slot_offsets.push(offset);
            offset += d.kind.words();
        }
        fc.func.frame_words = offset;
        if offset * WORD > FRAME_BYTES {
            self.diags.push(Diagnostic::new(
                0,
                1,
                format!("function `{}` frame exceeds {} bytes", fc.func.name, FRAME_BYTES),
            ));
        }
        self.program.functions.push(fc.func);
    }

    fn resolve_vectors(&mut self) {
        for (id, name, line) in std::mem::take(&mut self.raw_vectors) {
            match self.program.function_named(&name) {
                Some(f) => {
                    if self.program.vectors.iter().any(|(i, _)| *i == id) {
                        self.diags
                            .push(Diagnostic::new(line, 1, format!("duplicate vector id {id}")));
                    } else {
                        self.program.vectors.push((id, f));
                    }
                }
                None => self.diags.push(Diagnostic::new(
                    line,
                    1,
                    format!("unresolved handler function `{name}`"),
                )),
            }
        }
    }

    fn finish_program(&mut self) {
        // Global data layout.
        let mut offset = 0u64;
        for g in &self.program.globals {
            self.program.global_offsets.push(offset);
            offset += g.kind.words();
        }
        // Dense code addresses.
        let mut addr = CODE_BASE;
        let mut count = 0u64;
        for f in &mut self.program.functions {
            for b in &mut f.blocks {
                for i in &mut b.body {
                    i.addr = addr;
                    addr += CODE_STRIDE;
                    count += 1;
                }
                b.term.addr = addr;
                addr += CODE_STRIDE;
                count += 1;
            }
        }
        self.program.inst_count = count;
        if addr > GLOBAL_BASE {
            self.diags.push(Diagnostic::new(0, 1, "program too large: code addresses overlap the data region".into()));
        }
        match self.program.function_named("main") {
            Some(e) => self.program.entry = e,
            None => self
                .diags
                .push(Diagnostic::new(0, 1, "no entry function `main`".into())),
        }
    }
}
