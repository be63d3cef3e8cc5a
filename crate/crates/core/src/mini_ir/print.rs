//! Pretty-printer for resolved programs. `parse(print(p))` is structurally
//! identical to `p`; the round trip is checked by property tests.

use super::ast::*;

fn var_name(p: &Program, f: &Function, v: VarRef) -> String {
    match v {
        VarRef::Global(i) => format!("@{}", p.globals[i as usize].name),
        VarRef::Local(i) => f.slot(i).name.clone(),
    }
}

fn operand(p: &Program, f: &Function, o: &Operand) -> String {
    match o {
        Operand::Var(v) => var_name(p, f, *v),
        Operand::Imm(n) => format!("{n}"),
    }
}

fn decl(d: &VarDecl, global: bool) -> String {
    let prefix = if global { "@" } else { "" };
    let crit = if d.critical { "critical " } else { "" };
    match d.kind {
        VarKind::Scalar => {
            let head = if global {
                format!("global {crit}{prefix}{}", d.name)
            } else {
                format!("local {crit}{}", d.name)
            };
            match d.init.first() {
                Some(v) => format!("{head} = {v}"),
                None => head,
            }
        }
        VarKind::Pointer => {
            if global {
                format!("global ptr {crit}{prefix}{}", d.name)
            } else {
                format!("local ptr {crit}{}", d.name)
            }
        }
        VarKind::Array(len) => {
            let head = if global {
                format!("array {crit}{prefix}{}[{len}]", d.name)
            } else {
                format!("local array {crit}{}[{len}]", d.name)
            };
            if d.init.is_empty() {
                head
            } else {
                let items: Vec<String> = d.init.iter().map(|v| v.to_string()).collect();
                format!("{head} = {{ {} }}", items.join(", "))
            }
        }
    }
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for g in &p.globals {
        out.push_str(&decl(g, true));
        out.push('\n');
    }
    for (id, func) in &p.vectors {
        out.push_str(&format!("vector {id} {}\n", p.functions[*func as usize].name));
    }
    for f in &p.functions {
        out.push('\n');
        let params: Vec<String> = f
            .params
            .iter()
            .map(|d| {
                let ptr = if d.kind == VarKind::Pointer { "ptr " } else { "" };
                let crit = if d.critical { "critical " } else { "" };
                format!("{ptr}{crit}{}", d.name)
            })
            .collect();
        out.push_str(&format!("func {}({}) {{\n", f.name, params.join(", ")));
        for l in &f.locals {
            out.push_str(&format!("  {}\n", decl(l, false)));
        }
        for b in &f.blocks {
            out.push_str(&format!("{}:\n", b.label));
            for i in &b.body {
                out.push_str(&format!("  {}\n", inst(p, f, &i.op)));
            }
            out.push_str(&format!("  {}\n", term(p, f, &b.term.op)));
        }
        out.push_str("}\n");
    }
    out
}

fn inst(p: &Program, f: &Function, op: &InstOp) -> String {
    match op {
        InstOp::Assign { dest, src } => {
            format!("{} = {}", var_name(p, f, *dest), operand(p, f, src))
        }
        InstOp::Bin { dest, op, lhs, rhs } => format!(
            "{} = {} {} {}",
            var_name(p, f, *dest),
            operand(p, f, lhs),
            op.mnemonic(),
            operand(p, f, rhs)
        ),
        InstOp::Load { dest, addr } => {
            format!("{} = load {}", var_name(p, f, *dest), operand(p, f, addr))
        }
        InstOp::Store { addr, value } => {
            format!("store {}, {}", operand(p, f, addr), operand(p, f, value))
        }
        InstOp::AddrOfVar { dest, var } => {
            format!("{} = addr {}", var_name(p, f, *dest), var_name(p, f, *var))
        }
        InstOp::AddrOfFunc { dest, func } => format!(
            "{} = fnaddr {}",
            var_name(p, f, *dest),
            p.functions[*func as usize].name
        ),
        InstOp::AddrOfBlock { dest, block } => format!(
            "{} = blkaddr {}",
            var_name(p, f, *dest),
            f.blocks[*block as usize].label
        ),
        InstOp::Elem { dest, base, index } => format!(
            "{} = elem {}, {}",
            var_name(p, f, *dest),
            var_name(p, f, *base),
            operand(p, f, index)
        ),
        InstOp::AttestBegin { op_id } => format!("attest_begin {op_id}"),
        InstOp::AttestEnd { op_id } => format!("attest_end {op_id}"),
        InstOp::Input { dest } => format!("{} = input", var_name(p, f, *dest)),
        InstOp::Output { value } => format!("output {}", operand(p, f, value)),
    }
}

fn cond(p: &Program, f: &Function, c: &Cond) -> String {
    match c {
        Cond::Value(o) => operand(p, f, o),
        Cond::Cmp(l, op, r) => {
            format!("{} {} {}", operand(p, f, l), op.mnemonic(), operand(p, f, r))
        }
    }
}

fn term(p: &Program, f: &Function, op: &TermOp) -> String {
    let label = |b: &u32| f.blocks[*b as usize].label.clone();
    match op {
        TermOp::DirectCall { func, args, dest, cont } => {
            let a: Vec<String> = args.iter().map(|x| operand(p, f, x)).collect();
            let d = dest
                .map(|v| format!(" -> {}", var_name(p, f, v)))
                .unwrap_or_default();
            format!(
                "call {}({}){} then {}",
                p.functions[*func as usize].name,
                a.join(", "),
                d,
                label(cont)
            )
        }
        TermOp::IndirectCall { target, args, dest, cont } => {
            let a: Vec<String> = args.iter().map(|x| operand(p, f, x)).collect();
            let d = dest
                .map(|v| format!(" -> {}", var_name(p, f, v)))
                .unwrap_or_default();
            format!(
                "icall {}({}){} then {}",
                var_name(p, f, *target),
                a.join(", "),
                d,
                label(cont)
            )
        }
        TermOp::DirectJump { target } => format!("jump {}", label(target)),
        TermOp::IndirectJump { target } => format!("ijump {}", var_name(p, f, *target)),
        TermOp::CondBranch { cond: c, taken, not_taken } => {
            format!("br {}, {}, {}", cond(p, f, c), label(taken), label(not_taken))
        }
        TermOp::Return { value } => match value {
            Some(v) => format!("ret {}", operand(p, f, v)),
            None => "ret".into(),
        },
        TermOp::Halt => "halt".into(),
    }
}
