//! Structural validation beyond what parsing enforces syntactically:
//! attestation marker pairing and non-nesting, and marker/function
//! consistency. Dominance-based scope checks live in the analysis module.

use super::ast::*;
use crate::diag::Diagnostic;
use std::collections::HashMap;

/// Returns an empty list iff the program is structurally well formed.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    // Marker pairing, walked in layout order per function.
    let mut op_funcs: HashMap<u32, u32> = HashMap::new();
    for (fi, f) in program.functions.iter().enumerate() {
        let mut open: Option<(u32, u32)> = None; // (op id, line)
        for b in &f.blocks {
            for inst in &b.body {
                match inst.op {
                    InstOp::AttestBegin { op_id } => {
                        if let Some((prev, _)) = open {
                            diags.push(Diagnostic::new(
                                inst.line,
                                1,
                                format!(
                                    "nested operation: attest_begin {op_id} while operation {prev} is open"
                                ),
                            ));
                        }
                        if let Some(other) = op_funcs.get(&op_id) {
                            if *other != fi as u32 {
                                diags.push(Diagnostic::new(
                                    inst.line,
                                    1,
                                    format!("operation {op_id} markers span functions"),
                                ));
                            }
                        }
                        op_funcs.insert(op_id, fi as u32);
                        open = Some((op_id, inst.line));
                    }
                    InstOp::AttestEnd { op_id } => match open {
                        Some((id, _)) if id == op_id => {
                            open = None;
                        }
                        Some((id, _)) => diags.push(Diagnostic::new(
                            inst.line,
                            1,
                            format!("attest_end {op_id} does not match open operation {id}"),
                        )),
                        None => {
                            // An end with a begin in another function is the
                            // "markers span functions" case; otherwise it is
                            // simply unmatched.
                            let msg = match op_funcs.get(&op_id) {
                                Some(other) if *other != fi as u32 => {
                                    format!("operation {op_id} markers span functions")
                                }
                                _ => format!("attest_end {op_id} without matching attest_begin"),
                            };
                            diags.push(Diagnostic::new(inst.line, 1, msg));
                        }
                    },
                    _ => {}
                }
            }
        }
        if let Some((id, line)) = open {
            diags.push(Diagnostic::new(
                line,
                1,
                format!("attest_begin {id} without matching attest_end in `{}`", f.name),
            ));
        }
    }

    // Interrupt handlers take no parameters.
    for (id, func) in &program.vectors {
        let f = &program.functions[*func as usize];
        if !f.params.is_empty() {
            diags.push(Diagnostic::new(
                0,
                1,
                format!("interrupt handler `{}` (vector {id}) must take no parameters", f.name),
            ));
        }
    }

    diags
}
