//! JSON scenario descriptions: inputs, injected faults, and interrupt
//! schedules for a run, with an expected verification outcome. Fault
//! locations are symbolic (`func/block/index`) so scenarios survive
//! edits to unrelated parts of a program.

use crate::mini_ir::Program;
use crate::prover::{FaultAction, FaultSpec, InterruptSpec};
use crate::verifier::FailureClass;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub op_id: u32,
    #[serde(default)]
    pub inputs: Vec<i64>,
    #[serde(default)]
    pub faults: Vec<FaultDesc>,
    #[serde(default)]
    pub interrupts: Vec<InterruptDesc>,
    /// "PASS" or a failure class name such as "CFI_TARGET".
    pub expect: Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expectation {
    Pass(PassMarker),
    /// Evidence verifies clean but reconstructs a path that differs from
    /// the benign run: an unintended (but legal) operation was triggered.
    PathMismatch(PathMarker),
    Fail(FailureClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassMarker {
    #[serde(rename = "PASS")]
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathMarker {
    #[serde(rename = "PATH_MISMATCH")]
    PathMismatch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultDesc {
    /// `func/block/N` (0-based body index) or `func/block/term`.
    pub site: String,
    #[serde(default = "one")]
    pub occurrence: u32,
    pub action: ActionDesc,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionDesc {
    /// Write `value` to a variable. `var` is `@name` for a global.
    OverwriteVar { var: String, value: i64 },
    /// Replace the current frame's saved return address with the start
    /// of `target` (`func/block` or `func`).
    OverwriteReturn { target: String },
    /// Redirect the next indirect transfer to `target`.
    OverwriteIndirect { target: String },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InterruptDesc {
    pub irq: u32,
    pub at_step: u64,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("unknown block {1:?} in function {0:?}")]
    UnknownBlock(String, String),
    #[error("instruction index {0} out of range for site {1:?}")]
    IndexOutOfRange(usize, String),
    #[error("malformed site {0:?}, expected func/block/N or func/block/term")]
    MalformedSite(String),
    #[error("unknown global {0:?}")]
    UnknownGlobal(String),
    #[error("malformed target {0:?}, expected func or func/block")]
    MalformedTarget(String),
}

fn block_addr(program: &Program, func: &str, block: &str) -> Result<u64, ScenarioError> {
    let fi = program
        .function_named(func)
        .ok_or_else(|| ScenarioError::UnknownFunction(func.to_string()))?;
    program.functions[fi as usize]
        .blocks
        .iter()
        .find(|b| b.label == block)
        .map(|b| b.addr())
        .ok_or_else(|| ScenarioError::UnknownBlock(func.to_string(), block.to_string()))
}

/// Resolves `func/block/N` or `func/block/term` to a code address.
pub fn resolve_site(program: &Program, site: &str) -> Result<u64, ScenarioError> {
    let parts: Vec<&str> = site.split('/').collect();
    let [func, block, pos] = parts[..] else {
        return Err(ScenarioError::MalformedSite(site.to_string()));
    };
    let fi = program
        .function_named(func)
        .ok_or_else(|| ScenarioError::UnknownFunction(func.to_string()))?;
    let b = program.functions[fi as usize]
        .blocks
        .iter()
        .find(|b| b.label == block)
        .ok_or_else(|| ScenarioError::UnknownBlock(func.to_string(), block.to_string()))?;
    if pos == "term" {
        return Ok(b.term.addr);
    }
    let idx: usize = pos
        .parse()
        .map_err(|_| ScenarioError::MalformedSite(site.to_string()))?;
    b.body
        .get(idx)
        .map(|i| i.addr)
        .ok_or_else(|| ScenarioError::IndexOutOfRange(idx, site.to_string()))
}

/// Resolves `func` (entry address) or `func/block` (block start).
pub fn resolve_target(program: &Program, target: &str) -> Result<u64, ScenarioError> {
    match target.split('/').collect::<Vec<_>>()[..] {
        [func] => program
            .function_named(func)
            .map(|fi| program.functions[fi as usize].entry_addr())
            .ok_or_else(|| ScenarioError::UnknownFunction(func.to_string())),
        [func, block] => block_addr(program, func, block),
        _ => Err(ScenarioError::MalformedTarget(target.to_string())),
    }
}

fn resolve_var(program: &Program, var: &str) -> Result<u64, ScenarioError> {
    let name = var
        .strip_prefix('@')
        .ok_or_else(|| ScenarioError::UnknownGlobal(var.to_string()))?;
    program
        .global_named(name)
        .map(|g| program.global_addr(g))
        .ok_or_else(|| ScenarioError::UnknownGlobal(var.to_string()))
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn resolve(
        &self,
        program: &Program,
    ) -> Result<(Vec<FaultSpec>, Vec<InterruptSpec>), ScenarioError> {
        let mut faults = Vec::new();
        for f in &self.faults {
            let addr = resolve_site(program, &f.site)?;
            let action = match &f.action {
                ActionDesc::OverwriteVar { var, value } => FaultAction::OverwriteVar {
                    addr: resolve_var(program, var)?,
                    value: *value,
                },
                ActionDesc::OverwriteReturn { target } => FaultAction::OverwriteReturn {
                    value: resolve_target(program, target)?,
                },
                ActionDesc::OverwriteIndirect { target } => FaultAction::OverwriteIndirectTarget {
                    value: resolve_target(program, target)?,
                },
            };
            faults.push(FaultSpec { addr, occurrence: f.occurrence, action });
        }
        let interrupts = self
            .interrupts
            .iter()
            .map(|i| InterruptSpec { irq_id: i.irq, at_step: i.at_step })
            .collect();
        Ok((faults, interrupts))
    }

    /// Whether an outcome matches the scenario's expectation.
    /// `path_diverged` reports whether the reconstructed path differed
    /// from a benign run's path (only meaningful when the report passes).
    pub fn matches(
        &self,
        report: &crate::verifier::VerificationReport,
        path_diverged: bool,
    ) -> bool {
        match self.expect {
            Expectation::Pass(_) => report.pass && !path_diverged,
            Expectation::PathMismatch(_) => report.pass && path_diverged,
            Expectation::Fail(class) => !report.pass && report.has(class),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mini_ir::parse_program;

    const SRC: &str = "global @g = 1\nfunc helper(a) {\nentry:\n  a = a + 1\n  ret a\n}\nfunc main() {\n  local x\nentry:\n  attest_begin 1\n  x = input\n  call helper(x) -> x then fin\nfin:\n  output x\n  attest_end 1\n  halt\n}\n";

    #[test]
    fn sites_and_targets_resolve() {
        let p = parse_program(SRC).unwrap();
        let entry0 = resolve_site(&p, "main/entry/0").unwrap();
        let term = resolve_site(&p, "main/entry/term").unwrap();
        assert!(term > entry0);
        assert_eq!(resolve_target(&p, "helper").unwrap(), p.functions[0].entry_addr());
        assert_eq!(
            resolve_target(&p, "main/fin").unwrap(),
            p.functions[1].blocks[1].addr()
        );
        assert!(resolve_site(&p, "main/nope/0").is_err());
        assert!(resolve_target(&p, "a/b/c").is_err());
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = r#"{
            "name": "spoof",
            "op_id": 1,
            "inputs": [4],
            "faults": [
                {"site": "main/entry/term", "action": {"kind": "overwrite_var", "var": "@g", "value": 9}},
                {"site": "helper/entry/term", "occurrence": 2,
                 "action": {"kind": "overwrite_return", "target": "main/fin"}}
            ],
            "interrupts": [{"irq": 3, "at_step": 6}],
            "expect": "CVI_VIOLATION"
        }"#;
        let sc = Scenario::from_json(s).unwrap();
        assert!(matches!(sc.expect, Expectation::Fail(FailureClass::CviViolation)));
        let p = parse_program(SRC).unwrap();
        let (faults, irqs) = sc.resolve(&p).unwrap();
        assert_eq!(faults.len(), 2);
        assert_eq!(faults[1].occurrence, 2);
        assert_eq!(irqs.len(), 1);
        let pass: Scenario =
            serde_json::from_str(r#"{"name":"ok","op_id":1,"expect":"PASS"}"#).unwrap();
        assert!(matches!(pass.expect, Expectation::Pass(_)));
    }
}
