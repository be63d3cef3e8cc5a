//! Verification outcomes.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureClass {
    #[serde(rename = "SIGNATURE")]
    Signature,
    #[serde(rename = "NONCE_MISMATCH")]
    NonceMismatch,
    #[serde(rename = "SEGMENT_CHAIN")]
    SegmentChain,
    #[serde(rename = "INTERRUPT_MISMATCH")]
    InterruptMismatch,
    /// An indirect transfer left the statically allowed target set.
    #[serde(rename = "CFI_TARGET")]
    CfiTarget,
    /// The traces cannot be laid over any legal path: exhaustion,
    /// leftover elements, a return below the stack floor, or a halt
    /// before the operation end.
    #[serde(rename = "STRUCTURE")]
    Structure,
    #[serde(rename = "HASH_MISMATCH")]
    HashMismatch,
    #[serde(rename = "CVI_VIOLATION")]
    CviViolation,
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureClass::Signature => "SIGNATURE",
            FailureClass::NonceMismatch => "NONCE_MISMATCH",
            FailureClass::SegmentChain => "SEGMENT_CHAIN",
            FailureClass::InterruptMismatch => "INTERRUPT_MISMATCH",
            FailureClass::CfiTarget => "CFI_TARGET",
            FailureClass::Structure => "STRUCTURE",
            FailureClass::HashMismatch => "HASH_MISMATCH",
            FailureClass::CviViolation => "CVI_VIOLATION",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub class: FailureClass,
    pub detail: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.class, self.detail)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub op_id: u32,
    pub pass: bool,
    pub failures: Vec<Failure>,
    /// Block start addresses of the reconstructed path, as far as
    /// reconstruction got.
    pub path: Vec<u64>,
    pub segments: usize,
    pub branch_bits: u32,
    pub indirect_events: usize,
}

impl VerificationReport {
    pub fn fail(&mut self, class: FailureClass, detail: impl Into<String>) {
        self.pass = false;
        self.failures.push(Failure { class, detail: detail.into() });
    }

    pub fn has(&self, class: FailureClass) -> bool {
        self.failures.iter().any(|f| f.class == class)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pass {
            write!(f, "operation {}: PASS", self.op_id)
        } else {
            write!(f, "operation {}: FAIL", self.op_id)?;
            for fe in &self.failures {
                write!(f, "\n  {}: {}", fe.class, fe.detail)?;
            }
            Ok(())
        }
    }
}
