//! Serializable export of everything the verifier needs: a reduced CFG
//! per function, operation scopes, allowed indirect-transfer targets, and
//! the instrumentation-site list.

use super::sites::{OperationScope, SiteList, TargetSets};
use blake2::{Blake2s256, Digest};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Marker instruction inside a block, in program order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMarker {
    pub addr: u64,
    pub op_id: u32,
    pub is_begin: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BundleTerm {
    DirectCall { callee_entry: u64, cont: u64 },
    IndirectCall { cont: u64 },
    DirectJump { dest: u64 },
    IndirectJump,
    CondBranch { taken: u64, not_taken: u64 },
    Return,
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleBlock {
    pub start: u64,
    pub markers: Vec<BundleMarker>,
    pub term_addr: u64,
    pub term: BundleTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFunction {
    pub name: String,
    pub entry: u64,
    pub blocks: Vec<BundleBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub functions: Vec<BundleFunction>,
    pub scopes: Vec<OperationScope>,
    pub target_sets: TargetSets,
    /// Interrupt vector table: irq id -> handler entry address.
    pub vector_table: BTreeMap<u32, u64>,
    pub sites: SiteList,
    /// Load/store count an address-based checker would instrument, kept
    /// for overhead comparisons.
    pub address_site_count: usize,
    /// Digest of the source the bundle was derived from, so a verifier
    /// can detect prover/verifier analysis drift.
    pub source_digest: String,
}

impl AnalysisBundle {
    pub fn block_of_addr(&self, addr: u64) -> Option<(&BundleFunction, &BundleBlock)> {
        for f in &self.functions {
            for b in &f.blocks {
                if b.start <= addr && addr <= b.term_addr {
                    return Some((f, b));
                }
            }
        }
        None
    }

    pub fn function_of_entry(&self, entry: u64) -> Option<&BundleFunction> {
        self.functions.iter().find(|f| f.entry == entry)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

pub fn source_digest(source: &str) -> String {
    let mut h = Blake2s256::new();
    h.update(source.as_bytes());
    hex::encode(h.finalize())
}
