//! Instrumentation: attaching measurement tags to program addresses.
//!
//! MiniIR instrumentation is a side table rather than rewritten code: the
//! interpreter consults the tag map at each address. This keeps the
//! instrumented program bit-identical to the original, which the tests
//! assert as the transparency invariant.

use crate::analysis::sites::{ControlKind, DataKind, SiteList};
use crate::mini_ir::{Loc, Program};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlTag {
    pub op_id: u32,
    pub kind: ControlKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataTag {
    pub kind: DataKind,
    pub node: u32,
    pub via_pointer: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tags {
    pub control: Vec<ControlTag>,
    pub data: Vec<DataTag>,
}

/// Instrumented program: the original program plus the tag side table.
#[derive(Debug, Clone)]
pub struct Instrumented {
    pub tags: BTreeMap<u64, Tags>,
    /// Total number of attached tags; equals the site-list length.
    pub tag_count: usize,
}

impl Instrumented {
    pub fn at(&self, addr: u64) -> Option<&Tags> {
        self.tags.get(&addr)
    }

    /// Control tags at `addr` for the given operation, if any.
    pub fn control_for(&self, addr: u64, op_id: u32) -> Option<ControlTag> {
        self.tags
            .get(&addr)?
            .control
            .iter()
            .copied()
            .find(|t| t.op_id == op_id)
    }
}

#[derive(Debug, Error)]
pub enum InstrumentError {
    #[error("site address {0:#x} does not exist in the program")]
    UnknownAddress(u64),
    #[error("control site at {0:#x} is not a block terminator")]
    NotATerminator(u64),
    #[error("data site at {0:#x} duplicated for the same variable")]
    DuplicateDataSite(u64),
}

/// Attaches measurement tags for every selected site. Fails if the site
/// list does not describe this program (e.g. stale analysis output).
pub fn instrument(program: &Program, sites: &SiteList) -> Result<Instrumented, InstrumentError> {
    let index = program.build_loc_index();
    let mut tags: BTreeMap<u64, Tags> = BTreeMap::new();
    let mut count = 0usize;
    for s in &sites.control {
        match Program::loc_of_addr(&index, s.addr) {
            Some(Loc::Term { .. }) => {}
            Some(Loc::Body { .. }) => return Err(InstrumentError::NotATerminator(s.addr)),
            None => return Err(InstrumentError::UnknownAddress(s.addr)),
        }
        tags.entry(s.addr)
            .or_default()
            .control
            .push(ControlTag { op_id: s.op_id, kind: s.kind });
        count += 1;
    }
    for s in &sites.data {
        if Program::loc_of_addr(&index, s.addr).is_none() {
            return Err(InstrumentError::UnknownAddress(s.addr));
        }
        let entry = tags.entry(s.addr).or_default();
        let tag = DataTag { kind: s.kind, node: s.node, via_pointer: s.via_pointer };
        if entry.data.contains(&tag) {
            return Err(InstrumentError::DuplicateDataSite(s.addr));
        }
        entry.data.push(tag);
        count += 1;
    }
    Ok(Instrumented { tags, tag_count: count })
}
