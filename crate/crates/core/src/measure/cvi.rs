//! Critical variable integrity: value-based define/use checking.
//!
//! Every critical variable is identified by its memory address (its
//! variable id). A define records the value written; a use compares the
//! value observed by the instruction against the recorded one. A first
//! use before any define adopts the observed value instead of failing,
//! since the variable may legitimately be initialized outside the
//! instrumented region.
//!
//! Pointer-mediated accesses go through the bounds registry: the access
//! address is classified against the pointer's registered referent
//! extent, and only the in-bounds bytes of the accessed word take part
//! in the check.

use super::blob::CviRecord;
use std::collections::BTreeMap;

pub const MAX_RECORDS: usize = 255;

/// Byte extent `[start, end)` a pointer may legally reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub start: u64,
    pub end: u64,
}

/// Classification of one 8-byte access at `addr` against pointer bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjusted {
    /// Whole word inside bounds: check all 8 bytes.
    InBounds,
    /// Word straddles a bounds edge: check bytes `lo..hi` only.
    Overlap { lo: u8, hi: u8 },
    /// No byte of the word is in bounds.
    Disjoint,
}

#[derive(Debug, Clone, Default)]
struct Cell {
    bytes: [u8; 8],
    /// Bit i set = byte i has a recorded value.
    defined: u8,
}

#[derive(Debug, Clone, Default)]
pub struct CviState {
    cells: BTreeMap<u64, Cell>,
    bounds: BTreeMap<u64, Bounds>,
    pub flag: bool,
    pub records: Vec<CviRecord>,
}

fn mask(lo: u8, hi: u8) -> u8 {
    debug_assert!(lo < hi && hi <= 8);
    (((1u16 << hi) - (1 << lo)) & 0xff) as u8
}

impl CviState {
    /// Registers (or replaces) the referent extent of a pointer variable.
    pub fn register_bounds(&mut self, ptr_id: u64, bounds: Bounds) {
        self.bounds.insert(ptr_id, bounds);
    }

    /// Propagates bounds on pointer assignment `dst = src`.
    pub fn copy_bounds(&mut self, dst_id: u64, src_id: u64) {
        match self.bounds.get(&src_id).copied() {
            Some(b) => {
                self.bounds.insert(dst_id, b);
            }
            None => {
                self.bounds.remove(&dst_id);
            }
        }
    }

    pub fn bounds_of(&self, ptr_id: u64) -> Option<Bounds> {
        self.bounds.get(&ptr_id).copied()
    }

    /// Classifies an 8-byte access through `ptr_id` at `addr`. `None`
    /// means the pointer has no registered bounds, which is an
    /// analysis/runtime inconsistency the caller reports.
    pub fn bounds_adjust(&self, ptr_id: u64, addr: u64) -> Option<Adjusted> {
        let b = self.bounds.get(&ptr_id)?;
        let (a0, a1) = (addr, addr + 8);
        let lo = a0.max(b.start);
        let hi = a1.min(b.end);
        Some(if lo >= hi {
            Adjusted::Disjoint
        } else if lo == a0 && hi == a1 {
            Adjusted::InBounds
        } else {
            Adjusted::Overlap { lo: (lo - a0) as u8, hi: (hi - a0) as u8 }
        })
    }

    /// Records a write of `value` to the variable at `var_id`.
    pub fn define(&mut self, var_id: u64, value: i64) {
        self.define_bytes(var_id, value, 0, 8);
    }

    /// Records a write restricted to bytes `lo..hi` of the word.
    pub fn define_bytes(&mut self, var_id: u64, value: i64, lo: u8, hi: u8) {
        let m = mask(lo, hi);
        let cell = self.cells.entry(var_id).or_default();
        let v = value.to_le_bytes();
        for i in lo..hi {
            cell.bytes[i as usize] = v[i as usize];
        }
        cell.defined |= m;
    }

    /// Checks a read of `observed` from `var_id` under `ctx` (the current
    /// frame's return address). A mismatch raises the flag and appends a
    /// record; the observed value is then adopted so one corruption does
    /// not cascade into a report for every later use.
    pub fn check_use(&mut self, var_id: u64, observed: i64, ctx: u64) {
        self.check_use_bytes(var_id, observed, ctx, 0, 8);
    }

    /// Checks only bytes `lo..hi` of the observed word.
    pub fn check_use_bytes(&mut self, var_id: u64, observed: i64, ctx: u64, lo: u8, hi: u8) {
        let m = mask(lo, hi);
        let cell = self.cells.entry(var_id).or_default();
        let obs = observed.to_le_bytes();
        let check = cell.defined & m;
        let mut ok = true;
        for i in lo..hi {
            if check >> i & 1 == 1 && cell.bytes[i as usize] != obs[i as usize] {
                ok = false;
            }
            cell.bytes[i as usize] = obs[i as usize];
        }
        cell.defined |= m;
        if !ok {
            self.flag = true;
            if self.records.len() < MAX_RECORDS {
                self.records.push((var_id, ctx));
            }
        }
    }

    /// Clears the flag and records after they are emitted into a blob
    /// segment. Recorded values and bounds persist across segments.
    pub fn reset_for_flush(&mut self) {
        self.flag = false;
        self.records.clear();
    }
}
