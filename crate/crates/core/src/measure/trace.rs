//! Trace buffers: the branch-bit trace and the indirect-address trace.

use serde::{Deserialize, Serialize};

/// Packed bit sequence, LSB-first within each byte: bit `i` lives in byte
/// `i / 8` at position `i % 8`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitTrace {
    pub bytes: Vec<u8>,
    pub len: u32,
}

impl BitTrace {
    pub fn push(&mut self, bit: bool) {
        let idx = self.len as usize;
        if idx % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[idx / 8] |= 1 << (idx % 8);
        }
        self.len += 1;
    }

    pub fn get(&self, i: u32) -> Option<bool> {
        if i >= self.len {
            return None;
        }
        Some(self.bytes[(i / 8) as usize] >> (i % 8) & 1 == 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i).unwrap())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut t = Self::default();
        for b in bits {
            t.push(b);
        }
        t
    }

    /// Byte length of the packed representation.
    pub fn byte_len(&self) -> usize {
        self.bytes.len()
    }
}

/// One operation's event traces.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Traces {
    /// Destination addresses of executed indirect transfers, in order.
    pub addrs: Vec<u64>,
    /// One bit per executed conditional branch: 1 = taken.
    pub bits: BitTrace,
}

impl Traces {
    /// Size in bytes once encoded into a blob (address words plus packed
    /// branch bits, excluding length prefixes).
    pub fn payload_bytes(&self) -> usize {
        self.addrs.len() * 8 + self.bits.byte_len()
    }

    pub fn is_empty(&self) -> bool {
        self.addrs.is_empty() && self.bits.len == 0
    }
}
