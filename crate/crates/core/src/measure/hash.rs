//! Return-address hash chain.
//!
//! The backward-edge record is a running BLAKE2s-256 digest: starting
//! from 32 zero bytes, each return folds the 8-byte little-endian return
//! address into the chain as `H = Blake2s256(H || addr)`.

use blake2::{Blake2s256, Digest};

pub const HASH_LEN: usize = 32;
pub type ReturnHash = [u8; HASH_LEN];

pub const INITIAL_HASH: ReturnHash = [0u8; HASH_LEN];

pub fn hash_update(prev: &ReturnHash, ret_addr: u64) -> ReturnHash {
    let mut h = Blake2s256::new();
    h.update(prev);
    h.update(ret_addr.to_le_bytes());
    h.finalize().into()
}

/// Folds a whole sequence of return addresses, starting from the initial
/// chain value.
pub fn hash_chain(addrs: impl IntoIterator<Item = u64>) -> ReturnHash {
    let mut h = INITIAL_HASH;
    for a in addrs {
        h = hash_update(&h, a);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hx(s: &str) -> ReturnHash {
        let v = hex::decode(s).unwrap();
        v.try_into().unwrap()
    }

    // Chain vectors computed with an independent BLAKE2s implementation
    // (Python hashlib.blake2s), starting from the all-zero hash.
    const CHAIN: &[(u64, &str)] = &[
        (0x1000, "ddceabf1157725092cf57a175613726864311919b3a83c5d02c74893114a07c0"),
        (0x1024, "424a25c059b3dac19f77fb0053b7c4c1d8b05b54158b7e2533cf0dc3af20ee16"),
        (0x2008, "fa20488df9296540c8a8df76e954dad4c5d1584fb629cdd546b99b7773038230"),
        (0xffffffff, "39771b7a91b101a91202aa522a8c345d24c59b1ebb2f4abaadd4210fee3d1d5f"),
        (0x1, "0b128367f0388b3fb8854ca2f80876b5432bad80f964150a238dfe043666dc88"),
    ];

    // Independent single-step vectors: (previous hash, address, expected).
    const STEPS: &[(&str, u64, &str)] = &[
        (
            "a54dca182530bb1d6d132cded6237b2ed91e3f721fcb1971174494d6493c9d5c",
            0xbeaa301850c5,
            "53d09edf93d51baa8c53b3da81e3cb491b0fac9fa26d15efb6f8b5521a95443e",
        ),
        (
            "31201e69fedaa0eee8b9997f5c7c2999fdafe593253cd654af4dfad71427a0ae",
            0xb34ab1fee08f,
            "144834081277f88b999d15511e24cdcd8bfa2ad09f3ef97aa84b792d19d7b0bb",
        ),
        (
            "fee9232f8af2211f9ee491c5b10becb5563bfc1e6f93427ecbc8fe2955e5cd8e",
            0x461be2257159,
            "8517f1bb20207ff63b2168f62c3f9022d3f74c949b59ccd5189c586129dfd902",
        ),
        (
            "dc8ed4b7c2764d2a5a4d767706f85d8690024ad6bda3401be9c8cbccc935f6cd",
            0x61970fef7928,
            "b913ccf993ad218e36f6d665068df52dd6849c15f41a73b714bbcdfc232e352f",
        ),
        (
            "226ae15338ae1a34004d33ba0d246ac04c81b1baf23e3bf9eef5f79f2b4934af",
            0x878ebd87a865,
            "989d84d7efb401f8f9964378eb566a915c0de07af7f49e088ed916c2f6b5435d",
        ),
        (
            "f5520b69b94b0d982e85bb55b672a872637acd7466fcb60e0e8ff18463b0e4b2",
            0x293c5d58c705,
            "08aa266bc36b96c446e0edaed64f8dfc7a88fc7b0799b82de95d92a3ce521644",
        ),
    ];

    #[test]
    fn chain_vectors_match_reference() {
        let mut h = INITIAL_HASH;
        for (addr, want) in CHAIN {
            h = hash_update(&h, *addr);
            assert_eq!(h, hx(want), "after folding {addr:#x}");
        }
        assert_eq!(hash_chain(CHAIN.iter().map(|(a, _)| *a)), hx(CHAIN.last().unwrap().1));
    }

    #[test]
    fn step_vectors_match_reference() {
        for (prev, addr, want) in STEPS {
            assert_eq!(hash_update(&hx(prev), *addr), hx(want));
        }
    }

    #[test]
    fn empty_chain_is_initial() {
        assert_eq!(hash_chain([]), INITIAL_HASH);
    }

    #[test]
    fn order_sensitivity() {
        assert_ne!(hash_chain([1, 2]), hash_chain([2, 1]));
        assert_ne!(hash_chain([1]), hash_chain([1, 1]));
    }
}
