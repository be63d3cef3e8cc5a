//! Signing-key handling: Ed25519 keys stored as 32-byte hex seed files.

use ed25519_dalek::{SigningKey, VerifyingKey};
use std::io;
use std::path::Path;

pub fn generate(rng_seed: Option<[u8; 32]>) -> SigningKey {
    match rng_seed {
        Some(seed) => SigningKey::from_bytes(&seed),
        None => {
            let mut seed = [0u8; 32];
            rand::RngCore::fill_bytes(&mut rand::thread_rng(), &mut seed);
            SigningKey::from_bytes(&seed)
        }
    }
}

pub fn save_seed(key: &SigningKey, path: &Path) -> io::Result<()> {
    std::fs::write(path, hex::encode(key.to_bytes()))
}

pub fn load_seed(path: &Path) -> io::Result<SigningKey> {
    let text = std::fs::read_to_string(path)?;
    let bytes = hex::decode(text.trim())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let seed: [u8; 32] = bytes
        .try_into()
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "seed must be 32 bytes"))?;
    Ok(SigningKey::from_bytes(&seed))
}

pub fn save_public(key: &VerifyingKey, path: &Path) -> io::Result<()> {
    std::fs::write(path, hex::encode(key.to_bytes()))
}

pub fn load_public(path: &Path) -> io::Result<VerifyingKey> {
    let text = std::fs::read_to_string(path)?;
    let bytes = hex::decode(text.trim())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let arr: [u8; 32] = bytes
        .try_into()
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "public key must be 32 bytes"))?;
    VerifyingKey::from_bytes(&arr).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let key = generate(Some([7u8; 32]));
        let path = dir.path().join("prover.key");
        save_seed(&key, &path).unwrap();
        let back = load_seed(&path).unwrap();
        assert_eq!(key.to_bytes(), back.to_bytes());
        let pub_path = dir.path().join("prover.pub");
        save_public(&key.verifying_key(), &pub_path).unwrap();
        assert_eq!(load_public(&pub_path).unwrap(), key.verifying_key());
    }

    #[test]
    fn deterministic_from_seed() {
        assert_eq!(
            generate(Some([1u8; 32])).to_bytes(),
            generate(Some([1u8; 32])).to_bytes()
        );
    }
}
