use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the canonical JSON encoding of `value`.
///
/// Struct fields serialize in declaration order and maps are `BTreeMap`s, so
/// the encoding is stable for a given value.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("in-memory values always serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// First 8 bytes of SHA-256 as an integer, masked to 63 bits so it fits a
/// TOML integer.
pub fn seed_from_name(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(bytes) & (i64::MAX as u64)
}
