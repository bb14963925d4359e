//! SHA-256 helpers used for request hashes, dataset hashes and cache keys.

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Hash of a file's raw bytes.
pub fn file_sha256(path: &std::path::Path) -> std::io::Result<String> {
    Ok(sha256_hex(std::fs::read(path)?))
}
