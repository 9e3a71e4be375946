//! Run manifests: everything needed to reproduce a report.

use std::time::{SystemTime, UNIX_EPOCH};

use jetlab::Tolerances;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub problem_sha256: String,
    pub seed: u64,
    pub samples: usize,
    pub h: f64,
    pub tolerances: Tolerances,
    pub tool_version: String,
    /// Hash of every field above; the timestamp is left out.
    pub manifest_sha256: String,
    /// Seconds since the epoch, from `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
}

#[derive(Serialize)]
struct Hashed<'a> {
    command: &'a str,
    problem_sha256: &'a str,
    seed: u64,
    samples: usize,
    h: f64,
    tolerances: &'a Tolerances,
    tool_version: &'a str,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, problem_bytes: &[u8], seed: u64, samples: usize, h: f64, tolerances: Tolerances) -> Self {
        let problem_sha256 = sha256_hex(problem_bytes);
        let tool_version = env!("CARGO_PKG_VERSION").to_string();
        let hashed = Hashed {
            command,
            problem_sha256: &problem_sha256,
            seed,
            samples,
            h,
            tolerances: &tolerances,
            tool_version: &tool_version,
        };
        let manifest_sha256 = sha256_hex(&serde_json::to_vec(&hashed).unwrap_or_default());
        Self {
            command: command.into(),
            problem_sha256,
            seed,
            samples,
            h,
            tolerances,
            tool_version,
            manifest_sha256,
            timestamp: timestamp(),
        }
    }
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_timestamp_only() {
        let a = RunManifest::new("solve", b"{}", 1, 10, 0.5, Tolerances::default());
        let mut b = RunManifest::new("solve", b"{}", 1, 10, 0.5, Tolerances::default());
        b.timestamp += 100;
        assert_eq!(a.manifest_sha256, b.manifest_sha256);
        let c = RunManifest::new("solve", b"{}", 2, 10, 0.5, Tolerances::default());
        assert_ne!(a.manifest_sha256, c.manifest_sha256);
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
