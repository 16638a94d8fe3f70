//! Content-addressed run directories.
//!
//! A run lives in `<root>/<command>-<hash12>` where the hash covers the
//! command name and the canonical resolved configuration. Existing run
//! directories are never modified.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.toml";

pub fn config_hash(command: &str, cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0u8]);
    h.update(cfg.to_toml().as_bytes());
    hex::encode(h.finalize())
}

/// Resolved config followed by a `[manifest]` table.
pub fn manifest_text(command: &str, cfg: &RunConfig, hash: &str) -> String {
    #[derive(serde::Serialize)]
    struct Meta<'a> {
        tool_version: &'a str,
        command: &'a str,
        hash: &'a str,
    }
    #[derive(serde::Serialize)]
    struct Wrap<'a> {
        manifest: Meta<'a>,
    }
    let meta = toml::to_string(&Wrap { manifest: Meta { tool_version: env!("CARGO_PKG_VERSION"), command, hash } })
        .expect("manifest serializes");
    format!("{}\n{meta}", cfg.to_toml())
}

#[derive(Debug)]
pub enum StoreOutcome {
    Written(PathBuf),
    /// Directory existed with identical contents.
    Reused(PathBuf),
    /// Directory existed with different contents; nothing was changed.
    Mismatch(PathBuf, String),
}

/// Writes `files` (plus the manifest) into the run directory, or compares
/// them against an existing one.
pub fn store(dir: &Path, files: &[(String, Vec<u8>)]) -> io::Result<StoreOutcome> {
    if dir.exists() {
        for (name, bytes) in files {
            match fs::read(dir.join(name)) {
                Ok(existing) if existing == *bytes => {}
                Ok(_) => return Ok(StoreOutcome::Mismatch(dir.to_path_buf(), format!("{name} differs"))),
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    return Ok(StoreOutcome::Mismatch(dir.to_path_buf(), format!("{name} is missing")))
                }
                Err(e) => return Err(e),
            }
        }
        return Ok(StoreOutcome::Reused(dir.to_path_buf()));
    }
    let parent = dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("run");
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir(&tmp)?;
    for (file, bytes) in files {
        fs::write(tmp.join(file), bytes)?;
    }
    match fs::rename(&tmp, dir) {
        Ok(()) => Ok(StoreOutcome::Written(dir.to_path_buf())),
        Err(e) => {
            let _ = fs::remove_dir_all(&tmp);
            if dir.exists() {
                // lost a race with an identical run
                store(dir, files)
            } else {
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_reuse_then_mismatch() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("verify-abc");
        let files = vec![("a.txt".to_string(), b"one".to_vec())];
        assert!(matches!(store(&dir, &files).unwrap(), StoreOutcome::Written(_)));
        assert!(matches!(store(&dir, &files).unwrap(), StoreOutcome::Reused(_)));
        let other = vec![("a.txt".to_string(), b"two".to_vec())];
        assert!(matches!(store(&dir, &other).unwrap(), StoreOutcome::Mismatch(..)));
        assert_eq!(fs::read(dir.join("a.txt")).unwrap(), b"one");
    }
}
