//! Runtime fingerprint stamped on manifests and records.

use std::path::Path;
use std::process::Command;

use gtt_core::protocol::EnvBlock;

/// Overrides the container hash; otherwise it is read from cgroup data when
/// running in a container.
pub const CONTAINER_HASH_ENV: &str = "GTT_CONTAINER_HASH";

pub fn capture(repo: &Path) -> EnvBlock {
    let git = |args: &[&str]| -> Option<String> {
        let out = Command::new("git").arg("-C").arg(repo).args(args).output().ok()?;
        out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
    };
    let commit = git(&["rev-parse", "HEAD"]).filter(|s| !s.is_empty());
    EnvBlock {
        runtime_version: Some(format!("gtt {}", env!("CARGO_PKG_VERSION"))),
        platform: Some(format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH)),
        branch: commit.as_ref().and(git(&["rev-parse", "--abbrev-ref", "HEAD"])),
        dirty: commit.as_ref().and(git(&["status", "--porcelain"])).map(|s| !s.is_empty()),
        commit,
        host: host(),
        container_hash: container_hash(),
    }
}

fn host() -> Option<String> {
    std::env::var("HOSTNAME")
        .ok()
        .or_else(|| std::fs::read_to_string("/etc/hostname").ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

fn container_hash() -> Option<String> {
    if let Ok(v) = std::env::var(CONTAINER_HASH_ENV) {
        return Some(v).filter(|s| !s.is_empty());
    }
    let cg = std::fs::read_to_string("/proc/self/cgroup").ok()?;
    cg.split(['/', '\n', '-', '.'])
        .find(|seg| seg.len() == 64 && seg.bytes().all(|b| b.is_ascii_hexdigit()))
        .map(str::to_string)
}
