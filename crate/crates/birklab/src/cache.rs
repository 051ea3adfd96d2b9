//! On-disk cache of computed payloads, keyed by the canonical config
//! hash. A rerun with an unchanged hash reuses the per-n estimates
//! wholesale; corrupt cache entries are a dedicated error (exit code 4).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::report::AsymptoticsPayload;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "BIRKLAB_CACHE_DIR";

/// Cache directory: the env override, or `<out_dir>/cache`.
pub fn cache_dir(out_dir: &Path) -> PathBuf {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => out_dir.join("cache"),
    }
}

fn entry_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("{hash}.json"))
}

/// Fetch a cached payload. `Ok(None)` when absent; a present-but-unreadable
/// entry is cache corruption.
pub fn load(dir: &Path, hash: &str) -> Result<Option<AsymptoticsPayload>> {
    let path = entry_path(dir, hash);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::Cache(format!("cannot read {}: {e}", path.display()))),
    };
    match serde_json::from_str::<AsymptoticsPayload>(&text) {
        Ok(p) => Ok(Some(p)),
        Err(e) => Err(Error::Cache(format!(
            "corrupt cache entry {} ({e}); delete it or rerun with --no-cache",
            path.display()
        ))),
    }
}

pub fn store(dir: &Path, hash: &str, payload: &AsymptoticsPayload) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string(payload)
        .map_err(|e| Error::Cache(format!("cannot serialize payload: {e}")))?;
    std::fs::write(entry_path(dir, hash), text)?;
    Ok(())
}
