//! Result files: atomic writes and content hashes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;
use sha2::{Digest, Sha256};

/// Writes `contents` to `dir/name` through a temporary file and a rename, so
/// readers never observe a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &target)?;
    Ok(target)
}

/// SHA-256 over a git blob header and the bytes: `"blob <len>\0" + bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    let digest = h.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// `schema_version`, `command`, `config`, `content_hash`, `statistics`, with
/// the hash taken over the compact encoding of the other fields.
pub fn summary_document(command: &str, config: &Value, statistics: &Value) -> Value {
    let body = serde_json::json!({
        "schema_version": crate::SCHEMA_VERSION,
        "command": command,
        "config": config,
        "statistics": statistics,
    });
    let hash = content_hash(serde_json::to_string(&body).expect("json").as_bytes());
    serde_json::json!({
        "schema_version": crate::SCHEMA_VERSION,
        "command": command,
        "config": config,
        "content_hash": hash,
        "statistics": statistics,
    })
}

/// Simple CSV text: a header line and one line per row, no quoting needed.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
