//! File output helpers. Everything written is a deterministic function of
//! the inputs so reruns are byte-identical.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_text(path, &to_json_pretty(value)?)
}

/// Shortest decimal form, for file names (`2`, `2.5`).
pub fn num(x: f64) -> String {
    format!("{x}")
}
