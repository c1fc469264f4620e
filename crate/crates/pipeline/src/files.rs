//! Text formats shared by the commands. Everything is JSON, JSON lines or
//! whitespace-separated numbers, and every write is temp-then-rename.

use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use hsc_core::geometry::io::write_atomic;
use hsc_core::geometry::Vec3;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// One JSON value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = String::new();
    for item in items {
        buf.push_str(&serde_json::to_string(item)?);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

/// Serializes rows with a header line taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
    write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))
}

/// Point correspondences between the capture frame and the scan frame.
///
/// ```text
/// # capture_x capture_y capture_z scan_x scan_y scan_z
/// 0.5 0.0 0.0   1.21 -0.33 0.02
/// ```
pub fn read_correspondences(path: &Path) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut src, mut dst) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}:{}: not a number", path.display(), i + 1))?;
        if v.len() != 6 || v.iter().any(|x| !x.is_finite()) {
            bail!("{}:{}: expected 6 finite numbers", path.display(), i + 1);
        }
        src.push(Vec3::new(v[0], v[1], v[2]));
        dst.push(Vec3::new(v[3], v[4], v[5]));
    }
    Ok((src, dst))
}

pub fn write_correspondences(path: &Path, src: &[Vec3], dst: &[Vec3]) -> Result<()> {
    let mut text = String::from("# capture_x capture_y capture_z scan_x scan_y scan_z\n");
    for (a, b) in src.iter().zip(dst) {
        text.push_str(&format!("{} {} {} {} {} {}\n", a.x, a.y, a.z, b.x, b.y, b.z));
    }
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}
