//! Path CSV files (`t,x1,...,xd`) and tensor output files.

use anyhow::{bail, Context, Result};
use std::path::Path as FsPath;
use vsig_core::paths::Path;
use vsig_core::tensor::TruncatedTensor;

pub fn read_path_csv(file: &FsPath) -> Result<Path> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(file)
        .with_context(|| format!("cannot open {}", file.display()))?;
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("t") {
        bail!("path CSV must start with a `t` column");
    }
    let d = headers.len() - 1;
    for (i, h) in headers.iter().skip(1).enumerate() {
        let want = format!("x{}", i + 1);
        if h != want {
            bail!("expected column `{want}`, found `{h}`");
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != d + 1 {
            bail!("row has {} fields, expected {}", record.len(), d + 1);
        }
        times.push(record[0].parse::<f64>().context("bad time value")?);
        let mut row = Vec::with_capacity(d);
        for v in record.iter().skip(1) {
            row.push(v.parse::<f64>().context("bad coordinate value")?);
        }
        values.push(row);
    }
    Ok(Path::new(times, values)?)
}

pub fn write_path_csv(file: &FsPath, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push('t');
    for i in 1..=path.dim() {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (t, row) in path.times.iter().zip(&path.values) {
        out.push_str(&format!("{t}"));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(file, out).with_context(|| format!("cannot write {}", file.display()))?;
    Ok(())
}

/// Write a tensor series: one JSON object per grid point (`.json`), or the
/// flat binary layout concatenated with a length prefix (`.bin`).
pub fn write_tensor_series(file: &FsPath, tensors: &[TruncatedTensor], binary: bool) -> Result<()> {
    if binary {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            bytes.extend_from_slice(&t.to_binary());
        }
        std::fs::write(file, bytes)?;
    } else {
        let mut out = String::from("[");
        for (i, t) in tensors.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&t.to_json());
        }
        out.push(']');
        std::fs::write(file, out)?;
    }
    Ok(())
}
