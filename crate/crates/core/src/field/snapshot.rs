//! Text snapshot of a [`FieldSample`].
//!
//! ```text
//! # gauss-schrodinger field snapshot
//! format_version = 1
//! dimension = 1
//! side_length = 2
//! spacing = 0.5
//! points_per_side = 4
//! seed_master = 7
//! seed_stream = 0
//! kernel = gaussian(...)
//! values
//! <one value per line, row-major, shortest round-trip decimal>
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{FieldError, FieldSample};
use crate::ensemble::SampleSeed;
use crate::grid::Grid;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "# gauss-schrodinger field snapshot";

pub fn to_string(sample: &FieldSample) -> String {
    let g = &sample.grid;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "format_version = {FORMAT_VERSION}");
    let _ = writeln!(out, "dimension = {}", g.dimension());
    let _ = writeln!(out, "side_length = {}", g.side_length());
    let _ = writeln!(out, "spacing = {}", g.spacing());
    let _ = writeln!(out, "points_per_side = {}", g.points_per_side());
    let _ = writeln!(out, "seed_master = {}", sample.seed.master);
    let _ = writeln!(out, "seed_stream = {}", sample.seed.stream);
    let _ = writeln!(out, "kernel = {}", sample.kernel_id);
    out.push_str("values\n");
    for v in &sample.values {
        let _ = writeln!(out, "{v:?}");
    }
    out
}

pub fn write<W: Write>(sample: &FieldSample, mut w: W) -> std::io::Result<()> {
    w.write_all(to_string(sample).as_bytes())
}

pub fn read<R: BufRead>(r: R) -> Result<FieldSample, FieldError> {
    let bad = |m: &str| FieldError::Snapshot(m.to_string());
    let mut lines = r.lines();
    let mut next = || -> Result<String, FieldError> {
        lines.next().ok_or_else(|| bad("unexpected end of file"))?.map_err(|e| FieldError::Snapshot(e.to_string()))
    };
    if next()? != MAGIC {
        return Err(bad("missing header line"));
    }
    let mut header = std::collections::BTreeMap::new();
    loop {
        let line = next()?;
        if line == "values" {
            break;
        }
        let (k, v) = line.split_once(" = ").ok_or_else(|| bad(&format!("bad header line {line:?}")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| header.get(k).ok_or_else(|| FieldError::Snapshot(format!("missing key {k}")));
    let num = |k: &str| -> Result<f64, FieldError> {
        get(k)?.parse::<f64>().map_err(|_| FieldError::Snapshot(format!("bad number for {k}")))
    };
    let int = |k: &str| -> Result<u64, FieldError> {
        get(k)?.parse::<u64>().map_err(|_| FieldError::Snapshot(format!("bad integer for {k}")))
    };
    if int("format_version")? != FORMAT_VERSION as u64 {
        return Err(bad("unsupported format version"));
    }
    let grid = Grid::new(int("dimension")? as usize, num("side_length")?, num("spacing")?)?;
    if int("points_per_side")? as usize != grid.points_per_side() {
        return Err(bad("points_per_side inconsistent with side_length/spacing"));
    }
    let seed = SampleSeed::new(int("seed_master")?, int("seed_stream")?);
    let kernel_id = get("kernel")?.clone();
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let line = next()?;
        values.push(line.trim().parse::<f64>().map_err(|_| bad(&format!("bad value {line:?}")))?);
    }
    Ok(FieldSample { grid, values, seed, kernel_id })
}
