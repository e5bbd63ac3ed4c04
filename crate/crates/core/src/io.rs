//! CSV dumps of driver paths and trajectories.
//!
//! Numbers are written in shortest round-trip decimal form, so reading a file
//! back reproduces every value bit for bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fbm::{DrivingPath, HurstParameter, SeedRecord, UniformGrid};
use crate::schemes::Trajectory;

fn write_table<W: Write>(out: W, header: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Header row and numeric body of a CSV table. Lines starting with `#` are
/// skipped.
pub fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = r.headers()?.iter().map(str::to_string).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: '{f}'"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(Error::Parse("row length differs from header".into()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Writes `t,X1,...,Xd`, one row per node.
pub fn write_path_csv<W: Write>(path: &DrivingPath, out: W) -> Result<()> {
    let d = path.dim();
    let header = std::iter::once("t".to_string()).chain((1..=d).map(|l| format!("X{l}"))).collect();
    let rows = (0..=path.grid().steps()).map(|k| {
        let mut row = Vec::with_capacity(d + 1);
        row.push(path.grid().node(k));
        row.extend_from_slice(path.row(k));
        row
    });
    write_table(out, header, rows)
}

/// Reads a path written by [`write_path_csv`]. The grid is recovered from the
/// row count and the final time.
pub fn read_path_csv<R: Read>(input: R, hurst: HurstParameter, seed_record: SeedRecord) -> Result<DrivingPath> {
    let (header, rows) = read_table(input)?;
    if header.first().map(String::as_str) != Some("t") || header.len() < 2 {
        return Err(Error::Parse("path CSV must start with columns t,X1".into()));
    }
    if rows.len() < 2 {
        return Err(Error::Parse("path CSV needs at least two nodes".into()));
    }
    let grid = UniformGrid::new(rows[rows.len() - 1][0], rows.len() - 1)?;
    let values = rows.iter().flat_map(|r| r[1..].iter().copied()).collect();
    DrivingPath::from_levels(grid, hurst, header.len() - 1, values, seed_record)
}

/// Writes `t,Y1,...,Ym`, one row per node.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let m = traj.state_dim();
    let header = std::iter::once("t".to_string()).chain((1..=m).map(|q| format!("Y{q}"))).collect();
    let rows = (0..=traj.grid().steps()).map(|k| {
        let mut row = Vec::with_capacity(m + 1);
        row.push(traj.grid().node(k));
        row.extend_from_slice(traj.state(k));
        row
    });
    write_table(out, header, rows)
}
