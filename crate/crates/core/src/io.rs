//! CSV and JSON formats for paths and grids.
//!
//! Paths are stored long-form with header `path_id,t,value`; every path must
//! list the same grid points in the same order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SampledPath};

#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    path_id: usize,
    t: f64,
    value: f64,
}

pub fn write_paths<W: Write>(writer: W, paths: &[SampledPath]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (i, p) in paths.iter().enumerate() {
        for (&t, &value) in p.grid().points().iter().zip(p.values()) {
            w.serialize(PathRow { path_id: i, t, value })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_paths<R: Read>(reader: R) -> Result<Vec<SampledPath>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut ids: Vec<usize> = Vec::new();
    let mut ts: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for row in r.deserialize() {
        let row: PathRow = row?;
        if ids.last() != Some(&row.path_id) {
            if ids.contains(&row.path_id) {
                return Err(Error::Parse(format!("rows of path {} are not contiguous", row.path_id)));
            }
            ids.push(row.path_id);
            ts.push(Vec::new());
            values.push(Vec::new());
        }
        ts.last_mut().expect("pushed above").push(row.t);
        values.last_mut().expect("pushed above").push(row.value);
    }
    let first = ts.first().ok_or_else(|| Error::Parse("no paths in input".into()))?;
    if let Some(i) = ts.iter().position(|t| t != first) {
        return Err(Error::Parse(format!(
            "path {} is observed at different points than path {}",
            ids[i], ids[0]
        )));
    }
    let grid = Arc::new(Grid::new(first.clone())?);
    values
        .into_iter()
        .map(|v| SampledPath::new(Arc::clone(&grid), v))
        .collect()
}

pub fn write_paths_file(path: impl AsRef<Path>, paths: &[SampledPath]) -> Result<()> {
    write_paths(BufWriter::new(File::create(path)?), paths)
}

pub fn read_paths_file(path: impl AsRef<Path>) -> Result<Vec<SampledPath>> {
    read_paths(BufReader::new(File::open(path)?))
}

/// Grid as a JSON array of points.
pub fn read_grid_file(path: impl AsRef<Path>) -> Result<Grid> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_grid_file(path: impl AsRef<Path>, grid: &Grid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, grid)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_values_exactly() {
        let grid = Arc::new(Grid::new(vec![0.0, 0.1, 0.7, 1.0]).unwrap());
        let paths = vec![
            SampledPath::new(grid.clone(), vec![1.0, 2.5, 1e-300, 0.1 + 0.2]).unwrap(),
            SampledPath::new(grid.clone(), vec![-3.0, 7.0, 8.0, 9.0]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_paths(&mut buf, &paths).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("path_id,t,value\n"));
        let back = read_paths(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in paths.iter().zip(&back) {
            assert_eq!(a.values(), b.values());
            assert_eq!(a.grid(), b.grid());
        }
    }

    #[test]
    fn rejects_ragged_input() {
        let text = "path_id,t,value\n0,0,1\n0,1,2\n1,0,1\n";
        assert!(read_paths(text.as_bytes()).is_err());
        let text = "path_id,t,value\n0,0,1\n1,0,1\n0,1,2\n";
        assert!(read_paths(text.as_bytes()).is_err());
        assert!(read_paths("path_id,t,value\n".as_bytes()).is_err());
        assert!(read_paths("path_id,t,value\n0,0,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn grid_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("grid.json");
        let grid = Grid::new(vec![0.0, 0.25, 1.0]).unwrap();
        write_grid_file(&file, &grid).unwrap();
        assert_eq!(std::fs::read_to_string(&file).unwrap(), "[0.0,0.25,1.0]");
        assert_eq!(read_grid_file(&file).unwrap(), grid);
        std::fs::write(&file, "[0.5, 0.2]").unwrap();
        assert!(read_grid_file(&file).is_err());
    }
}
