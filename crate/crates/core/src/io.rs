//! CSV time series, CSV tables and binary field snapshots.
//!
//! Snapshots are a JSON header next to a raw payload of little-endian f64:
//! all `fe` values followed by all `fb` values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::complex::GridSpec;
use crate::error::{Error, Result};
use crate::evolution::MonitorSeries;
use crate::maxwell::{FieldState, Maxwell};

pub const SERIES_COLUMNS: [&str; 10] =
    ["time", "rE", "rB", "rbdy", "energy", "cone_leak", "state_norm", "state_max", "support_radius", "fb_normal"];

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Shortest round-trip representation, so equal values print identically.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn series_csv(series: &MonitorSeries) -> String {
    let mut out = SERIES_COLUMNS.join(",");
    out.push('\n');
    for s in &series.samples {
        let row = [s.t, s.r_e, s.r_b, s.r_bdy, s.energy, s.cone_leak, s.state_norm, s.state_max, s.support_radius, s.fb_normal];
        out.push_str(&row.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn write_series_csv(path: &Path, series: &MonitorSeries) -> Result<()> {
    fs::write(path, series_csv(series)).map_err(|e| io_err(path, e))
}

/// Generic numeric table, e.g. defect versus grid size.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::LengthMismatch { expected: header.len(), got: r.len() });
        }
        out.push_str(&r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    pub k: usize,
    pub time: f64,
    pub grid: GridSpec,
    pub fe_degree: usize,
    pub fb_degree: usize,
    pub fe_len: usize,
    pub fb_len: usize,
    pub dtype: String,
    pub payload: String,
}

/// Write `<stem>.json` and `<stem>.bin` into `dir`; returns both paths.
pub fn write_snapshot(dir: &Path, stem: &str, sys: &Maxwell, s: &FieldState) -> Result<(PathBuf, PathBuf)> {
    sys.check_state(s)?;
    let json = dir.join(format!("{stem}.json"));
    let bin = dir.join(format!("{stem}.bin"));
    let header = SnapshotHeader {
        n: sys.n(),
        k: sys.k(),
        time: s.t,
        grid: sys.grid().spec().clone(),
        fe_degree: s.fe.degree,
        fb_degree: s.fb.degree,
        fe_len: s.fe.values.len(),
        fb_len: s.fb.values.len(),
        dtype: "f64-le".into(),
        payload: format!("{stem}.bin"),
    };
    let text = serde_json::to_string_pretty(&header).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&json, text).map_err(|e| io_err(&json, e))?;
    let mut bytes = Vec::with_capacity(8 * (header.fe_len + header.fb_len));
    for v in s.fe.values.iter().chain(&s.fb.values) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(&bin).map_err(|e| io_err(&bin, e))?;
    f.write_all(&bytes).map_err(|e| io_err(&bin, e))?;
    Ok((json, bin))
}

/// Read a snapshot written by [`write_snapshot`] back into a state of `sys`.
pub fn read_snapshot(json: &Path, sys: &Maxwell) -> Result<(SnapshotHeader, FieldState)> {
    let text = fs::read_to_string(json).map_err(|e| io_err(json, e))?;
    let header: SnapshotHeader = serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", json.display())))?;
    if header.k != sys.k() || &header.grid != sys.grid().spec() {
        return Err(Error::InvalidArgument("snapshot does not match the system".into()));
    }
    let bin = json.with_file_name(&header.payload);
    let bytes = fs::read(&bin).map_err(|e| io_err(&bin, e))?;
    let want = 8 * (header.fe_len + header.fb_len);
    if bytes.len() != want {
        return Err(Error::LengthMismatch { expected: want, got: bytes.len() });
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let mut s = sys.zero_state(header.time);
    s.fe.values.copy_from_slice(&vals[..header.fe_len]);
    s.fb.values.copy_from_slice(&vals[header.fe_len..]);
    Ok((header, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Grid;
    use crate::evolution::{compatible_bump_state, Bump, EvolveConfig, Solver};
    use crate::metric::MetricField;

    fn system() -> Maxwell {
        let g = Grid::new(GridSpec::cube(3, 8, 1.0, 0.04)).unwrap();
        Maxwell::new(g, MetricField::unit(), 2).unwrap()
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sys = system();
        let s = compatible_bump_state(&sys, &Bump::centred(sys.grid()), 1, 0.0).unwrap();
        let (json, bin) = write_snapshot(dir.path(), "snapshot_final", &sys, &s).unwrap();
        assert_eq!(fs::metadata(&bin).unwrap().len() as usize, 8 * (s.fe.values.len() + s.fb.values.len()));
        let (h, back) = read_snapshot(&json, &sys).unwrap();
        assert_eq!((h.n, h.k), (3, 2));
        assert_eq!(back, s);
        let other = Maxwell::new(sys.grid().clone(), MetricField::unit(), 1).unwrap();
        assert!(read_snapshot(&json, &other).is_err());
    }

    #[test]
    fn series_csv_shape() {
        let sys = system();
        let s = compatible_bump_state(&sys, &Bump::centred(sys.grid()), 1, 0.0).unwrap();
        let solver = Solver::new(&sys, EvolveConfig::new(0.2)).unwrap();
        let (_, series) = solver.evolve(&s, &crate::maxwell::SourceData::zero()).unwrap();
        let csv = series_csv(&series);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], SERIES_COLUMNS.join(","));
        assert_eq!(lines.len(), series.samples.len() + 1);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == SERIES_COLUMNS.len()));
        assert_eq!(csv, series_csv(&series));
    }

    #[test]
    fn table_rows_must_match_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_table_csv(&p, &["cells", "defect"], &[vec![16.0, 1e-3]]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "cells,defect\n1.6e1,1e-3\n");
        assert!(write_table_csv(&p, &["a"], &[vec![1.0, 2.0]]).is_err());
    }
}
