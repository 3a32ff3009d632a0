//! OBJ frames and diagnostics CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::diagnostics::{evaluate_frames, DiagnosticsRecord, CSV_COLUMNS};
use crate::error::{Error, Result};
use crate::geodesics::Frame;
use crate::geometry::Immersion;
use crate::grid::ParamGrid;
use crate::operator::OperatorParams;

/// Triangles (0-based, counter-clockwise in parameter space) covering the grid.
///
/// Periodic grids close up only when the seam carries no shift.
pub fn triangles(grid: &ParamGrid, close_seam: bool) -> Vec<[usize; 3]> {
    let (nu, nv) = (grid.nu(), grid.nv());
    let wrap = grid.is_periodic() && close_seam;
    let (cu, cv) = if wrap { (nu, nv) } else { (nu - 1, nv - 1) };
    let mut out = Vec::with_capacity(2 * cu * cv);
    for j in 0..cv {
        for i in 0..cu {
            let a = grid.index(i, j);
            let b = grid.index((i + 1) % nu, j);
            let c = grid.index((i + 1) % nu, (j + 1) % nv);
            let d = grid.index(i, (j + 1) % nv);
            out.push([a, b, c]);
            out.push([a, c, d]);
        }
    }
    out
}

/// Wavefront OBJ text: vertices in grid order, then triangles, full precision.
pub fn obj_string(f: &Immersion) -> String {
    let seam = f.seam();
    let closed = seam.u == Vector3::zeros() && seam.v == Vector3::zeros();
    let tris = triangles(f.grid(), closed);
    let mut s = String::with_capacity(64 * f.points().len());
    for p in f.points() {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
    }
    for t in tris {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn write_obj(path: &Path, f: &Immersion) -> Result<()> {
    std::fs::write(path, obj_string(f)).map_err(|e| Error::io(path, e))
}

/// Vertex positions of an OBJ file, in file order.
pub fn read_obj_vertices(path: &Path) -> Result<Vec<Vector3<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("v") {
            continue;
        }
        let coords: Vec<f64> = parts
            .take(3)
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("line {}: bad vertex", k + 1)))?;
        if coords.len() != 3 {
            return Err(Error::format(path, format!("line {}: vertex needs 3 coordinates", k + 1)));
        }
        out.push(Vector3::new(coords[0], coords[1], coords[2]));
    }
    Ok(out)
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::format("diagnostics.csv", e.to_string());
    w.write_record(CSV_COLUMNS).map_err(fail)?;
    for r in records {
        w.write_record(r.to_row().iter().map(|x| x.to_string())).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("diagnostics.csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Generic table writer for experiment reports.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let fail = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r.iter().map(|x| x.to_string())).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// What [`export_frames`] wrote.
#[derive(Debug, Clone)]
pub struct ExportSummary {
    pub obj_files: Vec<PathBuf>,
    pub csv_file: Option<PathBuf>,
    pub records: Vec<DiagnosticsRecord>,
}

pub fn frame_file_name(k: usize) -> String {
    format!("frame_{k:05}.obj")
}

/// Write `frame_NNNNN.obj` per frame and `diagnostics.csv` into `dir`.
pub fn export_frames(
    frames: &[Frame],
    params: &OperatorParams,
    dir: &Path,
    write_objs: bool,
    write_csv: bool,
) -> Result<ExportSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut obj_files = Vec::new();
    if write_objs {
        for (k, frame) in frames.iter().enumerate() {
            let path = dir.join(frame_file_name(k));
            write_obj(&path, &frame.immersion)?;
            obj_files.push(path);
        }
    }
    let records = evaluate_frames(frames, params)?;
    let csv_file = if write_csv {
        let path = dir.join("diagnostics.csv");
        std::fs::write(&path, diagnostics_csv(&records)?).map_err(|e| Error::io(&path, e))?;
        Some(path)
    } else {
        None
    };
    Ok(ExportSummary {
        obj_files,
        csv_file,
        records,
    })
}
