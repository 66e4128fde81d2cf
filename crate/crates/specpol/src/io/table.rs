use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};
use specpol_core::optimizer::TrajectoryPoint;
use specpol_core::ResponseTable;

use super::{ensure_parent, grid_from_list, wavelength_list};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct ResponseRow {
    wavelength_nm: f64,
    t_polarizer: f64,
    r: f64,
    g: f64,
    b: f64,
}

#[derive(Serialize)]
struct CurveRow {
    wavelength_nm: f64,
    value: f64,
}

#[derive(Serialize)]
struct TrajectoryRow {
    iteration: usize,
    objective: f64,
    step: f64,
    accepted: bool,
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    ensure_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns `wavelength_nm,t_polarizer,r,g,b`, one row per band.
pub fn write_response_csv(table: &ResponseTable, path: &Path) -> Result<()> {
    let rows = wavelength_list(table.grid()).into_iter().enumerate().map(|(i, nm)| {
        let [r, g, b] = table.r_camera()[i];
        ResponseRow { wavelength_nm: nm, t_polarizer: table.t_polarizer()[i], r, g, b }
    });
    write_rows(path, rows)
}

pub fn read_response_csv(path: &Path) -> Result<ResponseTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for row in reader.deserialize::<ResponseRow>() {
        rows.push(row.map_err(|e| Error::parse(path, e))?);
    }
    let nm: Vec<f64> = rows.iter().map(|r| r.wavelength_nm).collect();
    let grid = grid_from_list(path, &nm)?;
    let t = rows.iter().map(|r| r.t_polarizer).collect();
    let rgb = rows.iter().map(|r| [r.r, r.g, r.b]).collect();
    ResponseTable::new(grid, t, rgb).map_err(|e| Error::format(path, "response", e.to_string()))
}

/// Columns `wavelength_nm,value`.
pub fn write_curve_csv(wavelengths: &[f64], values: &[f64], path: &Path) -> Result<()> {
    if wavelengths.len() != values.len() {
        return Err(Error::Config(format!(
            "curve has {} wavelengths but {} values",
            wavelengths.len(),
            values.len()
        )));
    }
    write_rows(path, wavelengths.iter().zip(values).map(|(&wavelength_nm, &value)| CurveRow { wavelength_nm, value }))
}

/// Columns `iteration,objective,step,accepted`.
pub fn write_trajectory_csv(points: &[TrajectoryPoint], path: &Path) -> Result<()> {
    write_rows(
        path,
        points.iter().map(|p| TrajectoryRow {
            iteration: p.iteration,
            objective: p.objective,
            step: p.step,
            accepted: p.accepted,
        }),
    )
}
