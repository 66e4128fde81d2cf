use std::path::Path;

use serde::{Deserialize, Serialize};
use specpol_core::{SpectralCube, StokesCube};

use super::{check_count, grid_from_list, read_header, read_payload, wavelength_list, write_header, write_payload, Dtype};
use crate::error::{Error, Result};

const CUBE_LAYOUT: &str = "band-major";
const STOKES_LAYOUT: &str = "stokes-band-major";
const RGB_LAYOUT: &str = "channel-major";
const PLANE_LAYOUT: &str = "row-major";
const STOKES_COMPONENTS: [&str; 4] = ["S0", "S1", "S2", "S3"];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CubeHeader {
    width: usize,
    height: usize,
    bands: usize,
    wavelengths: Vec<f64>,
    dtype: String,
    layout: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StokesHeader {
    width: usize,
    height: usize,
    bands: usize,
    wavelengths: Vec<f64>,
    components: Vec<String>,
    dtype: String,
    layout: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaneHeader {
    width: usize,
    height: usize,
    quantity: String,
    wavelength_nm: Option<f64>,
    dtype: String,
    layout: String,
}

/// Payload arrangement declared by a sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Spectral,
    Stokes,
    Rgb,
    Plane,
    Other,
}

#[derive(Deserialize)]
struct LayoutOnly {
    layout: Option<String>,
}

/// Reads only the `layout` key of a sidecar.
pub fn layout_of(path: &Path) -> Result<Layout> {
    let probe: LayoutOnly = read_header(path)?;
    Ok(match probe.layout.as_deref() {
        Some(CUBE_LAYOUT) => Layout::Spectral,
        Some(STOKES_LAYOUT) => Layout::Stokes,
        Some(RGB_LAYOUT) => Layout::Rgb,
        Some(PLANE_LAYOUT) => Layout::Plane,
        _ => Layout::Other,
    })
}

fn expect_layout(path: &Path, found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::format(path, "layout", format!("expected {expected:?}, found {found:?}")));
    }
    Ok(())
}

pub fn write_cube(cube: &SpectralCube, path: &Path) -> Result<()> {
    let header = CubeHeader {
        width: cube.width(),
        height: cube.height(),
        bands: cube.bands(),
        wavelengths: wavelength_list(cube.grid()),
        dtype: Dtype::F32Le.name().into(),
        layout: CUBE_LAYOUT.into(),
    };
    write_payload(path, cube.data().iter().copied())?;
    write_header(path, &header)
}

pub fn read_cube(path: &Path) -> Result<SpectralCube> {
    let h: CubeHeader = read_header(path)?;
    let dtype = Dtype::parse(path, &h.dtype)?;
    expect_layout(path, &h.layout, CUBE_LAYOUT)?;
    check_count(path, "wavelengths", h.wavelengths.len(), h.bands)?;
    let grid = grid_from_list(path, &h.wavelengths)?;
    let data = read_payload(path, dtype, h.width * h.height * h.bands)?;
    Ok(SpectralCube::new(h.height, h.width, grid, data)?)
}

pub fn write_stokes(stokes: &StokesCube, path: &Path) -> Result<()> {
    let header = StokesHeader {
        width: stokes.width(),
        height: stokes.height(),
        bands: stokes.bands(),
        wavelengths: wavelength_list(stokes.grid()),
        components: STOKES_COMPONENTS.iter().map(|s| s.to_string()).collect(),
        dtype: Dtype::F32Le.name().into(),
        layout: STOKES_LAYOUT.into(),
    };
    write_payload(path, (0..4).flat_map(|i| stokes.component(i).iter().copied()))?;
    write_header(path, &header)
}

pub fn read_stokes(path: &Path) -> Result<StokesCube> {
    let h: StokesHeader = read_header(path)?;
    let dtype = Dtype::parse(path, &h.dtype)?;
    expect_layout(path, &h.layout, STOKES_LAYOUT)?;
    if h.components != STOKES_COMPONENTS {
        return Err(Error::format(path, "components", format!("expected {STOKES_COMPONENTS:?}, found {:?}", h.components)));
    }
    check_count(path, "wavelengths", h.wavelengths.len(), h.bands)?;
    let grid = grid_from_list(path, &h.wavelengths)?;
    let n = h.width * h.height * h.bands;
    let data = read_payload(path, dtype, 4 * n)?;
    let parts: [Vec<f64>; 4] = std::array::from_fn(|i| data[i * n..(i + 1) * n].to_vec());
    Ok(StokesCube::new(h.height, h.width, grid, parts)?)
}

/// A single real image such as a DoLP or AoLP map.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFile {
    pub height: usize,
    pub width: usize,
    pub quantity: String,
    pub wavelength_nm: Option<f64>,
    pub data: Vec<f64>,
}

pub fn write_plane(plane: &PlaneFile, path: &Path) -> Result<()> {
    if plane.data.len() != plane.height * plane.width {
        return Err(Error::Config(format!(
            "plane {} has {} samples for {}x{}",
            plane.quantity,
            plane.data.len(),
            plane.height,
            plane.width
        )));
    }
    let header = PlaneHeader {
        width: plane.width,
        height: plane.height,
        quantity: plane.quantity.clone(),
        wavelength_nm: plane.wavelength_nm,
        dtype: Dtype::F32Le.name().into(),
        layout: PLANE_LAYOUT.into(),
    };
    write_payload(path, plane.data.iter().copied())?;
    write_header(path, &header)
}

pub fn read_plane(path: &Path) -> Result<PlaneFile> {
    let h: PlaneHeader = read_header(path)?;
    let dtype = Dtype::parse(path, &h.dtype)?;
    expect_layout(path, &h.layout, PLANE_LAYOUT)?;
    let data = read_payload(path, dtype, h.width * h.height)?;
    Ok(PlaneFile { height: h.height, width: h.width, quantity: h.quantity, wavelength_nm: h.wavelength_nm, data })
}

pub(crate) fn rgb_layout() -> &'static str {
    RGB_LAYOUT
}

pub(crate) fn check_layout(path: &Path, found: &str, expected: &str) -> Result<()> {
    expect_layout(path, found, expected)
}
