//! File formats, dataset ingestion and image export.
//!
//! Every binary artifact is a raw little-endian payload at `path` plus a
//! JSON sidecar at `path.json`. Sidecar keys are written in a fixed order
//! and unknown keys are rejected on read.

mod cube;
mod element;
mod export;
mod ingest;
mod measurement;
mod table;

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use specpol_core::WavelengthGrid;

use crate::error::{Error, Result};

pub use cube::{layout_of, read_cube, read_plane, read_stokes, write_cube, write_plane, write_stokes, Layout, PlaneFile};
pub use element::{read_height_map, read_profile, read_psf, read_psf_optics, write_height_map, write_profile, write_psf};
pub use export::{
    aolp_colour, synthesize_rgb, write_aolp_png, write_dolp_png, write_psf_previews, write_rgb_png, BitDepth,
};
pub use ingest::{ingest_external_cube, resample_bands, ExternalFormat};
pub use measurement::{read_manifest, read_rgb, write_measurement_set, write_rgb, SceneManifest, MANIFEST_NAME};
pub use table::{read_response_csv, write_curve_csv, write_response_csv, write_trajectory_csv};

pub use specpol_core::synth;

/// Sample encoding of a payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32Le,
    F64Le,
}

impl Dtype {
    pub fn name(&self) -> &'static str {
        match self {
            Dtype::F32Le => "f32le",
            Dtype::F64Le => "f64le",
        }
    }

    fn size(&self) -> usize {
        match self {
            Dtype::F32Le => 4,
            Dtype::F64Le => 8,
        }
    }

    pub(crate) fn parse(path: &Path, name: &str) -> Result<Self> {
        match name {
            "f32le" => Ok(Dtype::F32Le),
            "f64le" => Ok(Dtype::F64Le),
            other => Err(Error::format(path, "dtype", format!("unsupported dtype {other:?}, expected \"f32le\" or \"f64le\""))),
        }
    }
}

/// Location of the JSON sidecar of `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub(crate) fn read_header<T: DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(&sidecar_path(path))
}

pub(crate) fn write_header<T: Serialize>(path: &Path, header: &T) -> Result<()> {
    write_json(&sidecar_path(path), header)
}

pub(crate) fn write_payload(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    ensure_parent(path)?;
    let bytes: Vec<u8> = values.into_iter().flat_map(|v| (v as f32).to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_payload(path: &Path, dtype: Dtype, count: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = count * dtype.size();
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            "payload",
            format!("length mismatch: header implies {expected} bytes, file has {}", bytes.len()),
        ));
    }
    Ok(match dtype {
        Dtype::F32Le => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F64Le => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    })
}

pub(crate) fn wavelength_list(grid: &WavelengthGrid) -> Vec<f64> {
    grid.wavelengths().collect()
}

/// Rebuilds a uniform grid from an explicit wavelength list.
pub(crate) fn grid_from_list(path: &Path, nm: &[f64]) -> Result<WavelengthGrid> {
    let bad = |msg: String| Error::format(path, "wavelengths", msg);
    match nm.len() {
        0 => Err(bad("empty wavelength list".into())),
        1 => WavelengthGrid::with_count(nm[0], 10.0, 1).map_err(|e| bad(e.to_string())),
        n => {
            let step = (nm[n - 1] - nm[0]) / (n - 1) as f64;
            let grid = WavelengthGrid::with_count(nm[0], step, n).map_err(|e| bad(e.to_string()))?;
            for (i, (a, b)) in nm.iter().zip(grid.wavelengths()).enumerate() {
                if (a - b).abs() > 1e-6 * step.abs().max(1.0) {
                    return Err(bad(format!("samples are not uniformly spaced (entry {i} is {a} nm, expected {b} nm)")));
                }
            }
            Ok(grid)
        }
    }
}

pub(crate) fn check_count(path: &Path, field: &str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::format(path, field, format!("has {found} entries, expected {expected}")));
    }
    Ok(())
}
