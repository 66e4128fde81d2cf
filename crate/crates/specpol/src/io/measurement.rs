use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specpol_core::encoder::{MeasurementSet, NoiseKind, NoiseModel};
use specpol_core::{AnalyzerConfig, ResponseTable, RgbImage};

use super::cube::{check_layout, rgb_layout};
use super::{check_count, grid_from_list, read_header, read_json, read_payload, wavelength_list, write_header, write_json, write_payload, Dtype};
use crate::error::{Error, Result};

/// File name of the manifest inside a measurement directory.
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RgbHeader {
    width: usize,
    height: usize,
    channels: usize,
    dtype: String,
    layout: String,
}

pub fn write_rgb(image: &RgbImage, path: &Path) -> Result<()> {
    let header = RgbHeader {
        width: image.width(),
        height: image.height(),
        channels: 3,
        dtype: Dtype::F32Le.name().into(),
        layout: rgb_layout().into(),
    };
    write_payload(path, image.data().iter().copied())?;
    write_header(path, &header)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let h: RgbHeader = read_header(path)?;
    let dtype = Dtype::parse(path, &h.dtype)?;
    check_layout(path, &h.layout, rgb_layout())?;
    if h.channels != 3 {
        return Err(Error::format(path, "channels", format!("expected 3, found {}", h.channels)));
    }
    let data = read_payload(path, dtype, 3 * h.width * h.height)?;
    Ok(RgbImage::new(h.height, h.width, data)?)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementEntry {
    file: String,
    config: String,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseEcho {
    kind: String,
    sigma: f64,
    peak: f64,
    seed: u64,
    bit_depth: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseEcho {
    wavelengths: Vec<f64>,
    t_polarizer: Vec<f64>,
    r_camera: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    measurements: Vec<MeasurementEntry>,
    noise: NoiseEcho,
    response: ResponseEcho,
    psf: Option<String>,
}

/// A four-frame acquisition loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneManifest {
    /// Frames in acquisition order M1..M4, whatever order the file lists.
    pub set: MeasurementSet,
    pub noise: NoiseModel,
    pub response: ResponseTable,
    /// PSF stack reference, resolved against the manifest's directory.
    pub psf: Option<PathBuf>,
}

/// Writes `M1.rgb`..`M4.rgb` and [`MANIFEST_NAME`] into `dir` and returns
/// the manifest path.
pub fn write_measurement_set(
    set: &MeasurementSet,
    noise: &NoiseModel,
    response: &ResponseTable,
    psf: Option<&str>,
    dir: &Path,
) -> Result<PathBuf> {
    let mut measurements = Vec::with_capacity(4);
    for (i, image) in set.measurements.iter().enumerate() {
        let file = format!("M{}.rgb", i + 1);
        write_rgb(image, &dir.join(&file))?;
        measurements.push(MeasurementEntry { file, config: set.configs[i].name().into(), seed: set.seeds[i] });
    }
    let manifest = ManifestFile {
        measurements,
        noise: NoiseEcho {
            kind: noise.kind.name().into(),
            sigma: noise.sigma,
            peak: noise.peak,
            seed: noise.seed,
            bit_depth: noise.bit_depth,
        },
        response: ResponseEcho {
            wavelengths: wavelength_list(response.grid()),
            t_polarizer: response.t_polarizer().to_vec(),
            r_camera: response.r_camera().to_vec(),
        },
        psf: psf.map(str::to_string),
    };
    let path = dir.join(MANIFEST_NAME);
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<SceneManifest> {
    let m: ManifestFile = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    check_count(path, "measurements", m.measurements.len(), 4)?;
    let mut slots: [Option<(RgbImage, u64)>; 4] = Default::default();
    for entry in &m.measurements {
        let config = AnalyzerConfig::from_name(&entry.config)
            .ok_or_else(|| Error::format(path, "measurements.config", format!("unknown analyzer config {:?}", entry.config)))?;
        let slot = AnalyzerConfig::ALL.iter().position(|c| *c == config).expect("listed config");
        if slots[slot].is_some() {
            return Err(Error::format(path, "measurements.config", format!("{} listed twice", entry.config)));
        }
        slots[slot] = Some((read_rgb(&dir.join(&entry.file))?, entry.seed));
    }
    let [a, b, c, d] = slots.map(|s| s.expect("four distinct configs fill every slot"));
    if [&b.0, &c.0, &d.0].iter().any(|img| img.height() != a.0.height() || img.width() != a.0.width()) {
        return Err(Error::format(path, "measurements", "frames differ in size"));
    }
    let set = MeasurementSet {
        seeds: [a.1, b.1, c.1, d.1],
        measurements: [a.0, b.0, c.0, d.0],
        configs: AnalyzerConfig::ALL,
    };
    let kind = NoiseKind::from_name(&m.noise.kind)
        .ok_or_else(|| Error::format(path, "noise.kind", format!("unknown noise kind {:?}", m.noise.kind)))?;
    let noise = NoiseModel { kind, sigma: m.noise.sigma, peak: m.noise.peak, seed: m.noise.seed, bit_depth: m.noise.bit_depth };
    let grid = grid_from_list(path, &m.response.wavelengths)?;
    let response = ResponseTable::new(grid, m.response.t_polarizer, m.response.r_camera)
        .map_err(|e| Error::format(path, "response", e.to_string()))?;
    Ok(SceneManifest { set, noise, response, psf: m.psf.map(|p| dir.join(p)) })
}
