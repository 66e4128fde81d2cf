use std::path::Path;

use serde::{Deserialize, Serialize};
use specpol_core::doe::{HeightMap, HeightProfile, Quantization, RingIndex};
use specpol_core::optics::{OpticalConfig, PhaseConvention, PsfStack, Sellmeier};

use super::cube::check_layout;
use super::{check_count, grid_from_list, read_header, read_payload, wavelength_list, write_header, write_payload, Dtype};
use crate::error::{Error, Result};

const PROFILE_LAYOUT: &str = "radial";
const MAP_LAYOUT: &str = "height-map-row-major";
const PSF_LAYOUT: &str = "psf-band-major";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileHeader {
    rings: usize,
    depth_max: f64,
    dtype: String,
    layout: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapHeader {
    n: usize,
    pitch: f64,
    aperture_rings: usize,
    depth: Option<f64>,
    levels: Option<usize>,
    dtype: String,
    layout: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpticsEcho {
    source_distance: f64,
    focal_length: f64,
    convention: String,
    amplitude: f64,
    sellmeier_b: [f64; 3],
    sellmeier_c: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PsfHeader {
    k: usize,
    bands: usize,
    wavelengths: Vec<f64>,
    energy_in_crop: Vec<f64>,
    optics: Option<OpticsEcho>,
    dtype: String,
    layout: String,
}

pub fn write_profile(profile: &HeightProfile, path: &Path) -> Result<()> {
    let header = ProfileHeader {
        rings: profile.len(),
        depth_max: profile.depth_max(),
        dtype: Dtype::F32Le.name().into(),
        layout: PROFILE_LAYOUT.into(),
    };
    write_payload(path, profile.heights().iter().copied())?;
    write_header(path, &header)
}

pub fn read_profile(path: &Path) -> Result<HeightProfile> {
    let h: ProfileHeader = read_header(path)?;
    let dtype = Dtype::parse(path, &h.dtype)?;
    check_layout(path, &h.layout, PROFILE_LAYOUT)?;
    let heights = read_payload(path, dtype, h.rings)?;
    HeightProfile::new(heights, h.depth_max).map_err(|e| Error::format(path, "payload", e.to_string()))
}

/// Smallest ring count whose disk reproduces `mask`.
fn aperture_rings(map: &HeightMap) -> Option<usize> {
    let n = map.n();
    let c = (n / 2) as f64;
    let mut max_r: f64 = 0.0;
    for (i, inside) in map.mask().iter().enumerate() {
        if *inside {
            let (y, x) = ((i / n) as f64 - c, (i % n) as f64 - c);
            max_r = max_r.max((x * x + y * y).sqrt());
        }
    }
    let lo = max_r.floor().max(1.0) as usize;
    (lo..=lo + 2).find(|&len| RingIndex::new(n, len).map(|r| r.mask() == map.mask()).unwrap_or(false))
}

pub fn write_height_map(map: &HeightMap, path: &Path) -> Result<()> {
    let rings = aperture_rings(map)
        .ok_or_else(|| Error::Config("height map aperture is not a centred disk; cannot describe it by a ring count".into()))?;
    let q = map.quantization();
    let header = MapHeader {
        n: map.n(),
        pitch: map.pitch(),
        aperture_rings: rings,
        depth: q.map(|q| q.depth),
        levels: q.map(|q| q.levels),
        dtype: Dtype::F32Le.name().into(),
        layout: MAP_LAYOUT.into(),
    };
    write_payload(path, map.heights().iter().copied())?;
    write_header(path, &header)
}

pub fn read_height_map(path: &Path) -> Result<HeightMap> {
    let h: MapHeader = read_header(path)?;
    let dtype = Dtype::parse(path, &h.dtype)?;
    check_layout(path, &h.layout, MAP_LAYOUT)?;
    let quantization = match (h.levels, h.depth) {
        (Some(levels), Some(depth)) => {
            if levels < 2 || !(depth.is_finite() && depth > 0.0) {
                return Err(Error::format(path, "levels", format!("invalid quantization: {levels} levels over depth {depth}")));
            }
            Some(Quantization { levels, depth })
        }
        (None, _) => None,
        (Some(_), None) => return Err(Error::format(path, "depth", "levels given without a depth")),
    };
    let heights = read_payload(path, dtype, h.n * h.n)?;
    let mask = RingIndex::new(h.n, h.aperture_rings)
        .map_err(|e| Error::format(path, "aperture_rings", e.to_string()))?
        .mask();
    Ok(HeightMap::from_parts(h.n, h.pitch, heights, mask, quantization)?)
}

fn echo(cfg: &OpticalConfig) -> OpticsEcho {
    OpticsEcho {
        source_distance: cfg.source_distance,
        focal_length: cfg.focal_length,
        convention: cfg.convention.name().into(),
        amplitude: cfg.amplitude,
        sellmeier_b: cfg.dispersion.b,
        sellmeier_c: cfg.dispersion.c,
    }
}

/// Writes a PSF stack; `optics` is echoed into the sidecar for provenance.
pub fn write_psf(stack: &PsfStack, optics: Option<&OpticalConfig>, path: &Path) -> Result<()> {
    let header = PsfHeader {
        k: stack.crop(),
        bands: stack.bands(),
        wavelengths: wavelength_list(stack.grid()),
        energy_in_crop: stack.energy_in_crop().to_vec(),
        optics: optics.map(echo),
        dtype: Dtype::F32Le.name().into(),
        layout: PSF_LAYOUT.into(),
    };
    write_payload(path, stack.kernels().iter().copied())?;
    write_header(path, &header)
}

/// Reads a PSF stack. Kernels are renormalized to unit sum after the
/// float32 round trip.
pub fn read_psf(path: &Path) -> Result<PsfStack> {
    let h: PsfHeader = read_header(path)?;
    let dtype = Dtype::parse(path, &h.dtype)?;
    check_layout(path, &h.layout, PSF_LAYOUT)?;
    check_count(path, "wavelengths", h.wavelengths.len(), h.bands)?;
    check_count(path, "energy_in_crop", h.energy_in_crop.len(), h.bands)?;
    let grid = grid_from_list(path, &h.wavelengths)?;
    let kernels = read_payload(path, dtype, h.k * h.k * h.bands)?;
    let stack = PsfStack::from_kernels(grid, h.k, kernels).map_err(|e| Error::format(path, "payload", e.to_string()))?;
    stack
        .with_energy_in_crop(h.energy_in_crop)
        .map_err(|e| Error::format(path, "energy_in_crop", e.to_string()))
}

/// Optical configuration echoed in a PSF sidecar, if any.
pub fn read_psf_optics(path: &Path) -> Result<Option<OpticalConfig>> {
    let h: PsfHeader = read_header(path)?;
    let Some(o) = h.optics else { return Ok(None) };
    let convention = PhaseConvention::from_name(&o.convention)
        .ok_or_else(|| Error::format(path, "optics.convention", format!("unknown convention {:?}", o.convention)))?;
    Ok(Some(OpticalConfig {
        source_distance: o.source_distance,
        focal_length: o.focal_length,
        convention,
        dispersion: Sellmeier { b: o.sellmeier_b, c: o.sellmeier_c },
        amplitude: o.amplitude,
    }))
}
