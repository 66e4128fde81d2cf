use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use specpol_core::{SpectralCube, WavelengthGrid};

use crate::error::{Error, Result};

/// Third-party cube layouts accepted by [`ingest_external_cube`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalFormat {
    /// One text file. A `# wavelengths: ...` comment lists the band centres;
    /// each band is a block of whitespace-separated rows, blocks separated
    /// by blank lines.
    MatrixText,
    /// A directory of grayscale `band_00.png`, `band_01.png`, ... with an
    /// optional `wavelengths.txt` (one value in nm per line). Without it the
    /// stack must hold exactly the 31 default bands.
    PlanarPngStack,
}

impl ExternalFormat {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "matrix_text" | "text" => Some(ExternalFormat::MatrixText),
            "planar_png_stack" | "png_stack" | "png" => Some(ExternalFormat::PlanarPngStack),
            _ => None,
        }
    }
}

/// Loads an external cube and resamples it onto the default 31-band grid.
pub fn ingest_external_cube(path: &Path, format: ExternalFormat) -> Result<SpectralCube> {
    let (wavelengths, height, width, data) = match format {
        ExternalFormat::MatrixText => read_matrix_text(path)?,
        ExternalFormat::PlanarPngStack => read_png_stack(path)?,
    };
    resample_bands(&wavelengths, height, width, &data, &WavelengthGrid::visible())
        .map_err(|e| match e {
            Error::Config(msg) => Error::format(path, "wavelengths", msg),
            other => other,
        })
}

/// Linear interpolation of band-major `data` sampled at `wavelengths` onto
/// `target`. Target wavelengths outside the source range take the nearest
/// end band.
pub fn resample_bands(
    wavelengths: &[f64],
    height: usize,
    width: usize,
    data: &[f64],
    target: &WavelengthGrid,
) -> Result<SpectralCube> {
    let bands = wavelengths.len();
    let plane = height * width;
    if bands == 0 {
        return Err(Error::Config("source cube has no bands".into()));
    }
    if data.len() != bands * plane {
        return Err(Error::Config(format!("source data has {} samples, expected {}", data.len(), bands * plane)));
    }
    if wavelengths.windows(2).any(|w| w[1] <= w[0]) || wavelengths.iter().any(|w| !w.is_finite()) {
        return Err(Error::Config("source wavelengths must be finite and strictly increasing".into()));
    }
    let mut out = Vec::with_capacity(target.count() * plane);
    for nm in target.wavelengths() {
        let hi = wavelengths.partition_point(|&w| w < nm);
        let (i0, i1, t) = if hi == 0 {
            (0, 0, 0.0)
        } else if hi == bands {
            (bands - 1, bands - 1, 0.0)
        } else {
            let (a, b) = (wavelengths[hi - 1], wavelengths[hi]);
            (hi - 1, hi, (nm - a) / (b - a))
        };
        let (p0, p1) = (&data[i0 * plane..(i0 + 1) * plane], &data[i1 * plane..(i1 + 1) * plane]);
        out.extend(p0.iter().zip(p1).map(|(a, b)| a + t * (b - a)));
    }
    Ok(SpectralCube::new(height, width, *target, out)?)
}

type Raw = (Vec<f64>, usize, usize, Vec<f64>);

fn read_matrix_text(path: &Path) -> Result<Raw> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut wavelengths = None;
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(list) = comment.trim().strip_prefix("wavelengths:") {
                let parsed: std::result::Result<Vec<f64>, _> = list.split_whitespace().map(str::parse).collect();
                wavelengths = Some(parsed.map_err(|e| Error::format(path, "wavelengths", e.to_string()))?);
            }
            continue;
        }
        if line.is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        current.push(row.map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?);
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    let wavelengths = wavelengths.ok_or_else(|| Error::format(path, "wavelengths", "missing \"# wavelengths:\" header"))?;
    if blocks.len() != wavelengths.len() {
        return Err(Error::format(
            path,
            "bands",
            format!("{} band blocks but {} wavelengths", blocks.len(), wavelengths.len()),
        ));
    }
    if blocks.is_empty() {
        return Err(Error::format(path, "bands", "no band data"));
    }
    let height = blocks[0].len();
    let width = blocks[0].first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(blocks.len() * height * width);
    for (b, block) in blocks.iter().enumerate() {
        if block.len() != height || block.iter().any(|r| r.len() != width) {
            return Err(Error::format(path, "bands", format!("band {b} is not {height}x{width}")));
        }
        data.extend(block.iter().flatten());
    }
    Ok((wavelengths, height, width, data))
}

fn band_index(name: &str) -> Option<usize> {
    name.strip_prefix("band_")?.strip_suffix(".png")?.parse().ok()
}

fn read_png_stack(dir: &Path) -> Result<Raw> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(i) = entry.file_name().to_str().and_then(band_index) {
            files.insert(i, entry.path());
        }
    }
    let wl_path = dir.join("wavelengths.txt");
    let wavelengths = if wl_path.exists() {
        let text = fs::read_to_string(&wl_path).map_err(|e| Error::io(&wl_path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            text.split_whitespace().map(str::parse::<f64>).collect();
        parsed.map_err(|e| Error::parse(&wl_path, e))?
    } else {
        let grid = WavelengthGrid::visible();
        let found = files.keys().next_back().map_or(0, |m| m + 1);
        if found != grid.count() {
            return Err(Error::format(
                dir,
                "wavelengths",
                format!("no wavelengths.txt and {found} bands instead of the default {}", grid.count()),
            ));
        }
        grid.wavelengths().collect()
    };
    let mut dims = None;
    let mut data = Vec::new();
    for b in 0..wavelengths.len() {
        let file = files
            .get(&b)
            .ok_or_else(|| Error::format(dir, "bands", format!("missing band file for index {b} (band_{b:02}.png)")))?;
        let img = image::open(file)
            .map_err(|e| Error::Image { path: file.clone(), message: e.to_string() })?
            .to_luma16();
        let (w, h) = (img.width() as usize, img.height() as usize);
        match dims {
            None => dims = Some((h, w)),
            Some(d) if d != (h, w) => {
                return Err(Error::format(
                    file,
                    "dimensions",
                    format!("band {b} is {h}x{w}, band 0 is {}x{}", d.0, d.1),
                ))
            }
            _ => {}
        }
        data.extend(img.pixels().map(|p| p.0[0] as f64 / u16::MAX as f64));
    }
    let (h, w) = dims.unwrap_or((0, 0));
    Ok((wavelengths, h, w, data))
}
