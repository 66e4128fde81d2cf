use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};
use specpol_core::optics::PsfStack;
use specpol_core::polarimetry::PolarimetricMaps;
use specpol_core::{ResponseTable, RgbImage, SpectralCube};

use super::ensure_parent;
use crate::error::{Error, Result};

/// Sample depth of exported PNGs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }
}

/// Projects a cube through the camera response and scales the result so its
/// brightest sample is 1. The polarizer transmission is not applied. An
/// all-zero cube gives an all-zero image.
pub fn synthesize_rgb(cube: &SpectralCube, response: &ResponseTable) -> Result<RgbImage> {
    if cube.grid() != response.grid() {
        return Err(Error::Config(format!(
            "cube has {} bands over {}..{} nm but the response covers {} bands over {}..{} nm",
            cube.bands(),
            cube.grid().min_nm(),
            cube.grid().max_nm(),
            response.grid().count(),
            response.grid().min_nm(),
            response.grid().max_nm()
        )));
    }
    let plane = cube.height() * cube.width();
    let mut data = vec![0.0; 3 * plane];
    for b in 0..cube.bands() {
        let w = response.r_camera()[b];
        for (c, out) in data.chunks_exact_mut(plane).enumerate() {
            for (o, v) in out.iter_mut().zip(cube.band(b)) {
                *o += w[c] * v;
            }
        }
    }
    let max = data.iter().fold(0.0_f64, |m, v| m.max(*v));
    if max > 0.0 {
        data.iter_mut().for_each(|v| *v /= max);
    }
    Ok(RgbImage::new(cube.height(), cube.width(), data)?)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn save<P, C>(img: ImageBuffer<P, C>, path: &Path) -> Result<()>
where
    P: image::Pixel + image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    ensure_parent(path)?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })
}

/// Writes an RGB image with values clamped to `[0, 1]` and scaled linearly,
/// without gamma.
pub fn write_rgb_png(image: &RgbImage, depth: BitDepth, path: &Path) -> Result<()> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let at = |x: u32, y: u32, c: usize| image.get(y as usize, x as usize, c);
    match depth {
        BitDepth::Eight => save(ImageBuffer::from_fn(w, h, |x, y| Rgb([0, 1, 2].map(|c| to_u8(at(x, y, c))))), path),
        BitDepth::Sixteen => {
            save(ImageBuffer::from_fn(w, h, |x, y| Rgb([0, 1, 2].map(|c| to_u16(at(x, y, c))))), path)
        }
    }
}

fn gray_png(values: &[f64], height: usize, width: usize, path: &Path) -> Result<()> {
    let img = ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
        Luma([to_u8(values[y as usize * width + x as usize])])
    });
    save(img, path)
}

/// DoLP as 8-bit grayscale, 0 black and 1 white.
pub fn write_dolp_png(maps: &PolarimetricMaps, path: &Path) -> Result<()> {
    gray_png(&maps.dolp, maps.height, maps.width, path)
}

/// Cyclic colour for an angle of linear polarization: full-saturation hue
/// `(aolp + π/2) / π` of the colour wheel, so −π/2 and π/2 share a colour.
pub fn aolp_colour(aolp: f64) -> [u8; 3] {
    let hue = ((aolp + FRAC_PI_2) / PI).rem_euclid(1.0) * 6.0;
    let sector = hue.floor();
    let f = hue - sector;
    let (q, t) = (1.0 - f, f);
    let rgb = match sector as u32 % 6 {
        0 => [1.0, t, 0.0],
        1 => [q, 1.0, 0.0],
        2 => [0.0, 1.0, t],
        3 => [0.0, q, 1.0],
        4 => [t, 0.0, 1.0],
        _ => [1.0, 0.0, q],
    };
    rgb.map(to_u8)
}

/// AoLP through [`aolp_colour`].
pub fn write_aolp_png(maps: &PolarimetricMaps, path: &Path) -> Result<()> {
    let w = maps.width;
    let img = ImageBuffer::from_fn(w as u32, maps.height as u32, |x, y| {
        Rgb(aolp_colour(maps.aolp[y as usize * w + x as usize]))
    });
    save(img, path)
}

/// One grayscale PNG per band, `psf_XX.png`, each scaled to its own peak.
pub fn write_psf_previews(stack: &PsfStack, dir: &Path) -> Result<Vec<PathBuf>> {
    let k = stack.crop();
    let mut written = Vec::with_capacity(stack.bands());
    for b in 0..stack.bands() {
        let kernel = stack.kernel(b);
        let peak = kernel.iter().fold(0.0_f64, |m, v| m.max(*v));
        let scaled: Vec<f64> = kernel.iter().map(|v| if peak > 0.0 { v / peak } else { 0.0 }).collect();
        let path = dir.join(format!("psf_{b:02}.png"));
        gray_png(&scaled, k, k, &path)?;
        written.push(path);
    }
    Ok(written)
}
