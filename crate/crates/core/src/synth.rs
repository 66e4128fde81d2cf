//! Small synthetic scenes: spectral colour-checker patches, a four-quadrant
//! linear-polarizer target and a pair of circular-polarizer patches.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datamodel::{SpectralCube, StokesCube, WavelengthGrid};
use crate::error::{Error, Result};

/// Polarizer angles of the four target quadrants (top-left, top-right,
/// bottom-left, bottom-right).
pub const TARGET_ANGLES: [f64; 4] = [0.0, FRAC_PI_4, FRAC_PI_2, -FRAC_PI_4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.row && r < self.row + self.height && c >= self.col && c < self.col + self.width
    }

    /// The rectangle shrunk by `margin` on every side.
    pub fn interior(&self, margin: usize) -> Rect {
        let m = margin.min(self.height / 2).min(self.width / 2);
        Rect { row: self.row + m, col: self.col + m, height: self.height - 2 * m, width: self.width - 2 * m }
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.row..self.row + self.height).flat_map(move |r| (self.col..self.col + self.width).map(move |c| (r, c)))
    }
}

/// Smooth reflectance-like spectrum: a baseline plus Gaussian bumps.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSpectrum {
    pub baseline: f64,
    /// `(centre nm, width nm, amplitude)`.
    pub bumps: Vec<(f64, f64, f64)>,
}

impl SmoothSpectrum {
    pub fn flat(level: f64) -> Self {
        Self { baseline: level, bumps: Vec::new() }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let baseline = rng.random_range(0.05..0.3);
        let bumps = (0..rng.random_range(1..=3))
            .map(|_| (rng.random_range(400.0..700.0), rng.random_range(25.0..90.0), rng.random_range(0.1..0.6)))
            .collect();
        Self { baseline, bumps }
    }

    pub fn at(&self, nm: f64) -> f64 {
        self.baseline
            + self
                .bumps
                .iter()
                .map(|&(c, w, a)| a * (-(nm - c) * (nm - c) / (2.0 * w * w)).exp())
                .sum::<f64>()
    }

    pub fn sample(&self, grid: &WavelengthGrid) -> Vec<f64> {
        grid.wavelengths().map(|nm| self.at(nm)).collect()
    }
}

fn check_size(height: usize, width: usize, min: usize) -> Result<()> {
    if height < min || width < min {
        return Err(Error::Config(alloc::format!("scene must be at least {min}x{min}, got {height}x{width}")));
    }
    Ok(())
}

/// Colour-checker style cube: `rows × cols` patches with random smooth
/// spectra, separated by a dark border. Values stay in `[0, 1]`.
pub fn checker(height: usize, width: usize, grid: WavelengthGrid, rows: usize, cols: usize, seed: u64) -> Result<SpectralCube> {
    if rows == 0 || cols == 0 {
        return Err(Error::Config("checker needs at least one patch".into()));
    }
    check_size(height, width, 2 * rows.max(cols))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectra: Vec<Vec<f64>> = (0..rows * cols).map(|_| SmoothSpectrum::random(&mut rng).sample(&grid)).collect();
    let peak = spectra.iter().flatten().copied().fold(0.0, f64::max);
    let border = SmoothSpectrum::flat(0.02).sample(&grid);
    let (ph, pw) = (height / rows, width / cols);
    let (gap_r, gap_c) = ((ph / 8).max(1), (pw / 8).max(1));
    Ok(SpectralCube::from_fn(height, width, grid, |r, c, b| {
        let (pr, pc) = ((r / ph).min(rows - 1), (c / pw).min(cols - 1));
        let (lr, lc) = (r - pr * ph, c - pc * pw);
        if lr < gap_r || lc < gap_c || lr >= ph - gap_r || lc >= pw - gap_c {
            border[b]
        } else {
            spectra[pr * cols + pc][b] / peak
        }
    }))
}

/// Patch rectangles of [`polar_target`], in quadrant order.
pub fn polar_target_patches(height: usize, width: usize) -> [Rect; 4] {
    let (qh, qw) = (height / 2, width / 2);
    core::array::from_fn(|q| {
        let (r0, c0) = ((q / 2) * qh, (q % 2) * qw);
        Rect { row: r0 + qh / 4, col: c0 + qw / 4, height: qh / 2, width: qw / 2 }
    })
}

/// Four linear-polarizer patches on an unpolarized background. Each patch
/// passes light at `angles[q]` with the transmitted intensity of an ideal
/// polarizer, so its DoLP is 1 and its AoLP is the polarizer angle.
pub fn polar_target(height: usize, width: usize, grid: WavelengthGrid, angles: [f64; 4]) -> Result<StokesCube> {
    check_size(height, width, 8)?;
    let patches = polar_target_patches(height, width);
    let background = SmoothSpectrum { baseline: 0.25, bumps: alloc::vec![(560.0, 120.0, 0.1)] }.sample(&grid);
    let lamp = SmoothSpectrum { baseline: 0.6, bumps: alloc::vec![(620.0, 80.0, 0.3), (460.0, 40.0, 0.2)] }.sample(&grid);
    Ok(StokesCube::from_fn(height, width, grid, |r, c, b| {
        match patches.iter().position(|p| p.contains(r, c)) {
            Some(q) => {
                let i = lamp[b];
                let t = 2.0 * angles[q];
                [i, i * t.cos(), i * t.sin(), 0.0]
            }
            None => [background[b], 0.0, 0.0, 0.0],
        }
    }))
}

/// Patch rectangles of [`circular`]: right-circular first, then left.
pub fn circular_patches(height: usize, width: usize) -> [Rect; 2] {
    let half = width / 2;
    core::array::from_fn(|i| Rect { row: height / 4, col: i * half + half / 4, height: height / 2, width: half / 2 })
}

/// Right-circular (S3 > 0) and left-circular patches on an unpolarized
/// background.
pub fn circular(height: usize, width: usize, grid: WavelengthGrid) -> Result<StokesCube> {
    check_size(height, width, 8)?;
    let patches = circular_patches(height, width);
    let background = SmoothSpectrum::flat(0.2).sample(&grid);
    let glass = SmoothSpectrum { baseline: 0.5, bumps: alloc::vec![(520.0, 70.0, 0.35)] }.sample(&grid);
    Ok(StokesCube::from_fn(height, width, grid, |r, c, b| {
        match patches.iter().position(|p| p.contains(r, c)) {
            Some(0) => [glass[b], 0.0, 0.0, glass[b]],
            Some(_) => [glass[b], 0.0, 0.0, -glass[b]],
            None => [background[b], 0.0, 0.0, 0.0],
        }
    }))
}

/// Unpolarized Stokes cube carrying `cube` as S0.
pub fn unpolarized(cube: &SpectralCube) -> StokesCube {
    let n = cube.data().len();
    StokesCube::new(
        cube.height(),
        cube.width(),
        *cube.grid(),
        [cube.data().to_vec(), alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n]],
    )
    .expect("components share the cube's shape")
}
