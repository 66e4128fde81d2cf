//! Scalar wave-optics model of the element's point spread functions.
//!
//! A point source at distance `z` illuminates the element with a quadratic
//! phase; the element adds `k (n_λ - 1) h(x, y)`; the propagation to the
//! sensor adds a second quadratic term from the focal length. The PSF is
//! the squared magnitude of the 2-D DFT of that exit field, centred on the
//! zero frequency, cropped and normalized to unit sum.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::datamodel::{Plane, WavelengthGrid};
use crate::doe::{HeightMap, HeightProfile};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::par;

/// Default crop of each kernel, in samples.
pub const DEFAULT_CROP: usize = 64;
/// Wavelength range accepted by the dispersion model, in nm.
pub const DISPERSION_RANGE_NM: (f64, f64) = (300.0, 1000.0);

/// Three-term Sellmeier dispersion, `n² = 1 + Σ B_i λ² / (λ² - C_i)` with
/// `λ` in micrometres and `C_i` in µm².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sellmeier {
    pub b: [f64; 3],
    pub c: [f64; 3],
}

impl Sellmeier {
    /// Fused silica (Malitson 1965).
    pub const FUSED_SILICA: Sellmeier = Sellmeier {
        b: [0.696_166_3, 0.407_942_6, 0.897_479_4],
        c: [0.068_404_3 * 0.068_404_3, 0.116_241_4 * 0.116_241_4, 9.896_161 * 9.896_161],
    };

    pub fn index(&self, nm: f64) -> Result<f64> {
        let (lo, hi) = DISPERSION_RANGE_NM;
        if !(lo..=hi).contains(&nm) {
            return Err(Error::Domain(format!(
                "wavelength {nm} nm outside the dispersion model range {lo}-{hi} nm"
            )));
        }
        let l2 = (nm * 1e-3).powi(2);
        let sum: f64 = self.b.iter().zip(&self.c).map(|(b, c)| b * l2 / (l2 - c)).sum();
        Ok((1.0 + sum).sqrt())
    }
}

impl Default for Sellmeier {
    fn default() -> Self {
        Self::FUSED_SILICA
    }
}

/// Refractive index of fused silica at `nm`.
pub fn refractive_index(nm: f64) -> Result<f64> {
    Sellmeier::FUSED_SILICA.index(nm)
}

/// How the two quadratic phase terms are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    /// Source term `(x²+y²)/z`, lens term `+(x²+y²)/(2f)`.
    #[default]
    PaperLiteral,
    /// Source term `(x²+y²)/(2z)`, lens term `-(x²+y²)/(2f)`.
    Physical,
}

impl PhaseConvention {
    pub fn name(&self) -> &'static str {
        match self {
            PhaseConvention::PaperLiteral => "PAPER_LITERAL",
            PhaseConvention::Physical => "PHYSICAL",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "PAPER_LITERAL" => Some(PhaseConvention::PaperLiteral),
            "PHYSICAL" => Some(PhaseConvention::Physical),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalConfig {
    /// Point-source distance `z` in metres.
    pub source_distance: f64,
    /// Element-to-sensor focal length `f` in metres.
    pub focal_length: f64,
    pub convention: PhaseConvention,
    pub dispersion: Sellmeier,
    /// Aperture amplitude `A_0`.
    pub amplitude: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self {
            source_distance: 1.0,
            focal_length: 0.050,
            convention: PhaseConvention::PaperLiteral,
            dispersion: Sellmeier::FUSED_SILICA,
            amplitude: 1.0,
        }
    }
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.source_distance.is_finite() && self.source_distance > 0.0) {
            return Err(Error::Config(format!("source distance must be > 0, got {}", self.source_distance)));
        }
        if !(self.focal_length.is_finite() && self.focal_length > 0.0) {
            return Err(Error::Config(format!("focal length must be > 0, got {}", self.focal_length)));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::Config(format!("aperture amplitude must be > 0, got {}", self.amplitude)));
        }
        Ok(())
    }

    /// Validates the config and checks `n_λ > 1` on every band of `grid`.
    pub fn validate_for(&self, grid: &WavelengthGrid) -> Result<Vec<f64>> {
        self.validate()?;
        grid.wavelengths()
            .map(|nm| {
                let n = self.refractive_index(nm)?;
                if n <= 1.0 {
                    return Err(Error::Config(format!("refractive index {n} <= 1 at {nm} nm")));
                }
                Ok(n)
            })
            .collect()
    }

    pub fn refractive_index(&self, nm: f64) -> Result<f64> {
        self.dispersion.index(nm)
    }

    fn source_coefficient(&self) -> f64 {
        match self.convention {
            PhaseConvention::PaperLiteral => 1.0 / self.source_distance,
            PhaseConvention::Physical => 1.0 / (2.0 * self.source_distance),
        }
    }

    fn lens_coefficient(&self) -> f64 {
        match self.convention {
            PhaseConvention::PaperLiteral => 1.0 / (2.0 * self.focal_length),
            PhaseConvention::Physical => -1.0 / (2.0 * self.focal_length),
        }
    }

    /// Coefficient `Q` of the total quadratic phase `k Q (x² + y²)` at the
    /// sensor side of the element.
    pub fn exit_quadratic(&self) -> f64 {
        self.source_coefficient() + self.lens_coefficient()
    }
}

/// Complex amplitudes on the element grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub n: usize,
    pub pitch: f64,
    pub data: Vec<Complex64>,
}

fn wavenumber(nm: f64) -> f64 {
    2.0 * PI / (nm * 1e-9)
}

/// Squared distance of every pixel to the grid centre `(n/2, n/2)`, in m².
fn radius_squared(n: usize, pitch: f64) -> Vec<f64> {
    let c = (n / 2) as f64;
    let mut out = Vec::with_capacity(n * n);
    for row in 0..n {
        let y = (row as f64 - c) * pitch;
        for col in 0..n {
            let x = (col as f64 - c) * pitch;
            out.push(x * x + y * y);
        }
    }
    out
}

fn field_with_quadratic(
    cfg: &OpticalConfig,
    map: &HeightMap,
    nm: f64,
    quadratic: f64,
) -> Result<ComplexField> {
    cfg.validate()?;
    let index = cfg.refractive_index(nm)?;
    let k = wavenumber(nm);
    let r2 = radius_squared(map.n(), map.pitch());
    let data = r2
        .iter()
        .zip(map.heights())
        .zip(map.mask())
        .map(|((&r2, &h), &inside)| {
            if inside {
                Complex64::from_polar(cfg.amplitude, k * (quadratic * r2 + (index - 1.0) * h))
            } else {
                Complex64::zero()
            }
        })
        .collect();
    Ok(ComplexField { n: map.n(), pitch: map.pitch(), data })
}

/// Field just behind the element: spherical illumination plus the element
/// phase, with amplitude `A_0` inside the aperture.
pub fn field_at_element(cfg: &OpticalConfig, map: &HeightMap, nm: f64) -> Result<ComplexField> {
    field_with_quadratic(cfg, map, nm, cfg.source_coefficient())
}

/// [`field_at_element`] with the focal-length term added.
pub fn exit_field(cfg: &OpticalConfig, map: &HeightMap, nm: f64) -> Result<ComplexField> {
    field_with_quadratic(cfg, map, nm, cfg.exit_quadratic())
}

/// Per-band kernels, each `crop × crop`, nonnegative with unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfStack {
    grid: WavelengthGrid,
    crop: usize,
    kernels: Vec<f64>,
    energy_in_crop: Vec<f64>,
}

impl PsfStack {
    /// Builds a stack from band-major kernels, normalizing each to unit sum.
    pub fn from_kernels(grid: WavelengthGrid, crop: usize, mut kernels: Vec<f64>) -> Result<Self> {
        let size = crop * crop;
        if crop == 0 || kernels.len() != size * grid.count() {
            return Err(Error::Shape(format!(
                "{} kernels of {crop}x{crop} need {} samples, got {}",
                grid.count(),
                size * grid.count(),
                kernels.len()
            )));
        }
        for (b, kernel) in kernels.chunks_exact_mut(size).enumerate() {
            if kernel.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInput(format!("kernel {b} has negative or non-finite entries")));
            }
            let total: f64 = kernel.iter().sum();
            if total <= 0.0 {
                return Err(Error::InvalidInput(format!("kernel {b} has zero energy")));
            }
            kernel.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Self { grid, crop, kernels, energy_in_crop: vec![1.0; grid.count()] })
    }

    /// Replaces the recorded energy-in-crop fractions, e.g. when loading a
    /// stack from disk.
    pub fn with_energy_in_crop(mut self, energy: Vec<f64>) -> Result<Self> {
        if energy.len() != self.grid.count() {
            return Err(Error::Shape(format!("{} energy fractions for {} bands", energy.len(), self.grid.count())));
        }
        if energy.iter().any(|e| !(e.is_finite() && *e > 0.0 && *e <= 1.0 + 1e-9)) {
            return Err(Error::InvalidInput("energy-in-crop fractions must lie in (0, 1]".into()));
        }
        self.energy_in_crop = energy;
        Ok(self)
    }

    /// Centred unit impulses in every band.
    pub fn delta(grid: WavelengthGrid, crop: usize) -> Result<Self> {
        let mut kernels = vec![0.0; crop * crop * grid.count()];
        for b in 0..grid.count() {
            kernels[b * crop * crop + (crop / 2) * crop + crop / 2] = 1.0;
        }
        Self::from_kernels(grid, crop, kernels)
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn crop(&self) -> usize {
        self.crop
    }

    pub fn bands(&self) -> usize {
        self.grid.count()
    }

    pub fn kernel(&self, band: usize) -> &[f64] {
        let size = self.crop * self.crop;
        &self.kernels[band * size..(band + 1) * size]
    }

    pub fn kernel_plane(&self, band: usize) -> Plane {
        Plane { height: self.crop, width: self.crop, data: self.kernel(band).to_vec() }
    }

    pub fn kernels(&self) -> &[f64] {
        &self.kernels
    }

    /// Fraction of each band's total diffracted energy that fell inside the
    /// crop window (1.0 for stacks not produced by [`psf`]).
    pub fn energy_in_crop(&self) -> &[f64] {
        &self.energy_in_crop
    }
}

/// Exit field, its spectrum, and the cropped intensities for one band.
#[derive(Debug, Clone)]
pub struct BandField {
    pub nm: f64,
    /// `k (n_λ - 1)`: phase per metre of height.
    pub phase_per_height: f64,
    pub field: Vec<Complex64>,
    pub spectrum: Vec<Complex64>,
    /// Unnormalized `|F|²` over the crop window, row-major.
    pub crop_intensity: Vec<f64>,
    pub crop_total: f64,
    pub total: f64,
}

impl BandField {
    pub fn kernel(&self) -> Vec<f64> {
        self.crop_intensity.iter().map(|v| v / self.crop_total).collect()
    }
}

/// Reusable forward model for one grid geometry and crop.
#[derive(Debug, Clone)]
pub struct PsfEngine {
    cfg: OpticalConfig,
    n: usize,
    crop: usize,
    quadratic_r2: Vec<f64>,
    mask: Vec<bool>,
    fft: Fft2,
}

impl PsfEngine {
    pub fn new(cfg: &OpticalConfig, n: usize, pitch: f64, crop: usize, mask: Vec<bool>) -> Result<Self> {
        cfg.validate()?;
        if crop == 0 || !crop.is_multiple_of(2) {
            return Err(Error::Config(format!("crop must be even and positive, got {crop}")));
        }
        if crop > n {
            return Err(Error::Config(format!("crop {crop} exceeds the {n}x{n} grid")));
        }
        if mask.len() != n * n {
            return Err(Error::Shape(format!("aperture mask needs {} samples", n * n)));
        }
        if !mask.iter().any(|m| *m) {
            return Err(Error::Config("aperture is empty".into()));
        }
        let q = cfg.exit_quadratic();
        let quadratic_r2 = radius_squared(n, pitch).into_iter().map(|r2| q * r2).collect();
        Ok(Self { cfg: *cfg, n, crop, quadratic_r2, mask, fft: Fft2::new(n, n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn crop(&self) -> usize {
        self.crop
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.cfg
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// Flat index into the full spectrum of crop sample `(a, b)`; the crop
    /// centre `(crop/2, crop/2)` is the zero frequency.
    pub fn crop_source(&self, a: usize, b: usize) -> usize {
        let n = self.n;
        let half = self.crop / 2;
        let fr = (a + n - half) % n;
        let fc = (b + n - half) % n;
        fr * n + fc
    }

    /// Runs the forward model for one wavelength on a grid of heights.
    pub fn band(&self, heights: &[f64], nm: f64) -> Result<BandField> {
        let index = self.cfg.refractive_index(nm)?;
        let k = wavenumber(nm);
        let phase_per_height = k * (index - 1.0);
        let a0 = self.cfg.amplitude;
        let field: Vec<Complex64> = self
            .quadratic_r2
            .iter()
            .zip(heights)
            .zip(&self.mask)
            .map(|((&qr2, &h), &inside)| {
                if inside {
                    Complex64::from_polar(a0, k * qr2 + phase_per_height * h)
                } else {
                    Complex64::zero()
                }
            })
            .collect();
        let mut spectrum = field.clone();
        self.fft.forward(&mut spectrum);
        let total: f64 = spectrum.iter().map(|z| z.norm_sqr()).sum();
        let mut crop_intensity = Vec::with_capacity(self.crop * self.crop);
        for a in 0..self.crop {
            for b in 0..self.crop {
                crop_intensity.push(spectrum[self.crop_source(a, b)].norm_sqr());
            }
        }
        let crop_total: f64 = crop_intensity.iter().sum();
        if !(crop_total.is_finite() && crop_total > 0.0) {
            return Err(Error::Numerical(format!(
                "kernel at {nm} nm has no energy inside the {}x{} crop",
                self.crop, self.crop
            )));
        }
        Ok(BandField { nm, phase_per_height, field, spectrum, crop_intensity, crop_total, total })
    }
}

/// Computes the per-band PSF stack of `map`.
pub fn psf(cfg: &OpticalConfig, map: &HeightMap, grid: &WavelengthGrid, crop: usize) -> Result<PsfStack> {
    cfg.validate_for(grid)?;
    let engine = PsfEngine::new(cfg, map.n(), map.pitch(), crop, map.mask().to_vec())?;
    let bands = par::map_indices(grid.count(), |b| engine.band(map.heights(), grid.wavelength(b)));
    let mut kernels = Vec::with_capacity(crop * crop * grid.count());
    let mut energy = Vec::with_capacity(grid.count());
    for band in bands {
        let band = band?;
        kernels.extend(band.kernel());
        energy.push(band.crop_total / band.total);
    }
    Ok(PsfStack { grid: *grid, crop, kernels, energy_in_crop: energy })
}

/// Wrapped-phase profile that cancels the exit quadratic phase at
/// `design_nm`, i.e. a diffractive lens focusing that wavelength onto the
/// zero frequency. Ring `i` sits at radius `i · pitch`.
pub fn focusing_profile(
    cfg: &OpticalConfig,
    len: usize,
    pitch: f64,
    design_nm: f64,
    depth_max: f64,
) -> Result<HeightProfile> {
    cfg.validate()?;
    let index = cfg.refractive_index(design_nm)?;
    let period = design_nm * 1e-9 / (index - 1.0);
    if period > depth_max {
        return Err(Error::Config(format!(
            "one wave at {design_nm} nm needs {period} m of depth, only {depth_max} m available"
        )));
    }
    let q = cfg.exit_quadratic();
    let k = wavenumber(design_nm);
    let heights = (0..len)
        .map(|i| {
            let r = i as f64 * pitch;
            let raw = -k * q * r * r;
            let phase = raw - 2.0 * PI * (raw / (2.0 * PI)).floor();
            (phase / (2.0 * PI) * period).min(depth_max)
        })
        .collect();
    HeightProfile::new(heights, depth_max)
}
