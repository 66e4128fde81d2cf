//! Value types shared across the pipeline.
//!
//! Volumes are stored band-major (`[band][row][col]`), images channel-major
//! (`[channel][row][col]`). Intensities are linear and unitless.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Uniform wavelength sampling in nanometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthGrid {
    min_nm: f64,
    max_nm: f64,
    step_nm: f64,
    count: usize,
}

impl WavelengthGrid {
    pub fn new(min_nm: f64, max_nm: f64, step_nm: f64) -> Result<Self> {
        if !(min_nm.is_finite() && max_nm.is_finite() && step_nm.is_finite()) {
            return Err(Error::Config("wavelength grid bounds must be finite".into()));
        }
        if step_nm <= 0.0 || max_nm < min_nm {
            return Err(Error::Config(format!(
                "wavelength grid needs min <= max and step > 0, got {min_nm}..{max_nm} step {step_nm}"
            )));
        }
        let span = (max_nm - min_nm) / step_nm;
        let steps = span.round();
        if (span - steps).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::Config(format!(
                "span {min_nm}..{max_nm} nm is not a whole number of {step_nm} nm steps"
            )));
        }
        Ok(Self { min_nm, max_nm, step_nm, count: steps as usize + 1 })
    }

    /// `count` samples starting at `min_nm`.
    pub fn with_count(min_nm: f64, step_nm: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("wavelength grid needs at least one band".into()));
        }
        Self::new(min_nm, min_nm + step_nm * (count - 1) as f64, step_nm)
    }

    /// 400–700 nm in 10 nm steps (31 bands).
    pub fn visible() -> Self {
        Self { min_nm: 400.0, max_nm: 700.0, step_nm: 10.0, count: 31 }
    }

    pub fn min_nm(&self) -> f64 {
        self.min_nm
    }

    pub fn max_nm(&self) -> f64 {
        self.max_nm
    }

    pub fn step_nm(&self) -> f64 {
        self.step_nm
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn wavelength(&self, band: usize) -> f64 {
        self.min_nm + self.step_nm * band as f64
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|b| self.wavelength(b))
    }

    /// Index of the band closest to `nm`, if it lies on the grid span.
    pub fn band_of(&self, nm: f64) -> Option<usize> {
        let idx = ((nm - self.min_nm) / self.step_nm).round();
        if idx < 0.0 || idx as usize >= self.count {
            None
        } else {
            Some(idx as usize)
        }
    }
}

impl Default for WavelengthGrid {
    fn default() -> Self {
        Self::visible()
    }
}

/// A real-valued `height × width` image plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "plane {height}x{width} needs {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// `H × W × bands` nonnegative intensity volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    height: usize,
    width: usize,
    grid: WavelengthGrid,
    data: Vec<f64>,
}

impl SpectralCube {
    /// Wraps band-major data. Only the length is checked; use
    /// [`SpectralCube::validate`] for value checks.
    pub fn new(height: usize, width: usize, grid: WavelengthGrid, data: Vec<f64>) -> Result<Self> {
        let expected = height * width * grid.count();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "cube {height}x{width}x{} needs {expected} samples, got {}",
                grid.count(),
                data.len()
            )));
        }
        Ok(Self { height, width, grid, data })
    }

    pub fn zeros(height: usize, width: usize, grid: WavelengthGrid) -> Self {
        Self { height, width, grid, data: vec![0.0; height * width * grid.count()] }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        grid: WavelengthGrid,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * grid.count());
        for b in 0..grid.count() {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(r, c, b));
                }
            }
        }
        Self { height, width, grid, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.grid.count()
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn band(&self, band: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[band * n..(band + 1) * n]
    }

    pub fn band_mut(&mut self, band: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[band * n..(band + 1) * n]
    }

    pub fn band_plane(&self, band: usize) -> Plane {
        Plane { height: self.height, width: self.width, data: self.band(band).to_vec() }
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[(band * self.height + row) * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, band: usize, value: f64) {
        self.data[(band * self.height + row) * self.width + col] = value;
    }

    /// The spectrum at one pixel, in band order.
    pub fn spectrum(&self, row: usize, col: usize) -> Vec<f64> {
        (0..self.bands()).map(|b| self.get(row, col, b)).collect()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn same_shape(&self, other: &SpectralCube) -> bool {
        self.height == other.height && self.width == other.width && self.grid == other.grid
    }

    pub(crate) fn check_same_shape(&self, other: &SpectralCube, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{}x{} vs {}x{}x{} (or differing wavelength grids)",
                self.height,
                self.width,
                self.bands(),
                other.height,
                other.width,
                other.bands()
            )))
        }
    }

    /// Reports non-finite and negative samples without modifying the cube.
    pub fn validate(&self) -> CubeReport {
        validate_cube(self)
    }
}

/// What a validation pass found wrong with one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NaN,
    Infinite,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub row: usize,
    pub col: usize,
    pub band: usize,
    pub kind: ViolationKind,
}

/// Outcome of [`validate_cube`]. Counts are exact; `violations` keeps at
/// most [`CubeReport::MAX_LISTED`] entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CubeReport {
    pub nan_count: usize,
    pub inf_count: usize,
    pub negative_count: usize,
    pub dimensions_consistent: bool,
    pub violations: Vec<Violation>,
}

impl CubeReport {
    pub const MAX_LISTED: usize = 256;

    pub fn is_ok(&self) -> bool {
        self.dimensions_consistent
            && self.nan_count == 0
            && self.inf_count == 0
            && self.negative_count == 0
    }
}

pub fn validate_cube(cube: &SpectralCube) -> CubeReport {
    let mut report = CubeReport {
        dimensions_consistent: cube.data.len() == cube.height * cube.width * cube.bands(),
        ..CubeReport::default()
    };
    let plane = cube.height * cube.width;
    for (i, &v) in cube.data.iter().enumerate() {
        let kind = if v.is_nan() {
            report.nan_count += 1;
            ViolationKind::NaN
        } else if v.is_infinite() {
            report.inf_count += 1;
            ViolationKind::Infinite
        } else if v < 0.0 {
            report.negative_count += 1;
            ViolationKind::Negative
        } else {
            continue;
        };
        if report.violations.len() < CubeReport::MAX_LISTED && plane > 0 {
            let band = i / plane;
            let rem = i % plane;
            report.violations.push(Violation {
                row: rem / cube.width,
                col: rem % cube.width,
                band,
                kind,
            });
        }
    }
    report
}

/// Three-channel image, channel order R, G, B.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::Shape(format!(
                "RGB image {height}x{width} needs {} samples, got {}",
                3 * height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; 3 * height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn channel_plane(&self, c: usize) -> Plane {
        Plane { height: self.height, width: self.width, data: self.channel(c).to_vec() }
    }

    pub fn get(&self, row: usize, col: usize, c: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }

    /// Clamps negative samples to zero.
    pub fn clip_nonnegative(&mut self) {
        self.data.iter_mut().for_each(|v| *v = v.max(0.0));
    }
}

/// Per-pixel, per-band Stokes parameters S0..S3.
///
/// Right-circular light has `S3 > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesCube {
    height: usize,
    width: usize,
    grid: WavelengthGrid,
    components: [Vec<f64>; 4],
}

impl StokesCube {
    pub fn new(
        height: usize,
        width: usize,
        grid: WavelengthGrid,
        components: [Vec<f64>; 4],
    ) -> Result<Self> {
        let n = height * width * grid.count();
        if components.iter().any(|c| c.len() != n) {
            return Err(Error::Shape(format!("each Stokes component needs {n} samples")));
        }
        Ok(Self { height, width, grid, components })
    }

    /// Builds a cube from per-voxel Stokes vectors.
    pub fn from_fn(
        height: usize,
        width: usize,
        grid: WavelengthGrid,
        mut f: impl FnMut(usize, usize, usize) -> [f64; 4],
    ) -> Self {
        let n = height * width * grid.count();
        let mut components: [Vec<f64>; 4] = core::array::from_fn(|_| Vec::with_capacity(n));
        for b in 0..grid.count() {
            for r in 0..height {
                for c in 0..width {
                    let s = f(r, c, b);
                    for (dst, v) in components.iter_mut().zip(s) {
                        dst.push(v);
                    }
                }
            }
        }
        Self { height, width, grid, components }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.grid.count()
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    /// Component `i` (0..=3) as a band-major volume.
    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn s0(&self) -> &[f64] {
        &self.components[0]
    }

    pub fn s1(&self) -> &[f64] {
        &self.components[1]
    }

    pub fn s2(&self) -> &[f64] {
        &self.components[2]
    }

    pub fn s3(&self) -> &[f64] {
        &self.components[3]
    }

    /// Component `i` wrapped as a spectral cube (no value checks).
    pub fn component_cube(&self, i: usize) -> SpectralCube {
        SpectralCube {
            height: self.height,
            width: self.width,
            grid: self.grid,
            data: self.components[i].clone(),
        }
    }

    pub fn vector(&self, row: usize, col: usize, band: usize) -> [f64; 4] {
        let idx = (band * self.height + row) * self.width + col;
        core::array::from_fn(|i| self.components[i][idx])
    }

    /// Number of voxels with `S1²+S2²+S3² > S0²(1 + 1e-6)` or `S0 < 0`.
    pub fn physical_violations(&self) -> usize {
        let [s0, s1, s2, s3] = &self.components;
        (0..s0.len())
            .filter(|&i| {
                let p2 = s1[i] * s1[i] + s2[i] * s2[i] + s3[i] * s3[i];
                s0[i] < 0.0 || p2 > s0[i] * s0[i] * (1.0 + 1e-6)
            })
            .count()
    }

    /// Projects every voxel onto the physical cone: `S0 >= 0` and
    /// `|(S1,S2,S3)| <= S0`, shrinking the polarized part radially.
    pub fn clamp_physical(&self) -> Self {
        let mut out = self.clone();
        let n = out.components[0].len();
        for i in 0..n {
            let s0 = out.components[0][i].max(0.0);
            out.components[0][i] = s0;
            let norm = (1..4).map(|k| out.components[k][i].powi(2)).sum::<f64>().sqrt();
            if norm > s0 {
                let scale = if norm > 0.0 { s0 / norm } else { 0.0 };
                for k in 1..4 {
                    out.components[k][i] *= scale;
                }
            }
        }
        out
    }
}

/// Spectral response `R(λ, c) = T_polarizer(λ) · R_c(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    grid: WavelengthGrid,
    t_polarizer: Vec<f64>,
    r_camera: Vec<[f64; 3]>,
}

impl ResponseTable {
    pub fn new(grid: WavelengthGrid, t_polarizer: Vec<f64>, r_camera: Vec<[f64; 3]>) -> Result<Self> {
        if t_polarizer.len() != grid.count() || r_camera.len() != grid.count() {
            return Err(Error::Shape(format!(
                "response table needs {} rows, got {} polarizer and {} camera rows",
                grid.count(),
                t_polarizer.len(),
                r_camera.len()
            )));
        }
        if let Some(t) = t_polarizer.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Config(format!("polarizer transmission {t} outside [0, 1]")));
        }
        if let Some(r) = r_camera.iter().flatten().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Config(format!("camera response {r} must be finite and >= 0")));
        }
        Ok(Self { grid, t_polarizer, r_camera })
    }

    /// Gaussian R, G, B curves centred at 610, 540 and 470 nm with 70 nm
    /// FWHM, and a constant polarizer transmission.
    pub fn gaussian_rgb(grid: WavelengthGrid, t_polarizer: f64) -> Result<Self> {
        const CENTERS: [f64; 3] = [610.0, 540.0, 470.0];
        const FWHM: f64 = 70.0;
        let sigma = FWHM / (2.0 * (2.0 * core::f64::consts::LN_2).sqrt());
        let r_camera = grid
            .wavelengths()
            .map(|nm| CENTERS.map(|c| (-(nm - c).powi(2) / (2.0 * sigma * sigma)).exp()))
            .collect();
        Self::new(grid, vec![t_polarizer; grid.count()], r_camera)
    }

    /// Unit response in every band and channel.
    pub fn unit(grid: WavelengthGrid) -> Self {
        Self { grid, t_polarizer: vec![1.0; grid.count()], r_camera: vec![[1.0; 3]; grid.count()] }
    }

    /// Default camera curves with `T_polarizer = 1`: the analyzer model
    /// already carries the polarizer's one-half factor.
    pub fn default_for(grid: WavelengthGrid) -> Self {
        Self::gaussian_rgb(grid, 1.0).expect("gaussian response is always valid")
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn t_polarizer(&self) -> &[f64] {
        &self.t_polarizer
    }

    pub fn r_camera(&self) -> &[[f64; 3]] {
        &self.r_camera
    }

    /// Effective weight of band `band` in channel `channel`.
    pub fn weight(&self, band: usize, channel: usize) -> f64 {
        self.t_polarizer[band] * self.r_camera[band][channel]
    }

    /// Sum of weights over bands for one channel.
    pub fn channel_total(&self, channel: usize) -> f64 {
        (0..self.grid.count()).map(|b| self.weight(b, channel)).sum()
    }
}

/// The four analyzer configurations of the acquisition protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnalyzerConfig {
    /// Linear polarizer at 0°.
    Linear0,
    /// Linear polarizer at 90°.
    Linear90,
    /// Linear polarizer at 45°.
    Linear45,
    /// Quarter-wave plate with fast axis at 0°, then a 45° polarizer.
    Qwp0Linear45,
}

impl AnalyzerConfig {
    /// Acquisition order, M1..M4.
    pub const ALL: [AnalyzerConfig; 4] = [
        AnalyzerConfig::Linear0,
        AnalyzerConfig::Linear90,
        AnalyzerConfig::Linear45,
        AnalyzerConfig::Qwp0Linear45,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AnalyzerConfig::Linear0 => "LINEAR_0",
            AnalyzerConfig::Linear90 => "LINEAR_90",
            AnalyzerConfig::Linear45 => "LINEAR_45",
            AnalyzerConfig::Qwp0Linear45 => "QWP0_LINEAR_45",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}
