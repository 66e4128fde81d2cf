//! RGB measurement formation: per-band convolution with the PSF, spectral
//! weighting by the response table, summation, and sensor noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::conv::LinearConv;
use crate::datamodel::{AnalyzerConfig, ResponseTable, RgbImage, SpectralCube};
use crate::error::{Error, Result};
use crate::optics::PsfStack;
use crate::par;
use crate::polarimetry::{analyzer_intensity, PolarizedScene};

/// Kernel spectra above this many complex samples are recomputed on the fly.
const KERNEL_CACHE_LIMIT: usize = 1 << 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    None,
    #[default]
    Gaussian,
    PoissonGaussian,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::None => "NONE",
            NoiseKind::Gaussian => "GAUSSIAN",
            NoiseKind::PoissonGaussian => "POISSON_GAUSSIAN",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "NONE" => Some(NoiseKind::None),
            "GAUSSIAN" => Some(NoiseKind::Gaussian),
            "POISSON_GAUSSIAN" => Some(NoiseKind::PoissonGaussian),
            _ => None,
        }
    }
}

/// Sensor noise. `sigma` is the read-noise standard deviation as a fraction
/// of the clean measurement's 99th-percentile value; `peak` is the photon
/// count at that percentile for shot noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub peak: f64,
    pub seed: u64,
    /// Optional ADC quantization over `[0, max]` of the clean image.
    pub bit_depth: Option<u32>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { kind: NoiseKind::Gaussian, sigma: 0.01, peak: 1000.0, seed: 0, bit_depth: None }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, sigma: 0.0, ..Self::default() }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::Gaussian, sigma, seed, ..Self::default() }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {}", self.sigma)));
        }
        if self.kind == NoiseKind::PoissonGaussian && !(self.peak.is_finite() && self.peak > 0.0) {
            return Err(Error::Config(format!("Poisson peak must be > 0, got {}", self.peak)));
        }
        if let Some(bits) = self.bit_depth {
            if !(1..=32).contains(&bits) {
                return Err(Error::Config(format!("bit depth must be in 1..=32, got {bits}")));
            }
        }
        Ok(())
    }
}

/// Precomputed forward model for one PSF stack, response and image size.
#[derive(Debug, Clone)]
pub struct Encoder {
    psfs: PsfStack,
    response: ResponseTable,
    conv: LinearConv,
    kernel_spectra: Option<Vec<Vec<Complex64>>>,
}

impl Encoder {
    pub fn new(psfs: &PsfStack, response: &ResponseTable, height: usize, width: usize) -> Result<Self> {
        if psfs.grid() != response.grid() {
            return Err(Error::Shape("PSF stack and response table use different wavelength grids".into()));
        }
        if height == 0 || width == 0 {
            return Err(Error::Shape("cannot encode an empty image".into()));
        }
        let conv = LinearConv::new(height, width, psfs.crop());
        let kernel_spectra = (conv.fft().len() * psfs.bands() <= KERNEL_CACHE_LIMIT).then(|| {
            par::map_indices(psfs.bands(), |b| conv.kernel_spectrum(psfs.kernel(b)))
        });
        Ok(Self { psfs: psfs.clone(), response: response.clone(), conv, kernel_spectra })
    }

    pub fn height(&self) -> usize {
        self.conv.height()
    }

    pub fn width(&self) -> usize {
        self.conv.width()
    }

    pub fn psfs(&self) -> &PsfStack {
        &self.psfs
    }

    pub fn response(&self) -> &ResponseTable {
        &self.response
    }

    fn kernel_spectrum(&self, band: usize) -> alloc::borrow::Cow<'_, [Complex64]> {
        match &self.kernel_spectra {
            Some(cache) => alloc::borrow::Cow::Borrowed(&cache[band]),
            None => alloc::borrow::Cow::Owned(self.conv.kernel_spectrum(self.psfs.kernel(band))),
        }
    }

    fn check_cube(&self, cube: &SpectralCube) -> Result<()> {
        if cube.grid() != self.psfs.grid() {
            return Err(Error::Shape("scene grid differs from the PSF grid".into()));
        }
        if cube.height() != self.height() || cube.width() != self.width() {
            return Err(Error::Shape(format!(
                "scene is {}x{}, encoder expects {}x{}",
                cube.height(),
                cube.width(),
                self.height(),
                self.width()
            )));
        }
        Ok(())
    }

    /// Noiseless measurement.
    pub fn encode_clean(&self, cube: &SpectralCube) -> Result<RgbImage> {
        self.check_cube(cube)?;
        let bands = cube.bands();
        let pairs = bands.div_ceil(2);
        let chunks = pairs.min(4);
        let len = self.conv.fft().len();
        // each chunk accumulates its band pairs into three channel spectra
        let partial = par::map_indices(chunks, |chunk| {
            let mut acc = vec![vec![Complex64::zero(); len]; 3];
            for pair in (chunk..pairs).step_by(chunks) {
                let b0 = 2 * pair;
                let specs = if b0 + 1 < bands {
                    let (s0, s1) = self.conv.image_spectra_pair(cube.band(b0), cube.band(b0 + 1));
                    vec![(b0, s0), (b0 + 1, s1)]
                } else {
                    vec![(b0, self.conv.image_spectrum(cube.band(b0)))]
                };
                for (b, mut spec) in specs {
                    for (s, k) in spec.iter_mut().zip(self.kernel_spectrum(b).iter()) {
                        *s *= k;
                    }
                    for (c, channel) in acc.iter_mut().enumerate() {
                        let w = self.response.weight(b, c);
                        if w != 0.0 {
                            channel.iter_mut().zip(&spec).for_each(|(a, s)| *a += s * w);
                        }
                    }
                }
            }
            acc
        });
        let mut totals = vec![vec![Complex64::zero(); len]; 3];
        for acc in partial {
            for (t, a) in totals.iter_mut().zip(acc) {
                t.iter_mut().zip(a).for_each(|(t, a)| *t += a);
            }
        }
        let blue = totals.pop().expect("three channels");
        let (red, green) = self.conv.finish_convolution_pair(&totals[0], &totals[1]);
        let mut data = Vec::with_capacity(3 * self.height() * self.width());
        data.extend(red);
        data.extend(green);
        data.extend(self.conv.finish_convolution(blue));
        RgbImage::new(self.height(), self.width(), data)
    }

    /// Adjoint of [`Encoder::encode_clean`]: maps an RGB sensitivity back to
    /// a cube-shaped one.
    pub fn adjoint(&self, grad: &RgbImage) -> Result<SpectralCube> {
        if grad.height() != self.height() || grad.width() != self.width() {
            return Err(Error::Shape("adjoint input has the wrong size".into()));
        }
        let (red, green) = self.conv.gradient_spectra_pair(grad.channel(0), grad.channel(1));
        let grad_specs = [red, green, self.conv.gradient_spectrum(grad.channel(2))];
        let len = self.conv.fft().len();
        let bands = self.psfs.bands();
        let mixed = |b: usize| {
            let mut m = vec![Complex64::zero(); len];
            for (c, spec) in grad_specs.iter().enumerate() {
                let w = self.response.weight(b, c);
                if w != 0.0 {
                    m.iter_mut().zip(spec).for_each(|(m, s)| *m += s * w);
                }
            }
            m
        };
        let pairs = par::map_indices(bands.div_ceil(2), |pair| {
            let b0 = 2 * pair;
            if b0 + 1 < bands {
                let (a, b) = self.conv.adjoint_image_pair(
                    &mixed(b0),
                    &self.kernel_spectrum(b0),
                    &mixed(b0 + 1),
                    &self.kernel_spectrum(b0 + 1),
                );
                vec![a, b]
            } else {
                vec![self.conv.adjoint_image_from(&mixed(b0), &self.kernel_spectrum(b0))]
            }
        });
        let data: Vec<f64> = pairs.into_iter().flatten().flatten().collect();
        SpectralCube::new(self.height(), self.width(), *self.psfs.grid(), data)
    }

    /// Measurement with noise applied.
    pub fn encode(&self, cube: &SpectralCube, noise: &NoiseModel) -> Result<RgbImage> {
        noise.validate()?;
        let mut image = self.encode_clean(cube)?;
        apply_noise(&mut image, noise)?;
        Ok(image)
    }
}

/// One-shot form of [`Encoder::encode`].
pub fn encode(
    cube: &SpectralCube,
    psfs: &PsfStack,
    response: &ResponseTable,
    noise: &NoiseModel,
) -> Result<RgbImage> {
    if cube.grid() != psfs.grid() || cube.grid() != response.grid() {
        return Err(Error::Shape("scene, PSF and response grids must match".into()));
    }
    Encoder::new(psfs, response, cube.height(), cube.width())?.encode(cube, noise)
}

fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let idx = ((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1);
    let (_, nth, _) = v.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    *nth
}

/// Adds noise in place according to `noise`.
pub fn apply_noise(image: &mut RgbImage, noise: &NoiseModel) -> Result<()> {
    noise.validate()?;
    if noise.kind == NoiseKind::None && noise.bit_depth.is_none() {
        return Ok(());
    }
    let reference = percentile(image.data(), 0.99);
    let full_scale = image.data().iter().copied().fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let read_sigma = noise.sigma * reference;
    let gauss = Normal::new(0.0, read_sigma.max(0.0))
        .map_err(|e| Error::Config(format!("noise sigma: {e}")))?;
    match noise.kind {
        NoiseKind::None => {}
        NoiseKind::Gaussian => {
            if read_sigma > 0.0 {
                image.data_mut().iter_mut().for_each(|v| *v += gauss.sample(&mut rng));
            }
        }
        NoiseKind::PoissonGaussian => {
            if reference > 0.0 {
                let scale = noise.peak / reference;
                for v in image.data_mut().iter_mut() {
                    let lambda = v.max(0.0) * scale;
                    let photons = if lambda > 0.0 {
                        Poisson::new(lambda)
                            .map_err(|e| Error::Numerical(format!("Poisson rate {lambda}: {e}")))?
                            .sample(&mut rng)
                    } else {
                        0.0
                    };
                    *v = photons / scale;
                    if read_sigma > 0.0 {
                        *v += gauss.sample(&mut rng);
                    }
                }
            }
        }
    }
    if let Some(bits) = noise.bit_depth {
        if full_scale > 0.0 {
            let levels = ((1u64 << bits) - 1) as f64;
            for v in image.data_mut().iter_mut() {
                *v = ((*v / full_scale).clamp(0.0, 1.0) * levels).round() * full_scale / levels;
            }
        }
    }
    Ok(())
}

/// Seed of measurement `index` derived from a master seed (splitmix64).
pub fn derive_seed(master: u64, index: usize) -> u64 {
    let mut z = master ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The four analyzer measurements M1..M4 of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub measurements: [RgbImage; 4],
    pub configs: [AnalyzerConfig; 4],
    pub seeds: [u64; 4],
}

/// Encodes the scene through each analyzer configuration with a shared PSF
/// stack. Noise seeds derive from `noise.seed`.
pub fn acquire_four(
    scene: &PolarizedScene,
    psfs: &PsfStack,
    response: &ResponseTable,
    noise: &NoiseModel,
) -> Result<MeasurementSet> {
    noise.validate()?;
    let stokes = &scene.stokes;
    if stokes.grid() != psfs.grid() || stokes.grid() != response.grid() {
        return Err(Error::Shape("scene, PSF and response grids must match".into()));
    }
    let encoder = Encoder::new(psfs, response, stokes.height(), stokes.width())?;
    let seeds: [u64; 4] = core::array::from_fn(|i| derive_seed(noise.seed, i));
    let configs = AnalyzerConfig::ALL;
    let mut images = Vec::with_capacity(4);
    for (config, seed) in configs.iter().zip(seeds) {
        let cube = analyzer_intensity(scene, *config);
        images.push(encoder.encode(&cube, &noise.with_seed(seed))?);
    }
    let measurements: [RgbImage; 4] = images.try_into().expect("four measurements");
    Ok(MeasurementSet { measurements, configs, seeds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{StokesCube, WavelengthGrid};

    fn grid3() -> WavelengthGrid {
        WavelengthGrid::with_count(450.0, 100.0, 3).unwrap()
    }

    fn ramp_cube(h: usize, w: usize, grid: WavelengthGrid) -> SpectralCube {
        SpectralCube::from_fn(h, w, grid, |r, c, b| ((r * 7 + c * 3 + b * 5) % 11) as f64 / 10.0)
    }

    #[test]
    fn identity_kernels_sum_bands() {
        let g = grid3();
        let cube = ramp_cube(6, 5, g);
        let out = encode(&cube, &PsfStack::delta(g, 4).unwrap(), &ResponseTable::unit(g), &NoiseModel::none()).unwrap();
        for c in 0..3 {
            for r in 0..6 {
                for x in 0..5 {
                    let expected: f64 = (0..3).map(|b| cube.get(r, x, b)).sum();
                    assert!((out.get(r, x, c) - expected).abs() <= 1e-10 * expected.max(1.0));
                }
            }
        }
    }

    #[test]
    fn zero_scene_encodes_to_zero() {
        let g = grid3();
        let psfs = PsfStack::from_kernels(g, 2, vec![1.0; 12]).unwrap();
        let out = encode(&SpectralCube::zeros(4, 4, g), &psfs, &ResponseTable::default_for(g), &NoiseModel::none()).unwrap();
        assert!(out.data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn impulse_scene_reproduces_weighted_kernel() {
        let g = grid3();
        let k = 4;
        let kernels: Vec<f64> = (0..3 * k * k).map(|i| 1.0 + (i % 7) as f64).collect();
        let psfs = PsfStack::from_kernels(g, k, kernels).unwrap();
        let response = ResponseTable::default_for(g);
        let mut cube = SpectralCube::zeros(10, 10, g);
        cube.set(4, 5, 1, 1.0);
        let out = encode(&cube, &psfs, &response, &NoiseModel::none()).unwrap();
        let kernel = psfs.kernel(1);
        for c in 0..3 {
            for a in 0..k {
                for b in 0..k {
                    let expected = response.weight(1, c) * kernel[a * k + b];
                    let got = out.get(4 + a - k / 2, 5 + b - k / 2, c);
                    assert!((got - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn grid_mismatch_is_a_shape_error() {
        let g = grid3();
        let other = WavelengthGrid::with_count(400.0, 100.0, 3).unwrap();
        let r = encode(&SpectralCube::zeros(4, 4, other), &PsfStack::delta(g, 2).unwrap(), &ResponseTable::unit(g), &NoiseModel::none());
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn adjoint_matches_inner_product() {
        let g = grid3();
        let k = 4;
        let kernels: Vec<f64> = (0..3 * k * k).map(|i| 0.5 + ((i * 13) % 9) as f64).collect();
        let psfs = PsfStack::from_kernels(g, k, kernels).unwrap();
        let enc = Encoder::new(&psfs, &ResponseTable::default_for(g), 7, 9).unwrap();
        let x = ramp_cube(7, 9, g);
        let y = RgbImage::new(7, 9, (0..3 * 63).map(|i| ((i * 31) % 17) as f64 - 8.0).collect()).unwrap();
        let ex = enc.encode_clean(&x).unwrap();
        let lhs: f64 = ex.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let ety = enc.adjoint(&y).unwrap();
        let rhs: f64 = ety.data().iter().zip(x.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs());
    }

    #[test]
    fn noise_is_seeded() {
        let g = grid3();
        let cube = ramp_cube(8, 8, g);
        let psfs = PsfStack::delta(g, 2).unwrap();
        let r = ResponseTable::unit(g);
        let a = encode(&cube, &psfs, &r, &NoiseModel::gaussian(0.05, 9)).unwrap();
        let b = encode(&cube, &psfs, &r, &NoiseModel::gaussian(0.05, 9)).unwrap();
        let c = encode(&cube, &psfs, &r, &NoiseModel::gaussian(0.05, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let pg = NoiseModel { kind: NoiseKind::PoissonGaussian, sigma: 0.0, peak: 50.0, seed: 1, bit_depth: Some(12) };
        let d = encode(&cube, &psfs, &r, &pg).unwrap();
        assert!(d.data().iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(NoiseModel { peak: 0.0, ..pg }.validate().is_err());
    }

    #[test]
    fn unpolarized_scene_gives_four_equal_measurements() {
        let g = grid3();
        let s = StokesCube::from_fn(6, 6, g, |r, c, b| [0.2 + ((r + c + b) % 3) as f64, 0.0, 0.0, 0.0]);
        let psfs = PsfStack::from_kernels(g, 2, (0..12).map(|i| 1.0 + i as f64).collect()).unwrap();
        let set = acquire_four(&PolarizedScene::new(s), &psfs, &ResponseTable::default_for(g), &NoiseModel::none()).unwrap();
        for m in &set.measurements[1..] {
            assert_eq!(m, &set.measurements[0]);
        }
        assert_eq!(set.seeds.iter().collect::<alloc::collections::BTreeSet<_>>().len(), 4);
    }

    #[test]
    fn horizontal_scene_blanks_the_vertical_analyzer() {
        let g = grid3();
        let s = StokesCube::from_fn(6, 6, g, |r, _, _| {
            let i = 1.0 + r as f64;
            [i, i, 0.0, 0.0]
        });
        let psfs = PsfStack::from_kernels(g, 2, (0..12).map(|i| 1.0 + i as f64).collect()).unwrap();
        let set = acquire_four(&PolarizedScene::new(s), &psfs, &ResponseTable::default_for(g), &NoiseModel::none()).unwrap();
        assert!(set.measurements[1].data().iter().all(|v| v.abs() < 1e-13));
    }
}
