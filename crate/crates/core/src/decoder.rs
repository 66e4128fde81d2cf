//! Classical reconstruction: per-band Wiener deconvolution of each RGB
//! channel, spectral fusion, and optional projected-gradient refinement on
//! the exact forward model.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::conv::embed_centered;
use crate::datamodel::{ResponseTable, RgbImage, SpectralCube, StokesCube, WavelengthGrid};
use crate::encoder::{Encoder, MeasurementSet};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::optics::PsfStack;
use crate::par;
use crate::polarimetry::stokes_from_measurements;

/// `|F(P)|²` below this fraction of its peak counts as a spectral zero when
/// no regularizer is set.
const SINGULAR_FRACTION: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fusion {
    #[default]
    ResponseWeighted,
    ChannelMean,
}

impl Fusion {
    pub fn name(&self) -> &'static str {
        match self {
            Fusion::ResponseWeighted => "RESPONSE_WEIGHTED",
            Fusion::ChannelMean => "CHANNEL_MEAN",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "RESPONSE_WEIGHTED" => Some(Fusion::ResponseWeighted),
            "CHANNEL_MEAN" => Some(Fusion::ChannelMean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeconvConfig {
    /// Wiener regularizer relative to the peak of `|F(P)|²`.
    pub epsilon: f64,
    pub fusion: Fusion,
    /// Refinement iterations after fusion.
    pub iterations: usize,
    /// Initial refinement step; `None` picks a step from the response
    /// table that guarantees descent.
    pub step: Option<f64>,
}

impl Default for DeconvConfig {
    fn default() -> Self {
        Self { epsilon: 1e-3, fusion: Fusion::ResponseWeighted, iterations: 0, step: None }
    }
}

impl DeconvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if let Some(step) = self.step {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::Config(format!("refinement step must be > 0, got {step}")));
            }
        }
        Ok(())
    }
}

/// Circular Wiener deconvolution on a fixed `rows × cols` grid.
#[derive(Debug, Clone)]
pub struct Deconvolver {
    fft: Fft2,
}

impl Deconvolver {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { fft: Fft2::new(rows, cols) }
    }

    pub fn rows(&self) -> usize {
        self.fft.rows()
    }

    pub fn cols(&self) -> usize {
        self.fft.cols()
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn spectrum(&self, image: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        buf
    }

    /// Spectrum of the kernel centred on the origin.
    pub fn kernel_spectrum(&self, kernel: &[f64], k: usize) -> Vec<Complex64> {
        let mut buf = embed_centered(kernel, k, self.rows(), self.cols());
        self.fft.forward(&mut buf);
        buf
    }

    /// Filter `conj(P) / (|P|² + epsilon·max|P|²)`.
    pub fn filter(&self, kernel: &[f64], k: usize, epsilon: f64) -> Result<Vec<Complex64>> {
        let spec = self.kernel_spectrum(kernel, k);
        let peak = spec.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max);
        if peak == 0.0 {
            return Err(Error::Singularity { row: 0, col: 0 });
        }
        let reg = epsilon * peak;
        spec.iter()
            .enumerate()
            .map(|(i, p)| {
                let d = p.norm_sqr() + reg;
                if epsilon == 0.0 && d <= SINGULAR_FRACTION * peak {
                    Err(Error::Singularity { row: i / self.cols(), col: i % self.cols() })
                } else {
                    Ok(p.conj() / d)
                }
            })
            .collect()
    }

    pub fn apply(&self, filter: &[Complex64], image_spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = image_spectrum.iter().zip(filter).map(|(a, f)| a * f).collect();
        self.fft.inverse(&mut buf);
        buf.into_iter().map(|v| v.re).collect()
    }
}

/// Wiener-deconvolves one `height × width` image with a `k × k` kernel.
pub fn wiener_band(image: &[f64], height: usize, width: usize, kernel: &[f64], k: usize, epsilon: f64) -> Result<Vec<f64>> {
    if image.len() != height * width || kernel.len() != k * k {
        return Err(Error::Shape("image or kernel length does not match its dimensions".into()));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let dec = Deconvolver::new(height, width);
    let filter = dec.filter(kernel, k, epsilon)?;
    Ok(dec.apply(&filter, &dec.spectrum(image)))
}

/// Per-band, per-channel deconvolution results, laid out
/// `[band][channel][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvTensor {
    height: usize,
    width: usize,
    grid: WavelengthGrid,
    data: Vec<f64>,
}

impl DeconvTensor {
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

    pub fn slice(&self, band: usize, channel: usize) -> &[f64] {
        let plane = self.height * self.width;
        let start = (band * 3 + channel) * plane;
        &self.data[start..start + plane]
    }

    pub fn slice_energy(&self, band: usize, channel: usize) -> f64 {
        self.slice(band, channel).iter().map(|v| v * v).sum()
    }
}

pub fn deconv_all(measurement: &RgbImage, psfs: &PsfStack, cfg: &DeconvConfig) -> Result<DeconvTensor> {
    cfg.validate()?;
    let (h, w) = (measurement.height(), measurement.width());
    let dec = Deconvolver::new(h, w);
    let channels: Vec<Vec<Complex64>> = (0..3).map(|c| dec.spectrum(measurement.channel(c))).collect();
    let k = psfs.crop();
    let per_band = par::map_indices(psfs.bands(), |b| -> Result<Vec<f64>> {
        let filter = dec.filter(psfs.kernel(b), k, cfg.epsilon)?;
        Ok(channels.iter().flat_map(|spec| dec.apply(&filter, spec)).collect())
    });
    let mut data = Vec::with_capacity(psfs.bands() * 3 * h * w);
    for band in per_band {
        data.extend(band?);
    }
    Ok(DeconvTensor { height: h, width: w, grid: *psfs.grid(), data })
}

/// Per-band fusion weights `w_c / channel_total(c)` for response-weighted
/// fusion, or `1/3` each for the channel mean.
pub fn fusion_weights(response: &ResponseTable, fusion: Fusion) -> Result<Vec<[f64; 3]>> {
    let totals: [f64; 3] = core::array::from_fn(|c| response.channel_total(c));
    (0..response.grid().count())
        .map(|b| {
            let r: [f64; 3] = core::array::from_fn(|c| response.weight(b, c));
            let sum: f64 = r.iter().sum();
            if sum <= 0.0 {
                return Err(Error::Config(format!(
                    "all response weights are zero at {} nm",
                    response.grid().wavelength(b)
                )));
            }
            Ok(match fusion {
                Fusion::ChannelMean => [1.0 / 3.0; 3],
                Fusion::ResponseWeighted => {
                    core::array::from_fn(|c| if r[c] == 0.0 { 0.0 } else { r[c] / sum / totals[c] })
                }
            })
        })
        .collect()
}

/// Fuses the channel slices of each band into one estimate, clipped to be
/// nonnegative. Response-weighted fusion divides each channel by its total
/// response so a spectrally flat scene is returned at its own scale.
/// Refinement is applied by [`reconstruct`].
pub fn fuse(tensor: &DeconvTensor, response: &ResponseTable, cfg: &DeconvConfig) -> Result<SpectralCube> {
    cfg.validate()?;
    if tensor.grid() != response.grid() {
        return Err(Error::Shape("deconvolution tensor and response use different grids".into()));
    }
    let weights = fusion_weights(response, cfg.fusion)?;
    let plane = tensor.height() * tensor.width();
    let mut data = vec![0.0; tensor.bands() * plane];
    for (b, wb) in weights.iter().enumerate() {
        let out = &mut data[b * plane..(b + 1) * plane];
        for (c, &wc) in wb.iter().enumerate() {
            if wc != 0.0 {
                out.iter_mut().zip(tensor.slice(b, c)).for_each(|(o, s)| *o += wc * s);
            }
        }
        out.iter_mut().for_each(|v| *v = if v.is_finite() { v.max(0.0) } else { 0.0 });
    }
    SpectralCube::new(tensor.height(), tensor.width(), *tensor.grid(), data)
}

/// `‖encode(cube) − measurement‖²` under the noiseless model.
pub fn data_objective(encoder: &Encoder, cube: &SpectralCube, measurement: &RgbImage) -> Result<f64> {
    let predicted = encoder.encode_clean(cube)?;
    Ok(predicted.data().iter().zip(measurement.data()).map(|(p, m)| (p - m) * (p - m)).sum())
}

/// Step size `1/L` for the data objective, with `L` an upper bound on the
/// gradient's Lipschitz constant.
pub fn safe_step(response: &ResponseTable) -> f64 {
    let mut sq = 0.0;
    for b in 0..response.grid().count() {
        for c in 0..3 {
            sq += response.weight(b, c).powi(2);
        }
    }
    if sq > 0.0 {
        1.0 / (2.0 * sq)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub cube: SpectralCube,
    /// Data objective before the first step and after every accepted step.
    pub objective: Vec<f64>,
    pub accepted: usize,
}

/// Projected gradient descent with backtracking on the data objective.
/// Accepted steps never increase it.
pub fn refine(
    initial: &SpectralCube,
    measurement: &RgbImage,
    encoder: &Encoder,
    iterations: usize,
    step: Option<f64>,
) -> Result<Refinement> {
    let mut x = initial.clone();
    x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    let mut predicted = encoder.encode_clean(&x)?;
    let residual_of = |p: &RgbImage| -> (Vec<f64>, f64) {
        let r: Vec<f64> = p.data().iter().zip(measurement.data()).map(|(a, b)| a - b).collect();
        let f = r.iter().map(|v| v * v).sum();
        (r, f)
    };
    let (mut residual, mut value) = residual_of(&predicted);
    let mut objective = vec![value];
    let mut t = step.unwrap_or_else(|| safe_step(encoder.response()));
    let mut accepted = 0;
    for _ in 0..iterations {
        if value == 0.0 {
            break;
        }
        let resid = RgbImage::new(predicted.height(), predicted.width(), residual.clone())?;
        let grad = encoder.adjoint(&resid)?;
        let mut improved = false;
        for _ in 0..40 {
            let mut trial = x.clone();
            trial
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .for_each(|(v, g)| *v = (*v - 2.0 * t * g).max(0.0));
            let trial_pred = encoder.encode_clean(&trial)?;
            let (trial_resid, trial_value) = residual_of(&trial_pred);
            if !trial_value.is_finite() {
                return Err(Error::Numerical("refinement objective became non-finite".into()));
            }
            if trial_value <= value {
                x = trial;
                predicted = trial_pred;
                residual = trial_resid;
                value = trial_value;
                improved = true;
                t *= 1.5;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
        accepted += 1;
        objective.push(value);
    }
    Ok(Refinement { cube: x, objective, accepted })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub cube: SpectralCube,
    pub objective: Vec<f64>,
}

/// Deconvolution, fusion and refinement of one RGB measurement.
pub fn reconstruct(
    measurement: &RgbImage,
    psfs: &PsfStack,
    response: &ResponseTable,
    cfg: &DeconvConfig,
) -> Result<Reconstruction> {
    cfg.validate()?;
    let tensor = deconv_all(measurement, psfs, cfg)?;
    let fused = fuse(&tensor, response, cfg)?;
    drop(tensor);
    if cfg.iterations == 0 {
        return Ok(Reconstruction { cube: fused, objective: Vec::new() });
    }
    let encoder = Encoder::new(psfs, response, measurement.height(), measurement.width())?;
    let refined = refine(&fused, measurement, &encoder, cfg.iterations, cfg.step)?;
    Ok(Reconstruction { cube: refined.cube, objective: refined.objective })
}

/// Reconstructs the four analyzer intensities and inverts them to Stokes
/// parameters.
pub fn reconstruct_stokes(
    set: &MeasurementSet,
    psfs: &PsfStack,
    response: &ResponseTable,
    cfg: &DeconvConfig,
) -> Result<StokesCube> {
    let mut cubes = Vec::with_capacity(4);
    for m in &set.measurements {
        cubes.push(reconstruct(m, psfs, response, cfg)?.cube);
    }
    stokes_from_measurements(&cubes[0], &cubes[1], &cubes[2], &cubes[3])
}

/// Baseline that assigns every band the RGB mean, scaled by the mean channel
/// response so a flat white scene maps to itself.
pub fn flat_baseline(measurement: &RgbImage, response: &ResponseTable) -> Result<SpectralCube> {
    let mean_total = (0..3).map(|c| response.channel_total(c)).sum::<f64>() / 3.0;
    if mean_total <= 0.0 {
        return Err(Error::Config("response table has no sensitivity".into()));
    }
    let (h, w) = (measurement.height(), measurement.width());
    let grid = *response.grid();
    Ok(SpectralCube::from_fn(h, w, grid, |r, c, _| {
        let mean = (0..3).map(|ch| measurement.get(r, c, ch)).sum::<f64>() / 3.0;
        (mean / mean_total).max(0.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::LinearConv;
    use crate::encoder::{encode, NoiseModel};

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    fn gaussian_kernel(k: usize, sigma: f64) -> Vec<f64> {
        let c = (k / 2) as f64;
        let mut v: Vec<f64> = (0..k * k)
            .map(|i| {
                let (y, x) = ((i / k) as f64 - c, (i % k) as f64 - c);
                (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    }

    fn circular(image: &[f64], h: usize, w: usize, kernel: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; h * w];
        let c = k / 2;
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        let sy = (y + h * k + c - a) % h;
                        let sx = (x + w * k + c - b) % w;
                        acc += kernel[a * k + b] * image[sy * w + sx];
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    #[test]
    fn delta_kernel_is_identity() {
        let img = pseudo(12 * 10, 1);
        let mut ker = vec![0.0; 16];
        ker[2 * 4 + 2] = 1.0;
        let out = wiener_band(&img, 12, 10, &ker, 4, 1e-12).unwrap();
        for (a, b) in out.iter().zip(&img) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_image_gives_zero() {
        let out = wiener_band(&[0.0; 64], 8, 8, &gaussian_kernel(4, 1.0), 4, 1e-3).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn inverts_well_conditioned_circular_blur() {
        let (h, w, k) = (16, 16, 4);
        let x = pseudo(h * w, 2);
        let ker = gaussian_kernel(k, 0.5);
        let y = circular(&x, h, w, &ker, k);
        let rec = wiener_band(&y, h, w, &ker, k, 1e-12).unwrap();
        let err = rec.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * norm, "relative error {}", err / norm);
    }

    #[test]
    fn spectral_zero_without_regularizer_is_singular() {
        // two-tap average has a null at the Nyquist column
        let ker4: Vec<f64> = (0..16).map(|i| if i == 9 || i == 10 { 0.5 } else { 0.0 }).collect();
        match wiener_band(&[1.0; 64], 8, 8, &ker4, 4, 0.0) {
            Err(Error::Singularity { col, .. }) => assert_eq!(col, 4),
            other => panic!("expected singularity, got {other:?}"),
        }
        assert!(wiener_band(&[1.0; 64], 8, 8, &ker4, 4, 1e-6).is_ok());
    }

    fn grid(n: usize) -> WavelengthGrid {
        WavelengthGrid::with_count(450.0, 50.0, n).unwrap()
    }

    #[test]
    fn delta_psfs_channel_mean_returns_channel_mean() {
        let g = grid(3);
        let m = RgbImage::new(5, 6, pseudo(90, 3)).unwrap();
        let cfg = DeconvConfig { epsilon: 1e-12, fusion: Fusion::ChannelMean, ..Default::default() };
        let tensor = deconv_all(&m, &PsfStack::delta(g, 2).unwrap(), &cfg).unwrap();
        for b in 0..3 {
            for c in 0..3 {
                for (a, e) in tensor.slice(b, c).iter().zip(m.channel(c)) {
                    assert!((a - e).abs() < 1e-10);
                }
            }
        }
        let cube = fuse(&tensor, &ResponseTable::unit(g), &cfg).unwrap();
        for r in 0..5 {
            for c in 0..6 {
                let mean = (0..3).map(|ch| m.get(r, c, ch)).sum::<f64>() / 3.0;
                assert!((cube.get(r, c, 1) - mean).abs() < 1e-10);
            }
        }
    }

    // The matching slice dominates when the scene band's kernel is the most
    // spread one: every other filter then sees a spectrum no larger than its own.
    #[test]
    fn single_band_scene_dominates_its_slice() {
        let g = grid(4);
        let k = 6;
        let kernels: Vec<f64> = (0..4).flat_map(|b| gaussian_kernel(k, 0.6 + 0.4 * b as f64)).collect();
        let psfs = PsfStack::from_kernels(g, k, kernels).unwrap();
        let response = ResponseTable::unit(g);
        let mut cube = SpectralCube::zeros(16, 16, g);
        cube.band_mut(3).copy_from_slice(&pseudo(256, 4));
        let m = encode(&cube, &psfs, &response, &NoiseModel::none()).unwrap();
        let t = deconv_all(&m, &psfs, &DeconvConfig::default()).unwrap();
        for c in 0..3 {
            for b in 0..3 {
                assert!(t.slice_energy(3, c) >= t.slice_energy(b, c));
            }
        }
    }

    #[test]
    fn flat_scene_is_exact_under_response_weighting() {
        let g = grid(4);
        let response = ResponseTable::gaussian_rgb(g, 1.0).unwrap();
        let cube = SpectralCube::from_fn(8, 8, g, |r, c, _| 0.1 + ((r * 8 + c) % 5) as f64 / 10.0);
        let m = encode(&cube, &PsfStack::delta(g, 2).unwrap(), &response, &NoiseModel::none()).unwrap();
        let rec = reconstruct(&m, &PsfStack::delta(g, 2).unwrap(), &response, &DeconvConfig { epsilon: 1e-12, ..Default::default() }).unwrap();
        for (a, b) in rec.cube.data().iter().zip(cube.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_response_band_is_a_config_error() {
        let g = grid(2);
        let response = ResponseTable::new(g, vec![1.0, 1.0], vec![[1.0, 0.0, 0.0], [0.0; 3]]).unwrap();
        let t = deconv_all(&RgbImage::zeros(4, 4), &PsfStack::delta(g, 2).unwrap(), &DeconvConfig::default()).unwrap();
        assert!(matches!(fuse(&t, &response, &DeconvConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn refinement_is_monotone_and_improves() {
        let g = grid(3);
        let k = 4;
        let kernels: Vec<f64> = (0..3).flat_map(|b| gaussian_kernel(k, 0.7 + 0.3 * b as f64)).collect();
        let psfs = PsfStack::from_kernels(g, k, kernels).unwrap();
        let response = ResponseTable::gaussian_rgb(g, 1.0).unwrap();
        let cube = SpectralCube::new(12, 12, g, pseudo(12 * 12 * 3, 7)).unwrap();
        let m = encode(&cube, &psfs, &response, &NoiseModel::none()).unwrap();
        let cfg = DeconvConfig { iterations: 25, ..Default::default() };
        let rec = reconstruct(&m, &psfs, &response, &cfg).unwrap();
        assert!(rec.objective.windows(2).all(|w| w[1] <= w[0]));
        assert!(rec.objective.last().unwrap() < &rec.objective[0]);
        assert!(rec.cube.data().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn linear_conv_and_wiener_agree_on_interior() {
        let (h, w, k) = (24, 24, 4);
        let x = pseudo(h * w, 9);
        let ker = gaussian_kernel(k, 0.5);
        let y = LinearConv::new(h, w, k).convolve(&x, &ker);
        let rec = wiener_band(&y, h, w, &ker, k, 1e-9).unwrap();
        let mut worst: f64 = 0.0;
        for r in 8..16 {
            for c in 8..16 {
                worst = worst.max((rec[r * w + c] - x[r * w + c]).abs());
            }
        }
        assert!(worst < 0.05, "interior error {worst}");
    }
}
