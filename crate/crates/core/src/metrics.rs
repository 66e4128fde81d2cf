//! Reconstruction quality metrics: PSNR, SSIM, MSE and spectral cosine
//! fidelity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::datamodel::SpectralCube;
use crate::error::{Error, Result};

/// Reported PSNR when the two inputs are identical.
pub const PSNR_CAP: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_peak(peak: f64) -> Result<()> {
    if peak.is_finite() && peak > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("peak must be positive, got {peak}")))
    }
}

pub fn mse_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Shape("no samples".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// PSNR in dB from a mean squared error.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP)
    }
}

pub fn psnr_values(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    check_peak(peak)?;
    Ok(psnr_from_mse(mse_values(a, b)?, peak))
}

/// Whole-cube PSNR.
pub fn psnr(a: &SpectralCube, b: &SpectralCube, peak: f64) -> Result<f64> {
    a.check_same_shape(b, "PSNR operands")?;
    psnr_values(a.data(), b.data(), peak)
}

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - c;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable filter keeping only positions where the window fits.
fn filter_valid(img: &[f64], h: usize, w: usize, win: &[f64]) -> Vec<f64> {
    let k = win.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = win.iter().enumerate().map(|(j, wj)| wj * img[r * w + c + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = win.iter().enumerate().map(|(j, wj)| wj * rows[(r + j) * ow + c]).sum();
        }
    }
    out
}

/// Mean local SSIM of two `height × width` images over an 11×11 Gaussian
/// window (σ = 1.5). Only windows lying fully inside the image count;
/// images smaller than the window are scored with a single window of
/// Gaussian weights truncated to the image.
pub fn ssim(a: &[f64], b: &[f64], height: usize, width: usize, peak: f64) -> Result<f64> {
    check_peak(peak)?;
    if a.len() != height * width || b.len() != height * width {
        return Err(Error::Shape(format!(
            "SSIM operands have {} and {} samples, expected {}",
            a.len(),
            b.len(),
            height * width
        )));
    }
    if height == 0 || width == 0 {
        return Err(Error::Shape("SSIM of an empty image".into()));
    }
    let full = gaussian_window();
    let k = SSIM_WINDOW.min(height).min(width);
    let start = (SSIM_WINDOW - k) / 2;
    let win: Vec<f64> = {
        let part = &full[start..start + k];
        let s: f64 = part.iter().sum();
        part.iter().map(|v| v / s).collect()
    };
    let aa: Vec<f64> = a.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = b.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, height, width, &win);
    let mu_b = filter_valid(b, height, width, &win);
    let e_aa = filter_valid(&aa, height, width, &win);
    let e_bb = filter_valid(&bb, height, width, &win);
    let e_ab = filter_valid(&ab, height, width, &win);
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    Ok(total / n as f64)
}

/// Mean SSIM over bands.
pub fn ssim_cube(a: &SpectralCube, b: &SpectralCube, peak: f64) -> Result<f64> {
    a.check_same_shape(b, "SSIM operands")?;
    let mut total = 0.0;
    for band in 0..a.bands() {
        total += ssim(a.band(band), b.band(band), a.height(), a.width(), peak)?;
    }
    Ok(total / a.bands() as f64)
}

/// Cosine similarity of two spectra as a percentage, clipped to `[0, 100]`.
pub fn spectral_fidelity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("spectra of length {} and {}", a.len(), b.len())));
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidInput("spectral fidelity of a zero vector is undefined".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((100.0 * dot / (na * nb)).clamp(0.0, 100.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub per_band_psnr: Vec<f64>,
    /// Mean per-pixel spectral fidelity over pixels with a nonzero reference
    /// spectrum; a zero estimate there scores 0.
    pub fidelity_percent: f64,
    pub mse: f64,
    pub peak: f64,
}

/// Compares an estimate against a reference. `peak` defaults to the
/// reference maximum.
pub fn report(reference: &SpectralCube, estimate: &SpectralCube, peak: Option<f64>) -> Result<MetricReport> {
    reference.check_same_shape(estimate, "metric operands")?;
    let peak = peak.unwrap_or_else(|| reference.max());
    check_peak(peak)?;
    let mse = mse_values(reference.data(), estimate.data())?;
    let per_band_psnr = (0..reference.bands())
        .map(|b| psnr_values(reference.band(b), estimate.band(b), peak))
        .collect::<Result<Vec<_>>>()?;
    let (mut sum, mut count) = (0.0, 0usize);
    for r in 0..reference.height() {
        for c in 0..reference.width() {
            let sr = reference.spectrum(r, c);
            if sr.iter().all(|v| *v == 0.0) {
                continue;
            }
            let se = estimate.spectrum(r, c);
            sum += spectral_fidelity(&sr, &se).unwrap_or(0.0);
            count += 1;
        }
    }
    Ok(MetricReport {
        psnr: psnr_from_mse(mse, peak),
        ssim: ssim_cube(reference, estimate, peak)?,
        per_band_psnr,
        fidelity_percent: if count == 0 { 100.0 } else { sum / count as f64 },
        mse,
        peak,
    })
}
