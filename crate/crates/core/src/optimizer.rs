//! Gradient-based design of the radial height profile.
//!
//! Two objectives are supported. `ReconMse` runs every training scene through
//! the encoder, per-band Wiener deconvolution and response-weighted fusion
//! (no refinement) and scores the squared reconstruction error, averaged over
//! scenes. The fused estimate enters the loss before the nonnegativity clip
//! so the objective stays smooth in the heights. `PsfIncoherence` scores `Σ_{λ≠λ'} ⟨p_λ, p_λ'⟩² − Σ_λ p_λ(centre)`.
//!
//! Gradients are exact adjoints of the forward chain: loss → fusion → Wiener
//! filter → linear convolution → kernel normalization → `|F{U}|²` →
//! `exp(i k (n_λ − 1) h)` → ring sums.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::{centered_position, LinearConv};
use crate::datamodel::{ResponseTable, SpectralCube, WavelengthGrid};
use crate::decoder::{fusion_weights, Deconvolver, Fusion};
use crate::doe::{quantize_profile, HeightProfile, RingIndex, DEPTH_MAX, LEVELS, PIXEL_PITCH};
use crate::error::{Error, Result};
use crate::optics::{BandField, OpticalConfig, PsfEngine, PsfStack};
use crate::par;
use crate::synth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    #[default]
    ReconMse,
    PsfIncoherence,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::ReconMse => "RECON_MSE",
            Objective::PsfIncoherence => "PSF_INCOHERENCE",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "RECON_MSE" => Some(Objective::ReconMse),
            "PSF_INCOHERENCE" => Some(Objective::PsfIncoherence),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub scenes: Vec<SpectralCube>,
    pub optical: OpticalConfig,
    /// Its grid defines the design wavelengths.
    pub response: ResponseTable,
    pub objective: Objective,
    pub grid_size: usize,
    pub pitch: f64,
    pub profile_len: usize,
    pub crop: usize,
    pub depth_max: f64,
    /// Wiener regularizer of the reconstruction objective.
    pub epsilon: f64,
    pub fusion: Fusion,
    pub iterations: usize,
    /// Largest per-coordinate step in metres.
    pub step_size: f64,
    pub seed: u64,
    /// Starting profile; a seeded random profile when absent.
    pub initial: Option<HeightProfile>,
    /// Quantize the final profile to this many levels and report the cost.
    pub quantize_levels: Option<usize>,
}

impl DesignProblem {
    /// Reduced setting: 128² grid, 64 rings, 8 bands (400–680 nm), 16×16
    /// kernels and two 32×32 checker patches.
    pub fn desk(objective: Objective, seed: u64) -> Result<Self> {
        let grid = WavelengthGrid::new(400.0, 680.0, 40.0)?;
        let scenes = (0..2)
            .map(|i| synth::checker(32, 32, grid, 2, 2, seed.wrapping_add(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenes,
            optical: OpticalConfig::default(),
            response: ResponseTable::gaussian_rgb(grid, 1.0)?,
            objective,
            grid_size: 128,
            pitch: PIXEL_PITCH,
            profile_len: 64,
            crop: 16,
            depth_max: DEPTH_MAX,
            epsilon: 1e-3,
            fusion: Fusion::ResponseWeighted,
            iterations: 50,
            step_size: DEPTH_MAX / 50.0,
            seed,
            initial: None,
            quantize_levels: Some(LEVELS),
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        self.response.grid()
    }

    pub fn validate(&self) -> Result<()> {
        self.optical.validate_for(self.grid())?;
        if self.objective == Objective::ReconMse && self.scenes.is_empty() {
            return Err(Error::Config("RECON_MSE needs at least one training scene".into()));
        }
        for (i, s) in self.scenes.iter().enumerate() {
            if s.grid() != self.grid() {
                return Err(Error::Config(format!("training scene {i} uses a different wavelength grid")));
            }
            if s.height() == 0 || s.width() == 0 {
                return Err(Error::Config(format!("training scene {i} is empty")));
            }
        }
        if !(self.depth_max.is_finite() && self.depth_max > 0.0) {
            return Err(Error::Config(format!("depth_max must be > 0, got {}", self.depth_max)));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::Config(format!("pitch must be > 0, got {}", self.pitch)));
        }
        if !(self.step_size.is_finite() && self.step_size >= 0.0) {
            return Err(Error::Config(format!("step size must be >= 0, got {}", self.step_size)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if let Some(levels) = self.quantize_levels {
            if levels < 2 {
                return Err(Error::Config(format!("quantization needs at least 2 levels, got {levels}")));
            }
        }
        if let Some(p) = &self.initial {
            if p.len() != self.profile_len {
                return Err(Error::Config(format!(
                    "initial profile has {} rings, problem expects {}",
                    p.len(),
                    self.profile_len
                )));
            }
        }
        Ok(())
    }

    pub fn initial_profile(&self) -> Result<HeightProfile> {
        match &self.initial {
            Some(p) => HeightProfile::clamped(p.heights().to_vec(), self.depth_max),
            None => HeightProfile::random(self.profile_len, self.depth_max, self.seed),
        }
    }
}

struct SceneCache {
    conv: LinearConv,
    dec: Deconvolver,
    spectra: Vec<Vec<Complex64>>,
}

/// Precomputed geometry for repeated objective evaluations.
pub struct Evaluator<'a> {
    problem: &'a DesignProblem,
    engine: PsfEngine,
    rings: RingIndex,
    wavelengths: Vec<f64>,
    fusion: Vec<[f64; 3]>,
    scenes: Vec<SceneCache>,
}

struct KernelTerms {
    value: f64,
    grads: Option<Vec<Vec<f64>>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a DesignProblem) -> Result<Self> {
        problem.validate()?;
        let rings = RingIndex::new(problem.grid_size, problem.profile_len)?;
        let engine = PsfEngine::new(&problem.optical, problem.grid_size, problem.pitch, problem.crop, rings.mask())?;
        let fusion = fusion_weights(&problem.response, problem.fusion)?;
        let scenes = if problem.objective == Objective::ReconMse {
            problem
                .scenes
                .iter()
                .map(|s| {
                    let conv = LinearConv::new(s.height(), s.width(), problem.crop);
                    let spectra = (0..s.bands()).map(|b| conv.image_spectrum(s.band(b))).collect();
                    SceneCache { conv, dec: Deconvolver::new(s.height(), s.width()), spectra }
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self { problem, engine, rings, wavelengths: problem.grid().wavelengths().collect(), fusion, scenes })
    }

    fn fields(&self, heights: &[f64]) -> Result<Vec<BandField>> {
        if heights.len() != self.problem.profile_len {
            return Err(Error::Shape(format!(
                "profile has {} rings, problem expects {}",
                heights.len(),
                self.problem.profile_len
            )));
        }
        let grid = self.rings.scatter(heights);
        par::map_indices(self.wavelengths.len(), |b| self.engine.band(&grid, self.wavelengths[b]))
            .into_iter()
            .collect()
    }

    /// Kernel stack of a profile.
    pub fn psf_stack(&self, heights: &[f64]) -> Result<PsfStack> {
        let kernels: Vec<f64> = self.fields(heights)?.iter().flat_map(|f| f.kernel()).collect();
        PsfStack::from_kernels(*self.problem.grid(), self.problem.crop, kernels)
    }

    /// Objective value and, when asked, its gradient with respect to the
    /// profile entries. Heights outside the bounds are evaluated as given.
    pub fn evaluate(&self, heights: &[f64], want_gradient: bool) -> Result<(f64, Option<Vec<f64>>)> {
        let fields = self.fields(heights)?;
        let kernels: Vec<Vec<f64>> = fields.iter().map(|f| f.kernel()).collect();
        let terms = self.kernel_terms(&kernels, want_gradient)?;
        if !terms.value.is_finite() {
            return Err(Error::Numerical(format!("objective is {} for this profile", terms.value)));
        }
        let Some(kernel_grads) = terms.grads else {
            return Ok((terms.value, None));
        };
        let n2 = self.engine.fft().len();
        let per_band = par::map_indices(fields.len(), |b| self.height_sensitivity(&fields[b], &kernels[b], &kernel_grads[b]));
        let mut dh = vec![0.0; n2];
        for band in per_band {
            dh.iter_mut().zip(band).for_each(|(a, g)| *a += g);
        }
        let grad = self.rings.gather(&dh);
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!("gradient entry {i} is not finite")));
        }
        Ok((terms.value, Some(grad)))
    }

    /// Objective for a given kernel stack, bypassing the optics.
    pub fn value_for_stack(&self, psfs: &PsfStack) -> Result<f64> {
        if psfs.grid() != self.problem.grid() || psfs.crop() != self.problem.crop {
            return Err(Error::Shape("kernel stack does not match the problem".into()));
        }
        let kernels: Vec<Vec<f64>> = (0..psfs.bands()).map(|b| psfs.kernel(b).to_vec()).collect();
        Ok(self.kernel_terms(&kernels, false)?.value)
    }

    fn kernel_terms(&self, kernels: &[Vec<f64>], want: bool) -> Result<KernelTerms> {
        match self.problem.objective {
            Objective::PsfIncoherence => Ok(self.incoherence(kernels, want)),
            Objective::ReconMse => {
                let parts = par::map_indices(self.scenes.len(), |s| self.recon_scene(s, kernels, want));
                let count = self.scenes.len() as f64;
                let mut value = 0.0;
                let mut grads: Option<Vec<Vec<f64>>> =
                    want.then(|| vec![vec![0.0; self.problem.crop * self.problem.crop]; kernels.len()]);
                for part in parts {
                    let part = part?;
                    value += part.value / count;
                    if let (Some(acc), Some(g)) = (grads.as_mut(), part.grads) {
                        for (a, gb) in acc.iter_mut().zip(g) {
                            a.iter_mut().zip(gb).for_each(|(a, g)| *a += g / count);
                        }
                    }
                }
                Ok(KernelTerms { value, grads })
            }
        }
    }

    fn incoherence(&self, kernels: &[Vec<f64>], want: bool) -> KernelTerms {
        let bands = kernels.len();
        let k = self.problem.crop;
        let center = (k / 2) * k + k / 2;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut gram = vec![0.0; bands * bands];
        for i in 0..bands {
            for j in i + 1..bands {
                let d = dot(&kernels[i], &kernels[j]);
                gram[i * bands + j] = d;
                gram[j * bands + i] = d;
            }
        }
        let cross: f64 = gram.iter().map(|d| d * d).sum();
        let peaks: f64 = kernels.iter().map(|p| p[center]).sum();
        let grads = want.then(|| {
            (0..bands)
                .map(|i| {
                    let mut g = vec![0.0; k * k];
                    for j in (0..bands).filter(|&j| j != i) {
                        let c = 4.0 * gram[i * bands + j];
                        g.iter_mut().zip(&kernels[j]).for_each(|(g, p)| *g += c * p);
                    }
                    g[center] -= 1.0;
                    g
                })
                .collect()
        });
        KernelTerms { value: cross - peaks, grads }
    }

    fn recon_scene(&self, s: usize, kernels: &[Vec<f64>], want: bool) -> Result<KernelTerms> {
        let scene = &self.problem.scenes[s];
        let cache = &self.scenes[s];
        let response = &self.problem.response;
        let (h, w, k) = (scene.height(), scene.width(), self.problem.crop);
        let bands = kernels.len();
        let len = cache.conv.fft().len();

        // encode
        let mut m_spec = vec![vec![Complex64::zero(); len]; 3];
        for b in 0..bands {
            let ks = cache.conv.kernel_spectrum(&kernels[b]);
            for (c, acc) in m_spec.iter_mut().enumerate() {
                let r = response.weight(b, c);
                if r != 0.0 {
                    acc.iter_mut()
                        .zip(&cache.spectra[b])
                        .zip(&ks)
                        .for_each(|((a, x), p)| *a += x * p * r);
                }
            }
        }
        let m: Vec<Vec<f64>> = m_spec.into_iter().map(|spec| cache.conv.finish_convolution(spec)).collect();

        // fuse (linear, so it commutes with the per-band filter), then deconvolve
        let mut value = 0.0;
        let mut grad_y: Vec<Vec<f64>> = Vec::new();
        let mut grads: Vec<Vec<f64>> = Vec::new();
        for b in 0..bands {
            let mut y = vec![0.0; h * w];
            for (c, mc) in m.iter().enumerate() {
                let a = self.fusion[b][c];
                if a != 0.0 {
                    y.iter_mut().zip(mc).for_each(|(y, v)| *y += a * v);
                }
            }
            let y_hat = cache.dec.spectrum(&y);
            let p_hat = cache.dec.kernel_spectrum(&kernels[b], k);
            let peak = p_hat.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max);
            let reg = self.problem.epsilon * peak;
            let denom: Vec<f64> = p_hat.iter().map(|p| p.norm_sqr() + reg).collect();
            if let Some(i) = denom.iter().position(|d| *d <= 0.0) {
                return Err(Error::Singularity { row: i / w, col: i % w });
            }
            let filter: Vec<Complex64> = p_hat.iter().zip(&denom).map(|(p, d)| p.conj() / *d).collect();
            let est = cache.dec.apply(&filter, &y_hat);
            let truth = scene.band(b);
            let mut g = vec![0.0; h * w];
            for i in 0..h * w {
                let e = est[i] - truth[i];
                value += e * e;
                g[i] = 2.0 * e;
            }
            if !want {
                continue;
            }
            let g_hat = cache.dec.spectrum(&g);
            // sensitivity to the centred kernel through the filter
            let mut buf: Vec<Complex64> = (0..h * w)
                .map(|i| {
                    let d2 = denom[i] * denom[i];
                    g_hat[i].conj() * y_hat[i] * (reg / d2) - g_hat[i] * y_hat[i].conj() * (p_hat[i] * p_hat[i] / d2)
                })
                .collect();
            cache.dec.fft().inverse(&mut buf);
            let mut gk = vec![0.0; k * k];
            for a in 0..k {
                for bb in 0..k {
                    gk[a * k + bb] = buf[centered_position(a, bb, k, h, w)].re;
                }
            }
            grads.push(gk);
            let mut gy: Vec<Complex64> = g_hat.iter().zip(&filter).map(|(g, f)| g * f.conj()).collect();
            cache.dec.fft().inverse(&mut gy);
            grad_y.push(gy.into_iter().map(|v| v.re).collect());
        }
        if !want {
            return Ok(KernelTerms { value, grads: None });
        }

        // back through fusion and the encoder
        let gm_spec: Vec<Vec<Complex64>> = (0..3)
            .map(|c| {
                let mut gm = vec![0.0; h * w];
                for (b, gy) in grad_y.iter().enumerate() {
                    let a = self.fusion[b][c];
                    if a != 0.0 {
                        gm.iter_mut().zip(gy).for_each(|(g, v)| *g += a * v);
                    }
                }
                cache.conv.gradient_spectrum(&gm)
            })
            .collect();
        for (b, gk) in grads.iter_mut().enumerate() {
            let mut mixed = vec![Complex64::zero(); len];
            for (c, spec) in gm_spec.iter().enumerate() {
                let r = response.weight(b, c);
                if r != 0.0 {
                    mixed.iter_mut().zip(spec).for_each(|(m, s)| *m += s * r);
                }
            }
            let through_encoder = cache.conv.adjoint_kernel_from(&mixed, &cache.spectra[b]);
            gk.iter_mut().zip(through_encoder).for_each(|(g, e)| *g += e);
        }
        Ok(KernelTerms { value, grads: Some(grads) })
    }

    /// Pulls a kernel sensitivity back to the element heights of one band.
    fn height_sensitivity(&self, field: &BandField, kernel: &[f64], grad: &[f64]) -> Vec<f64> {
        let k = self.problem.crop;
        let n2 = self.engine.fft().len();
        let mean: f64 = grad.iter().zip(kernel).map(|(g, p)| g * p).sum();
        let mut buf = vec![Complex64::zero(); n2];
        for a in 0..k {
            for b in 0..k {
                let src = self.engine.crop_source(a, b);
                let g_int = (grad[a * k + b] - mean) / field.crop_total;
                buf[src] = field.spectrum[src] * g_int;
            }
        }
        self.engine.fft().inverse(&mut buf);
        let scale = n2 as f64;
        field
            .field
            .iter()
            .zip(&buf)
            .map(|(u, q)| -2.0 * field.phase_per_height * (u * q.conj()).im * scale)
            .collect()
    }
}

pub fn objective_value(problem: &DesignProblem, profile: &HeightProfile) -> Result<f64> {
    Ok(Evaluator::new(problem)?.evaluate(profile.heights(), false)?.0)
}

pub fn gradient(problem: &DesignProblem, profile: &HeightProfile) -> Result<Vec<f64>> {
    let (_, g) = Evaluator::new(problem)?.evaluate(profile.heights(), true)?;
    Ok(g.expect("gradient requested"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    /// Full analytic gradient.
    pub analytic: Vec<f64>,
    /// Fourth-order central differences, one per probe index.
    pub finite_difference: Vec<f64>,
    pub probe_indices: Vec<usize>,
    /// `|a − fd| / max(|a|, |fd|, 1e-6·max|a|)` over the probes.
    pub max_rel_error: f64,
}

/// Compares the analytic gradient with the five-point central difference of
/// step `step` (metres) at `probes` distinct seeded indices.
pub fn gradient_check(
    problem: &DesignProblem,
    profile: &HeightProfile,
    probes: usize,
    step: f64,
    seed: u64,
) -> Result<GradientReport> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config(format!("difference step must be > 0, got {step}")));
    }
    let eval = Evaluator::new(problem)?;
    let base = profile.heights();
    let (_, analytic) = eval.evaluate(base, true)?;
    let analytic = analytic.expect("gradient requested");
    let mut order: Vec<usize> = (0..base.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = probes.min(base.len());
    for i in 0..count {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    let probe_indices: Vec<usize> = order[..count].to_vec();
    let floor = 1e-6 * analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut finite_difference = Vec::with_capacity(count);
    let mut max_rel_error = 0.0f64;
    for &i in &probe_indices {
        let at = |offset: f64| -> Result<f64> {
            let mut w = base.to_vec();
            w[i] += offset;
            Ok(eval.evaluate(&w, false)?.0)
        };
        let fd = (8.0 * (at(step)? - at(-step)?) - (at(2.0 * step)? - at(-2.0 * step)?)) / (12.0 * step);
        let a = analytic[i];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor).max(f64::MIN_POSITIVE);
        max_rel_error = max_rel_error.max(rel);
        finite_difference.push(fd);
    }
    Ok(GradientReport { analytic, finite_difference, probe_indices, max_rel_error })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub objective: f64,
    /// Step scale tried last in this iteration.
    pub step: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationReport {
    pub levels: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimization {
    /// Entry 0 is the starting point.
    pub trajectory: Vec<TrajectoryPoint>,
    /// Profile after each trajectory entry.
    pub profiles: Vec<Vec<f64>>,
    pub final_profile: HeightProfile,
    pub quantized: Option<(HeightProfile, QuantizationReport)>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const MAX_BACKTRACKS: usize = 12;

/// Projected first-order descent with Adam-style per-coordinate scaling and
/// backtracking: a step is accepted only if it does not increase the
/// objective.
pub fn optimize(problem: &DesignProblem) -> Result<Optimization> {
    let eval = Evaluator::new(problem)?;
    let depth = problem.depth_max;
    let mut w = problem.initial_profile()?.into_heights();
    let (mut value, grad) = eval.evaluate(&w, true).map_err(|e| match e {
        Error::Numerical(msg) => Error::InvalidInput(format!("starting profile: {msg}")),
        other => other,
    })?;
    let mut grad = grad.expect("gradient requested");
    let mut trajectory = vec![TrajectoryPoint { iteration: 0, objective: value, step: problem.step_size, accepted: true }];
    let mut profiles = vec![w.clone()];
    let len = w.len();
    let (mut m, mut v) = (vec![0.0; len], vec![0.0; len]);
    let mut alpha = problem.step_size;
    let mut t = 0i32;
    for iteration in 1..=problem.iterations {
        t += 1;
        for i in 0..len {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
        }
        let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
        let scale = v.iter().fold(0.0f64, |a, x| a.max((x / c2).sqrt()));
        let tiny = 1e-12 * scale + f64::MIN_POSITIVE;
        let direction: Vec<f64> = (0..len).map(|i| (m[i] / c1) / ((v[i] / c2).sqrt() + tiny)).collect();
        let mut accepted = false;
        let mut a = alpha;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = w.iter().zip(&direction).map(|(x, d)| (x - a * d).clamp(0.0, depth)).collect();
            let (tv, tg) = eval.evaluate(&trial, true)?;
            if tv <= value {
                w = trial;
                value = tv;
                grad = tg.expect("gradient requested");
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if accepted {
            alpha = (a * 2.0).min(problem.step_size);
        } else {
            alpha = a;
            m.iter_mut().for_each(|x| *x = 0.0);
        }
        trajectory.push(TrajectoryPoint { iteration, objective: value, step: a, accepted });
        profiles.push(w.clone());
    }
    let final_profile = HeightProfile::new(w, depth)?;
    let quantized = match problem.quantize_levels {
        Some(levels) => {
            let q = quantize_profile(&final_profile, levels)?;
            let after = eval.evaluate(q.heights(), false)?.0;
            Some((q, QuantizationReport { levels, before: value, after }))
        }
        None => None,
    };
    Ok(Optimization { trajectory, profiles, final_profile, quantized })
}
