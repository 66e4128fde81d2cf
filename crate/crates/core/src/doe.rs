//! Rotationally symmetric diffractive element geometry.
//!
//! A radial profile of ring heights is rotated about the grid centre to form
//! a square height map. Pixel `(row, col)` sits at distance
//! `r = hypot(row - n/2, col - n/2)` (in pixels) from the centre and takes
//! the height of ring `min(round(r), len - 1)` when `r <= len`, where `len`
//! is the profile length; everything outside that disk is zero.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Ring count of the full-size element.
pub const PROFILE_LEN: usize = 512;
/// Side length of the full-size height map.
pub const GRID_SIZE: usize = 1024;
/// Height-map pixel pitch in metres.
pub const PIXEL_PITCH: f64 = 4e-6;
/// Total etch depth in metres.
pub const DEPTH_MAX: f64 = 1.5369e-6;
/// Number of fabricated height levels.
pub const LEVELS: usize = 16;
/// Per-level fabrication error bound in metres.
pub const STEP_ERROR: f64 = 40e-9;

/// Ring heights in metres, each within `[0, depth_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightProfile {
    heights: Vec<f64>,
    depth_max: f64,
}

impl HeightProfile {
    pub fn new(heights: Vec<f64>, depth_max: f64) -> Result<Self> {
        if !(depth_max.is_finite() && depth_max > 0.0) {
            return Err(Error::Config(format!("depth_max must be positive, got {depth_max}")));
        }
        if heights.is_empty() {
            return Err(Error::Config("height profile is empty".into()));
        }
        if let Some((i, h)) = heights
            .iter()
            .enumerate()
            .find(|(_, h)| !(h.is_finite() && **h >= 0.0 && **h <= depth_max))
        {
            return Err(Error::Config(format!(
                "profile entry {i} = {h} m outside [0, {depth_max}] m"
            )));
        }
        Ok(Self { heights, depth_max })
    }

    /// Clamps entries into `[0, depth_max]` instead of rejecting them.
    pub fn clamped(mut heights: Vec<f64>, depth_max: f64) -> Result<Self> {
        for h in heights.iter_mut() {
            if !h.is_finite() {
                return Err(Error::Numerical("non-finite profile entry".into()));
            }
            *h = h.clamp(0.0, depth_max);
        }
        Self::new(heights, depth_max)
    }

    pub fn constant(len: usize, height: f64, depth_max: f64) -> Result<Self> {
        Self::new(vec![height; len], depth_max)
    }

    /// Entries drawn uniformly from `[0, depth_max]`.
    pub fn random(len: usize, depth_max: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heights = (0..len).map(|_| rng.random::<f64>() * depth_max).collect();
        Self::new(heights, depth_max)
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn depth_max(&self) -> f64 {
        self.depth_max
    }

    pub fn into_heights(self) -> Vec<f64> {
        self.heights
    }
}

/// Quantization metadata carried by a leveled height map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantization {
    pub levels: usize,
    pub depth: f64,
}

impl Quantization {
    pub fn step(&self) -> f64 {
        self.depth / (self.levels - 1) as f64
    }

    /// Index of the level nearest to `h`.
    pub fn level_of(&self, h: f64) -> usize {
        let k = (h / self.step()).round();
        (k.max(0.0) as usize).min(self.levels - 1)
    }

    pub fn snap(&self, h: f64) -> f64 {
        self.level_of(h) as f64 * self.step()
    }
}

/// `n × n` height map in metres with its aperture mask.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    n: usize,
    pitch: f64,
    heights: Vec<f64>,
    mask: Vec<bool>,
    quantization: Option<Quantization>,
}

impl HeightMap {
    /// Assembles a map from raw parts, e.g. when loading from disk.
    pub fn from_parts(
        n: usize,
        pitch: f64,
        heights: Vec<f64>,
        mask: Vec<bool>,
        quantization: Option<Quantization>,
    ) -> Result<Self> {
        if heights.len() != n * n || mask.len() != n * n {
            return Err(Error::Shape(format!("height map {n}x{n} needs {} samples", n * n)));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::Config(format!("pixel pitch must be positive, got {pitch}")));
        }
        Ok(Self { n, pitch, heights, mask, quantization })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn quantization(&self) -> Option<Quantization> {
        self.quantization
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.n + col]
    }
}

/// Pixel-to-ring lookup for an `n × n` grid and a profile of `len` rings.
#[derive(Debug, Clone, PartialEq)]
pub struct RingIndex {
    n: usize,
    len: usize,
    ring: Vec<u32>,
}

impl RingIndex {
    const OUTSIDE: u32 = u32::MAX;

    pub fn new(n: usize, len: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::Config(format!("grid size must be even and positive, got {n}")));
        }
        if len == 0 {
            return Err(Error::Config("profile must have at least one ring".into()));
        }
        let center = (n / 2) as f64;
        let limit = len as f64;
        let mut ring = Vec::with_capacity(n * n);
        for row in 0..n {
            let dy = row as f64 - center;
            for col in 0..n {
                let dx = col as f64 - center;
                let r = (dx * dx + dy * dy).sqrt();
                // f64::round rounds half away from zero
                let idx = r.round();
                ring.push(if r <= limit && idx <= limit {
                    (idx as usize).min(len - 1) as u32
                } else {
                    Self::OUTSIDE
                });
            }
        }
        Ok(Self { n, len, ring })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Ring of pixel `i` (row-major), or `None` outside the aperture.
    pub fn ring(&self, i: usize) -> Option<usize> {
        let r = self.ring[i];
        (r != Self::OUTSIDE).then_some(r as usize)
    }

    /// Scatters ring values onto the grid (zero outside the aperture).
    pub fn scatter(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.len);
        self.ring
            .iter()
            .map(|&r| if r == Self::OUTSIDE { 0.0 } else { values[r as usize] })
            .collect()
    }

    /// Adjoint of [`RingIndex::scatter`]: sums grid values per ring.
    pub fn gather(&self, grid: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (&r, &g) in self.ring.iter().zip(grid) {
            if r != Self::OUTSIDE {
                out[r as usize] += g;
            }
        }
        out
    }

    pub fn mask(&self) -> Vec<bool> {
        self.ring.iter().map(|&r| r != Self::OUTSIDE).collect()
    }
}

/// Rotates a radial profile into an `n × n` height map.
pub fn rasterize(profile: &HeightProfile, n: usize, pitch: f64) -> Result<HeightMap> {
    let rings = RingIndex::new(n, profile.len())?;
    HeightMap::from_parts(n, pitch, rings.scatter(profile.heights()), rings.mask(), None)
}

/// Adjoint of [`rasterize`] with respect to the profile: per-ring sums of a
/// grid-shaped sensitivity.
pub fn rasterize_adjoint(grid: &[f64], n: usize, len: usize) -> Result<Vec<f64>> {
    if grid.len() != n * n {
        return Err(Error::Shape(format!("adjoint input needs {} samples", n * n)));
    }
    Ok(RingIndex::new(n, len)?.gather(grid))
}

fn check_levels(levels: usize, depth: f64) -> Result<Quantization> {
    if levels < 2 {
        return Err(Error::Config(format!("quantization needs at least 2 levels, got {levels}")));
    }
    if !(depth.is_finite() && depth > 0.0) {
        return Err(Error::Config(format!("quantization depth must be positive, got {depth}")));
    }
    Ok(Quantization { levels, depth })
}

/// Snaps every height to the nearest of `levels` equally spaced values in
/// `[0, depth]`.
pub fn quantize(map: &HeightMap, levels: usize, depth: f64) -> Result<HeightMap> {
    let q = check_levels(levels, depth)?;
    let heights = map.heights.iter().map(|&h| q.snap(h)).collect();
    Ok(HeightMap { heights, quantization: Some(q), ..map.clone() })
}

/// Profile-level counterpart of [`quantize`]; rasterization commutes with it.
pub fn quantize_profile(profile: &HeightProfile, levels: usize) -> Result<HeightProfile> {
    let q = check_levels(levels, profile.depth_max())?;
    HeightProfile::new(profile.heights().iter().map(|&h| q.snap(h)).collect(), profile.depth_max)
}

/// Adds one uniform offset in `[-step_error, step_error]` per height level.
/// Every aperture pixel on the same level shifts by the same amount.
pub fn perturb_fabrication(map: &HeightMap, step_error: f64, seed: u64) -> Result<HeightMap> {
    let q = map.quantization.ok_or_else(|| {
        Error::Config("fabrication perturbation needs a quantized height map".into())
    })?;
    if !(step_error.is_finite() && step_error >= 0.0) {
        return Err(Error::Config(format!("step error must be >= 0, got {step_error}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<f64> =
        (0..q.levels).map(|_| (2.0 * rng.random::<f64>() - 1.0) * step_error).collect();
    let heights = map
        .heights
        .iter()
        .zip(&map.mask)
        .map(|(&h, &inside)| if inside { h + offsets[q.level_of(h)] } else { h })
        .collect();
    Ok(HeightMap { heights, ..map.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;

    fn random_profile(len: usize, seed: u64) -> HeightProfile {
        HeightProfile::random(len, DEPTH_MAX, seed).unwrap()
    }

    #[test]
    fn constant_profile_fills_the_disk() {
        let d = 1e-6;
        let map = rasterize(&HeightProfile::constant(32, d, DEPTH_MAX).unwrap(), 64, 4e-6).unwrap();
        for row in 0..64 {
            for col in 0..64 {
                let r = ((row as f64 - 32.0).powi(2) + (col as f64 - 32.0).powi(2)).sqrt();
                let expected = if r <= 32.0 { d } else { 0.0 };
                assert_eq!(map.get(row, col), expected, "({row},{col})");
                assert_eq!(map.mask()[row * 64 + col], r <= 32.0);
            }
        }
    }

    #[test]
    fn single_ring_lights_only_the_centre() {
        let mut w = vec![0.0; PROFILE_LEN];
        w[0] = 1e-6;
        let map = rasterize(&HeightProfile::new(w, DEPTH_MAX).unwrap(), GRID_SIZE, PIXEL_PITCH)
            .unwrap();
        let nonzero: Vec<usize> =
            map.heights().iter().enumerate().filter(|(_, h)| **h != 0.0).map(|(i, _)| i).collect();
        assert_eq!(nonzero, vec![512 * 1024 + 512]);
    }

    #[test]
    fn full_size_aperture_reaches_the_rim() {
        let map = rasterize(&HeightProfile::constant(PROFILE_LEN, 1e-7, DEPTH_MAX).unwrap(), GRID_SIZE, PIXEL_PITCH)
            .unwrap();
        // (0, 512) is exactly 512 px from the centre
        assert!(map.mask()[512]);
        assert!(!map.mask()[0]);
    }

    #[test]
    fn axis_reflections_agree() {
        let map = rasterize(&random_profile(64, 7), 128, 4e-6).unwrap();
        let c = 64usize;
        for d in 1..60 {
            let v = map.get(c, c + d);
            assert_eq!(map.get(c, c - d), v);
            assert_eq!(map.get(c + d, c), v);
            assert_eq!(map.get(c - d, c), v);
        }
    }

    #[test]
    fn heights_are_constant_per_rounded_radius() {
        let n = 256;
        let map = rasterize(&random_profile(128, 3), n, 4e-6).unwrap();
        // the rim test r <= len splits the outermost rounded ring in two
        let mut groups: BTreeMap<(u64, bool), f64> = BTreeMap::new();
        for row in 0..n {
            for col in 0..n {
                let r = ((row as f64 - 128.0).powi(2) + (col as f64 - 128.0).powi(2)).sqrt();
                let h = map.get(row, col);
                let prev = groups.entry((r.round() as u64, r <= 128.0)).or_insert(h);
                assert_eq!(*prev, h);
            }
        }
    }

    #[test]
    fn odd_grid_is_rejected() {
        assert!(matches!(
            rasterize(&random_profile(8, 1), 15, 4e-6),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn adjoint_matches_inner_products() {
        let n = 64;
        let w = random_profile(32, 11);
        let g: Vec<f64> = (0..n * n).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let map = rasterize(&w, n, 4e-6).unwrap();
        let lhs: f64 = map.heights().iter().zip(&g).map(|(a, b)| a * b).sum();
        let adj = rasterize_adjoint(&g, n, 32).unwrap();
        let rhs: f64 = w.heights().iter().zip(&adj).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-30));
    }

    #[test]
    fn quantize_snaps_to_nearest_level() {
        let d = DEPTH_MAX;
        let step = d / 15.0;
        let h = d / 2.0 + 0.2 * step;
        let map = HeightMap::from_parts(2, 4e-6, vec![h; 4], vec![true; 4], None).unwrap();
        let out = quantize(&map, 16, d).unwrap();
        // brute force over the 16 levels
        let best = (0..16)
            .map(|k| k as f64 * step)
            .min_by(|a, b| (a - h).abs().partial_cmp(&(b - h).abs()).unwrap())
            .unwrap();
        assert_eq!(best, 8.0 * d / 15.0);
        assert_eq!(out.heights()[0], best);
    }

    #[test]
    fn quantize_is_idempotent_and_keeps_zero() {
        let map = rasterize(&random_profile(32, 5), 64, 4e-6).unwrap();
        let once = quantize(&map, 16, DEPTH_MAX).unwrap();
        let twice = quantize(&once, 16, DEPTH_MAX).unwrap();
        assert_eq!(once, twice);
        let zero = rasterize(&HeightProfile::constant(32, 0.0, DEPTH_MAX).unwrap(), 64, 4e-6).unwrap();
        assert!(quantize(&zero, 16, DEPTH_MAX).unwrap().heights().iter().all(|h| *h == 0.0));
        assert!(quantize(&zero, 1, DEPTH_MAX).is_err());
    }

    #[test]
    fn perturbation_is_per_level_and_bounded() {
        let map = rasterize(&random_profile(64, 9), 128, 4e-6).unwrap();
        let q = quantize(&map, LEVELS, DEPTH_MAX).unwrap();
        let same = perturb_fabrication(&q, 0.0, 1).unwrap();
        assert_eq!(same.heights(), q.heights());

        let a = perturb_fabrication(&q, STEP_ERROR, 42).unwrap();
        let b = perturb_fabrication(&q, STEP_ERROR, 42).unwrap();
        assert_eq!(a, b);

        let mut shift_of_level: BTreeMap<usize, f64> = BTreeMap::new();
        let quant = q.quantization().unwrap();
        for i in 0..q.heights().len() {
            let delta = a.heights()[i] - q.heights()[i];
            assert!(delta.abs() <= STEP_ERROR * (1.0 + 1e-9));
            if q.mask()[i] {
                let level = quant.level_of(q.heights()[i]);
                let prev = shift_of_level.entry(level).or_insert(delta);
                assert!((*prev - delta).abs() < 1e-20);
            } else {
                assert_eq!(delta, 0.0);
            }
        }
        assert!(perturb_fabrication(&map, STEP_ERROR, 1).is_err());
    }

    #[test]
    fn profile_quantization_commutes_with_rasterization() {
        let w = random_profile(32, 13);
        let a = quantize(&rasterize(&w, 64, 4e-6).unwrap(), 16, DEPTH_MAX).unwrap();
        let b = rasterize(&quantize_profile(&w, 16).unwrap(), 64, 4e-6).unwrap();
        assert_eq!(a.heights(), b.heights());
    }

    #[test]
    fn profile_rejects_out_of_range_heights() {
        assert!(HeightProfile::new(vec![2e-6], DEPTH_MAX).is_err());
        assert!(HeightProfile::new(vec![-1e-9], DEPTH_MAX).is_err());
        assert_eq!(HeightProfile::clamped(vec![2e-6, -1.0], DEPTH_MAX).unwrap().heights(), &[DEPTH_MAX, 0.0]);
    }
}
