//! Analyzer forward model, Stokes inversion, and DoLP/AoLP maps.
//!
//! The four analyzer configurations measure
//!
//! | config           | intensity      |
//! |------------------|----------------|
//! | `Linear0`        | `(S0 + S1)/2`  |
//! | `Linear90`       | `(S0 - S1)/2`  |
//! | `Linear45`       | `(S0 + S2)/2`  |
//! | `Qwp0Linear45`   | `(S0 - S3)/2`  |
//!
//! and [`stokes_from_measurements`] inverts them exactly:
//! `S0 = P1 + P2`, `S1 = P1 - P2`, `S2 = 2 P3 - S0`, `S3 = S0 - 2 P4`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

#[allow(unused_imports)]
use num_traits::Float;

use crate::datamodel::{AnalyzerConfig, SpectralCube, StokesCube};
use crate::error::{Error, Result};

/// Ground-truth Stokes description of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedScene {
    pub stokes: StokesCube,
}

impl PolarizedScene {
    pub fn new(stokes: StokesCube) -> Self {
        Self { stokes }
    }
}

/// Intensity cube seen through one analyzer configuration.
pub fn analyzer_intensity(scene: &PolarizedScene, config: AnalyzerConfig) -> SpectralCube {
    let s = &scene.stokes;
    let (other, sign) = match config {
        AnalyzerConfig::Linear0 => (s.s1(), 1.0),
        AnalyzerConfig::Linear90 => (s.s1(), -1.0),
        AnalyzerConfig::Linear45 => (s.s2(), 1.0),
        AnalyzerConfig::Qwp0Linear45 => (s.s3(), -1.0),
    };
    let data: Vec<f64> = s.s0().iter().zip(other).map(|(s0, x)| 0.5 * (s0 + sign * x)).collect();
    SpectralCube::new(s.height(), s.width(), *s.grid(), data)
        .expect("analyzer output has the scene's shape")
}

/// Inverts the four analyzer intensities (M1..M4 order) into Stokes
/// parameters. No clamping is applied.
pub fn stokes_from_measurements(
    p1: &SpectralCube,
    p2: &SpectralCube,
    p3: &SpectralCube,
    p4: &SpectralCube,
) -> Result<StokesCube> {
    for (i, p) in [p2, p3, p4].into_iter().enumerate() {
        p1.check_same_shape(p, &format!("measurement P{} vs P1", i + 2))?;
    }
    let n = p1.data().len();
    let mut s = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for i in 0..n {
        let (a, b, c, d) = (p1.data()[i], p2.data()[i], p3.data()[i], p4.data()[i]);
        let s0 = a + b;
        s[0].push(s0);
        s[1].push(a - b);
        s[2].push(2.0 * c - s0);
        s[3].push(s0 - 2.0 * d);
    }
    StokesCube::new(p1.height(), p1.width(), *p1.grid(), s)
}

/// Unclamped `sqrt(S1² + S2²)/S0`, zero when `S0 <= 0`.
pub fn dolp(s0: f64, s1: f64, s2: f64) -> f64 {
    if s0 <= 0.0 {
        0.0
    } else {
        (s1 * s1 + s2 * s2).sqrt() / s0
    }
}

/// `½·atan2(S2, S1)` in `(-π/2, π/2]`; zero for an unpolarized or dark
/// pixel.
pub fn aolp(s1: f64, s2: f64) -> f64 {
    if s1 == 0.0 && s2 == 0.0 {
        return 0.0;
    }
    let a = 0.5 * s2.atan2(s1);
    if a <= -FRAC_PI_2 {
        a + core::f64::consts::PI
    } else {
        a
    }
}

/// DoLP and AoLP of one band.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarimetricMaps {
    pub height: usize,
    pub width: usize,
    pub band: usize,
    /// Clamped to `[0, 1]`.
    pub dolp: Vec<f64>,
    /// Radians in `(-π/2, π/2]`.
    pub aolp: Vec<f64>,
}

pub fn dolp_aolp(stokes: &StokesCube, band: usize) -> Result<PolarimetricMaps> {
    if band >= stokes.bands() {
        return Err(Error::Config(format!(
            "band {band} out of range (cube has {} bands)",
            stokes.bands()
        )));
    }
    let plane = stokes.height() * stokes.width();
    let range = band * plane..(band + 1) * plane;
    let (s0, s1, s2) = (&stokes.s0()[range.clone()], &stokes.s1()[range.clone()], &stokes.s2()[range]);
    let mut dolp_map = Vec::with_capacity(plane);
    let mut aolp_map = Vec::with_capacity(plane);
    for i in 0..plane {
        if s0[i] <= 0.0 {
            dolp_map.push(0.0);
            aolp_map.push(0.0);
        } else {
            dolp_map.push(dolp(s0[i], s1[i], s2[i]).clamp(0.0, 1.0));
            aolp_map.push(aolp(s1[i], s2[i]));
        }
    }
    Ok(PolarimetricMaps {
        height: stokes.height(),
        width: stokes.width(),
        band,
        dolp: dolp_map,
        aolp: aolp_map,
    })
}

/// Axial mean of angles defined modulo π: averages `(cos 2θ, sin 2θ)` and
/// halves the resulting angle. Returns a value in `(-π/2, π/2]`.
pub fn axial_mean(angles: impl IntoIterator<Item = f64>) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for a in angles {
        c += (2.0 * a).cos();
        s += (2.0 * a).sin();
    }
    aolp(c, s)
}

/// Distance between two axial angles (period π), in `[0, π/2]`.
pub fn axial_distance(a: f64, b: f64) -> f64 {
    let pi = core::f64::consts::PI;
    let d = (a - b) - pi * ((a - b) / pi).round();
    d.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::WavelengthGrid;
    use core::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI, SQRT_2};

    fn single(s: [f64; 4]) -> PolarizedScene {
        let grid = WavelengthGrid::with_count(550.0, 10.0, 1).unwrap();
        PolarizedScene::new(StokesCube::from_fn(1, 1, grid, |_, _, _| s))
    }

    fn measure(s: [f64; 4]) -> [f64; 4] {
        let scene = single(s);
        AnalyzerConfig::ALL.map(|c| analyzer_intensity(&scene, c).data()[0])
    }

    #[test]
    fn unpolarized_light_splits_evenly() {
        assert_eq!(measure([1.0, 0.0, 0.0, 0.0]), [0.5; 4]);
    }

    #[test]
    fn horizontal_light() {
        let m = measure([1.0, 1.0, 0.0, 0.0]);
        assert_eq!(m, [1.0, 0.0, 0.5, 0.5]);
        // substitute back
        let (p1, p2, p3, p4) = (m[0], m[1], m[2], m[3]);
        let s0 = p1 + p2;
        assert_eq!([s0, p1 - p2, 2.0 * p3 - s0, s0 - 2.0 * p4], [1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn right_circular_is_blocked_by_qwp_analyzer() {
        assert_eq!(measure([1.0, 0.0, 0.0, 1.0])[3], 0.0);
    }

    fn cube_of(v: f64) -> SpectralCube {
        SpectralCube::from_fn(2, 2, WavelengthGrid::with_count(500.0, 10.0, 2).unwrap(), |_, _, _| v)
    }

    #[test]
    fn inversion_of_uniform_half_is_unpolarized() {
        let h = cube_of(0.5);
        let s = stokes_from_measurements(&h, &h, &h, &h).unwrap();
        assert_eq!(s.vector(1, 1, 1), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn inversion_direct_substitution() {
        let s = stokes_from_measurements(&cube_of(1.0), &cube_of(0.0), &cube_of(0.5), &cube_of(0.5)).unwrap();
        assert_eq!(s.vector(0, 0, 0), [1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = cube_of(0.5);
        let b = SpectralCube::zeros(3, 2, *a.grid());
        assert!(matches!(stokes_from_measurements(&a, &a, &b, &a), Err(Error::Shape(_))));
    }

    fn maps_of(s: [f64; 4]) -> (f64, f64) {
        let m = dolp_aolp(&single(s).stokes, 0).unwrap();
        (m.dolp[0], m.aolp[0])
    }

    #[test]
    fn dolp_aolp_examples() {
        assert_eq!(maps_of([1.0, 0.0, 0.0, 0.0]), (0.0, 0.0));
        let (d, a) = maps_of([1.0, SQRT_2 / 2.0, SQRT_2 / 2.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-15);
        assert!((a - FRAC_PI_8).abs() < 1e-15);
        assert_eq!(maps_of([0.0, 0.3, 0.2, 0.0]), (0.0, 0.0));
        let (_, a45) = maps_of([1.0, (PI / 2.0).cos(), 1.0, 0.0]);
        assert!((a45 - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn aolp_recovers_angle_on_dense_grid() {
        for i in 0..=720 {
            let theta = -PI + i as f64 * PI / 360.0;
            let got = aolp((2.0 * theta).cos(), (2.0 * theta).sin());
            assert!(got > -FRAC_PI_2 && got <= FRAC_PI_2);
            assert!(axial_distance(got, theta) < 1e-12, "theta={theta} got={got}");
        }
        assert_eq!(aolp(-1.0, 0.0), FRAC_PI_2);
        assert_eq!(aolp(-1.0, -0.0), FRAC_PI_2);
    }

    #[test]
    fn band_out_of_range_is_an_error() {
        assert!(dolp_aolp(&single([1.0; 4]).stokes, 1).is_err());
    }

    #[test]
    fn axial_mean_handles_wraparound() {
        let m = axial_mean([FRAC_PI_2 - 0.01, -FRAC_PI_2 + 0.01]);
        assert!(axial_distance(m, FRAC_PI_2) < 1e-12);
    }
}
