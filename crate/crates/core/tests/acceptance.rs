//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specpol_core::conv::LinearConv;
use specpol_core::decoder::{flat_baseline, reconstruct, reconstruct_stokes, wiener_band, DeconvConfig};
use specpol_core::doe::{quantize_profile, rasterize, HeightProfile, DEPTH_MAX, GRID_SIZE, LEVELS, PIXEL_PITCH, PROFILE_LEN};
use specpol_core::encoder::{acquire_four, encode, NoiseModel};
use specpol_core::metrics::{psnr, psnr_from_mse, psnr_values, spectral_fidelity, ssim};
use specpol_core::optics::{focusing_profile, psf, OpticalConfig, PsfStack, DEFAULT_CROP};
use specpol_core::optimizer::{gradient_check, optimize, DesignProblem, Objective};
use specpol_core::polarimetry::{analyzer_intensity, aolp, axial_distance, axial_mean, stokes_from_measurements, PolarizedScene};
use specpol_core::synth::{self, Rect, TARGET_ANGLES};
use specpol_core::{AnalyzerConfig, ResponseTable, SpectralCube, StokesCube, WavelengthGrid};

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, name: &str, pass: bool, detail: String, elapsed: Duration) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] {name}: {detail} ({:.2} s)", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    }
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Rotations of a `k × k` kernel about the centre sample `(k/2, k/2)`,
/// compared on the `(k-1) × (k-1)` window that rotation maps onto itself.
fn rotation_error(kernel: &[f64], k: usize) -> f64 {
    let c = k / 2;
    let window: Vec<(usize, usize)> = (1..k).flat_map(|a| (1..k).map(move |b| (a, b))).collect();
    let base: Vec<f64> = window.iter().map(|&(a, b)| kernel[a * k + b]).collect();
    let mut worst = 0.0f64;
    for turn in 1..4 {
        let rotated: Vec<f64> = window
            .iter()
            .map(|&(a, b)| {
                let (mut y, mut x) = (a, b);
                for _ in 0..turn {
                    (y, x) = (x, 2 * c - y);
                }
                kernel[y * k + x]
            })
            .collect();
        worst = worst.max(rel_l2(&rotated, &base));
    }
    worst
}

fn map_is_ring_constant(heights: &[f64], n: usize, len: usize) -> bool {
    let c = (n / 2) as f64;
    let mut seen = std::collections::HashMap::new();
    for row in 0..n {
        for col in 0..n {
            let r = ((row as f64 - c).powi(2) + (col as f64 - c).powi(2)).sqrt();
            let key = (r.round() as u64, r <= len as f64);
            let h = heights[row * n + col];
            if *seen.entry(key).or_insert(h) != h {
                return false;
            }
        }
    }
    true
}

const ELEMENT_SEED: u64 = 2024;

/// Encoder element used end to end: a random profile on the 16-level grid.
fn design_stack(cfg: &OpticalConfig, grid: &WavelengthGrid) -> (PsfStack, f64) {
    let profile = HeightProfile::random(PROFILE_LEN, DEPTH_MAX, ELEMENT_SEED).expect("profile");
    let profile = quantize_profile(&profile, LEVELS).expect("quantize");
    let map = rasterize(&profile, GRID_SIZE, PIXEL_PITCH).expect("rasterize");
    let stack = psf(cfg, &map, grid, DEFAULT_CROP).expect("psf");
    let worst = stack.energy_in_crop().iter().copied().fold(1.0, f64::min);
    (stack, worst)
}

fn rotational_symmetry(s: &mut Suite, cfg: &OpticalConfig, grid: &WavelengthGrid, designed: &PsfStack) {
    let start = Instant::now();
    let lens = focusing_profile(cfg, PROFILE_LEN, PIXEL_PITCH, 550.0, DEPTH_MAX).expect("focusing profile");
    let map = rasterize(&lens, GRID_SIZE, PIXEL_PITCH).expect("rasterize");
    let map_ok = map_is_ring_constant(map.heights(), GRID_SIZE, PROFILE_LEN);
    let stack = psf(cfg, &map, grid, DEFAULT_CROP).expect("psf");
    let elapsed = start.elapsed();
    let mut worst = 0.0f64;
    for st in [&stack, designed] {
        for b in 0..st.bands() {
            worst = worst.max(rotation_error(st.kernel(b), st.crop()));
        }
    }
    let pass = map_ok && worst <= 1e-6 && elapsed.as_secs_f64() < 30.0;
    s.report(
        "rotational symmetry (1024^2, 31 bands)",
        pass,
        format!("map ring-constant {map_ok}, max PSF rotation rel L2 {worst:.2e} (<= 1e-6), PSF run {:.1} s (< 30 s)", elapsed.as_secs_f64()),
        elapsed,
    );
}

fn random_physical_scene(rng: &mut impl Rng, h: usize, w: usize, grid: WavelengthGrid) -> StokesCube {
    StokesCube::from_fn(h, w, grid, |_, _, _| {
        let s0: f64 = rng.random_range(0.0..1.0);
        let p = s0 * rng.random_range(0.0..1.0);
        let z: f64 = rng.random_range(-1.0..1.0);
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let lin = p * (1.0 - z * z).sqrt();
        [s0, lin * t.cos(), lin * t.sin(), p * z]
    })
}

fn stokes_round_trip(s: &mut Suite, grid: WavelengthGrid) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let truth = random_physical_scene(&mut rng, 8, 8, grid);
        let scene = PolarizedScene::new(truth.clone());
        let p = AnalyzerConfig::ALL.map(|c| analyzer_intensity(&scene, c));
        let back = stokes_from_measurements(&p[0], &p[1], &p[2], &p[3]).expect("inversion");
        let scale = truth.s0().iter().fold(0.0f64, |m, v| m.max(*v));
        for i in 0..4 {
            for (x, y) in back.component(i).iter().zip(truth.component(i)) {
                worst = worst.max((x - y).abs() / scale);
            }
        }
    }
    let elapsed = start.elapsed();
    s.report(
        "Stokes round trip (100 random physical scenes)",
        worst <= 1e-12 && elapsed.as_secs_f64() < 1.0,
        format!("max error relative to peak S0 {worst:.2e} (<= 1e-12)"),
        elapsed,
    );
}

fn band_integrated(stokes: &StokesCube) -> [Vec<f64>; 4] {
    let plane = stokes.height() * stokes.width();
    core::array::from_fn(|i| {
        let comp = stokes.component(i);
        (0..plane).map(|p| (0..stokes.bands()).map(|b| comp[b * plane + p]).sum()).collect()
    })
}

fn mean_over(rect: &Rect, width: usize, values: &[f64]) -> f64 {
    let n = (rect.height * rect.width) as f64;
    rect.pixels().map(|(r, c)| values[r * width + c]).sum::<f64>() / n
}

fn decode_config() -> DeconvConfig {
    DeconvConfig { iterations: 50, ..DeconvConfig::default() }
}

fn aolp_accuracy(s: &mut Suite, stack: &PsfStack, response: &ResponseTable) {
    let start = Instant::now();
    let (h, w) = (256, 256);
    let target = synth::polar_target(h, w, *stack.grid(), TARGET_ANGLES).expect("target");
    let set = acquire_four(&PolarizedScene::new(target), stack, response, &NoiseModel::none()).expect("acquire");
    let rec = reconstruct_stokes(&set, stack, response, &decode_config()).expect("decode");
    let elapsed = start.elapsed();
    let [_, s1, s2, _] = band_integrated(&rec);
    let plane = h * w;
    let mut errors = Vec::new();
    let mut worst_band = 0.0f64;
    for (rect, angle) in synth::polar_target_patches(h, w).iter().zip(TARGET_ANGLES) {
        let inner = rect.interior(8);
        let mean = axial_mean(inner.pixels().map(|(r, c)| aolp(s1[r * w + c], s2[r * w + c])));
        errors.push((angle, mean, axial_distance(mean, angle)));
        for b in 0..rec.bands() {
            let (b1, b2) = (&rec.component(1)[b * plane..], &rec.component(2)[b * plane..]);
            let m = axial_mean(inner.pixels().map(|(r, c)| aolp(b1[r * w + c], b2[r * w + c])));
            worst_band = worst_band.max(axial_distance(m, angle));
        }
    }
    let worst = errors.iter().map(|e| e.2).fold(0.0, f64::max);
    let detail = errors
        .iter()
        .map(|(a, m, _)| format!("{:+.4}->{:+.4}", a, m))
        .collect::<Vec<_>>()
        .join(", ");
    s.report(
        "AoLP accuracy (polar target 256^2, 31 bands, noiseless)",
        worst <= 0.01 && elapsed.as_secs_f64() < 120.0,
        format!("band-integrated quadrant means [{detail}] rad, max error {worst:.4} (<= 0.01); worst single band {worst_band:.4}"),
        elapsed,
    );
}

fn circular_discrimination(s: &mut Suite, stack: &PsfStack, response: &ResponseTable) {
    let start = Instant::now();
    let (h, w) = (128, 256);
    let scene = synth::circular(h, w, *stack.grid()).expect("scene");
    let set = acquire_four(&PolarizedScene::new(scene), stack, response, &NoiseModel::none()).expect("acquire");
    let rec = reconstruct_stokes(&set, stack, response, &decode_config()).expect("decode");
    let elapsed = start.elapsed();
    let [s0, _, _, s3] = band_integrated(&rec);
    let [rcp, lcp] = synth::circular_patches(h, w);
    let ratio = |rect: &Rect| {
        let inner = rect.interior(8);
        mean_over(&inner, w, &s3) / mean_over(&inner, w, &s0)
    };
    let (r, l) = (ratio(&rcp), ratio(&lcp));
    s.report(
        "circular discrimination (noiseless)",
        r >= 0.8 && l <= -0.8,
        format!("mean S3/S0: RCP {r:+.4}, LCP {l:+.4} (opposite signs, |.| >= 0.8)"),
        elapsed,
    );
}

fn wiener_exactness(s: &mut Suite) {
    let start = Instant::now();
    let (n, k) = (128, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
    let c = (k / 2) as f64;
    let mut kernel: Vec<f64> = (0..k * k)
        .map(|i| {
            let (y, xx) = ((i / k) as f64 - c, (i % k) as f64 - c);
            0.3 * (-(y * y + xx * xx) / (2.0 * 1.5 * 1.5)).exp() / (2.0 * std::f64::consts::PI * 1.5 * 1.5)
        })
        .collect();
    kernel[(k / 2) * k + k / 2] += 0.7;
    let y = LinearConv::new(n, n, k).convolve(&x, &kernel);
    let est = wiener_band(&y, n, n, &kernel, k, 1e-9).expect("wiener");
    let margin = 32;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for r in margin..n - margin {
        for cc in margin..n - margin {
            a.push(est[r * n + cc]);
            b.push(x[r * n + cc]);
        }
    }
    let p = psnr_values(&a, &b, 1.0).expect("psnr");
    let elapsed = start.elapsed();
    s.report(
        "Wiener exactness (epsilon 1e-9, interior)",
        p >= 60.0 && elapsed.as_secs_f64() < 1.0,
        format!("interior PSNR {p:.1} dB (>= 60)"),
        elapsed,
    );
}

fn encoder_checks(s: &mut Suite, stack: &PsfStack, response: &ResponseTable) {
    let start = Instant::now();
    let grid = *stack.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut random_cube = || SpectralCube::new(48, 40, grid, (0..48 * 40 * grid.count()).map(|_| rng.random::<f64>()).collect()).unwrap();
    let (x, y) = (random_cube(), random_cube());
    let (a, b) = (0.7, -1.3);
    let mix = SpectralCube::new(48, 40, grid, x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
    let none = NoiseModel::none();
    let ex = encode(&x, stack, response, &none).unwrap();
    let ey = encode(&y, stack, response, &none).unwrap();
    let em = encode(&mix, stack, response, &none).unwrap();
    let combo: Vec<f64> = ex.data().iter().zip(ey.data()).map(|(p, q)| a * p + b * q).collect();
    let lin = rel_l2(em.data(), &combo);
    let unit = ResponseTable::unit(grid);
    let id = encode(&x, &PsfStack::delta(grid, DEFAULT_CROP).unwrap(), &unit, &none).unwrap();
    let summed: Vec<f64> = (0..3)
        .flat_map(|_| (0..48 * 40).map(|p| (0..grid.count()).map(|band| x.band(band)[p]).sum::<f64>()))
        .collect();
    let ident = rel_l2(id.data(), &summed);
    let elapsed = start.elapsed();
    s.report(
        "encoder linearity and identity kernel",
        lin <= 1e-10 && ident <= 1e-10,
        format!("linearity rel {lin:.2e}, identity rel {ident:.2e} (<= 1e-10)"),
        elapsed,
    );
}

fn gradient_verification(s: &mut Suite) {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut worst = 0.0f64;
    for objective in [Objective::ReconMse, Objective::PsfIncoherence] {
        let problem = DesignProblem::desk(objective, 1).expect("desk problem");
        for seed in [101u64, 202] {
            let profile = HeightProfile::random(problem.profile_len, problem.depth_max, seed).unwrap();
            let report = gradient_check(&problem, &profile, 16, 1e-9, seed).expect("gradient check");
            worst = worst.max(report.max_rel_error);
            lines.push(format!("{} #{seed}: {:.1e}", objective.name(), report.max_rel_error));
        }
    }
    let elapsed = start.elapsed();
    s.report(
        "gradient verification (desk 128^2, 8 bands, 16 probes)",
        worst <= 1e-3 && elapsed.as_secs_f64() < 120.0,
        format!("{} (<= 1e-3)", lines.join(", ")),
        elapsed,
    );
}

fn optimization_progress(s: &mut Suite) {
    let start = Instant::now();
    let problem = DesignProblem::desk(Objective::PsfIncoherence, 5).expect("desk problem");
    let run = optimize(&problem).expect("optimize");
    let elapsed = start.elapsed();
    let accepted: Vec<f64> = run.trajectory.iter().filter(|t| t.accepted).map(|t| t.objective).collect();
    let monotone = accepted.windows(2).all(|w| w[1] <= w[0]);
    let (first, last) = (run.trajectory[0].objective, run.trajectory.last().unwrap().objective);
    let q = run.quantized.as_ref().map(|(_, r)| format!(", 16-level quantized {:.4}", r.after)).unwrap_or_default();
    s.report(
        "optimization progress (PSF_INCOHERENCE, 50 iterations)",
        last < first && monotone && run.trajectory.len() == 51,
        format!("objective {first:.4} -> {last:.4}, monotone over {} accepted steps{q}", accepted.len() - 1),
        elapsed,
    );
}

fn metric_anchors(s: &mut Suite) {
    let start = Instant::now();
    let p = psnr_from_mse(1e-4, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let img: Vec<f64> = (0..32 * 32).map(|_| rng.random::<f64>()).collect();
    let ss = ssim(&img, &img, 32, 32, 1.0).unwrap();
    let spec: Vec<f64> = (0..31).map(|_| rng.random::<f64>()).collect();
    let f = spectral_fidelity(&spec, &spec).unwrap();
    s.report(
        "metric anchors",
        (p - 40.0).abs() < 1e-12 && ss == 1.0 && (f - 100.0).abs() < 1e-12,
        format!("psnr(1e-4, 1) = {p:.6} dB, ssim(a,a) = {ss}, fidelity(a,a) = {f:.6}%"),
        start.elapsed(),
    );
}

fn beats_flat_baseline(s: &mut Suite, stack: &PsfStack, response: &ResponseTable) {
    let start = Instant::now();
    let grid = *stack.grid();
    let scenes: Vec<(&str, SpectralCube)> = vec![
        ("checker", synth::checker(128, 128, grid, 4, 6, 1).unwrap()),
        ("polar target S0", synth::polar_target(128, 128, grid, TARGET_ANGLES).unwrap().component_cube(0)),
        ("circular S0", synth::circular(128, 128, grid).unwrap().component_cube(0)),
    ];
    let mut all = true;
    let mut parts = Vec::new();
    for (name, cube) in &scenes {
        let m = encode(cube, stack, response, &NoiseModel::none()).unwrap();
        let rec = reconstruct(&m, stack, response, &decode_config()).unwrap();
        let peak = cube.max();
        let ours = psnr(&rec.cube, cube, peak).unwrap();
        let flat = psnr(&flat_baseline(&m, response).unwrap(), cube, peak).unwrap();
        all &= ours > flat;
        parts.push(format!("{name} {ours:.2} vs {flat:.2} dB"));
    }
    s.report(
        "decode beats flat-spectrum baseline (every synthetic scene)",
        all,
        parts.join(", "),
        start.elapsed(),
    );
}

fn main() {
    let mut suite = Suite { failures: 0 };
    let grid = WavelengthGrid::visible();
    let cfg = OpticalConfig::default();
    let response = ResponseTable::default_for(grid);

    stokes_round_trip(&mut suite, grid);
    wiener_exactness(&mut suite);
    metric_anchors(&mut suite);
    gradient_verification(&mut suite);
    optimization_progress(&mut suite);

    let t = Instant::now();
    let (stack, crop_energy) = design_stack(&cfg, &grid);
    println!(
        "       encoder element: random 16-level profile (seed {ELEMENT_SEED}), 1024^2 grid, {}x{} crop, min energy in crop {:.3} ({:.2} s)",
        DEFAULT_CROP,
        DEFAULT_CROP,
        crop_energy,
        t.elapsed().as_secs_f64()
    );
    rotational_symmetry(&mut suite, &cfg, &grid, &stack);
    encoder_checks(&mut suite, &stack, &response);
    aolp_accuracy(&mut suite, &stack, &response);
    circular_discrimination(&mut suite, &stack, &response);
    beats_flat_baseline(&mut suite, &stack, &response);

    if suite.failures > 0 {
        println!("{} criterion/criteria failed", suite.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
