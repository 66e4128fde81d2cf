use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::{tempdir, TempDir};

use specpol::io::{read_profile, read_psf, read_stokes, sidecar_path};
use specpol_core::polarimetry::{axial_distance, axial_mean, dolp_aolp};
use specpol_core::synth::{polar_target_patches, TARGET_ANGLES};

const DESK: &str = r#"
[grid]
min_nm = 400.0
max_nm = 680.0
step_nm = 40.0

[element]
n = 128
profile_len = 48
crop = 16

[optimize]
objective = "PSF_INCOHERENCE"
iterations = 0
snapshot_every = 0
"#;

fn specpol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specpol")).args(args).env("NO_COLOR", "1").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = specpol(args);
    assert!(
        out.status.success(),
        "specpol {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Desk {
    dir: TempDir,
    config: PathBuf,
}

impl Desk {
    fn new() -> Self {
        let dir = tempdir().unwrap();
        let config = dir.path().join("desk.toml");
        fs::write(&config, DESK).unwrap();
        Self { dir, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn profile(&self, kind: &str) -> PathBuf {
        let out = self.path(&format!("{kind}.prof"));
        ok(&["gen-profile", "--kind", kind, "--seed", "3", "--config", s(&self.config), "--out", s(&out)]);
        out
    }

    fn psf(&self, profile: &Path, name: &str) -> PathBuf {
        let out = self.path(name);
        ok(&["psf", "--profile", s(profile), "--config", s(&self.config), "--out", s(&out)]);
        out
    }
}

fn f32_payload(path: &Path) -> Vec<f32> {
    fs::read(path).unwrap().chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()
}

#[test]
fn psf_of_flat_profile_has_unit_kernels() {
    let desk = Desk::new();
    let psf = desk.psf(&desk.profile("flat"), "flat.psf");
    let k = f32_payload(&psf);
    assert_eq!(k.len(), 8 * 16 * 16);
    for kernel in k.chunks(256) {
        let sum: f64 = kernel.iter().map(|v| *v as f64).sum();
        assert!((sum - 1.0).abs() < 1e-5, "kernel sum {sum}");
    }
    assert_eq!(read_psf(&psf).unwrap().bands(), 8);
    assert!(desk.path("flat_previews").join("psf_07.png").exists());
}

#[test]
fn psf_prints_energy_per_band() {
    let desk = Desk::new();
    let profile = desk.profile("random");
    let out = ok(&["psf", "--profile", s(&profile), "--config", s(&desk.config), "--out", s(&desk.path("p.psf"))]);
    assert_eq!(out.lines().filter(|l| l.contains("energy_in_crop")).count(), 8);
}

#[test]
fn oversized_crop_is_a_configuration_error() {
    let desk = Desk::new();
    let profile = desk.profile("flat");
    let out = specpol(&["psf", "--profile", s(&profile), "--crop", "2048", "--out", s(&desk.path("x.psf"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("crop"));
}

#[test]
fn psf_is_deterministic() {
    let desk = Desk::new();
    let profile = desk.profile("random");
    let a = desk.psf(&profile, "a.psf");
    let b = desk.psf(&profile, "b.psf");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(sidecar_path(&a)).unwrap(), fs::read(sidecar_path(&b)).unwrap());
}

#[test]
fn unpolarized_four_frame_round_trip() {
    let desk = Desk::new();
    let psf = desk.psf(&desk.profile("random"), "r.psf");
    let scene = desk.path("scene.stokes");
    ok(&[
        "gen-scene", "--kind", "unpolarized", "--height", "48", "--width", "48", "--seed", "4", "--config",
        s(&desk.config), "--out", s(&scene),
    ]);
    let enc = desk.path("enc");
    ok(&["encode", "--scene", s(&scene), "--psf", s(&psf), "--noise", "none", "--four", "--out", s(&enc)]);
    let frames: Vec<Vec<u8>> = (1..=4).map(|i| fs::read(enc.join(format!("M{i}.rgb"))).unwrap()).collect();
    assert!(frames.iter().all(|f| *f == frames[0]));

    let manifest = enc.join("manifest.json");
    let out = desk.path("rec.stokes");
    ok(&["decode", "--manifest", s(&manifest), "--out", s(&out), "--band", "3"]);
    let stokes = read_stokes(&out).unwrap();
    let mean_abs = |i: usize| stokes.component(i).iter().map(|v| v.abs()).sum::<f64>() / stokes.component(i).len() as f64;
    let s0 = mean_abs(0);
    assert!(s0 > 0.0);
    for i in 1..4 {
        assert!(mean_abs(i) <= 0.01 * s0, "S{i} {} vs S0 {s0}", mean_abs(i));
    }
    assert!(desk.path("rec_dolp.png").exists() && desk.path("rec_aolp.png").exists());
    assert!(desk.path("rec_aolp.f32").exists());

    let bad = specpol(&["decode", "--manifest", s(&manifest), "--out", s(&out), "--band", "8"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("band 8"));
}

#[test]
fn single_measurement_decode_is_valid() {
    let desk = Desk::new();
    let psf = desk.psf(&desk.profile("random"), "r.psf");
    let scene = desk.path("scene.cube");
    ok(&["gen-scene", "--kind", "checker", "--height", "32", "--width", "32", "--config", s(&desk.config), "--out", s(&scene)]);
    let enc = desk.path("enc");
    ok(&["encode", "--scene", s(&scene), "--psf", s(&psf), "--noise", "gaussian", "--sigma", "0.01", "--seed", "9", "--out", s(&enc)]);
    let first = fs::read(enc.join("measurement.rgb")).unwrap();
    ok(&["encode", "--scene", s(&scene), "--psf", s(&psf), "--noise", "gaussian", "--sigma", "0.01", "--seed", "9", "--out", s(&enc)]);
    assert_eq!(fs::read(enc.join("measurement.rgb")).unwrap(), first);

    let rec = desk.path("rec.cube");
    let out = specpol(&["decode", "--measurement", s(&enc.join("measurement.rgb")), "--psf", s(&psf), "--out", s(&rec)]);
    assert!(out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).contains("warning"));
    let cube = specpol::io::read_cube(&rec).unwrap();
    assert!(specpol_core::datamodel::validate_cube(&cube).is_ok());

    let metrics = ok(&["metrics", "--a", s(&scene), "--b", s(&rec), "--format", "table"]);
    assert!(metrics.contains("PSNR (dB)") && !metrics.contains('\x1b'));
}

#[test]
fn zero_scene_encodes_to_zero() {
    let desk = Desk::new();
    let psf = desk.psf(&desk.profile("flat"), "f.psf");
    let scene = desk.path("zero.cube");
    let grid = specpol_core::WavelengthGrid::new(400.0, 680.0, 40.0).unwrap();
    specpol::io::write_cube(&specpol_core::SpectralCube::zeros(20, 20, grid), &scene).unwrap();
    let enc = desk.path("enc");
    ok(&["encode", "--scene", s(&scene), "--psf", s(&psf), "--noise", "NONE", "--out", s(&enc)]);
    assert!(f32_payload(&enc.join("measurement.rgb")).iter().all(|v| *v == 0.0));
}

#[test]
fn metrics_of_identical_cubes() {
    let desk = Desk::new();
    let scene = desk.path("c.cube");
    ok(&["gen-scene", "--kind", "checker", "--height", "32", "--width", "32", "--out", s(&scene)]);
    let json: serde_json::Value = serde_json::from_str(&ok(&["metrics", "--a", s(&scene), "--b", s(&scene)])).unwrap();
    assert_eq!(json["psnr"].as_f64(), Some(100.0));
    assert_eq!(json["ssim"].as_f64(), Some(1.0));
    assert_eq!(json["fidelity_percent"].as_f64(), Some(100.0));
}

#[test]
fn polar_target_quadrants_carry_their_angles() {
    let desk = Desk::new();
    let out = desk.path("target.stokes");
    ok(&["gen-scene", "--kind", "polar-target", "--height", "64", "--width", "64", "--out", s(&out)]);
    let stokes = read_stokes(&out).unwrap();
    assert_eq!(stokes.bands(), 31);
    let maps = dolp_aolp(&stokes, 15).unwrap();
    for (patch, angle) in polar_target_patches(64, 64).iter().zip(TARGET_ANGLES) {
        let mean = axial_mean(patch.pixels().map(|(r, c)| maps.aolp[r * 64 + c]));
        assert!(axial_distance(mean, angle) < 1e-6, "{mean} vs {angle}");
        assert!(patch.pixels().all(|(r, c)| (maps.dolp[r * 64 + c] - 1.0).abs() < 1e-6));
    }
}

#[test]
fn zero_iteration_optimization_returns_the_start() {
    let desk = Desk::new();
    let start = desk.profile("random");
    let out = desk.path("opt");
    ok(&["optimize", "--config", s(&desk.config), "--initial", s(&start), "--out", s(&out)]);
    assert_eq!(fs::read(out.join("final_profile.f32")).unwrap(), fs::read(&start).unwrap());
    assert_eq!(read_profile(&out.join("final_profile.f32")).unwrap(), read_profile(&start).unwrap());
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(out.join("quantized_profile.f32").exists() && out.join("summary.json").exists());
}

#[test]
fn short_optimization_does_not_increase_the_objective() {
    let desk = Desk::new();
    let out = desk.path("opt");
    ok(&["optimize", "--config", s(&desk.config), "--iterations", "3", "--seed", "7", "--out", s(&out)]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["final_objective"].as_f64().unwrap() <= summary["initial_objective"].as_f64().unwrap());
    assert_eq!(fs::read_to_string(out.join("trajectory.csv")).unwrap().lines().count(), 5);
}

#[test]
fn render_spectrum_and_ingest() {
    let desk = Desk::new();
    let scene = desk.path("c.cube");
    ok(&["gen-scene", "--kind", "checker", "--height", "24", "--width", "36", "--out", s(&scene)]);
    let png = desk.path("c.png");
    ok(&["render", "--cube", s(&scene), "--out", s(&png)]);
    let img = image::open(&png).unwrap();
    assert_eq!((img.width(), img.height()), (36, 24));
    let bad = specpol(&["render", "--cube", s(&scene), "--out", s(&png), "--bits", "12"]);
    assert_eq!(bad.status.code(), Some(2));

    let csv = desk.path("spec.csv");
    ok(&["spectrum", "--cube", s(&scene), "--row", "10", "--col", "10", "--out", s(&csv)]);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 32);

    let txt = desk.path("m.txt");
    fs::write(&txt, "# wavelengths: 400 700\n1 2\n\n3 4\n").unwrap();
    let cube = desk.path("m.cube");
    ok(&["ingest", "--input", s(&txt), "--format", "matrix-text", "--out", s(&cube)]);
    let c = specpol::io::read_cube(&cube).unwrap();
    assert_eq!(c.bands(), 31);
    assert_eq!(c.get(0, 1, 15), 3.0);
}

#[test]
fn configuration_problems_exit_with_two() {
    let desk = Desk::new();
    let bad = desk.path("bad.toml");
    fs::write(&bad, "[grid]\nmin_nm = 400.0\nbogus = 1\n").unwrap();
    let out = specpol(&["gen-scene", "--kind", "checker", "--config", s(&bad), "--out", s(&desk.path("x.cube"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let missing = specpol(&["metrics", "--a", "/nonexistent/a.cube", "--b", "/nonexistent/b.cube"]);
    assert_eq!(missing.status.code(), Some(1));
}
