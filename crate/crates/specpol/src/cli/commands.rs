use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use specpol_core::datamodel::validate_cube;
use specpol_core::decoder::{reconstruct, reconstruct_stokes, DeconvConfig, Fusion};
use specpol_core::doe::{quantize, quantize_profile, rasterize, HeightProfile};
use specpol_core::encoder::{self, acquire_four, NoiseKind, NoiseModel};
use specpol_core::metrics;
use specpol_core::optics::{focusing_profile, psf as compute_psf, PsfStack};
use specpol_core::optimizer::{optimize as run_optimizer, DesignProblem};
use specpol_core::polarimetry::{dolp_aolp, PolarizedScene};
use specpol_core::synth::{self, TARGET_ANGLES};
use specpol_core::{ResponseTable, SpectralCube, StokesCube, WavelengthGrid};

use super::{
    DecodeArgs, EncodeArgs, GenProfileArgs, GenSceneArgs, IngestArgs, IngestFormat, MetricsArgs, NoiseArgs,
    OptimizeArgs, OutputFormat, ProfileKind, PsfArgs, RenderArgs, SceneKind, SpectrumArgs,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{
    ingest_external_cube, layout_of, read_cube, read_manifest, read_profile, read_psf, read_response_csv, read_rgb,
    read_stokes, synthesize_rgb, write_aolp_png, write_cube, write_curve_csv, write_dolp_png, write_measurement_set,
    write_plane, write_profile, write_psf, write_psf_previews, write_rgb, write_rgb_png, write_stokes,
    write_trajectory_csv, BitDepth, ExternalFormat, Layout, PlaneFile,
};

const ENERGY_WARNING: f64 = 0.99;

/// Upper-case and underscore a user-typed enum name.
fn canonical(name: &str) -> String {
    name.trim().to_ascii_uppercase().replace('-', "_")
}

/// `dir/stem.ext` becomes `dir/stem{suffix}`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn response_for(cfg: &RunConfig, flag: Option<&Path>, grid: &WavelengthGrid) -> Result<ResponseTable> {
    match flag {
        Some(p) => read_response_csv(p),
        None if cfg.response.path.is_some() => cfg.response(),
        None => Ok(ResponseTable::gaussian_rgb(*grid, cfg.response.t_polarizer)?),
    }
}

fn noise_from(cfg: &RunConfig, args: &NoiseArgs) -> Result<NoiseModel> {
    let mut noise = cfg.noise()?;
    if let Some(kind) = &args.noise {
        noise.kind = NoiseKind::from_name(&canonical(kind))
            .ok_or_else(|| Error::Config(format!("unknown noise kind {kind:?}")))?;
    }
    if let Some(s) = args.sigma {
        noise.sigma = s;
    }
    if let Some(p) = args.peak {
        noise.peak = p;
    }
    if let Some(s) = args.seed {
        noise.seed = s;
    }
    noise.validate()?;
    Ok(noise)
}

/// Reads a spectral cube, or the S0 component of a Stokes cube.
fn read_intensity(path: &Path) -> Result<SpectralCube> {
    match layout_of(path)? {
        Layout::Spectral => read_cube(path),
        Layout::Stokes => Ok(read_stokes(path)?.component_cube(0)),
        _ => Err(Error::format(path, "layout", "expected a spectral or Stokes cube")),
    }
}

fn read_scene_stokes(path: &Path) -> Result<StokesCube> {
    match layout_of(path)? {
        Layout::Stokes => read_stokes(path),
        Layout::Spectral => Ok(synth::unpolarized(&read_cube(path)?)),
        _ => Err(Error::format(path, "layout", "expected a Stokes or spectral cube")),
    }
}

pub fn psf(a: PsfArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let optical = cfg.optical()?;
    let grid = cfg.grid()?;
    let crop = a.crop.unwrap_or(cfg.element.crop);
    if crop == 0 || crop > cfg.element.n {
        return Err(Error::Config(format!("crop {crop} must be in 1..={} (the grid size)", cfg.element.n)));
    }
    let profile = read_profile(&a.profile)?;
    let mut map = rasterize(&profile, cfg.element.n, cfg.element.pitch)?;
    if cfg.element.levels > 0 {
        map = quantize(&map, cfg.element.levels, profile.depth_max())?;
    }
    let stack = compute_psf(&optical, &map, &grid, crop)?;
    write_psf(&stack, Some(&optical), &a.out)?;
    let previews = a.previews.unwrap_or_else(|| sibling(&a.out, "_previews"));
    write_psf_previews(&stack, &previews)?;
    report_energy(&stack);
    Ok(())
}

fn report_energy(stack: &PsfStack) {
    let mut low = Vec::new();
    for (b, (nm, e)) in stack.grid().wavelengths().zip(stack.energy_in_crop()).enumerate() {
        println!("band {b:2}  {nm:6.1} nm  energy_in_crop {e:.6}");
        if *e < ENERGY_WARNING {
            low.push(b);
        }
    }
    if !low.is_empty() {
        eprintln!(
            "warning: {} band(s) keep less than {:.0}% of their energy in the crop (bands {:?}); consider a larger --crop",
            low.len(),
            ENERGY_WARNING * 100.0,
            low
        );
    }
}

pub fn encode(a: EncodeArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let noise = noise_from(&cfg, &a.noise)?;
    let psfs = read_psf(&a.psf)?;
    create_dir(&a.out)?;
    if a.four {
        let stokes = read_scene_stokes(&a.scene)?;
        let response = response_for(&cfg, a.response.as_deref(), stokes.grid())?;
        let set = acquire_four(&PolarizedScene::new(stokes), &psfs, &response, &noise)?;
        let psf_ref = std::path::absolute(&a.psf).map_err(|e| Error::io(&a.psf, e))?;
        let manifest = write_measurement_set(&set, &noise, &response, Some(&psf_ref.to_string_lossy()), &a.out)?;
        println!("wrote {}", manifest.display());
    } else {
        let cube = read_cube(&a.scene)?;
        let response = response_for(&cfg, a.response.as_deref(), cube.grid())?;
        let image = encoder::encode(&cube, &psfs, &response, &noise)?;
        let path = a.out.join("measurement.rgb");
        write_rgb(&image, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn deconv_from(cfg: &RunConfig, a: &DecodeArgs) -> Result<DeconvConfig> {
    let mut d = cfg.deconv()?;
    if let Some(e) = a.epsilon {
        d.epsilon = e;
    }
    if let Some(n) = a.iterations {
        d.iterations = n;
    }
    if let Some(f) = &a.fusion {
        d.fusion = Fusion::from_name(&canonical(f)).ok_or_else(|| Error::Config(format!("unknown fusion {f:?}")))?;
    }
    if a.step.is_some() {
        d.step = a.step;
    }
    d.validate()?;
    Ok(d)
}

fn check_band(band: usize, bands: usize) -> Result<()> {
    if band >= bands {
        return Err(Error::Config(format!("band {band} out of range (0..{bands})")));
    }
    Ok(())
}

pub fn decode(a: DecodeArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let deconv = deconv_from(&cfg, &a)?;
    if let Some(manifest_path) = &a.manifest {
        let manifest = read_manifest(manifest_path)?;
        let psf_path = a
            .psf
            .clone()
            .or(manifest.psf.clone())
            .ok_or_else(|| Error::Config("no PSF stack: pass --psf or reference one in the manifest".into()))?;
        let psfs = read_psf(&psf_path)?;
        let band = a.band.unwrap_or(psfs.bands() / 2);
        check_band(band, psfs.bands())?;
        let stokes = reconstruct_stokes(&manifest.set, &psfs, &manifest.response, &deconv)?;
        write_stokes(&stokes, &a.out)?;
        let maps = dolp_aolp(&stokes, band)?;
        let nm = stokes.grid().wavelength(band);
        write_dolp_png(&maps, &sibling(&a.out, "_dolp.png"))?;
        write_aolp_png(&maps, &sibling(&a.out, "_aolp.png"))?;
        for (quantity, data) in [("dolp", &maps.dolp), ("aolp", &maps.aolp)] {
            let plane = PlaneFile {
                height: maps.height,
                width: maps.width,
                quantity: quantity.into(),
                wavelength_nm: Some(nm),
                data: data.clone(),
            };
            write_plane(&plane, &sibling(&a.out, &format!("_{quantity}.f32")))?;
        }
        let s0: f64 = stokes.s0().iter().map(|v| v.abs()).sum();
        let ratios: Vec<String> = (1..4)
            .map(|i| {
                let si: f64 = stokes.component(i).iter().map(|v| v.abs()).sum();
                format!("S{i}/S0 {:.4}", if s0 > 0.0 { si / s0 } else { 0.0 })
            })
            .collect();
        println!("wrote {} (maps at band {band}, {nm} nm); mean |{}|", a.out.display(), ratios.join("|, |"));
    } else {
        let path = a.measurement.as_ref().expect("clap requires one input");
        let psf_path = a.psf.as_ref().ok_or_else(|| Error::Config("--measurement needs --psf".into()))?;
        let psfs = read_psf(psf_path)?;
        if let Some(band) = a.band {
            check_band(band, psfs.bands())?;
        }
        let image = read_rgb(path)?;
        let response = response_for(&cfg, a.response.as_deref(), psfs.grid())?;
        let rec = reconstruct(&image, &psfs, &response, &deconv)?;
        let report = validate_cube(&rec.cube);
        if !report.is_ok() {
            eprintln!(
                "warning: reconstruction has {} NaN, {} infinite and {} negative samples",
                report.nan_count, report.inf_count, report.negative_count
            );
        }
        write_cube(&rec.cube, &a.out)?;
        println!("wrote {}", a.out.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct QuantizationSummary {
    levels: usize,
    before: f64,
    after: f64,
}

#[derive(Serialize)]
struct OptimizeSummary {
    objective: String,
    iterations: usize,
    accepted: usize,
    initial_objective: f64,
    final_objective: f64,
    quantization: Option<QuantizationSummary>,
}

fn training_scenes(dir: &Path) -> Result<Vec<SpectralCube>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") || !crate::io::sidecar_path(&path).exists() {
            continue;
        }
        if layout_of(&path)? == Layout::Spectral {
            paths.push(path);
        }
    }
    paths.sort();
    paths.iter().map(|p| read_cube(p)).collect()
}

pub fn optimize(a: OptimizeArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let deconv = cfg.deconv()?;
    let scenes = match &a.scenes {
        Some(dir) => training_scenes(dir)?,
        None => Vec::new(),
    };
    let initial = match a.initial.clone().or_else(|| cfg.initial_profile_path()) {
        Some(p) => Some(read_profile(&p)?),
        None => None,
    };
    let levels = cfg.optimize.quantize_levels;
    let problem = DesignProblem {
        scenes,
        optical: cfg.optical()?,
        response: cfg.response()?,
        objective: cfg.objective()?,
        grid_size: cfg.element.n,
        pitch: cfg.element.pitch,
        profile_len: initial.as_ref().map_or(cfg.element.profile_len, HeightProfile::len),
        crop: cfg.element.crop,
        depth_max: cfg.element.depth_max,
        epsilon: deconv.epsilon,
        fusion: deconv.fusion,
        iterations: a.iterations.unwrap_or(cfg.optimize.iterations),
        step_size: cfg.optimize.step_size,
        seed: a.seed.unwrap_or(cfg.seeds.optimize),
        initial,
        quantize_levels: (levels > 0).then_some(levels),
    };
    problem.validate()?;
    let result = run_optimizer(&problem)?;
    create_dir(&a.out)?;
    write_trajectory_csv(&result.trajectory, &a.out.join("trajectory.csv"))?;
    write_profile(&result.final_profile, &a.out.join("final_profile.f32"))?;
    let every = cfg.optimize.snapshot_every;
    if every > 0 {
        let last = result.profiles.len().saturating_sub(1);
        for (point, heights) in result.trajectory.iter().zip(&result.profiles) {
            let i = point.iteration;
            if i % every == 0 || i == last {
                let p = HeightProfile::new(heights.clone(), problem.depth_max)?;
                write_profile(&p, &a.out.join("snapshots").join(format!("profile_{i:04}.f32")))?;
            }
        }
    }
    let quantization = match &result.quantized {
        Some((profile, q)) => {
            write_profile(profile, &a.out.join("quantized_profile.f32"))?;
            Some(QuantizationSummary { levels: q.levels, before: q.before, after: q.after })
        }
        None => None,
    };
    let first = result.trajectory.first().map_or(f64::NAN, |p| p.objective);
    let final_objective = result.trajectory.iter().rfind(|p| p.accepted).map_or(first, |p| p.objective);
    let summary = OptimizeSummary {
        objective: problem.objective.name().into(),
        iterations: problem.iterations,
        accepted: result.trajectory.iter().skip(1).filter(|p| p.accepted).count(),
        initial_objective: first,
        final_objective,
        quantization,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::parse(&a.out, e))? + "\n";
    let path = a.out.join("summary.json");
    fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct MetricsJson {
    psnr: f64,
    ssim: f64,
    fidelity_percent: f64,
    mse: f64,
    peak: f64,
    per_band_psnr: Vec<f64>,
}

fn use_colour() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stdout().is_terminal()
}

pub fn metrics(a: MetricsArgs) -> Result<()> {
    let reference = read_intensity(&a.a)?;
    let estimate = read_intensity(&a.b)?;
    let r = metrics::report(&reference, &estimate, a.peak)?;
    let out = std::io::stdout();
    let mut out = out.lock();
    let emit = |e: std::io::Error| Error::io(Path::new("<stdout>"), e);
    match a.format {
        OutputFormat::Json => {
            let json = MetricsJson {
                psnr: r.psnr,
                ssim: r.ssim,
                fidelity_percent: r.fidelity_percent,
                mse: r.mse,
                peak: r.peak,
                per_band_psnr: r.per_band_psnr,
            };
            let text = serde_json::to_string_pretty(&json).map_err(|e| Error::parse(&a.b, e))?;
            writeln!(out, "{text}").map_err(emit)?;
        }
        OutputFormat::Table => {
            let (bold, reset) = if use_colour() { ("\x1b[1m", "\x1b[0m") } else { ("", "") };
            let rows = [
                ("PSNR (dB)", format!("{:.3}", r.psnr)),
                ("SSIM", format!("{:.5}", r.ssim)),
                ("fidelity (%)", format!("{:.3}", r.fidelity_percent)),
                ("MSE", format!("{:.6e}", r.mse)),
                ("peak", format!("{:.6}", r.peak)),
            ];
            writeln!(out, "{bold}{:<14} {:>14}{reset}", "metric", "value").map_err(emit)?;
            for (name, value) in rows {
                writeln!(out, "{name:<14} {value:>14}").map_err(emit)?;
            }
            writeln!(out, "{bold}{:<14} {:>14}{reset}", "band (nm)", "PSNR (dB)").map_err(emit)?;
            for (nm, p) in reference.grid().wavelengths().zip(&r.per_band_psnr) {
                writeln!(out, "{nm:<14.1} {p:>14.3}").map_err(emit)?;
            }
        }
    }
    Ok(())
}

pub fn render(a: RenderArgs) -> Result<()> {
    let depth = BitDepth::from_bits(a.bits).ok_or_else(|| Error::Config(format!("--bits must be 8 or 16, got {}", a.bits)))?;
    let image = if layout_of(&a.cube)? == Layout::Rgb {
        let mut img = read_rgb(&a.cube)?;
        let max = img.data().iter().fold(0.0_f64, |m, v| m.max(*v));
        if max > 0.0 {
            img.data_mut().iter_mut().for_each(|v| *v /= max);
        }
        img
    } else {
        let cube = read_intensity(&a.cube)?;
        let response = response_for(&RunConfig::default(), a.response.as_deref(), cube.grid())?;
        synthesize_rgb(&cube, &response)?
    };
    write_rgb_png(&image, depth, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn gen_scene(a: GenSceneArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let grid = cfg.grid()?;
    let (h, w) = (a.height, a.width);
    match a.kind {
        SceneKind::Checker => write_cube(&synth::checker(h, w, grid, a.rows, a.cols, a.seed)?, &a.out)?,
        SceneKind::PolarTarget => write_stokes(&synth::polar_target(h, w, grid, TARGET_ANGLES)?, &a.out)?,
        SceneKind::Circular => write_stokes(&synth::circular(h, w, grid)?, &a.out)?,
        SceneKind::Unpolarized => {
            write_stokes(&synth::unpolarized(&synth::checker(h, w, grid, a.rows, a.cols, a.seed)?), &a.out)?
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn gen_profile(a: GenProfileArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let e = &cfg.element;
    let mut profile = match a.kind {
        ProfileKind::Flat => HeightProfile::constant(e.profile_len, a.height, e.depth_max)?,
        ProfileKind::Random => HeightProfile::random(e.profile_len, e.depth_max, a.seed)?,
        ProfileKind::Focusing => focusing_profile(&cfg.optical()?, e.profile_len, e.pitch, a.design_nm, e.depth_max)?,
    };
    if a.quantize {
        profile = quantize_profile(&profile, e.levels)?;
    }
    write_profile(&profile, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn spectrum(a: SpectrumArgs) -> Result<()> {
    let cube = read_intensity(&a.cube)?;
    if a.row >= cube.height() || a.col >= cube.width() {
        return Err(Error::Config(format!(
            "pixel ({}, {}) outside the {}x{} cube",
            a.row,
            a.col,
            cube.height(),
            cube.width()
        )));
    }
    let nm: Vec<f64> = cube.grid().wavelengths().collect();
    write_curve_csv(&nm, &cube.spectrum(a.row, a.col), &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let format = match a.format {
        IngestFormat::MatrixText => ExternalFormat::MatrixText,
        IngestFormat::PngStack => ExternalFormat::PlanarPngStack,
    };
    let cube = ingest_external_cube(&a.input, format)?;
    write_cube(&cube, &a.out)?;
    println!("wrote {} ({}x{}x{})", a.out.display(), cube.height(), cube.width(), cube.bands());
    Ok(())
}
