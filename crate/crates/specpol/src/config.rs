//! Run configuration read from TOML or JSON.
//!
//! Every section and key is optional and falls back to the library default.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specpol_core::decoder::{DeconvConfig, Fusion};
use specpol_core::doe::{DEPTH_MAX, GRID_SIZE, LEVELS, PIXEL_PITCH, PROFILE_LEN};
use specpol_core::encoder::{NoiseKind, NoiseModel};
use specpol_core::optics::{OpticalConfig, PhaseConvention, Sellmeier, DEFAULT_CROP};
use specpol_core::optimizer::Objective;
use specpol_core::{ResponseTable, WavelengthGrid};

use crate::error::{Error, Result};
use crate::io::read_response_csv;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub optics: OpticsSection,
    pub element: ElementSection,
    pub response: ResponseSection,
    pub noise: NoiseSection,
    pub deconv: DeconvSection,
    pub optimize: OptimizeSection,
    pub seeds: SeedSection,
    /// Directory the config was loaded from; relative paths resolve here.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub min_nm: f64,
    pub max_nm: f64,
    pub step_nm: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = WavelengthGrid::visible();
        Self { min_nm: g.min_nm(), max_nm: g.max_nm(), step_nm: g.step_nm() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsSection {
    pub source_distance: f64,
    pub focal_length: f64,
    pub convention: String,
    pub amplitude: f64,
    pub sellmeier_b: [f64; 3],
    pub sellmeier_c: [f64; 3],
}

impl Default for OpticsSection {
    fn default() -> Self {
        let o = OpticalConfig::default();
        Self {
            source_distance: o.source_distance,
            focal_length: o.focal_length,
            convention: o.convention.name().into(),
            amplitude: o.amplitude,
            sellmeier_b: o.dispersion.b,
            sellmeier_c: o.dispersion.c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElementSection {
    /// Simulation grid edge in pixels.
    pub n: usize,
    pub pitch: f64,
    pub profile_len: usize,
    pub depth_max: f64,
    pub crop: usize,
    /// Quantize rasterized maps to this many levels; 0 keeps them continuous.
    pub levels: usize,
}

impl Default for ElementSection {
    fn default() -> Self {
        Self { n: GRID_SIZE, pitch: PIXEL_PITCH, profile_len: PROFILE_LEN, depth_max: DEPTH_MAX, crop: DEFAULT_CROP, levels: LEVELS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseSection {
    /// CSV table; the Gaussian default applies when absent.
    pub path: Option<PathBuf>,
    pub t_polarizer: f64,
}

impl Default for ResponseSection {
    fn default() -> Self {
        Self { path: None, t_polarizer: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: String,
    pub sigma: f64,
    pub peak: f64,
    pub bit_depth: Option<u32>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseModel::none();
        Self { kind: n.kind.name().into(), sigma: n.sigma, peak: n.peak, bit_depth: n.bit_depth }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeconvSection {
    pub epsilon: f64,
    pub fusion: String,
    pub iterations: usize,
    pub step: Option<f64>,
}

impl Default for DeconvSection {
    fn default() -> Self {
        let d = DeconvConfig::default();
        Self { epsilon: d.epsilon, fusion: d.fusion.name().into(), iterations: d.iterations, step: d.step }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub objective: String,
    pub iterations: usize,
    /// Largest per-coordinate step in metres.
    pub step_size: f64,
    /// Starting profile; seeded random when absent.
    pub initial: Option<PathBuf>,
    /// Levels of the final quantized profile; 0 skips quantization.
    pub quantize_levels: usize,
    /// Write a profile snapshot every this many iterations; 0 disables.
    pub snapshot_every: usize,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            objective: Objective::default().name().into(),
            iterations: 50,
            step_size: DEPTH_MAX / 50.0,
            initial: None,
            quantize_levels: LEVELS,
            snapshot_every: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSection {
    pub noise: u64,
    pub optimize: u64,
}

fn unknown(what: &str, value: &str, allowed: &[&str]) -> Error {
    Error::Config(format!("unknown {what} {value:?}, expected one of {}", allowed.join(", ")))
}

impl RunConfig {
    /// Parses `.json` as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Loads `path` if given, otherwise the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn grid(&self) -> Result<WavelengthGrid> {
        let g = &self.grid;
        Ok(WavelengthGrid::new(g.min_nm, g.max_nm, g.step_nm)?)
    }

    pub fn optical(&self) -> Result<OpticalConfig> {
        let o = &self.optics;
        let convention = PhaseConvention::from_name(&o.convention)
            .ok_or_else(|| unknown("phase convention", &o.convention, &["PAPER_LITERAL", "PHYSICAL"]))?;
        let cfg = OpticalConfig {
            source_distance: o.source_distance,
            focal_length: o.focal_length,
            convention,
            dispersion: Sellmeier { b: o.sellmeier_b, c: o.sellmeier_c },
            amplitude: o.amplitude,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The CSV table when configured, otherwise the default curves on the
    /// configured grid.
    pub fn response(&self) -> Result<ResponseTable> {
        match &self.response.path {
            Some(p) => read_response_csv(&self.resolve(p)),
            None => Ok(ResponseTable::gaussian_rgb(self.grid()?, self.response.t_polarizer)?),
        }
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        let n = &self.noise;
        let kind = NoiseKind::from_name(&n.kind)
            .ok_or_else(|| unknown("noise kind", &n.kind, &["NONE", "GAUSSIAN", "POISSON_GAUSSIAN"]))?;
        let model = NoiseModel { kind, sigma: n.sigma, peak: n.peak, seed: self.seeds.noise, bit_depth: n.bit_depth };
        model.validate()?;
        Ok(model)
    }

    pub fn deconv(&self) -> Result<DeconvConfig> {
        let d = &self.deconv;
        let fusion = Fusion::from_name(&d.fusion)
            .ok_or_else(|| unknown("fusion", &d.fusion, &["RESPONSE_WEIGHTED", "CHANNEL_MEAN"]))?;
        let cfg = DeconvConfig { epsilon: d.epsilon, fusion, iterations: d.iterations, step: d.step };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn objective(&self) -> Result<Objective> {
        Objective::from_name(&self.optimize.objective)
            .ok_or_else(|| unknown("objective", &self.optimize.objective, &["RECON_MSE", "PSF_INCOHERENCE"]))
    }

    pub fn initial_profile_path(&self) -> Option<PathBuf> {
        self.optimize.initial.as_deref().map(|p| self.resolve(p))
    }
}
