//! Run configuration: TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfwm_core::gafit::GAConfig;
use sfwm_core::phasematch::{PumpEnvelope, PumpShape};
use sfwm_core::{CladdingMaterial, FiberParams};

use crate::Failure;

pub const CONFIG_ENV: &str = "SFWM_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PumpSection {
    wavelength_nm: Option<f64>,
    bandwidth_nm: Option<f64>,
    shape: Option<PumpShape>,
    power_w: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    format: Option<OutputFormat>,
    path: Option<PathBuf>,
}

/// On-disk layout: fiber keys at top level, optional tables.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    core_radius_um: Option<f64>,
    na: Option<f64>,
    delta: Option<f64>,
    delta_p: Option<f64>,
    length_m: Option<f64>,
    cladding_material: Option<CladdingMaterial>,
    #[serde(default)]
    pump: PumpSection,
    #[serde(default)]
    output: OutputSection,
    ga: Option<GAConfig>,
}

/// Values given on the command line; each wins over the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Config file (TOML); defaults to $SFWM_CONFIG
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub core_radius_um: Option<f64>,
    #[arg(long, global = true)]
    pub na: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta_p: Option<f64>,
    #[arg(long, global = true)]
    pub length_m: Option<f64>,
    /// Pump center wavelength, nm
    #[arg(long, global = true)]
    pub pump_nm: Option<f64>,
    /// Pump FWHM bandwidth, nm
    #[arg(long, global = true)]
    pub pump_bw_nm: Option<f64>,
    #[arg(long, global = true, value_parser = parse_shape)]
    pub pump_shape: Option<PumpShape>,
    /// Power per pump, W
    #[arg(long, global = true)]
    pub pump_power_w: Option<f64>,
    #[arg(long, global = true)]
    pub format: Option<OutputFormat>,
    /// Output file; stdout when omitted
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Progress messages on stderr (repeat for more)
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_shape(s: &str) -> Result<PumpShape, String> {
    match s {
        "gaussian" => Ok(PumpShape::Gaussian),
        "monochromatic" => Ok(PumpShape::Monochromatic),
        _ => Err(format!("expected gaussian or monochromatic, got `{s}`")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub fiber: FiberParams,
    pub pump: PumpEnvelope,
    pub pump_power_w: f64,
    pub output_format: OutputFormat,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
    #[serde(skip)]
    pub verbosity: u8,
    pub ga: GAConfig,
}

fn read_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Config(format!("config {}: {}", path.display(), e.message())))
}

impl RunConfig {
    pub fn resolve(o: &Overrides) -> Result<Self, Failure> {
        let path = o.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let file = match &path {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let need = |key: &str, flag: Option<f64>, file: Option<f64>| {
            flag.or(file)
                .ok_or_else(|| Failure::Config(format!("missing fiber parameter `{key}` (config key or --{})", key.replace('_', "-"))))
        };
        let fiber = FiberParams {
            core_radius_um: need("core_radius_um", o.core_radius_um, file.core_radius_um)?,
            na: need("na", o.na, file.na)?,
            delta: need("delta", o.delta, file.delta)?,
            delta_p: need("delta_p", o.delta_p, file.delta_p)?,
            length_m: need("length_m", o.length_m, file.length_m)?,
            cladding_material: file.cladding_material.unwrap_or_default(),
        };
        fiber.validate().map_err(|e| Failure::Config(e.to_string()))?;

        let shape = o.pump_shape.or(file.pump.shape).unwrap_or(PumpShape::Gaussian);
        let center = o.pump_nm.or(file.pump.wavelength_nm).unwrap_or(705.0);
        let bandwidth = match shape {
            PumpShape::Monochromatic => 0.0,
            PumpShape::Gaussian => o.pump_bw_nm.or(file.pump.bandwidth_nm).unwrap_or(0.5),
        };
        let pump = PumpEnvelope { center_wavelength_nm: center, bandwidth_fwhm_nm: bandwidth, shape };
        pump.validate().map_err(|e| Failure::Config(format!("[pump]: {e}")))?;
        let pump_power_w = o.pump_power_w.or(file.pump.power_w).unwrap_or(0.05);
        if !(pump_power_w.is_finite() && pump_power_w >= 0.0) {
            return Err(Failure::Config("[pump] power_w must be non-negative".into()));
        }
        let ga = file.ga.unwrap_or_default();
        ga.validate().map_err(|e| Failure::Config(format!("[ga]: {e}")))?;

        let output_path = o.output.clone().or(file.output.path);
        if let Some(p) = &output_path {
            let parent = p.parent().filter(|d| !d.as_os_str().is_empty());
            if parent.is_some_and(|d| !d.is_dir()) {
                return Err(Failure::Config(format!("output directory for {} does not exist", p.display())));
            }
        }
        Ok(Self {
            fiber,
            pump,
            pump_power_w,
            output_format: o.format.or(file.output.format).unwrap_or_default(),
            output_path,
            verbosity: o.verbose,
            ga,
        })
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbosity > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}
