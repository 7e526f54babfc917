use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coarse::DEFAULT_OVERSAMPLE;
use crate::error::{Error, Result};
use crate::geometry::{Point, SceneGeometry, VelocityVector};
use crate::mode::ModeOptions;
use crate::signal::SystemParams;
use crate::SPEED_OF_LIGHT;

/// Velocity estimator run after the shared stage-one/stage-two front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mode")]
    Mode,
    #[serde(rename = "music", alias = "root-music")]
    RootMusic,
    #[serde(rename = "esprit")]
    Esprit,
    /// Mono-static BS alone: radial projection from the stage-one pilots.
    #[serde(rename = "no-irs")]
    NoIrs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mode, Method::RootMusic, Method::Esprit, Method::NoIrs];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mode => "mode",
            Method::RootMusic => "music",
            Method::Esprit => "esprit",
            Method::NoIrs => "no-irs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mode" => Ok(Method::Mode),
            "music" | "root-music" => Ok(Method::RootMusic),
            "esprit" => Ok(Method::Esprit),
            "no-irs" => Ok(Method::NoIrs),
            other => Err(Error::Config(format!("unknown method '{other}' (expected mode, music, esprit or no-irs)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    None,
    SnrDb(Vec<f64>),
    /// Target speeds, m/s.
    Speed(Vec<f64>),
}

impl SweepAxis {
    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::None => &[],
            SweepAxis::SnrDb(v) | SweepAxis::Speed(v) => v,
        }
    }
}

/// Everything one experiment needs. Angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemParams,
    pub scene: SceneGeometry,
    pub velocity: VelocityVector,
    pub method: Method,
    pub sweep: SweepAxis,
    pub n_trials: usize,
    pub base_seed: u64,
    pub mode: ModeOptions,
    pub coarse_oversample: usize,
    /// When false both noise powers are forced to zero.
    pub noise: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ConfigFile::default().into_config().expect("built-in defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(s).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        file.into_config()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// System parameters with the noise switch applied.
    pub fn effective_system(&self) -> SystemParams {
        if self.noise {
            self.system.clone()
        } else {
            self.system.clone().noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if !(self.velocity.speed() > 0.0) {
            return Err(Error::Config("target speed must be positive for normalized errors".into()));
        }
        if self.coarse_oversample == 0 {
            return Err(Error::Config("coarse_oversample must be at least 1".into()));
        }
        if !(self.mode.tol >= 0.0) || self.mode.max_iter == 0 {
            return Err(Error::Config("mode_tol must be >= 0 and mode_max_iter >= 1".into()));
        }
        match &self.sweep {
            SweepAxis::SnrDb(v) | SweepAxis::Speed(v) if v.is_empty() => {
                Err(Error::Config("sweep values must not be empty".into()))
            }
            SweepAxis::Speed(v) if v.iter().any(|s| !(*s > 0.0)) => Err(Error::Config("sweep speeds must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// On-disk JSON form of [`ExperimentConfig`]. Angles are in degrees; every
/// field is optional and defaults to the reference scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub system: SystemFile,
    pub scene: SceneFile,
    pub velocity: VelocityFile,
    pub method: Method,
    pub sweep: SweepFile,
    pub n_trials: usize,
    pub base_seed: u64,
    pub mode_tol: f64,
    pub mode_max_iter: usize,
    pub coarse_oversample: usize,
    pub noise: bool,
    pub output: Option<PathBuf>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let mode = ModeOptions::default();
        Self {
            system: SystemFile::default(),
            scene: SceneFile::default(),
            velocity: VelocityFile::default(),
            method: Method::Mode,
            sweep: SweepFile::default(),
            n_trials: 1000,
            base_seed: 0,
            mode_tol: mode.tol,
            mode_max_iter: mode.max_iter,
            coarse_oversample: DEFAULT_OVERSAMPLE,
            noise: true,
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemFile {
    pub n_bs: usize,
    pub m_irs: usize,
    pub carrier_hz: f64,
    /// Defaults to half a wavelength.
    pub spacing_m: Option<f64>,
    pub symbol_period_s: f64,
    pub n_pilots_stage1: usize,
    pub n_pilots_stage2: usize,
    /// Defaults to floor(n_pilots_stage2 / 2).
    pub stack_dim: Option<usize>,
    pub snr_db: f64,
    pub rician_factor_db: f64,
    pub n_nlos_paths: usize,
    pub irs_gain_ratio: f64,
}

impl Default for SystemFile {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            n_bs: p.n_bs,
            m_irs: p.m_irs,
            carrier_hz: p.carrier_hz,
            spacing_m: None,
            symbol_period_s: p.symbol_period_s,
            n_pilots_stage1: p.n_pilots_stage1,
            n_pilots_stage2: p.n_pilots_stage2,
            stack_dim: None,
            snr_db: p.snr_db,
            rician_factor_db: p.rician_factor_db,
            n_nlos_paths: p.n_nlos_paths,
            irs_gain_ratio: p.irs_gain_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneFile {
    pub bs_position: [f64; 2],
    pub irs_position: [f64; 2],
    /// Explicit target position; overrides the two angles when present.
    pub target_position: Option<[f64; 2]>,
    pub theta_tb_deg: Option<f64>,
    pub theta_it_deg: Option<f64>,
}

impl Default for SceneFile {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0],
            irs_position: [20.0, 0.0],
            target_position: None,
            theta_tb_deg: Some(30.0),
            theta_it_deg: Some(120.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocityFile {
    pub speed_mps: f64,
    pub heading_deg: f64,
}

impl Default for VelocityFile {
    fn default() -> Self {
        Self { speed_mps: 40.0, heading_deg: 60.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "axis", rename_all = "snake_case")]
pub enum SweepFile {
    None,
    SnrDb { values: Vec<f64> },
    Speed { values: Vec<f64> },
}

impl Default for SweepFile {
    fn default() -> Self {
        SweepFile::None
    }
}

impl ConfigFile {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let s = &self.system;
        if !(s.carrier_hz > 0.0) {
            return Err(Error::Config("carrier_hz must be positive".into()));
        }
        let wavelength_m = SPEED_OF_LIGHT / s.carrier_hz;
        let system = SystemParams {
            n_bs: s.n_bs,
            m_irs: s.m_irs,
            carrier_hz: s.carrier_hz,
            wavelength_m,
            spacing_m: s.spacing_m.unwrap_or(0.5 * wavelength_m),
            symbol_period_s: s.symbol_period_s,
            n_pilots_stage1: s.n_pilots_stage1,
            n_pilots_stage2: s.n_pilots_stage2,
            stack_dim: s.stack_dim.unwrap_or(s.n_pilots_stage2 / 2),
            rician_factor_db: s.rician_factor_db,
            n_nlos_paths: s.n_nlos_paths,
            irs_gain_ratio: s.irs_gain_ratio,
            ..SystemParams::default()
        }
        .with_snr_db(s.snr_db);

        let sc = &self.scene;
        let (bs, irs) = (Point::from(sc.bs_position), Point::from(sc.irs_position));
        let scene = match (sc.target_position, sc.theta_tb_deg, sc.theta_it_deg) {
            (Some(t), None, None) => SceneGeometry::from_positions(bs, irs, Point::from(t))?,
            (None, Some(tb), Some(it)) => SceneGeometry::from_angles(bs, irs, tb.to_radians(), it.to_radians())?,
            _ => {
                return Err(Error::Config(
                    "scene needs either target_position or both theta_tb_deg and theta_it_deg".into(),
                ))
            }
        };

        let sweep = match self.sweep {
            SweepFile::None => SweepAxis::None,
            SweepFile::SnrDb { values } => SweepAxis::SnrDb(values),
            SweepFile::Speed { values } => SweepAxis::Speed(values),
        };

        let config = ExperimentConfig {
            system,
            scene,
            velocity: VelocityVector::new(self.velocity.speed_mps, self.velocity.heading_deg.to_radians()),
            method: self.method,
            sweep,
            n_trials: self.n_trials,
            base_seed: self.base_seed,
            mode: ModeOptions { tol: self.mode_tol, max_iter: self.mode_max_iter },
            coarse_oversample: self.coarse_oversample,
            noise: self.noise,
            output: self.output,
        };
        config.validate()?;
        Ok(config)
    }
}
