//! Scenario files describing a positioning campaign.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::channel::DEFAULT_SAMPLE_RATE_HZ;
use crate::deployment::{hex_layout, ChannelProfile, Deployment, RadioParams};
use crate::prs_config::{validate, BitString, ConfigError, MutingPattern, PrsConfig, MUTING_LENGTHS};
use crate::receiver::{ReceiverParams, DEFAULT_DETECTION_MARGIN_DB, DEFAULT_FIRST_PATH_THRESHOLD_DB};
use crate::scheduler::{expand, ScheduleError, SubframeSchedule, ValidSubframeBitmap};

pub const FIG5_DESK: &str = include_str!("../../../scenarios/fig5-desk.toml");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("tech.{tech}: {source}")]
    Config { tech: String, source: ConfigError },
    #[error("tech.{tech}: {source}")]
    Schedule { tech: String, source: ScheduleError },
}

impl ScenarioError {
    /// Name of the underlying error kind, for reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioError::Io { .. } => "Io",
            ScenarioError::Parse { .. } => "Parse",
            ScenarioError::Invalid(_) => "Invalid",
            ScenarioError::Config { source, .. } => source.kind(),
            ScenarioError::Schedule { source, .. } => source.kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSection {
    #[serde(default = "defaults::isd_m")]
    pub isd_m: f64,
    #[serde(default = "defaults::rings")]
    pub rings: u32,
    #[serde(default = "defaults::carrier_hz")]
    pub carrier_hz: f64,
    #[serde(default = "defaults::tx_power_dbm")]
    pub tx_power_dbm: f64,
    #[serde(default = "defaults::noise_figure_db")]
    pub noise_figure_db: f64,
    #[serde(default = "defaults::channel_profile")]
    pub channel_profile: ChannelProfile,
    /// Host LTE carrier bandwidth in PRBs.
    #[serde(default = "defaults::carrier_prbs")]
    pub carrier_prbs: u16,
    #[serde(default = "defaults::sample_rate_hz")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub sync_error_std_s: f64,
    /// Extra loss on every link, see [`RadioParams::coupling_loss_db`].
    #[serde(default)]
    pub coupling_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    #[serde(default = "defaults::n_drops")]
    pub n_drops: usize,
    #[serde(default = "defaults::n_occasions")]
    pub n_occasions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Length of the one-hot muting pattern given to every cell; 0 disables
    /// muting.
    #[serde(default = "defaults::muting_bits")]
    pub muting_bits: usize,
    #[serde(default = "defaults::first_path_threshold_db")]
    pub first_path_threshold_db: f64,
    #[serde(default = "defaults::detection_margin_db")]
    pub detection_margin_db: f64,
    /// Frequency band reported for every cell in assistance data.
    #[serde(default = "defaults::band")]
    pub band: u16,
    /// Replace every link SNR with this value.
    #[serde(default)]
    pub snr_override_db: Option<f64>,
}

mod defaults {
    use crate::deployment::ChannelProfile;

    pub fn isd_m() -> f64 {
        700.0
    }
    pub fn rings() -> u32 {
        1
    }
    pub fn carrier_hz() -> f64 {
        700e6
    }
    pub fn tx_power_dbm() -> f64 {
        46.0
    }
    pub fn noise_figure_db() -> f64 {
        5.0
    }
    pub fn channel_profile() -> ChannelProfile {
        ChannelProfile::ShortDelaySpread
    }
    pub fn carrier_prbs() -> u16 {
        50
    }
    pub fn sample_rate_hz() -> f64 {
        super::DEFAULT_SAMPLE_RATE_HZ
    }
    pub fn n_drops() -> usize {
        500
    }
    pub fn n_occasions() -> usize {
        8
    }
    pub fn muting_bits() -> usize {
        4
    }
    pub fn first_path_threshold_db() -> f64 {
        super::DEFAULT_FIRST_PATH_THRESHOLD_DB
    }
    pub fn detection_margin_db() -> f64 {
        super::DEFAULT_DETECTION_MARGIN_DB
    }
    pub fn band() -> u16 {
        28
    }
}

impl Default for DeploymentSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl Default for CampaignSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub deployment: DeploymentSection,
    #[serde(default)]
    pub campaign: CampaignSection,
    /// PRS configuration template per technology. Identity and muting are
    /// filled in per cell.
    #[serde(default)]
    pub tech: BTreeMap<String, PrsConfig>,
    /// Optional NB-IoT valid subframe bitmap per technology.
    #[serde(default)]
    pub valid_subframes: BTreeMap<String, BitString>,
}

/// Per-cell configuration of one technology.
#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    pub config: PrsConfig,
    pub schedule: SubframeSchedule,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
            ScenarioError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        scenario.check()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// A builtin scenario by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "fig5-desk" => Some(Self::parse(FIG5_DESK).expect("builtin scenario is valid")),
            _ => None,
        }
    }

    /// `path` unless it names a builtin scenario.
    pub fn resolve(path_or_name: &str) -> Result<Self, ScenarioError> {
        match Self::builtin(path_or_name) {
            Some(s) => Ok(s),
            None => Self::load(Path::new(path_or_name)),
        }
    }

    pub fn deployment(&self) -> Deployment {
        let d = &self.deployment;
        let mut dep = hex_layout(d.isd_m, d.rings);
        dep.radio = RadioParams {
            carrier_hz: d.carrier_hz,
            tx_power_dbm: d.tx_power_dbm,
            noise_figure_db: d.noise_figure_db,
            carrier_prbs: d.carrier_prbs,
            coupling_loss_db: d.coupling_loss_db,
        };
        dep.sync_error_std_s = d.sync_error_std_s;
        dep
    }

    pub fn receiver_params(&self) -> ReceiverParams {
        ReceiverParams {
            first_path_threshold_db: self.campaign.first_path_threshold_db,
            detection_margin_db: self.campaign.detection_margin_db,
            ..ReceiverParams::for_deployment(&self.deployment())
        }
    }

    /// Configuration of technology `tech` for cell `cell_id`.
    pub fn cell_config(&self, tech: &str, cell_id: u16) -> Result<CellConfig, ScenarioError> {
        let template = self
            .tech
            .get(tech)
            .ok_or_else(|| ScenarioError::Invalid(format!("unknown technology {tech:?}")))?;
        let mut config = template.clone();
        config.set_identity(cell_id);
        let bits = self.campaign.muting_bits;
        if bits > 0 {
            config.set_muting(Some(MutingPattern::one_hot(bits, (cell_id as usize / 6) % bits)));
        }
        let config = validate(config)
            .map_err(|source| ScenarioError::Config { tech: tech.to_string(), source })?
            .into_inner();
        let valid = match self.valid_subframes.get(tech) {
            Some(bits) => Some(ValidSubframeBitmap::new(bits.clone()).map_err(|source| ScenarioError::Schedule {
                tech: tech.to_string(),
                source,
            })?),
            None => None,
        };
        let schedule = expand(&config, valid.as_ref()).map_err(|source| ScenarioError::Schedule {
            tech: tech.to_string(),
            source,
        })?;
        Ok(CellConfig { config, schedule })
    }

    /// All cells of technology `tech` in cell id order.
    pub fn cell_configs(&self, tech: &str) -> Result<Vec<CellConfig>, ScenarioError> {
        self.deployment()
            .cells
            .iter()
            .map(|c| self.cell_config(tech, c.id))
            .collect()
    }

    fn check(&self) -> Result<(), ScenarioError> {
        let d = &self.deployment;
        let positive = [
            ("deployment.isd_m", d.isd_m),
            ("deployment.carrier_hz", d.carrier_hz),
            ("deployment.sample_rate_hz", d.sample_rate_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(d.coupling_loss_db.is_finite() && d.coupling_loss_db >= 0.0) {
            return Err(ScenarioError::Invalid("deployment.coupling_loss_db must be non-negative".into()));
        }
        if !(d.sync_error_std_s.is_finite() && d.sync_error_std_s >= 0.0) {
            return Err(ScenarioError::Invalid("deployment.sync_error_std_s must be non-negative".into()));
        }
        let n_cells = 3 * (1 + 3 * d.rings as usize * (d.rings as usize + 1));
        if n_cells > 504 {
            return Err(ScenarioError::Invalid(format!(
                "{} rings give {n_cells} cells, more than the 504 physical cell ids",
                d.rings
            )));
        }
        let c = &self.campaign;
        if c.n_occasions == 0 {
            return Err(ScenarioError::Invalid("campaign.n_occasions must be at least 1".into()));
        }
        if c.muting_bits != 0 && !MUTING_LENGTHS.contains(&c.muting_bits) {
            return Err(ScenarioError::Invalid(format!(
                "campaign.muting_bits must be 0 or one of {MUTING_LENGTHS:?}, got {}",
                c.muting_bits
            )));
        }
        for (name, cfg) in &self.tech {
            if cfg.carrier_prbs() != d.carrier_prbs {
                return Err(ScenarioError::Invalid(format!(
                    "tech.{name}: carrier_prbs {} differs from deployment.carrier_prbs {}",
                    cfg.carrier_prbs(),
                    d.carrier_prbs
                )));
            }
            validate(cfg.clone()).map_err(|source| ScenarioError::Config { tech: name.clone(), source })?;
        }
        for name in self.valid_subframes.keys() {
            if !self.tech.contains_key(name) {
                return Err(ScenarioError::Invalid(format!("valid_subframes.{name} names no technology")));
            }
        }
        for name in self.tech.keys() {
            self.cell_configs(name)?;
        }
        Ok(())
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}
