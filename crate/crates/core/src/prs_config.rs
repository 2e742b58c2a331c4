//! Positioning reference signal configurations for LTE, LTE-M and NB-IoT.
//!
//! Three configuration families are supported:
//!
//! * [`LtePrsConfig`]: legacy wideband PRS with periodic positioning occasions.
//! * [`LtemPrsConfig`]: LTE-M PRS with longer occasions, multiple occasions per
//!   legacy period and optional frequency hopping over 6-PRB bands.
//! * [`NprsConfig`]: NB-IoT NPRS configured by a subframe bitmap (Part A), by
//!   periodic occasions (Part B), or by both.
//!
//! Configurations are plain data. [`validate`] checks every field against its
//! allowed domain and returns a [`ValidatedConfig`] that downstream modules
//! accept.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const PRS_BANDWIDTHS_PRBS: [u16; 6] = [6, 15, 25, 50, 75, 100];
pub const LTE_PERIODS: [u16; 4] = [160, 320, 640, 1280];
pub const LTE_OCCASION_LENGTHS: [u16; 4] = [1, 2, 4, 6];
pub const LTEM_PERIODS: [u16; 8] = [10, 20, 40, 80, 160, 320, 640, 1280];
pub const LTEM_OCCASION_LENGTHS: [u16; 9] = [1, 2, 4, 6, 10, 20, 40, 80, 160];
pub const LTEM_OCCASION_INTERVALS: [u16; 4] = [10, 20, 40, 80];
pub const LTEM_MUTING_GROUP_SIZES: [u16; 8] = [1, 2, 4, 8, 16, 32, 64, 128];
pub const NPRS_PERIODS: [u16; 4] = [160, 320, 640, 1280];
pub const NPRS_OCCASION_LENGTHS: [u16; 8] = [10, 20, 40, 80, 160, 320, 640, 1280];
pub const NPRS_BITMAP_LENGTHS: [usize; 2] = [10, 40];
pub const MUTING_LENGTHS: [usize; 4] = [2, 4, 8, 16];
pub const HOPPING_BAND_COUNTS: [u8; 2] = [2, 4];

/// Width of an LTE-M frequency hopping band.
pub const HOPPING_BAND_PRBS: u16 = 6;
pub const MAX_PHYSICAL_CELL_ID: u16 = 503;
pub const MAX_PRS_ID: u16 = 4095;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{field} = {value} is outside the allowed domain {allowed}")]
    DomainViolation {
        field: &'static str,
        value: String,
        allowed: String,
    },
    #[error("NPRS configuration has neither Part A nor Part B")]
    MissingPart,
    #[error("geometry violation: {0}")]
    GeometryViolation(String),
}

impl ConfigError {
    /// Variant name, for reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::DomainViolation { .. } => "DomainViolation",
            ConfigError::MissingPart => "MissingPart",
            ConfigError::GeometryViolation(_) => "GeometryViolation",
        }
    }
}

fn domain<T: fmt::Display + PartialEq>(
    field: &'static str,
    value: T,
    allowed: &[T],
) -> Result<(), ConfigError> {
    if allowed.contains(&value) {
        return Ok(());
    }
    let allowed = allowed
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    Err(ConfigError::DomainViolation {
        field,
        value: value.to_string(),
        allowed: format!("{{{allowed}}}"),
    })
}

fn range(field: &'static str, value: u16, lo: u16, hi_exclusive: u16) -> Result<(), ConfigError> {
    if (lo..hi_exclusive).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::DomainViolation {
            field,
            value: value.to_string(),
            allowed: format!("[{lo},{hi_exclusive})"),
        })
    }
}

/// A sequence of bits written as a `'0'`/`'1'` string, first-applied bit leftmost.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString(Vec<bool>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid bit string {0:?}: expected only '0' and '1'")]
pub struct BitStringParseError(pub String);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, index: usize) -> bool {
        self.0[index]
    }

    /// Bit at `index` with the sequence repeated cyclically.
    pub fn cyclic(&self, index: usize) -> bool {
        self.0[index % self.0.len()]
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl FromStr for BitString {
    type Err = BitStringParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(BitStringParseError(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Muting bit string. Bit value 1 means the PRS is transmitted, 0 means muted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MutingPattern {
    pub bits: BitString,
}

impl MutingPattern {
    pub fn new(bits: BitString) -> Self {
        Self { bits }
    }

    /// Pattern of `len` bits transmitting only in slot `phase`.
    pub fn one_hot(len: usize, phase: usize) -> Self {
        let mut bits = vec![false; len];
        bits[phase % len] = true;
        Self::new(bits.into())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Whether the unit (occasion, occasion group or window) with ordinal
    /// `ordinal` counted from subframe 0 is transmitted.
    pub fn transmits(&self, ordinal: usize) -> bool {
        self.bits.cyclic(ordinal)
    }

    fn validate(&self, field: &'static str) -> Result<(), ConfigError> {
        domain(field, self.bits.len(), &MUTING_LENGTHS)
    }
}

impl FromStr for MutingPattern {
    type Err = BitStringParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(MutingPattern::new)
    }
}

/// Rel-9 LTE PRS configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtePrsConfig {
    /// Host LTE carrier bandwidth.
    #[serde(default = "default_carrier_prbs")]
    pub carrier_prbs: u16,
    pub bandwidth_prbs: u16,
    #[serde(rename = "period_T_prs")]
    pub period_t_prs: u16,
    pub occasion_length: u16,
    #[serde(default)]
    pub subframe_offset: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub muting: Option<MutingPattern>,
    #[serde(default)]
    pub physical_cell_id: u16,
}

/// LTE-M frequency hopping over 6-PRB bands of the host carrier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingConfig {
    pub n_bands: u8,
    /// First PRB of each band; entry 0 is the central band.
    pub band_prb_offsets: Vec<u16>,
}

impl HoppingConfig {
    /// Start PRB of the central 6-PRB band of a `carrier_prbs` carrier.
    pub fn central_band_start(carrier_prbs: u16) -> u16 {
        carrier_prbs.saturating_sub(HOPPING_BAND_PRBS) / 2
    }
}

/// Rel-14 LTE-M PRS configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtemPrsConfig {
    #[serde(default = "default_carrier_prbs")]
    pub carrier_prbs: u16,
    pub bandwidth_prbs: u16,
    #[serde(rename = "period_T_prs")]
    pub period_t_prs: u16,
    pub occasion_length: u16,
    /// Spacing of occasions inside one legacy period; absent means one
    /// occasion per period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occasion_interval: Option<u16>,
    #[serde(default)]
    pub subframe_offset: u16,
    #[serde(default)]
    pub prs_id: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hopping: Option<HoppingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub muting: Option<MutingPattern>,
    /// Occasions gated by one muting bit. Absent means one bit per legacy
    /// period, covering every occasion inside it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub muting_group_size: Option<u16>,
}

impl LtemPrsConfig {
    pub fn occasions_per_period(&self) -> u16 {
        match self.occasion_interval {
            Some(interval) if interval > 0 => self.period_t_prs / interval,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeploymentMode {
    Inband,
    Guardband,
    Standalone,
}

impl fmt::Display for DeploymentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeploymentMode::Inband => "inband",
            DeploymentMode::Guardband => "guardband",
            DeploymentMode::Standalone => "standalone",
        })
    }
}

/// NPRS Part A: subframe bitmap repeated in every radio frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NprsBitmapConfig {
    pub nprs_bitmap: BitString,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub muting: Option<MutingPattern>,
}

/// Subframe offset of NPRS Part B, expressed as a multiple of 1/8 of the period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EighthFraction(u8);

impl EighthFraction {
    pub fn new(eighths: u8) -> Self {
        Self(eighths)
    }

    pub fn eighths(self) -> u8 {
        self.0
    }
}

impl fmt::Display for EighthFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            f.write_str("0")
        } else {
            write!(f, "{}/8", self.0)
        }
    }
}

impl FromStr for EighthFraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid fraction {s:?}: expected \"0\" or \"n/8\"");
        if s == "0" {
            return Ok(Self(0));
        }
        let (num, den) = s.split_once('/').ok_or_else(bad)?;
        if den.trim() != "8" {
            return Err(bad());
        }
        num.trim().parse::<u8>().map(Self).map_err(|_| bad())
    }
}

impl Serialize for EighthFraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EighthFraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// NPRS Part B: periodic positioning occasions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NprsPeriodicConfig {
    #[serde(rename = "period_T_prs")]
    pub period_t_prs: u16,
    #[serde(default)]
    pub offset_fraction_a: EighthFraction,
    pub occasion_length: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub muting: Option<MutingPattern>,
}

/// NB-IoT NPRS configuration of one NB-IoT carrier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NprsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part_a: Option<NprsBitmapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part_b: Option<NprsPeriodicConfig>,
    #[serde(default)]
    pub prs_id: u16,
    pub deployment_mode: DeploymentMode,
    /// PRB of the host LTE carrier occupied by an inband NB-IoT carrier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inband_prb_index: Option<u16>,
    #[serde(default = "default_carrier_prbs")]
    pub carrier_prbs: u16,
}

fn default_carrier_prbs() -> u16 {
    50
}

/// One PRS configuration of any family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PrsConfig {
    Lte(LtePrsConfig),
    Ltem(LtemPrsConfig),
    Nprs(NprsConfig),
}

impl PrsConfig {
    /// Identity driving the frequency shift and sequence initialization:
    /// the physical cell id for LTE, the PRS id otherwise.
    pub fn identity(&self) -> u16 {
        match self {
            PrsConfig::Lte(c) => c.physical_cell_id,
            PrsConfig::Ltem(c) => c.prs_id,
            PrsConfig::Nprs(c) => c.prs_id,
        }
    }

    pub fn set_identity(&mut self, id: u16) {
        match self {
            PrsConfig::Lte(c) => c.physical_cell_id = id,
            PrsConfig::Ltem(c) => c.prs_id = id,
            PrsConfig::Nprs(c) => c.prs_id = id,
        }
    }

    pub fn carrier_prbs(&self) -> u16 {
        match self {
            PrsConfig::Lte(c) => c.carrier_prbs,
            PrsConfig::Ltem(c) => c.carrier_prbs,
            PrsConfig::Nprs(c) => c.carrier_prbs,
        }
    }

    /// Bandwidth of the transmitted PRS in PRBs.
    pub fn prs_bandwidth_prbs(&self) -> u16 {
        match self {
            PrsConfig::Lte(c) => c.bandwidth_prbs,
            PrsConfig::Ltem(c) => c.bandwidth_prbs,
            PrsConfig::Nprs(_) => 1,
        }
    }

    /// Replace every muting pattern of the configuration with `muting`.
    /// NPRS configurations with both parts get it on Part A only.
    pub fn set_muting(&mut self, muting: Option<MutingPattern>) {
        match self {
            PrsConfig::Lte(c) => c.muting = muting,
            PrsConfig::Ltem(c) => c.muting = muting,
            PrsConfig::Nprs(c) => match (&mut c.part_a, &mut c.part_b) {
                (Some(a), _) => a.muting = muting,
                (None, Some(b)) => b.muting = muting,
                (None, None) => {}
            },
        }
    }
}

/// A configuration that passed [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedConfig(PrsConfig);

impl ValidatedConfig {
    pub fn into_inner(self) -> PrsConfig {
        self.0
    }

    pub fn config(&self) -> &PrsConfig {
        &self.0
    }
}

impl Deref for ValidatedConfig {
    type Target = PrsConfig;

    fn deref(&self) -> &PrsConfig {
        &self.0
    }
}

/// Check every field of `config` against its allowed domain.
pub fn validate(config: PrsConfig) -> Result<ValidatedConfig, ConfigError> {
    match &config {
        PrsConfig::Lte(c) => validate_lte(c)?,
        PrsConfig::Ltem(c) => validate_ltem(c)?,
        PrsConfig::Nprs(c) => validate_nprs(c)?,
    }
    Ok(ValidatedConfig(config))
}

fn validate_carrier(carrier_prbs: u16) -> Result<(), ConfigError> {
    domain("carrier_prbs", carrier_prbs, &PRS_BANDWIDTHS_PRBS)
}

fn validate_lte(c: &LtePrsConfig) -> Result<(), ConfigError> {
    validate_carrier(c.carrier_prbs)?;
    domain("bandwidth_prbs", c.bandwidth_prbs, &PRS_BANDWIDTHS_PRBS)?;
    domain("period_T_prs", c.period_t_prs, &LTE_PERIODS)?;
    domain("occasion_length", c.occasion_length, &LTE_OCCASION_LENGTHS)?;
    range("subframe_offset", c.subframe_offset, 0, c.period_t_prs)?;
    range("physical_cell_id", c.physical_cell_id, 0, MAX_PHYSICAL_CELL_ID + 1)?;
    if let Some(m) = &c.muting {
        m.validate("muting")?;
    }
    if c.bandwidth_prbs > c.carrier_prbs {
        return Err(ConfigError::GeometryViolation(format!(
            "PRS bandwidth {} PRB exceeds the {}-PRB carrier",
            c.bandwidth_prbs, c.carrier_prbs
        )));
    }
    Ok(())
}

fn validate_ltem(c: &LtemPrsConfig) -> Result<(), ConfigError> {
    validate_carrier(c.carrier_prbs)?;
    domain("bandwidth_prbs", c.bandwidth_prbs, &PRS_BANDWIDTHS_PRBS)?;
    domain("period_T_prs", c.period_t_prs, &LTEM_PERIODS)?;
    domain("occasion_length", c.occasion_length, &LTEM_OCCASION_LENGTHS)?;
    if let Some(interval) = c.occasion_interval {
        domain("occasion_interval", interval, &LTEM_OCCASION_INTERVALS)?;
    }
    range("subframe_offset", c.subframe_offset, 0, c.period_t_prs)?;
    range("prs_id", c.prs_id, 0, MAX_PRS_ID + 1)?;
    if let Some(m) = &c.muting {
        m.validate("muting")?;
    }
    if let Some(g) = c.muting_group_size {
        domain("muting_group_size", g, &LTEM_MUTING_GROUP_SIZES)?;
    }
    if c.bandwidth_prbs > c.carrier_prbs {
        return Err(ConfigError::GeometryViolation(format!(
            "PRS bandwidth {} PRB exceeds the {}-PRB carrier",
            c.bandwidth_prbs, c.carrier_prbs
        )));
    }
    match c.occasion_interval {
        Some(interval) => {
            if c.occasion_length > interval {
                return Err(ConfigError::GeometryViolation(format!(
                    "occasion_length {} exceeds occasion_interval {interval}",
                    c.occasion_length
                )));
            }
            if interval > c.period_t_prs {
                return Err(ConfigError::GeometryViolation(format!(
                    "occasion_interval {interval} exceeds period_T_prs {}",
                    c.period_t_prs
                )));
            }
        }
        None => {
            if c.occasion_length > c.period_t_prs {
                return Err(ConfigError::GeometryViolation(format!(
                    "occasion_length {} exceeds period_T_prs {}",
                    c.occasion_length, c.period_t_prs
                )));
            }
        }
    }
    if let Some(h) = &c.hopping {
        validate_hopping(h, c.bandwidth_prbs, c.carrier_prbs)?;
    }
    Ok(())
}

fn validate_hopping(h: &HoppingConfig, bandwidth_prbs: u16, carrier_prbs: u16) -> Result<(), ConfigError> {
    domain("n_bands", h.n_bands, &HOPPING_BAND_COUNTS)?;
    if bandwidth_prbs != HOPPING_BAND_PRBS {
        return Err(ConfigError::GeometryViolation(format!(
            "frequency hopping needs a {HOPPING_BAND_PRBS}-PRB PRS, got {bandwidth_prbs}"
        )));
    }
    if h.band_prb_offsets.len() != h.n_bands as usize {
        return Err(ConfigError::GeometryViolation(format!(
            "{} band offsets given for {} bands",
            h.band_prb_offsets.len(),
            h.n_bands
        )));
    }
    let centre = HoppingConfig::central_band_start(carrier_prbs);
    if h.band_prb_offsets[0] != centre {
        return Err(ConfigError::GeometryViolation(format!(
            "first hopping band starts at PRB {} but the carrier centre band starts at {centre}",
            h.band_prb_offsets[0]
        )));
    }
    for &start in &h.band_prb_offsets {
        if start + HOPPING_BAND_PRBS > carrier_prbs {
            return Err(ConfigError::GeometryViolation(format!(
                "hopping band at PRB {start} leaves the {carrier_prbs}-PRB carrier"
            )));
        }
    }
    Ok(())
}

fn validate_nprs(c: &NprsConfig) -> Result<(), ConfigError> {
    if c.part_a.is_none() && c.part_b.is_none() {
        return Err(ConfigError::MissingPart);
    }
    validate_carrier(c.carrier_prbs)?;
    range("prs_id", c.prs_id, 0, MAX_PRS_ID + 1)?;
    if let Some(a) = &c.part_a {
        domain("nprs_bitmap", a.nprs_bitmap.len(), &NPRS_BITMAP_LENGTHS)?;
        if let Some(m) = &a.muting {
            m.validate("part_a.muting")?;
        }
    }
    if let Some(b) = &c.part_b {
        domain("period_T_prs", b.period_t_prs, &NPRS_PERIODS)?;
        domain("offset_fraction_a", b.offset_fraction_a.eighths(), &[0, 1, 2, 3, 4, 5, 6, 7])?;
        domain("occasion_length", b.occasion_length, &NPRS_OCCASION_LENGTHS)?;
        if let Some(m) = &b.muting {
            m.validate("part_b.muting")?;
        }
        if b.occasion_length > b.period_t_prs {
            return Err(ConfigError::GeometryViolation(format!(
                "occasion_length {} exceeds period_T_prs {}",
                b.occasion_length, b.period_t_prs
            )));
        }
    }
    match (c.deployment_mode, c.inband_prb_index) {
        (DeploymentMode::Inband, Some(prb)) => {
            if prb >= c.carrier_prbs {
                return Err(ConfigError::GeometryViolation(format!(
                    "inband PRB {prb} is outside the {}-PRB carrier",
                    c.carrier_prbs
                )));
            }
        }
        (DeploymentMode::Inband, None) => {
            return Err(ConfigError::GeometryViolation(
                "inband NPRS needs inband_prb_index".into(),
            ))
        }
        (mode, Some(_)) => {
            return Err(ConfigError::GeometryViolation(format!(
                "inband_prb_index given for {mode} deployment"
            )))
        }
        (_, None) => {}
    }
    Ok(())
}

/// Subframe offset of a Part B configuration: `a * T_prs`.
pub fn partb_offset_subframes(cfg: &NprsPeriodicConfig) -> u16 {
    // Every legal period is a multiple of 8, so the product is exact.
    cfg.period_t_prs / 8 * cfg.offset_fraction_a.eighths() as u16
}

/// Reuse-6 frequency shift of a cell or PRS identity.
pub fn frequency_shift(id: u16) -> u8 {
    (id % 6) as u8
}

/// Random valid configurations, used by property tests and fuzzing tools.
pub mod sample {
    use rand::seq::IndexedRandom;
    use rand::Rng;

    use super::*;

    fn pick<T: Copy, R: Rng + ?Sized>(rng: &mut R, values: &[T]) -> T {
        *values.choose(rng).expect("non-empty domain")
    }

    fn bits<R: Rng + ?Sized>(rng: &mut R, len: usize) -> BitString {
        (0..len).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>().into()
    }

    pub fn muting<R: Rng + ?Sized>(rng: &mut R) -> Option<MutingPattern> {
        if rng.random_bool(0.3) {
            None
        } else {
            let len = pick(rng, &MUTING_LENGTHS);
            Some(MutingPattern::new(bits(rng, len)))
        }
    }

    pub fn lte<R: Rng + ?Sized>(rng: &mut R) -> LtePrsConfig {
        let carrier_prbs = pick(rng, &PRS_BANDWIDTHS_PRBS);
        let allowed: Vec<u16> = PRS_BANDWIDTHS_PRBS
            .iter()
            .copied()
            .filter(|&b| b <= carrier_prbs)
            .collect();
        let period = pick(rng, &LTE_PERIODS);
        LtePrsConfig {
            carrier_prbs,
            bandwidth_prbs: pick(rng, &allowed),
            period_t_prs: period,
            occasion_length: pick(rng, &LTE_OCCASION_LENGTHS),
            subframe_offset: rng.random_range(0..period),
            muting: muting(rng),
            physical_cell_id: rng.random_range(0..=MAX_PHYSICAL_CELL_ID),
        }
    }

    pub fn ltem<R: Rng + ?Sized>(rng: &mut R) -> LtemPrsConfig {
        let carrier_prbs = pick(rng, &PRS_BANDWIDTHS_PRBS);
        let period = pick(rng, &LTEM_PERIODS);
        let occasion_interval = if rng.random_bool(0.5) {
            let intervals: Vec<u16> = LTEM_OCCASION_INTERVALS
                .iter()
                .copied()
                .filter(|&i| i <= period)
                .collect();
            Some(pick(rng, &intervals))
        } else {
            None
        };
        let limit = occasion_interval.unwrap_or(period);
        let lengths: Vec<u16> = LTEM_OCCASION_LENGTHS
            .iter()
            .copied()
            .filter(|&l| l <= limit)
            .collect();
        let hopping = if rng.random_bool(0.4) {
            let n_bands = pick(rng, &HOPPING_BAND_COUNTS);
            let mut band_prb_offsets = vec![HoppingConfig::central_band_start(carrier_prbs)];
            for _ in 1..n_bands {
                band_prb_offsets.push(rng.random_range(0..=carrier_prbs - HOPPING_BAND_PRBS));
            }
            Some(HoppingConfig {
                n_bands,
                band_prb_offsets,
            })
        } else {
            None
        };
        let bandwidth_prbs = if hopping.is_some() {
            HOPPING_BAND_PRBS
        } else {
            let allowed: Vec<u16> = PRS_BANDWIDTHS_PRBS
                .iter()
                .copied()
                .filter(|&b| b <= carrier_prbs)
                .collect();
            pick(rng, &allowed)
        };
        LtemPrsConfig {
            carrier_prbs,
            bandwidth_prbs,
            period_t_prs: period,
            occasion_length: pick(rng, &lengths),
            occasion_interval,
            subframe_offset: rng.random_range(0..period),
            prs_id: rng.random_range(0..=MAX_PRS_ID),
            hopping,
            muting: muting(rng),
            muting_group_size: if rng.random_bool(0.5) {
                Some(pick(rng, &LTEM_MUTING_GROUP_SIZES))
            } else {
                None
            },
        }
    }

    pub fn nprs<R: Rng + ?Sized>(rng: &mut R) -> NprsConfig {
        let which = rng.random_range(0..3);
        let part_a = (which != 1).then(|| {
            let len = pick(rng, &NPRS_BITMAP_LENGTHS);
            NprsBitmapConfig {
                nprs_bitmap: bits(rng, len),
                muting: muting(rng),
            }
        });
        let part_b = (which != 0).then(|| {
            let period = pick(rng, &NPRS_PERIODS);
            let lengths: Vec<u16> = NPRS_OCCASION_LENGTHS
                .iter()
                .copied()
                .filter(|&l| l <= period)
                .collect();
            NprsPeriodicConfig {
                period_t_prs: period,
                offset_fraction_a: EighthFraction::new(rng.random_range(0..8)),
                occasion_length: pick(rng, &lengths),
                muting: muting(rng),
            }
        });
        let carrier_prbs = pick(rng, &PRS_BANDWIDTHS_PRBS);
        let deployment_mode = pick(
            rng,
            &[
                DeploymentMode::Inband,
                DeploymentMode::Guardband,
                DeploymentMode::Standalone,
            ],
        );
        NprsConfig {
            part_a,
            part_b,
            prs_id: rng.random_range(0..=MAX_PRS_ID),
            deployment_mode,
            inband_prb_index: (deployment_mode == DeploymentMode::Inband)
                .then(|| rng.random_range(0..carrier_prbs)),
            carrier_prbs,
        }
    }

    pub fn any<R: Rng + ?Sized>(rng: &mut R) -> PrsConfig {
        match rng.random_range(0..3) {
            0 => PrsConfig::Lte(lte(rng)),
            1 => PrsConfig::Ltem(ltem(rng)),
            _ => PrsConfig::Nprs(nprs(rng)),
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn fig5_lte() -> LtePrsConfig {
        LtePrsConfig {
            carrier_prbs: 50,
            bandwidth_prbs: 50,
            period_t_prs: 160,
            occasion_length: 1,
            subframe_offset: 0,
            muting: None,
            physical_cell_id: 0,
        }
    }

    fn fig3_ltem() -> LtemPrsConfig {
        LtemPrsConfig {
            carrier_prbs: 50,
            bandwidth_prbs: 6,
            period_t_prs: 160,
            occasion_length: 6,
            occasion_interval: Some(80),
            subframe_offset: 0,
            prs_id: 0,
            hopping: None,
            muting: None,
            muting_group_size: None,
        }
    }

    #[test]
    fn wideband_lte_config_is_valid() {
        assert!(validate(PrsConfig::Lte(fig5_lte())).is_ok());
    }

    #[test]
    fn nprs_without_parts_is_missing_part() {
        let cfg = NprsConfig {
            part_a: None,
            part_b: None,
            prs_id: 3,
            deployment_mode: DeploymentMode::Standalone,
            inband_prb_index: None,
            carrier_prbs: 50,
        };
        assert_eq!(validate(PrsConfig::Nprs(cfg)), Err(ConfigError::MissingPart));
    }

    #[test]
    fn ltem_occasion_longer_than_interval_is_rejected() {
        let mut cfg = fig3_ltem();
        cfg.occasion_length = 160;
        cfg.occasion_interval = Some(10);
        assert!(matches!(
            validate(PrsConfig::Ltem(cfg)),
            Err(ConfigError::GeometryViolation(_))
        ));
    }

    #[test]
    fn out_of_domain_values_name_the_field() {
        let mut cfg = fig5_lte();
        cfg.period_t_prs = 100;
        match validate(PrsConfig::Lte(cfg)) {
            Err(ConfigError::DomainViolation { field, value, .. }) => {
                assert_eq!(field, "period_T_prs");
                assert_eq!(value, "100");
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut cfg = fig5_lte();
        cfg.bandwidth_prbs = 10;
        assert!(matches!(
            validate(PrsConfig::Lte(cfg)),
            Err(ConfigError::DomainViolation { field: "bandwidth_prbs", .. })
        ));

        let mut cfg = fig5_lte();
        cfg.subframe_offset = 160;
        assert!(matches!(
            validate(PrsConfig::Lte(cfg)),
            Err(ConfigError::DomainViolation { field: "subframe_offset", .. })
        ));

        let mut cfg = fig5_lte();
        cfg.muting = Some("010".parse().unwrap());
        assert!(matches!(
            validate(PrsConfig::Lte(cfg)),
            Err(ConfigError::DomainViolation { field: "muting", .. })
        ));
    }

    #[test]
    fn hopping_band_outside_carrier_is_geometry_violation() {
        let mut cfg = fig3_ltem();
        cfg.hopping = Some(HoppingConfig {
            n_bands: 2,
            band_prb_offsets: vec![22, 46],
        });
        assert!(matches!(
            validate(PrsConfig::Ltem(cfg.clone())),
            Err(ConfigError::GeometryViolation(_))
        ));
        cfg.hopping = Some(HoppingConfig {
            n_bands: 2,
            band_prb_offsets: vec![0, 10],
        });
        assert!(matches!(
            validate(PrsConfig::Ltem(cfg.clone())),
            Err(ConfigError::GeometryViolation(_))
        ));
        cfg.hopping = Some(HoppingConfig {
            n_bands: 2,
            band_prb_offsets: vec![22, 44],
        });
        assert!(validate(PrsConfig::Ltem(cfg)).is_ok());
    }

    #[test]
    fn nprs_bitmap_length_is_ten_or_forty() {
        let mut cfg = NprsConfig {
            part_a: Some(NprsBitmapConfig {
                nprs_bitmap: BitString::ones(20),
                muting: None,
            }),
            part_b: None,
            prs_id: 0,
            deployment_mode: DeploymentMode::Standalone,
            inband_prb_index: None,
            carrier_prbs: 50,
        };
        assert!(validate(PrsConfig::Nprs(cfg.clone())).is_err());
        cfg.part_a.as_mut().unwrap().nprs_bitmap = BitString::ones(40);
        assert!(validate(PrsConfig::Nprs(cfg)).is_ok());
    }

    #[test]
    fn partb_offsets() {
        let mk = |t, a| NprsPeriodicConfig {
            period_t_prs: t,
            offset_fraction_a: EighthFraction::new(a),
            occasion_length: 10,
            muting: None,
        };
        assert_eq!(partb_offset_subframes(&mk(160, 3)), 60);
        assert_eq!(partb_offset_subframes(&mk(1280, 0)), 0);
        // 320 * 7 / 8 evaluated in exact rational arithmetic.
        assert_eq!(partb_offset_subframes(&mk(320, 7)), 320 * 7 / 8);
        assert_eq!(partb_offset_subframes(&mk(320, 7)), 280);
    }

    #[test]
    fn partb_offset_is_exact_for_every_legal_combination() {
        for &t in &NPRS_PERIODS {
            for a in 0..8u16 {
                assert_eq!((t * a) % 8, 0);
                assert_eq!(
                    partb_offset_subframes(&NprsPeriodicConfig {
                        period_t_prs: t,
                        offset_fraction_a: EighthFraction::new(a as u8),
                        occasion_length: 10,
                        muting: None,
                    }),
                    t * a / 8
                );
            }
        }
    }

    #[test]
    fn frequency_shift_is_mod_six() {
        assert_eq!(frequency_shift(7), 1);
        assert_eq!(frequency_shift(0), 0);
        assert_eq!(frequency_shift(503), (503 % 6) as u8);
        assert_eq!(frequency_shift(503), 5);
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!("3/8".parse::<EighthFraction>().unwrap().eighths(), 3);
        assert_eq!("0".parse::<EighthFraction>().unwrap().eighths(), 0);
        assert!("3/4".parse::<EighthFraction>().is_err());
        assert_eq!(EighthFraction::new(5).to_string(), "5/8");
    }

    #[test]
    fn bit_strings_parse_leftmost_first() {
        let b: BitString = "0110".parse().unwrap();
        assert_eq!(b.bits(), &[false, true, true, false]);
        assert_eq!(b.to_string(), "0110");
        assert!("01a".parse::<BitString>().is_err());
    }

    #[test]
    fn sampled_configs_validate_and_validation_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let cfg = sample::any(&mut rng);
            let once = validate(cfg.clone()).unwrap_or_else(|e| panic!("{cfg:?}: {e}"));
            let twice = validate(once.clone().into_inner()).unwrap();
            assert_eq!(once, twice);
            assert_eq!(once.config(), &cfg);
        }
    }
}
