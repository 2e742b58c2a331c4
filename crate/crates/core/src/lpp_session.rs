//! Simplified two-party LPP positioning session and its binary encoding.
//!
//! Wire format: version byte, message tag byte, little-endian `u32` payload
//! length, payload. Integers are little-endian, vectors carry a `u16` count,
//! optional fields a presence byte, and bit strings a `u16` bit count
//! followed by the bits packed LSB first.

use std::fmt;

use thiserror::Error;

use crate::prs_config::{
    BitString, DeploymentMode, EighthFraction, HoppingConfig, LtePrsConfig, LtemPrsConfig, MutingPattern,
    NprsBitmapConfig, NprsConfig, NprsPeriodicConfig, PrsConfig,
};
use crate::receiver::RstdMeasurement;
use crate::scheduler::CYCLE_SUBFRAMES;

pub const WIRE_VERSION: u8 = 1;
pub const DEFAULT_RESPONSE_DEADLINE_SUBFRAMES: u32 = CYCLE_SUBFRAMES;
const HEADER_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandwidthClass {
    M1,
    M2,
    Nb,
    Wideband,
}

impl BandwidthClass {
    fn tag(self) -> u8 {
        match self {
            BandwidthClass::M1 => 0,
            BandwidthClass::M2 => 1,
            BandwidthClass::Nb => 2,
            BandwidthClass::Wideband => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capabilities {
    pub supported_bands: Vec<u16>,
    pub max_bandwidth: BandwidthClass,
    pub inter_frequency_rstd: bool,
}

/// PRS configuration of one cell as delivered to the UE.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAssistance {
    pub cell_id: u16,
    pub band: u16,
    pub config: PrsConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssistanceData {
    pub reference: CellAssistance,
    pub neighbors: Vec<CellAssistance>,
}

impl AssistanceData {
    /// Copy keeping only neighbours on bands in `bands`.
    pub fn restricted_to(&self, bands: &[u16]) -> Self {
        Self {
            reference: self.reference.clone(),
            neighbors: self.neighbors.iter().filter(|c| bands.contains(&c.band)).cloned().collect(),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = &CellAssistance> {
        std::iter::once(&self.reference).chain(&self.neighbors)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LppMessage {
    RequestCapabilities,
    ProvideCapabilities(Capabilities),
    ProvideAssistanceData(AssistanceData),
    RequestLocationInformation { response_time_subframes: u32 },
    ProvideLocationInformation(Vec<RstdMeasurement>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    RequestCapabilities,
    ProvideCapabilities,
    ProvideAssistanceData,
    RequestLocationInformation,
    ProvideLocationInformation,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl LppMessage {
    pub fn kind(&self) -> MessageKind {
        match self {
            LppMessage::RequestCapabilities => MessageKind::RequestCapabilities,
            LppMessage::ProvideCapabilities(_) => MessageKind::ProvideCapabilities,
            LppMessage::ProvideAssistanceData(_) => MessageKind::ProvideAssistanceData,
            LppMessage::RequestLocationInformation { .. } => MessageKind::RequestLocationInformation,
            LppMessage::ProvideLocationInformation(_) => MessageKind::ProvideLocationInformation,
        }
    }

    fn tag(&self) -> u8 {
        self.kind() as u8 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Idle,
    CapabilitiesExchanged,
    AssistanceDelivered,
    AwaitingLocation,
    Done,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LppError {
    #[error("protocol error in phase {phase:?}: expected {expected}, got {got}")]
    ProtocolError {
        phase: Phase,
        expected: String,
        got: MessageKind,
    },
    #[error("response after {elapsed} subframes exceeds the deadline of {deadline}")]
    DeadlineExceeded { elapsed: u64, deadline: u32 },
    #[error("malformed message at byte {offset}: {reason}")]
    MalformedMessage { offset: usize, reason: String },
}

fn protocol_error(phase: Phase, expected: &str, got: &LppMessage) -> LppError {
    LppError::ProtocolError {
        phase,
        expected: expected.to_string(),
        got: got.kind(),
    }
}

/// Location-server side of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerSession {
    phase: Phase,
    assistance: AssistanceData,
    capabilities: Option<Capabilities>,
    capabilities_requested: bool,
    deadline_subframes: u32,
    clock: u64,
    requested_at: u64,
    location: Option<Vec<RstdMeasurement>>,
}

impl ServerSession {
    /// Session offering `assistance` for all cells it knows about.
    pub fn new(assistance: AssistanceData) -> Self {
        Self {
            phase: Phase::Idle,
            assistance,
            capabilities: None,
            capabilities_requested: false,
            deadline_subframes: DEFAULT_RESPONSE_DEADLINE_SUBFRAMES,
            clock: 0,
            requested_at: 0,
            location: None,
        }
    }

    pub fn with_deadline(mut self, subframes: u32) -> Self {
        self.deadline_subframes = subframes;
        self
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn capabilities(&self) -> Option<&Capabilities> {
        self.capabilities.as_ref()
    }

    pub fn location(&self) -> Option<&[RstdMeasurement]> {
        self.location.as_deref()
    }

    /// Advance simulated time.
    pub fn advance(&mut self, subframes: u64) {
        self.clock += subframes;
    }

    pub fn request_capabilities(&mut self) -> Result<LppMessage, LppError> {
        if self.phase != Phase::Idle {
            return Err(LppError::ProtocolError {
                phase: self.phase,
                expected: "no capability request after Idle".into(),
                got: MessageKind::RequestCapabilities,
            });
        }
        self.capabilities_requested = true;
        Ok(LppMessage::RequestCapabilities)
    }

    /// Assistance data restricted to the bands the UE reported.
    pub fn provide_assistance(&mut self) -> Result<LppMessage, LppError> {
        let caps = match (&self.phase, &self.capabilities) {
            (Phase::CapabilitiesExchanged, Some(c)) => c,
            _ => {
                return Err(LppError::ProtocolError {
                    phase: self.phase,
                    expected: "capabilities before assistance data".into(),
                    got: MessageKind::ProvideAssistanceData,
                })
            }
        };
        let data = self.assistance.restricted_to(&caps.supported_bands);
        self.phase = Phase::AssistanceDelivered;
        Ok(LppMessage::ProvideAssistanceData(data))
    }

    pub fn request_location(&mut self) -> Result<LppMessage, LppError> {
        if self.phase != Phase::AssistanceDelivered {
            return Err(LppError::ProtocolError {
                phase: self.phase,
                expected: "assistance data before a location request".into(),
                got: MessageKind::RequestLocationInformation,
            });
        }
        self.phase = Phase::AwaitingLocation;
        self.requested_at = self.clock;
        Ok(LppMessage::RequestLocationInformation {
            response_time_subframes: self.deadline_subframes,
        })
    }

    /// Handle a message from the UE. Errors leave the session unchanged.
    pub fn step(&mut self, incoming: LppMessage) -> Result<Option<LppMessage>, LppError> {
        match (self.phase, incoming) {
            (Phase::Idle, LppMessage::ProvideCapabilities(caps)) if self.capabilities_requested => {
                self.capabilities = Some(caps);
                self.phase = Phase::CapabilitiesExchanged;
                Ok(None)
            }
            (Phase::AwaitingLocation, LppMessage::ProvideLocationInformation(rstds)) => {
                let elapsed = self.clock - self.requested_at;
                if elapsed > u64::from(self.deadline_subframes) {
                    return Err(LppError::DeadlineExceeded {
                        elapsed,
                        deadline: self.deadline_subframes,
                    });
                }
                self.location = Some(rstds);
                self.phase = Phase::Done;
                Ok(None)
            }
            (phase, msg) => {
                let expected = match phase {
                    Phase::Idle => "ProvideCapabilities after a capability request",
                    Phase::AwaitingLocation => "ProvideLocationInformation",
                    _ => "no message from the UE",
                };
                Err(protocol_error(phase, expected, &msg))
            }
        }
    }
}

/// UE side of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct UeSession {
    phase: Phase,
    capabilities: Capabilities,
    assistance: Option<AssistanceData>,
    clock: u64,
    requested_at: u64,
    response_time: u32,
}

impl UeSession {
    pub fn new(capabilities: Capabilities) -> Self {
        Self {
            phase: Phase::Idle,
            capabilities,
            assistance: None,
            clock: 0,
            requested_at: 0,
            response_time: DEFAULT_RESPONSE_DEADLINE_SUBFRAMES,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Assistance data received from the server, once delivered.
    pub fn assistance(&self) -> Option<&AssistanceData> {
        self.assistance.as_ref()
    }

    pub fn advance(&mut self, subframes: u64) {
        self.clock += subframes;
    }

    /// Handle a message from the server. Errors leave the session unchanged.
    pub fn step(&mut self, incoming: LppMessage) -> Result<Option<LppMessage>, LppError> {
        match (self.phase, incoming) {
            (Phase::Idle, LppMessage::RequestCapabilities) => {
                self.phase = Phase::CapabilitiesExchanged;
                Ok(Some(LppMessage::ProvideCapabilities(self.capabilities.clone())))
            }
            (Phase::CapabilitiesExchanged, LppMessage::ProvideAssistanceData(data)) => {
                self.assistance = Some(data);
                self.phase = Phase::AssistanceDelivered;
                Ok(None)
            }
            (Phase::AssistanceDelivered, LppMessage::RequestLocationInformation { response_time_subframes }) => {
                self.response_time = response_time_subframes;
                self.requested_at = self.clock;
                self.phase = Phase::AwaitingLocation;
                Ok(None)
            }
            (phase, msg) => {
                let expected = match phase {
                    Phase::Idle => "RequestCapabilities",
                    Phase::CapabilitiesExchanged => "ProvideAssistanceData",
                    Phase::AssistanceDelivered => "RequestLocationInformation",
                    _ => "no further server message",
                };
                Err(protocol_error(phase, expected, &msg))
            }
        }
    }

    /// Report measurements made with the delivered assistance data.
    pub fn provide_location(&mut self, rstds: Vec<RstdMeasurement>) -> Result<LppMessage, LppError> {
        let msg = LppMessage::ProvideLocationInformation(rstds);
        if self.phase != Phase::AwaitingLocation {
            return Err(protocol_error(self.phase, "a pending location request", &msg));
        }
        let elapsed = self.clock - self.requested_at;
        if elapsed > u64::from(self.response_time) {
            return Err(LppError::DeadlineExceeded {
                elapsed,
                deadline: self.response_time,
            });
        }
        self.phase = Phase::Done;
        Ok(msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ServerToUe,
    UeToServer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub message: LppMessage,
    pub bytes: Vec<u8>,
}

/// Complete session between a server and a UE; the UE measures with
/// `measure` once it has the assistance data. Every message goes through the
/// wire encoding.
pub fn run_session(
    server: &mut ServerSession,
    ue: &mut UeSession,
    measure: impl FnOnce(&AssistanceData) -> Vec<RstdMeasurement>,
) -> Result<Vec<TranscriptEntry>, LppError> {
    let mut log = Vec::new();
    let send = |direction, msg: LppMessage, log: &mut Vec<TranscriptEntry>| -> Result<LppMessage, LppError> {
        let bytes = encode(&msg);
        let decoded = decode(&bytes)?;
        log.push(TranscriptEntry { direction, message: msg, bytes });
        Ok(decoded)
    };
    let m = send(Direction::ServerToUe, server.request_capabilities()?, &mut log)?;
    let reply = ue.step(m)?.expect("capability request is answered");
    let m = send(Direction::UeToServer, reply, &mut log)?;
    server.step(m)?;
    let m = send(Direction::ServerToUe, server.provide_assistance()?, &mut log)?;
    ue.step(m)?;
    let m = send(Direction::ServerToUe, server.request_location()?, &mut log)?;
    ue.step(m)?;
    let rstds = measure(ue.assistance().expect("assistance delivered"));
    let m = send(Direction::UeToServer, ue.provide_location(rstds)?, &mut log)?;
    server.step(m)?;
    Ok(log)
}

pub fn encode(msg: &LppMessage) -> Vec<u8> {
    let mut w = Writer::default();
    match msg {
        LppMessage::RequestCapabilities => {}
        LppMessage::ProvideCapabilities(c) => {
            w.len(c.supported_bands.len());
            c.supported_bands.iter().for_each(|b| w.u16(*b));
            w.u8(c.max_bandwidth.tag());
            w.bool(c.inter_frequency_rstd);
        }
        LppMessage::ProvideAssistanceData(a) => {
            w.cell(&a.reference);
            w.len(a.neighbors.len());
            a.neighbors.iter().for_each(|c| w.cell(c));
        }
        LppMessage::RequestLocationInformation { response_time_subframes } => w.u32(*response_time_subframes),
        LppMessage::ProvideLocationInformation(rstds) => {
            w.len(rstds.len());
            for r in rstds {
                w.u16(r.neighbor_cell_id);
                w.u16(r.reference_cell_id);
                w.f64(r.rstd_s);
                w.f64(r.quality_db);
            }
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + w.0.len());
    out.push(WIRE_VERSION);
    out.push(msg.tag());
    out.extend_from_slice(&(w.0.len() as u32).to_le_bytes());
    out.extend_from_slice(&w.0);
    out
}

pub fn decode(bytes: &[u8]) -> Result<LppMessage, LppError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(malformed(0, format!("unsupported version {version}")));
    }
    let tag = r.u8()?;
    let len = r.u32()? as usize;
    if bytes.len() != HEADER_LEN + len {
        return Err(malformed(
            bytes.len().min(HEADER_LEN + len),
            format!("payload length {len} does not match {} available bytes", bytes.len() - HEADER_LEN),
        ));
    }
    let msg = match tag {
        1 => LppMessage::RequestCapabilities,
        2 => {
            let n = r.len()?;
            let supported_bands = (0..n).map(|_| r.u16()).collect::<Result<_, _>>()?;
            let at = r.pos;
            let max_bandwidth = match r.u8()? {
                0 => BandwidthClass::M1,
                1 => BandwidthClass::M2,
                2 => BandwidthClass::Nb,
                3 => BandwidthClass::Wideband,
                t => return Err(malformed(at, format!("unknown bandwidth class {t}"))),
            };
            LppMessage::ProvideCapabilities(Capabilities {
                supported_bands,
                max_bandwidth,
                inter_frequency_rstd: r.bool()?,
            })
        }
        3 => {
            let reference = r.cell()?;
            let n = r.len()?;
            let neighbors = (0..n).map(|_| r.cell()).collect::<Result<_, _>>()?;
            LppMessage::ProvideAssistanceData(AssistanceData { reference, neighbors })
        }
        4 => LppMessage::RequestLocationInformation {
            response_time_subframes: r.u32()?,
        },
        5 => {
            let n = r.len()?;
            let rstds = (0..n)
                .map(|_| {
                    Ok(RstdMeasurement {
                        neighbor_cell_id: r.u16()?,
                        reference_cell_id: r.u16()?,
                        rstd_s: r.f64()?,
                        quality_db: r.f64()?,
                    })
                })
                .collect::<Result<_, LppError>>()?;
            LppMessage::ProvideLocationInformation(rstds)
        }
        t => return Err(malformed(1, format!("unknown message tag {t}"))),
    };
    if r.pos != bytes.len() {
        return Err(malformed(r.pos, "trailing bytes after payload".into()));
    }
    Ok(msg)
}

fn malformed(offset: usize, reason: String) -> LppError {
    LppError::MalformedMessage { offset, reason }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn bool(&mut self, v: bool) {
        self.u8(v as u8);
    }

    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn len(&mut self, n: usize) {
        self.u16(u16::try_from(n).expect("at most 65535 elements per list"));
    }

    fn opt_u16(&mut self, v: Option<u16>) {
        self.bool(v.is_some());
        if let Some(v) = v {
            self.u16(v);
        }
    }

    fn bits(&mut self, b: &BitString) {
        self.len(b.len());
        for chunk in b.bits().chunks(8) {
            self.u8(chunk.iter().enumerate().fold(0, |acc, (i, &bit)| acc | ((bit as u8) << i)));
        }
    }

    fn muting(&mut self, m: &Option<MutingPattern>) {
        self.bool(m.is_some());
        if let Some(m) = m {
            self.bits(&m.bits);
        }
    }

    fn cell(&mut self, c: &CellAssistance) {
        self.u16(c.cell_id);
        self.u16(c.band);
        self.config(&c.config);
    }

    fn config(&mut self, cfg: &PrsConfig) {
        match cfg {
            PrsConfig::Lte(c) => {
                self.u8(0);
                for v in [c.carrier_prbs, c.bandwidth_prbs, c.period_t_prs, c.occasion_length, c.subframe_offset] {
                    self.u16(v);
                }
                self.muting(&c.muting);
                self.u16(c.physical_cell_id);
            }
            PrsConfig::Ltem(c) => {
                self.u8(1);
                for v in [c.carrier_prbs, c.bandwidth_prbs, c.period_t_prs, c.occasion_length] {
                    self.u16(v);
                }
                self.opt_u16(c.occasion_interval);
                self.u16(c.subframe_offset);
                self.u16(c.prs_id);
                self.bool(c.hopping.is_some());
                if let Some(h) = &c.hopping {
                    self.u8(h.n_bands);
                    self.len(h.band_prb_offsets.len());
                    h.band_prb_offsets.iter().for_each(|o| self.u16(*o));
                }
                self.muting(&c.muting);
                self.opt_u16(c.muting_group_size);
            }
            PrsConfig::Nprs(c) => {
                self.u8(2);
                self.bool(c.part_a.is_some());
                if let Some(a) = &c.part_a {
                    self.bits(&a.nprs_bitmap);
                    self.muting(&a.muting);
                }
                self.bool(c.part_b.is_some());
                if let Some(b) = &c.part_b {
                    self.u16(b.period_t_prs);
                    self.u8(b.offset_fraction_a.eighths());
                    self.u16(b.occasion_length);
                    self.muting(&b.muting);
                }
                self.u16(c.prs_id);
                self.u8(match c.deployment_mode {
                    DeploymentMode::Inband => 0,
                    DeploymentMode::Guardband => 1,
                    DeploymentMode::Standalone => 2,
                });
                self.opt_u16(c.inband_prb_index);
                self.u16(c.carrier_prbs);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], LppError> {
        let end = self.pos + N;
        let slice = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| malformed(self.pos, format!("truncated: {N} more bytes needed")))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice has N bytes"))
    }

    fn u8(&mut self) -> Result<u8, LppError> {
        Ok(self.take::<1>()?[0])
    }

    fn bool(&mut self) -> Result<bool, LppError> {
        let at = self.pos;
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(malformed(at, format!("flag byte {v} is neither 0 nor 1"))),
        }
    }

    fn u16(&mut self) -> Result<u16, LppError> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32, LppError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, LppError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn len(&mut self) -> Result<usize, LppError> {
        Ok(self.u16()? as usize)
    }

    fn opt_u16(&mut self) -> Result<Option<u16>, LppError> {
        Ok(if self.bool()? { Some(self.u16()?) } else { None })
    }

    fn bits(&mut self) -> Result<BitString, LppError> {
        let n = self.len()?;
        let mut bits = Vec::with_capacity(n);
        for _ in 0..n.div_ceil(8) {
            let byte = self.u8()?;
            for i in 0..8 {
                if bits.len() < n {
                    bits.push(byte >> i & 1 == 1);
                }
            }
        }
        Ok(BitString::new(bits))
    }

    fn muting(&mut self) -> Result<Option<MutingPattern>, LppError> {
        Ok(if self.bool()? { Some(MutingPattern::new(self.bits()?)) } else { None })
    }

    fn cell(&mut self) -> Result<CellAssistance, LppError> {
        Ok(CellAssistance {
            cell_id: self.u16()?,
            band: self.u16()?,
            config: self.config()?,
        })
    }

    fn config(&mut self) -> Result<PrsConfig, LppError> {
        let at = self.pos;
        Ok(match self.u8()? {
            0 => PrsConfig::Lte(LtePrsConfig {
                carrier_prbs: self.u16()?,
                bandwidth_prbs: self.u16()?,
                period_t_prs: self.u16()?,
                occasion_length: self.u16()?,
                subframe_offset: self.u16()?,
                muting: self.muting()?,
                physical_cell_id: self.u16()?,
            }),
            1 => PrsConfig::Ltem(LtemPrsConfig {
                carrier_prbs: self.u16()?,
                bandwidth_prbs: self.u16()?,
                period_t_prs: self.u16()?,
                occasion_length: self.u16()?,
                occasion_interval: self.opt_u16()?,
                subframe_offset: self.u16()?,
                prs_id: self.u16()?,
                hopping: if self.bool()? {
                    let n_bands = self.u8()?;
                    let n = self.len()?;
                    let band_prb_offsets = (0..n).map(|_| self.u16()).collect::<Result<_, _>>()?;
                    Some(HoppingConfig { n_bands, band_prb_offsets })
                } else {
                    None
                },
                muting: self.muting()?,
                muting_group_size: self.opt_u16()?,
            }),
            2 => {
                let part_a = if self.bool()? {
                    Some(NprsBitmapConfig {
                        nprs_bitmap: self.bits()?,
                        muting: self.muting()?,
                    })
                } else {
                    None
                };
                let part_b = if self.bool()? {
                    Some(NprsPeriodicConfig {
                        period_t_prs: self.u16()?,
                        offset_fraction_a: EighthFraction::new(self.u8()?),
                        occasion_length: self.u16()?,
                        muting: self.muting()?,
                    })
                } else {
                    None
                };
                let prs_id = self.u16()?;
                let mode_at = self.pos;
                let deployment_mode = match self.u8()? {
                    0 => DeploymentMode::Inband,
                    1 => DeploymentMode::Guardband,
                    2 => DeploymentMode::Standalone,
                    m => return Err(malformed(mode_at, format!("unknown deployment mode {m}"))),
                };
                PrsConfig::Nprs(NprsConfig {
                    part_a,
                    part_b,
                    prs_id,
                    deployment_mode,
                    inband_prb_index: self.opt_u16()?,
                    carrier_prbs: self.u16()?,
                })
            }
            t => return Err(malformed(at, format!("unknown PRS configuration type {t}"))),
        })
    }
}

/// Random messages for tests and property checks.
pub mod sample {
    use rand::seq::IndexedRandom;
    use rand::Rng;

    use super::*;
    use crate::prs_config::sample as cfg;

    pub fn capabilities<R: Rng + ?Sized>(rng: &mut R) -> Capabilities {
        let n = rng.random_range(0..6);
        Capabilities {
            supported_bands: (0..n).map(|_| rng.random_range(1..90)).collect(),
            max_bandwidth: *[BandwidthClass::M1, BandwidthClass::M2, BandwidthClass::Nb, BandwidthClass::Wideband]
                .choose(rng)
                .expect("non-empty"),
            inter_frequency_rstd: rng.random_bool(0.5),
        }
    }

    pub fn cell<R: Rng + ?Sized>(rng: &mut R) -> CellAssistance {
        CellAssistance {
            cell_id: rng.random_range(0..504),
            band: rng.random_range(1..90),
            config: cfg::any(rng),
        }
    }

    pub fn rstd<R: Rng + ?Sized>(rng: &mut R) -> RstdMeasurement {
        RstdMeasurement {
            neighbor_cell_id: rng.random(),
            reference_cell_id: rng.random(),
            rstd_s: rng.random_range(-1e-5..1e-5),
            quality_db: rng.random_range(-20.0..60.0),
        }
    }

    pub fn message<R: Rng + ?Sized>(rng: &mut R) -> LppMessage {
        match rng.random_range(0..5) {
            0 => LppMessage::RequestCapabilities,
            1 => LppMessage::ProvideCapabilities(capabilities(rng)),
            2 => {
                let n = rng.random_range(0..8);
                LppMessage::ProvideAssistanceData(AssistanceData {
                    reference: cell(rng),
                    neighbors: (0..n).map(|_| cell(rng)).collect(),
                })
            }
            3 => LppMessage::RequestLocationInformation {
                response_time_subframes: rng.random(),
            },
            _ => {
                let n = rng.random_range(0..24);
                LppMessage::ProvideLocationInformation((0..n).map(|_| rstd(rng)).collect())
            }
        }
    }
}
