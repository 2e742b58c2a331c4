//! Expansion of PRS configurations into transmitted subframes.
//!
//! A [`SubframeSchedule`] lists every subframe of the 10240-subframe system
//! frame cycle that carries PRS, together with the positioning occasion it
//! belongs to and (for LTE-M hopping) the active frequency band.
//!
//! Muting bits are indexed by the ordinal of the gated unit counted from
//! absolute subframe 0, modulo the pattern length. Occasions that would run
//! past the end of the cycle are truncated.

use thiserror::Error;

use crate::prs_config::{
    partb_offset_subframes, BitString, LtePrsConfig, LtemPrsConfig, MutingPattern, NprsConfig,
    PrsConfig,
};

/// Subframes in one system frame cycle (1024 radio frames).
pub const CYCLE_SUBFRAMES: u32 = 10240;
pub const SUBFRAMES_PER_FRAME: u32 = 10;
/// Subframes gated by one Part A muting bit.
pub const PART_A_MUTING_WINDOW: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("Part A NPRS subframe {subframe} is not marked invalid in the valid-subframe bitmap")]
    PartANotInvalid { subframe: usize },
    #[error("NPRS bitmap has {nprs} bits but the valid-subframe bitmap has {valid}")]
    BitmapLengthMismatch { nprs: usize, valid: usize },
    #[error("valid-subframe bitmap must have 10 or 40 bits, got {0}")]
    InvalidValidBitmap(usize),
}

impl ScheduleError {
    /// Variant name, for reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            ScheduleError::PartANotInvalid { .. } => "PartANotInvalid",
            ScheduleError::BitmapLengthMismatch { .. } => "BitmapLengthMismatch",
            ScheduleError::InvalidValidBitmap(_) => "InvalidValidBitmap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScheduledSubframe {
    /// Absolute subframe index in `[0, 10240)`.
    pub abs_sf: u16,
    /// Ordinal of the positioning occasion, counted from subframe 0.
    pub occasion: u32,
    /// Active LTE-M hopping band, 0 when hopping is not configured.
    pub band: u8,
}

impl ScheduledSubframe {
    pub fn frame(&self) -> u16 {
        self.abs_sf / SUBFRAMES_PER_FRAME as u16
    }

    pub fn subframe_in_frame(&self) -> u8 {
        (self.abs_sf % SUBFRAMES_PER_FRAME as u16) as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubframeSchedule {
    entries: Vec<ScheduledSubframe>,
}

impl SubframeSchedule {
    /// Build from entries in strictly increasing subframe order.
    fn from_sorted(entries: Vec<ScheduledSubframe>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].abs_sf < w[1].abs_sf));
        debug_assert!(entries.iter().all(|e| u32::from(e.abs_sf) < CYCLE_SUBFRAMES));
        Self { entries }
    }

    pub fn cycle_length(&self) -> u32 {
        CYCLE_SUBFRAMES
    }

    pub fn entries(&self) -> &[ScheduledSubframe] {
        &self.entries
    }

    pub fn subframes(&self) -> impl Iterator<Item = u16> + '_ {
        self.entries.iter().map(|e| e.abs_sf)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, abs_sf: u16) -> Option<&ScheduledSubframe> {
        self.entries
            .binary_search_by_key(&abs_sf, |e| e.abs_sf)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Subframes belonging to the first `n` occasions that carry at least one
    /// transmitted subframe.
    pub fn first_occasions(&self, n: usize) -> &[ScheduledSubframe] {
        let mut seen = 0;
        let mut last = None;
        for (i, e) in self.entries.iter().enumerate() {
            if last != Some(e.occasion) {
                if seen == n {
                    return &self.entries[..i];
                }
                seen += 1;
                last = Some(e.occasion);
            }
        }
        &self.entries
    }

    /// Number of distinct occasions with at least one transmitted subframe.
    pub fn occasion_count(&self) -> usize {
        let mut count = 0;
        let mut last = None;
        for e in &self.entries {
            if last != Some(e.occasion) {
                count += 1;
                last = Some(e.occasion);
            }
        }
        count
    }
}

/// Membership query on an expanded schedule.
pub fn is_transmitted(schedule: &SubframeSchedule, abs_sf: u16) -> bool {
    schedule.get(abs_sf).is_some()
}

/// Valid downlink subframe bitmap of NB-IoT; a 0 bit marks an invalid
/// (reserved) subframe. Repeats cyclically from subframe 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidSubframeBitmap {
    bits: BitString,
}

impl ValidSubframeBitmap {
    pub fn new(bits: BitString) -> Result<Self, ScheduleError> {
        if bits.len() == 10 || bits.len() == 40 {
            Ok(Self { bits })
        } else {
            Err(ScheduleError::InvalidValidBitmap(bits.len()))
        }
    }

    /// Bitmap marking every subframe invalid, as on a dedicated non-anchor carrier.
    pub fn all_invalid(len: usize) -> Result<Self, ScheduleError> {
        Self::new(BitString::zeros(len))
    }

    /// Bitmap marking exactly the Part A NPRS subframes invalid.
    pub fn complement_of(nprs_bitmap: &BitString) -> Result<Self, ScheduleError> {
        Self::new(
            nprs_bitmap
                .bits()
                .iter()
                .map(|&b| !b)
                .collect::<Vec<_>>()
                .into(),
        )
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn is_valid(&self, abs_sf: u32) -> bool {
        self.bits.cyclic(abs_sf as usize)
    }
}

struct Occasion {
    start: u32,
    len: u32,
    ordinal: u32,
    muting_ordinal: usize,
    band: u8,
}

fn emit(occasions: impl Iterator<Item = Occasion>, muting: Option<&MutingPattern>) -> SubframeSchedule {
    let mut entries = Vec::new();
    for occ in occasions {
        if let Some(m) = muting {
            if !m.transmits(occ.muting_ordinal) {
                continue;
            }
        }
        let end = (occ.start + occ.len).min(CYCLE_SUBFRAMES);
        entries.extend((occ.start..end).map(|sf| ScheduledSubframe {
            abs_sf: sf as u16,
            occasion: occ.ordinal,
            band: occ.band,
        }));
    }
    SubframeSchedule::from_sorted(entries)
}

fn periodic(offset: u32, period: u32, len: u32) -> impl Iterator<Item = Occasion> {
    (0..)
        .map(move |k: u32| (k, offset + k * period))
        .take_while(|&(_, start)| start < CYCLE_SUBFRAMES)
        .map(move |(k, start)| Occasion {
            start,
            len,
            ordinal: k,
            muting_ordinal: k as usize,
            band: 0,
        })
}

/// Transmitted subframes of a legacy LTE PRS configuration. Each muting bit
/// gates one whole occasion.
pub fn expand_lte(cfg: &LtePrsConfig) -> SubframeSchedule {
    emit(
        periodic(
            cfg.subframe_offset.into(),
            cfg.period_t_prs.into(),
            cfg.occasion_length.into(),
        ),
        cfg.muting.as_ref(),
    )
}

/// Transmitted subframes of an LTE-M PRS configuration.
///
/// Occasion `m` of legacy period `k` starts at `offset + k*T + m*interval`.
/// Without an explicit muting group size one bit gates all occasions of a
/// legacy period; with group size `g` one bit gates `g` consecutive occasions
/// counted over the whole cycle. The hopping band cycles with the global
/// occasion counter.
pub fn expand_ltem(cfg: &LtemPrsConfig) -> SubframeSchedule {
    let period = u32::from(cfg.period_t_prs);
    let per_period = u32::from(cfg.occasions_per_period());
    let interval = u32::from(cfg.occasion_interval.unwrap_or(cfg.period_t_prs));
    let offset = u32::from(cfg.subframe_offset);
    let len = u32::from(cfg.occasion_length);
    let n_bands = cfg.hopping.as_ref().map_or(1, |h| u32::from(h.n_bands));
    let group = cfg.muting_group_size;

    let occasions = (0..)
        .map(move |k: u32| (k, offset + k * period))
        .take_while(|&(_, start)| start < CYCLE_SUBFRAMES)
        .flat_map(move |(k, period_start)| {
            (0..per_period).map(move |m| (k, m, period_start + m * interval))
        })
        .filter(|&(_, _, start)| start < CYCLE_SUBFRAMES)
        .map(move |(k, m, start)| {
            let ordinal = k * per_period + m;
            let muting_ordinal = match group {
                None => k as usize,
                Some(g) => (ordinal / u32::from(g)) as usize,
            };
            Occasion {
                start,
                len,
                ordinal,
                muting_ordinal,
                band: (ordinal % n_bands) as u8,
            }
        });
    emit(occasions, cfg.muting.as_ref())
}

/// Transmitted subframes of an NPRS configuration.
///
/// Part A repeats its bitmap in every radio frame and mutes in windows of 10
/// subframes; Part B behaves like LTE PRS with NPRS domains. When both parts
/// are configured a subframe carries NPRS only if both parts say so, so a
/// subframe muted by either part is muted.
pub fn expand_nprs(cfg: &NprsConfig, valid: &ValidSubframeBitmap) -> Result<SubframeSchedule, ScheduleError> {
    if let Some(a) = &cfg.part_a {
        let nprs = &a.nprs_bitmap;
        if nprs.len() != valid.bits().len() {
            return Err(ScheduleError::BitmapLengthMismatch {
                nprs: nprs.len(),
                valid: valid.bits().len(),
            });
        }
        if let Some(subframe) = (0..nprs.len()).find(|&i| nprs.get(i) && valid.bits().get(i)) {
            return Err(ScheduleError::PartANotInvalid { subframe });
        }
    }

    let part_a = cfg.part_a.as_ref().map(|a| {
        let mut on = vec![false; CYCLE_SUBFRAMES as usize];
        for (sf, slot) in on.iter_mut().enumerate() {
            let window = sf / PART_A_MUTING_WINDOW as usize;
            *slot = a.nprs_bitmap.cyclic(sf) && a.muting.as_ref().is_none_or(|m| m.transmits(window));
        }
        on
    });
    let part_b = cfg.part_b.as_ref().map(|b| {
        let schedule = emit(
            periodic(
                partb_offset_subframes(b).into(),
                b.period_t_prs.into(),
                b.occasion_length.into(),
            ),
            b.muting.as_ref(),
        );
        let mut occasion = vec![None; CYCLE_SUBFRAMES as usize];
        for e in schedule.entries() {
            occasion[e.abs_sf as usize] = Some(e.occasion);
        }
        occasion
    });
    let bitmap_len = cfg.part_a.as_ref().map_or(1, |a| a.nprs_bitmap.len() as u32);

    let entries = (0..CYCLE_SUBFRAMES)
        .filter_map(|sf| {
            let in_a = part_a.as_ref().is_none_or(|on| on[sf as usize]);
            let occasion = match &part_b {
                Some(b) => b[sf as usize]?,
                None => sf / bitmap_len,
            };
            in_a.then_some(ScheduledSubframe {
                abs_sf: sf as u16,
                occasion,
                band: 0,
            })
        })
        .collect();
    Ok(SubframeSchedule::from_sorted(entries))
}

/// Expand any configuration. NPRS needs the carrier's valid-subframe bitmap;
/// when none is given, the Part A complement (or an all-valid bitmap for
/// Part B alone) is assumed.
pub fn expand(cfg: &PrsConfig, valid: Option<&ValidSubframeBitmap>) -> Result<SubframeSchedule, ScheduleError> {
    match cfg {
        PrsConfig::Lte(c) => Ok(expand_lte(c)),
        PrsConfig::Ltem(c) => Ok(expand_ltem(c)),
        PrsConfig::Nprs(c) => match valid {
            Some(v) => expand_nprs(c, v),
            None => {
                let v = match &c.part_a {
                    Some(a) => ValidSubframeBitmap::complement_of(&a.nprs_bitmap)?,
                    None => ValidSubframeBitmap::new(BitString::ones(10))?,
                };
                expand_nprs(c, &v)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prs_config::{DeploymentMode, EighthFraction, HoppingConfig, NprsBitmapConfig, NprsPeriodicConfig};

    fn lte(period: u16, len: u16, offset: u16, muting: Option<&str>) -> LtePrsConfig {
        LtePrsConfig {
            carrier_prbs: 50,
            bandwidth_prbs: 50,
            period_t_prs: period,
            occasion_length: len,
            subframe_offset: offset,
            muting: muting.map(|m| m.parse().unwrap()),
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

    fn nprs(part_a: Option<&str>, part_b: Option<(u16, u16, u8)>) -> NprsConfig {
        NprsConfig {
            part_a: part_a.map(|b| NprsBitmapConfig {
                nprs_bitmap: b.parse().unwrap(),
                muting: None,
            }),
            part_b: part_b.map(|(t, len, a)| NprsPeriodicConfig {
                period_t_prs: t,
                offset_fraction_a: EighthFraction::new(a),
                occasion_length: len,
                muting: None,
            }),
            prs_id: 0,
            deployment_mode: DeploymentMode::Standalone,
            inband_prb_index: None,
            carrier_prbs: 50,
        }
    }

    #[test]
    fn lte_period_160_single_subframe() {
        let s = expand_lte(&lte(160, 1, 0, None));
        // Brute force over the cycle.
        let expected: Vec<u16> = (0..10240u16).filter(|sf| sf % 160 == 0).collect();
        assert_eq!(s.subframes().collect::<Vec<_>>(), expected);
        assert_eq!(s.len(), 64);
        assert_eq!(s.entries().last().unwrap().abs_sf, 10080);
    }

    #[test]
    fn lte_muting_01_mutes_every_other_occasion() {
        let s = expand_lte(&lte(160, 2, 5, Some("01")));
        for e in s.entries() {
            assert_eq!(e.occasion % 2, 1);
        }
        assert_eq!(s.len(), 64);
        assert_eq!(s.entries()[0].abs_sf, 165);
    }

    #[test]
    fn all_ones_muting_is_no_muting() {
        assert_eq!(
            expand_lte(&lte(320, 4, 17, Some("1111"))),
            expand_lte(&lte(320, 4, 17, None))
        );
    }

    #[test]
    fn ltem_two_occasions_per_period() {
        let s = expand_ltem(&fig3_ltem());
        let starts: Vec<u16> = s
            .entries()
            .iter()
            .filter(|e| e.abs_sf < 160)
            .map(|e| e.abs_sf)
            .collect();
        assert_eq!(starts, vec![0, 1, 2, 3, 4, 5, 80, 81, 82, 83, 84, 85]);
        assert_eq!(s.occasion_count(), 128);
    }

    #[test]
    fn ltem_muting_01_mutes_both_occasions_of_every_other_period() {
        let mut cfg = fig3_ltem();
        cfg.muting = Some("01".parse().unwrap());
        let s = expand_ltem(&cfg);
        for e in s.entries() {
            let period = e.abs_sf / 160;
            assert_eq!(period % 2, 1, "subframe {} should be muted", e.abs_sf);
        }
        // Both occasions of each odd period survive.
        assert!(is_transmitted(&s, 160));
        assert!(is_transmitted(&s, 240));
        assert!(!is_transmitted(&s, 0));
        assert!(!is_transmitted(&s, 80));
    }

    #[test]
    fn ltem_group_muting_counts_occasions_globally() {
        let mut cfg = fig3_ltem();
        cfg.occasion_interval = Some(40);
        cfg.muting = Some("10".parse().unwrap());
        cfg.muting_group_size = Some(2);
        let s = expand_ltem(&cfg);
        // Four occasions per period; groups {0,1} on, {2,3} off, ...
        let in_first_period: Vec<u32> = s
            .entries()
            .iter()
            .filter(|e| e.abs_sf < 160)
            .map(|e| e.occasion)
            .collect();
        assert!(in_first_period.iter().all(|&o| o < 2));
        assert!(is_transmitted(&s, 40));
        assert!(!is_transmitted(&s, 80));
    }

    #[test]
    fn ltem_hopping_cycles_bands() {
        let mut cfg = fig3_ltem();
        cfg.hopping = Some(HoppingConfig {
            n_bands: 2,
            band_prb_offsets: vec![22, 0],
        });
        let s = expand_ltem(&cfg);
        let mut bands = Vec::new();
        let mut last = None;
        for e in s.entries() {
            if last != Some(e.occasion) {
                bands.push(e.band);
                last = Some(e.occasion);
            }
        }
        let expected: Vec<u8> = (0..bands.len()).map(|i| (i % 2) as u8).collect();
        assert_eq!(bands, expected);
    }

    #[test]
    fn ltem_without_interval_matches_lte() {
        for &period in &[160u16, 320, 640, 1280] {
            for &len in &[1u16, 2, 4, 6] {
                let l = lte(period, len, 7, Some("0110"));
                let m = LtemPrsConfig {
                    carrier_prbs: 50,
                    bandwidth_prbs: 50,
                    period_t_prs: period,
                    occasion_length: len,
                    occasion_interval: None,
                    subframe_offset: 7,
                    prs_id: 0,
                    hopping: None,
                    muting: Some("0110".parse().unwrap()),
                    muting_group_size: None,
                };
                assert_eq!(expand_lte(&l), expand_ltem(&m));
            }
        }
    }

    #[test]
    fn part_a_bitmap_example() {
        // Valid bitmap with subframes 1, 2, 3 invalid; NPRS in 1 and 2.
        let valid = ValidSubframeBitmap::new("1000111111".parse().unwrap()).unwrap();
        let cfg = nprs(Some("0110000000"), None);
        let s = expand_nprs(&cfg, &valid).unwrap();
        assert_eq!(s.len(), 2 * 1024);
        for e in s.entries() {
            assert!(matches!(e.subframe_in_frame(), 1 | 2));
        }

        let valid = ValidSubframeBitmap::new("1010111111".parse().unwrap()).unwrap();
        assert_eq!(
            expand_nprs(&cfg, &valid),
            Err(ScheduleError::PartANotInvalid { subframe: 2 })
        );
    }

    #[test]
    fn all_zero_part_a_is_empty() {
        let cfg = nprs(Some("0000000000"), None);
        let valid = ValidSubframeBitmap::new(BitString::ones(10)).unwrap();
        assert!(expand_nprs(&cfg, &valid).unwrap().is_empty());
    }

    #[test]
    fn part_a_and_part_b_intersect() {
        let cfg = nprs(Some("0110000000"), Some((160, 10, 0)));
        let valid = ValidSubframeBitmap::new("1001111111".parse().unwrap()).unwrap();
        let s = expand_nprs(&cfg, &valid).unwrap();
        // Brute force: frame 0 of each 160-subframe period, subframes 1 and 2.
        let expected: Vec<u16> = (0..10240u16)
            .filter(|sf| sf % 160 < 10 && matches!(sf % 10, 1 | 2))
            .collect();
        assert_eq!(s.subframes().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn part_a_muting_gates_ten_subframe_windows() {
        let mut cfg = nprs(Some("1111111111"), None);
        cfg.part_a.as_mut().unwrap().muting = Some("0100".parse().unwrap());
        let valid = ValidSubframeBitmap::all_invalid(10).unwrap();
        let s = expand_nprs(&cfg, &valid).unwrap();
        assert_eq!(s.len(), 10240 / 4);
        assert_eq!(s.entries()[0].abs_sf, 10);
        assert_eq!(s.entries()[9].abs_sf, 19);
        assert_eq!(s.entries()[10].abs_sf, 50);
    }

    #[test]
    fn part_b_only_may_use_valid_subframes() {
        let cfg = nprs(None, Some((160, 20, 3)));
        let valid = ValidSubframeBitmap::new(BitString::ones(10)).unwrap();
        let s = expand_nprs(&cfg, &valid).unwrap();
        assert_eq!(s.entries()[0].abs_sf, 60);
        assert_eq!(s.len(), 64 * 20);
    }

    #[test]
    fn first_occasions_takes_whole_occasions() {
        let mut cfg = lte(160, 6, 0, Some("1000"));
        cfg.bandwidth_prbs = 25;
        let s = expand_lte(&cfg);
        let first = s.first_occasions(8);
        assert_eq!(first.len(), 48);
        assert_eq!(first.last().unwrap().abs_sf, 7 * 640 + 5);
        assert_eq!(s.first_occasions(1000).len(), s.len());
    }

    #[test]
    fn membership_queries() {
        let s = expand_lte(&lte(160, 1, 0, None));
        assert!(is_transmitted(&s, 160));
        assert!(!is_transmitted(&s, 161));
    }
}
