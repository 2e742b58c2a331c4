//! Matched-filter TOA estimation over PRS occasions and RSTD formation.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{ChannelError, OfdmRaster, TS};
use crate::deployment::{Deployment, SPEED_OF_LIGHT};
use crate::prs_config::PrsConfig;
use crate::re_mapping::{map_subframe, MappingError, ResourceGrid};
use crate::scheduler::SubframeSchedule;

pub const DEFAULT_FIRST_PATH_THRESHOLD_DB: f64 = 13.0;
pub const DEFAULT_DETECTION_MARGIN_DB: f64 = 6.0;
/// RSTD reporting resolution.
pub const RSTD_RESOLUTION_S: f64 = TS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReceiverError {
    #[error("no scheduled PRS subframe falls inside the received signal")]
    NoScheduledSubframes,
    #[error("reference cell {0} was not detected")]
    ReferenceNotDetected(u16),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverParams {
    pub first_path_threshold_db: f64,
    pub detection_margin_db: f64,
    /// Half-width of the TOA search window.
    pub search_window_s: f64,
}

impl ReceiverParams {
    /// Defaults with a search window sized for `deployment`: 1.5 times the
    /// longest UE-to-cell distance, and never less than 1.5 ISD.
    pub fn for_deployment(deployment: &Deployment) -> Self {
        let reach = deployment.max_link_distance_m().max(deployment.isd_m);
        Self {
            first_path_threshold_db: DEFAULT_FIRST_PATH_THRESHOLD_DB,
            detection_margin_db: DEFAULT_DETECTION_MARGIN_DB,
            search_window_s: 1.5 * reach / SPEED_OF_LIGHT,
        }
    }
}

/// Conjugated PRS symbols of one cell in one subframe, with the taper applied
/// across the occupied band.
#[derive(Debug, Clone, PartialEq)]
pub struct Replica {
    /// `(subcarrier, symbol, weighted conj(x))` sorted by subcarrier.
    entries: Vec<(usize, usize, Complex64)>,
}

impl Replica {
    pub fn from_grid(grid: &ResourceGrid) -> Self {
        let mut entries: Vec<(usize, usize, Complex64)> = grid.populated().map(|(l, k, x)| (k, l, x.conj())).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        if let (Some(first), Some(last)) = (entries.first(), entries.last()) {
            let (lo, span) = (first.0, (last.0 - first.0 + 2) as f64);
            for e in &mut entries {
                let w = 0.5 - 0.5 * (2.0 * PI * (e.0 - lo + 1) as f64 / span).cos();
                e.2 *= w;
            }
        }
        Self { entries }
    }

    pub fn for_subframe(cfg: &PrsConfig, abs_sf: u16, band: u8) -> Result<Self, MappingError> {
        let mut grid = ResourceGrid::for_config(cfg);
        map_subframe(&mut grid, cfg, abs_sf, band)?;
        Ok(Self::from_grid(&grid))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Running non-coherent sum of per-subframe correlation energies.
#[derive(Debug, Clone)]
pub struct ProfileAccumulator {
    raster: OfdmRaster,
    energy: Vec<f64>,
    scratch: Vec<Complex64>,
    n_subframes: usize,
}

impl ProfileAccumulator {
    pub fn new(raster: &OfdmRaster) -> Self {
        let n = raster.fft_size();
        Self {
            raster: raster.clone(),
            energy: vec![0.0; n],
            scratch: vec![Complex64::new(0.0, 0.0); n],
            n_subframes: 0,
        }
    }

    /// Correlate one demodulated subframe against `replica`: the per
    /// subcarrier products are summed over symbols, transformed to the lag
    /// domain and their energy added.
    pub fn add(&mut self, received: &ResourceGrid, replica: &Replica) {
        self.scratch.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for &(k, l, x) in &replica.entries {
            self.scratch[self.raster.bin(k)] += received.get(l, k) * x;
        }
        self.raster.inverse(&mut self.scratch);
        for (e, z) in self.energy.iter_mut().zip(&self.scratch) {
            *e += z.norm_sqr();
        }
        self.n_subframes += 1;
    }

    pub fn n_subframes(&self) -> usize {
        self.n_subframes
    }

    /// Profile over lags within `search_window_s` of zero.
    pub fn finish(&self, cell_id: u16, search_window_s: f64) -> Result<CorrelationProfile, ReceiverError> {
        if self.n_subframes == 0 {
            return Err(ReceiverError::NoScheduledSubframes);
        }
        let n = self.energy.len() as i64;
        let period = self.raster.sample_period_s();
        let w = ((search_window_s / period).ceil() as i64).min(n / 4 - 1);
        let at = |lag: i64| self.energy[lag.rem_euclid(n) as usize];
        let lags: Vec<i64> = (-w..=w).collect();
        let metric = lags.iter().map(|&l| at(l)).collect();

        let noise: Vec<f64> = (n / 4..n / 2).flat_map(|l| [at(l), at(-l)]).collect();
        let mean = noise.iter().sum::<f64>() / noise.len() as f64;
        let var = noise.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / noise.len() as f64;
        Ok(CorrelationProfile {
            cell_id,
            lags,
            metric,
            n_accumulated_subframes: self.n_subframes,
            noise_floor: mean + 3.0 * var.sqrt(),
            sample_period_s: period,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    pub cell_id: u16,
    pub lags: Vec<i64>,
    pub metric: Vec<f64>,
    pub n_accumulated_subframes: usize,
    /// Mean plus three standard deviations of the energy at lags far outside
    /// the search window.
    pub noise_floor: f64,
    pub sample_period_s: f64,
}

impl CorrelationProfile {
    pub fn peak(&self) -> f64 {
        self.metric.iter().copied().fold(0.0, f64::max)
    }

    /// Peak-to-floor ratio in dB.
    pub fn quality_db(&self) -> f64 {
        10.0 * (self.peak().max(1e-300) / self.noise_floor.max(1e-300)).log10()
    }
}

/// Correlate the scheduled PRS subframes of a cell inside `rx` against its
/// replica. `rx` starts at subframe `rx_start_sf` of the cycle; only the first
/// `n_occasions` occasions of `schedule` are used.
pub fn accumulate(
    rx: &[Complex64],
    rx_start_sf: u32,
    raster: &OfdmRaster,
    cfg: &PrsConfig,
    schedule: &SubframeSchedule,
    n_occasions: usize,
    search_window_s: f64,
) -> Result<CorrelationProfile, ReceiverError> {
    let sps = raster.samples_per_subframe();
    let n_sf = (rx.len() / sps) as u32;
    let mut acc = ProfileAccumulator::new(raster);
    for e in schedule.first_occasions(n_occasions) {
        let sf = u32::from(e.abs_sf);
        if sf < rx_start_sf || sf >= rx_start_sf + n_sf {
            continue;
        }
        let start = (sf - rx_start_sf) as usize * sps;
        let y = raster.demodulate(&rx[start..start + sps])?;
        acc.add(&y, &Replica::for_subframe(cfg, e.abs_sf, e.band)?);
    }
    acc.finish(cfg.identity(), search_window_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToaMeasurement {
    pub cell_id: u16,
    pub toa_s: f64,
    pub quality_db: f64,
    pub detected: bool,
}

/// First-path TOA: the earliest lag above both the noise floor and the
/// global maximum less `first_path_threshold_db`, refined to the local
/// maximum it leads to and interpolated with a parabola.
pub fn detect_toa(profile: &CorrelationProfile, params: &ReceiverParams) -> ToaMeasurement {
    let m = &profile.metric;
    let peak = profile.peak();
    let detection_threshold = profile.noise_floor * 10f64.powf(params.detection_margin_db / 10.0);
    let detected = peak > 0.0 && peak >= detection_threshold;
    // A first path must itself clear the detection threshold.
    let threshold = (peak * 10f64.powf(-params.first_path_threshold_db / 10.0)).max(detection_threshold.min(peak));
    let mut i = m.iter().position(|&v| v >= threshold && v > 0.0).unwrap_or(0);
    while i + 1 < m.len() && m[i + 1] > m[i] {
        i += 1;
    }
    let mut delta = 0.0;
    if i > 0 && i + 1 < m.len() {
        let (a, b, c) = (m[i - 1], m[i], m[i + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            delta = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
        }
    }
    ToaMeasurement {
        cell_id: profile.cell_id,
        toa_s: (profile.lags[i] as f64 + delta) * profile.sample_period_s,
        quality_db: profile.quality_db(),
        detected,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RstdMeasurement {
    pub neighbor_cell_id: u16,
    pub reference_cell_id: u16,
    pub rstd_s: f64,
    pub quality_db: f64,
}

/// Round to the nearest multiple of the reporting resolution.
pub fn quantize_rstd(raw_s: f64) -> f64 {
    (raw_s / RSTD_RESOLUTION_S).round() * RSTD_RESOLUTION_S
}

/// RSTDs of all detected cells against `reference_cell`, the reference itself
/// included with zero.
pub fn form_rstd(toas: &[ToaMeasurement], reference_cell: u16) -> Result<Vec<RstdMeasurement>, ReceiverError> {
    form_rstd_with(toas, reference_cell, quantize_rstd)
}

/// As [`form_rstd`] with a caller-chosen quantizer.
pub fn form_rstd_with(
    toas: &[ToaMeasurement],
    reference_cell: u16,
    quantize: impl Fn(f64) -> f64,
) -> Result<Vec<RstdMeasurement>, ReceiverError> {
    let reference = toas
        .iter()
        .find(|t| t.cell_id == reference_cell && t.detected)
        .ok_or(ReceiverError::ReferenceNotDetected(reference_cell))?;
    Ok(toas
        .iter()
        .filter(|t| t.detected)
        .map(|t| RstdMeasurement {
            neighbor_cell_id: t.cell_id,
            reference_cell_id: reference_cell,
            rstd_s: quantize(t.toa_s - reference.toa_s),
            quality_db: t.quality_db,
        })
        .collect())
}

/// The serving cell when detected, otherwise the detected cell of highest
/// quality.
pub fn choose_reference(toas: &[ToaMeasurement], serving_cell: u16) -> Option<u16> {
    if toas.iter().any(|t| t.cell_id == serving_cell && t.detected) {
        return Some(serving_cell);
    }
    toas.iter()
        .filter(|t| t.detected)
        .fold(None::<&ToaMeasurement>, |best, t| match best {
            Some(b) if b.quality_db >= t.quality_db => Some(b),
            _ => Some(t),
        })
        .map(|t| t.cell_id)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::channel::{synthesize_rx, CellGrids, DEFAULT_SAMPLE_RATE_HZ};
    use crate::deployment::{hex_layout, make_link, ChannelProfile, Link, Point};
    use crate::prs_config::{LtePrsConfig, MutingPattern};
    use crate::scheduler::expand;

    fn lte(pci: u16, muting: Option<&str>) -> PrsConfig {
        PrsConfig::Lte(LtePrsConfig {
            carrier_prbs: 50,
            bandwidth_prbs: 50,
            period_t_prs: 160,
            occasion_length: 1,
            subframe_offset: 0,
            muting: muting.map(|m| m.parse::<MutingPattern>().unwrap()),
            physical_cell_id: pci,
        })
    }

    fn params() -> ReceiverParams {
        ReceiverParams::for_deployment(&hex_layout(700.0, 1))
    }

    fn link_at(distance: f64, snr_db: f64) -> Link {
        let d = hex_layout(700.0, 0);
        let mut l = make_link(&d, 0, Point::new(distance, 0.0), ChannelProfile::Awgn, 50, &mut ChaCha8Rng::seed_from_u64(0));
        l.snr_db = snr_db;
        l
    }

    fn profile_from(metric: Vec<f64>, floor: f64) -> CorrelationProfile {
        let w = (metric.len() / 2) as i64;
        CorrelationProfile {
            cell_id: 0,
            lags: (-w..=w).collect(),
            metric,
            n_accumulated_subframes: 1,
            noise_floor: floor,
            sample_period_s: TS,
        }
    }

    #[test]
    fn window_covers_one_isd() {
        for rings in 0..3 {
            let d = hex_layout(700.0, rings);
            assert!(ReceiverParams::for_deployment(&d).search_window_s >= 700.0 / SPEED_OF_LIGHT);
        }
    }

    #[test]
    fn clean_signal_peaks_at_true_delay() {
        let raster = OfdmRaster::new(DEFAULT_SAMPLE_RATE_HZ, 600).unwrap();
        let cfg = lte(0, None);
        let schedule = expand(&cfg, None).unwrap();
        let link = link_at(600.0, 10.0);
        let expected = (link.true_delay_s / TS).round() as i64;
        let mut grid = ResourceGrid::for_config(&cfg);
        map_subframe(&mut grid, &cfg, 0, 0).unwrap();
        let rx = synthesize_rx(std::slice::from_ref(&link), &[CellGrids::from([(0, grid)])], &raster, 1, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let profile = accumulate(&rx, 0, &raster, &cfg, &schedule, 1, params().search_window_s).unwrap();
        assert!(profile.metric.iter().all(|&v| v >= 0.0));
        let best = profile.metric.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(profile.lags[best], expected);
        let toa = detect_toa(&profile, &params());
        assert!(toa.detected);
        assert!((toa.toa_s - link.true_delay_s).abs() <= 0.5 * TS);
    }

    #[test]
    fn fully_muted_schedule() {
        let raster = OfdmRaster::new(DEFAULT_SAMPLE_RATE_HZ, 600).unwrap();
        let cfg = lte(0, Some("00"));
        let schedule = expand(&cfg, None).unwrap();
        let rx = vec![Complex64::new(0.0, 0.0); raster.samples_per_subframe() * 400];
        let err = accumulate(&rx, 0, &raster, &cfg, &schedule, 8, 1e-5);
        assert_eq!(err, Err(ReceiverError::NoScheduledSubframes));
    }

    #[test]
    fn parabolic_interpolation_on_analytic_peak() {
        for true_pos in [-3.3, 0.0, 0.25, 7.49, 12.8] {
            let metric: Vec<f64> = (-20..=20).map(|n| (-((n as f64 - true_pos) / 4.0).powi(2)).exp()).collect();
            let toa = detect_toa(&profile_from(metric, 1e-3), &params());
            assert!(toa.detected);
            assert!((toa.toa_s / TS - true_pos).abs() < 0.1, "{true_pos} {}", toa.toa_s / TS);
        }
    }

    #[test]
    fn earlier_weaker_path_wins() {
        let mut metric = vec![0.001; 41];
        metric[10] = 0.3;
        metric[9] = 0.2;
        metric[11] = 0.2;
        metric[30] = 0.6;
        metric[29] = 0.4;
        metric[31] = 0.4;
        let p = profile_from(metric, 0.01);
        let toa = detect_toa(&p, &params());
        assert!((toa.toa_s / TS - (10 - 20) as f64).abs() < 0.5);
    }

    #[test]
    fn rstd_formation() {
        let t = |id, toa_s, detected| ToaMeasurement { cell_id: id, toa_s, quality_db: 10.0, detected };
        let toas = vec![t(1, 1e-6, true), t(2, 2e-6, true), t(3, 5e-6, false)];
        let r = form_rstd_with(&toas, 1, |x| x).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].rstd_s, 0.0);
        assert!((r[1].rstd_s - 1e-6).abs() < 1e-18);
        assert_eq!(form_rstd(&toas, 3), Err(ReceiverError::ReferenceNotDetected(3)));
        assert_eq!(quantize_rstd(0.7 * TS), TS);
        assert_eq!(quantize_rstd(-0.7 * TS), -TS);
        assert_eq!(quantize_rstd(0.3 * TS), 0.0);
    }

    #[test]
    fn reference_choice() {
        let t = |id, q, detected| ToaMeasurement { cell_id: id, toa_s: 0.0, quality_db: q, detected };
        let toas = vec![t(0, 5.0, false), t(1, 12.0, true), t(2, 15.0, true)];
        assert_eq!(choose_reference(&toas, 1), Some(1));
        assert_eq!(choose_reference(&toas, 0), Some(2));
        assert_eq!(choose_reference(&[t(0, 1.0, false)], 0), None);
    }

    #[test]
    fn noise_only_is_not_detected() {
        let raster = OfdmRaster::new(DEFAULT_SAMPLE_RATE_HZ, 600).unwrap();
        let cfg = lte(2, None);
        let replica = Replica::for_subframe(&cfg, 0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut false_alarms = 0;
        for _ in 0..100 {
            let y = crate::channel::synthesize_demodulated(&[], 600, 1.0, &mut rng).unwrap();
            let mut acc = ProfileAccumulator::new(&raster);
            acc.add(&y, &replica);
            let p = acc.finish(2, params().search_window_s).unwrap();
            if detect_toa(&p, &params()).detected {
                false_alarms += 1;
            }
        }
        assert!(false_alarms <= 2, "{false_alarms}");
    }

    #[test]
    fn other_shift_class_leaves_no_energy() {
        let raster = OfdmRaster::new(DEFAULT_SAMPLE_RATE_HZ, 600).unwrap();
        let other = lte(1, None);
        let mut tx = ResourceGrid::for_config(&other);
        map_subframe(&mut tx, &other, 0, 0).unwrap();
        let mut acc = ProfileAccumulator::new(&raster);
        acc.add(&tx, &Replica::for_subframe(&lte(0, None), 0, 0).unwrap());
        let p = acc.finish(0, 1e-5).unwrap();
        assert!(p.metric.iter().all(|&v| v < 1e-20));
    }

    #[test]
    fn identical_extra_occasion_does_not_lower_quality() {
        let raster = OfdmRaster::new(DEFAULT_SAMPLE_RATE_HZ, 600).unwrap();
        let cfg = lte(0, None);
        let link = link_at(400.0, 0.0);
        let h = crate::channel::link_response(&link, &raster);
        let mut tx = ResourceGrid::for_config(&cfg);
        map_subframe(&mut tx, &cfg, 0, 0).unwrap();
        let y = crate::channel::synthesize_demodulated(&[(&h, &tx)], 600, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let replica = Replica::from_grid(&tx);
        let mut acc = ProfileAccumulator::new(&raster);
        acc.add(&y, &replica);
        let q1 = acc.finish(0, 1e-5).unwrap().quality_db();
        acc.add(&y, &replica);
        let q2 = acc.finish(0, 1e-5).unwrap().quality_db();
        assert!(q2 >= q1 - 1e-9);
    }
}
