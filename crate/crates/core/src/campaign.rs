//! Monte-Carlo positioning campaign: drops, measurement, multilateration and
//! CSV output.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{link_response, ChannelError, OfdmRaster};
use crate::deployment::{drop_ue, make_link, Deployment, Link, Point, UeDrop};
use crate::lpp_session::{
    run_session, AssistanceData, BandwidthClass, Capabilities, CellAssistance, LppError, ServerSession, TranscriptEntry,
    UeSession,
};
use crate::positioner::{cdf, solve, ErrorCdf, PositionError, TdoaProblem};
use crate::prs_config::PrsConfig;
use crate::re_mapping::{map_subframe, MappingError, ResourceGrid, SYMBOLS_PER_SUBFRAME};
use crate::receiver::{
    choose_reference, detect_toa, form_rstd_with, quantize_rstd, ProfileAccumulator, ReceiverError, ReceiverParams,
    Replica, RstdMeasurement, ToaMeasurement,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::scheduler::{ScheduledSubframe, SubframeSchedule};

pub const REPORT_PERCENTILES: [f64; 6] = [40.0, 50.0, 67.0, 80.0, 90.0, 95.0];
pub const ACCURACY_TARGET_M: f64 = 50.0;
pub const CDF_POINTS: usize = 200;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("tech.{tech}: {source}")]
    Position { tech: String, source: PositionError },
    #[error("tech.{tech}: {source}")]
    Mapping { tech: String, source: MappingError },
    #[error("tech.{tech}: {source}")]
    Channel { tech: String, source: ChannelError },
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("LPP session: {0}")]
    Session(#[from] LppError),
}

/// 64-bit mixing function used to derive independent seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(seed, |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

/// Seed of drop `drop_id` in a campaign seeded with `seed`.
pub fn drop_seed(seed: u64, drop_id: u64) -> u64 {
    seed ^ splitmix64(drop_id)
}

fn name_key(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

const LINKS: u64 = 1;
const FADING: u64 = 2;
const NOISE: u64 = 3;
const UE: u64 = 4;

/// Knobs that are not part of the scenario file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Round RSTDs to the reporting resolution.
    pub quantize_rstd: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { quantize_rstd: true }
    }
}

struct CellSignal {
    tx: Vec<(usize, usize, Complex64)>,
    replica: Replica,
    span: (usize, usize),
}

struct CellPlan {
    id: u16,
    position: Point,
    schedule: SubframeSchedule,
    measured: Vec<ScheduledSubframe>,
    signal_prbs: u16,
    signals: HashMap<(u16, u8), CellSignal>,
}

/// Everything about one technology that is shared by all drops.
pub struct TechPlan {
    name: String,
    key: u64,
    cells: Vec<CellPlan>,
    raster: OfdmRaster,
    /// Measuring cells per PRS subframe, in subframe order.
    measurements: BTreeMap<u16, Vec<(usize, u8)>>,
}

impl TechPlan {
    pub fn new(scenario: &Scenario, tech: &str) -> Result<Self, CampaignError> {
        let deployment = scenario.deployment();
        let configs = scenario.cell_configs(tech)?;
        let n_sc = configs
            .first()
            .map(|c| ResourceGrid::for_config(&c.config).n_subcarriers())
            .unwrap_or(12 * scenario.deployment.carrier_prbs as usize);
        let raster = OfdmRaster::new(scenario.deployment.sample_rate_hz, n_sc).map_err(|source| CampaignError::Channel {
            tech: tech.to_string(),
            source,
        })?;
        let mut cells = Vec::with_capacity(configs.len());
        let mut measurements: BTreeMap<u16, Vec<(usize, u8)>> = BTreeMap::new();
        for (index, (cc, cell)) in configs.into_iter().zip(&deployment.cells).enumerate() {
            let measured = cc.schedule.first_occasions(scenario.campaign.n_occasions).to_vec();
            for e in &measured {
                measurements.entry(e.abs_sf).or_default().push((index, e.band));
            }
            let signals = cell_signals(&cc.config, &cc.schedule).map_err(|source| CampaignError::Mapping {
                tech: tech.to_string(),
                source,
            })?;
            cells.push(CellPlan {
                id: cell.id,
                position: cell.position,
                signal_prbs: cc.config.prs_bandwidth_prbs(),
                schedule: cc.schedule,
                measured,
                signals,
            });
        }
        Ok(Self {
            name: tech.to_string(),
            key: name_key(tech),
            cells,
            raster,
            measurements,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of PRS subframes measured by the cell with index `cell`.
    pub fn measured_subframes(&self, cell: usize) -> usize {
        self.cells[cell].measured.len()
    }
}

/// Transmitted symbols and replicas for every slot pair and hopping band the
/// schedule uses. The sequence only depends on the subframe within the frame.
fn cell_signals(cfg: &PrsConfig, schedule: &SubframeSchedule) -> Result<HashMap<(u16, u8), CellSignal>, MappingError> {
    let mut out = HashMap::new();
    for e in schedule.entries() {
        let key = (e.abs_sf % 10, e.band);
        if out.contains_key(&key) {
            continue;
        }
        let mut grid = ResourceGrid::for_config(cfg);
        map_subframe(&mut grid, cfg, e.abs_sf, e.band)?;
        let tx: Vec<(usize, usize, Complex64)> = grid.populated().collect();
        let lo = tx.iter().map(|t| t.1).min().unwrap_or(0);
        let hi = tx.iter().map(|t| t.1).max().unwrap_or(0);
        out.insert(
            key,
            CellSignal {
                replica: Replica::from_grid(&grid),
                tx,
                span: (lo, hi),
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub drop_id: usize,
    pub truth: Point,
    pub estimate: Point,
    pub error_m: f64,
    pub converged: bool,
    /// RSTD measurements used, the reference excluded.
    pub n_meas: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRow {
    pub drop_id: usize,
    pub toa: ToaMeasurement,
    pub rstd_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropOutcome {
    pub result: DropResult,
    pub toas: Vec<ToaMeasurement>,
    pub rstds: Vec<RstdMeasurement>,
    pub reference_cell: Option<u16>,
}

/// Simulate one technology for one UE drop.
pub fn simulate_drop(
    plan: &TechPlan,
    scenario: &Scenario,
    deployment: &Deployment,
    params: &ReceiverParams,
    ue: &UeDrop,
    drop_id: usize,
    opts: &RunOptions,
) -> DropOutcome {
    let tech_seed = mix(ue.rng_seed, &[plan.key]);
    let mut link_rng = ChaCha8Rng::seed_from_u64(mix(tech_seed, &[LINKS]));
    let links: Vec<Link> = plan
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut l = make_link(
                deployment,
                i,
                ue.position,
                scenario.deployment.channel_profile,
                c.signal_prbs,
                &mut link_rng,
            );
            if let Some(snr) = scenario.campaign.snr_override_db {
                l.snr_db = snr;
            }
            l
        })
        .collect();

    let n_sc = plan.raster.n_subcarriers();
    let mut accumulators: Vec<ProfileAccumulator> = plan.cells.iter().map(|_| ProfileAccumulator::new(&plan.raster)).collect();
    let mut responses: HashMap<(usize, u32), Vec<Complex64>> = HashMap::new();
    let mut y = ResourceGrid::new(n_sc);
    for (&sf, measuring) in &plan.measurements {
        let (lo, hi) = measuring.iter().fold((usize::MAX, 0), |(lo, hi), &(c, band)| {
            let s = &plan.cells[c].signals[&(sf % 10, band)];
            (lo.min(s.span.0), hi.max(s.span.1))
        });
        for l in 0..SYMBOLS_PER_SUBFRAME {
            y.symbol_mut(l)[lo..=hi].fill(Complex64::new(0.0, 0.0));
        }
        for (c, cell) in plan.cells.iter().enumerate() {
            let Some(e) = cell.schedule.get(sf) else { continue };
            let signal = &cell.signals[&(sf % 10, e.band)];
            if signal.span.1 < lo || signal.span.0 > hi {
                continue;
            }
            let h = responses.entry((c, e.occasion)).or_insert_with(|| {
                let mut link = links[c].clone();
                link.redraw_fading(&mut ChaCha8Rng::seed_from_u64(mix(tech_seed, &[FADING, c as u64, u64::from(e.occasion)])));
                link_response(&link, &plan.raster)
            });
            for &(l, k, x) in &signal.tx {
                if (lo..=hi).contains(&k) {
                    let v = y.get(l, k) + h[k] * x;
                    y.set(l, k, v);
                }
            }
        }
        let mut noise_rng = ChaCha8Rng::seed_from_u64(mix(tech_seed, &[NOISE, u64::from(sf)]));
        let sigma = std::f64::consts::FRAC_1_SQRT_2;
        for l in 0..SYMBOLS_PER_SUBFRAME {
            for v in &mut y.symbol_mut(l)[lo..=hi] {
                let re: f64 = StandardNormal.sample(&mut noise_rng);
                let im: f64 = StandardNormal.sample(&mut noise_rng);
                *v += Complex64::new(re, im) * sigma;
            }
        }
        for &(c, band) in measuring {
            accumulators[c].add(&y, &plan.cells[c].signals[&(sf % 10, band)].replica);
        }
    }

    let toas: Vec<ToaMeasurement> = plan
        .cells
        .iter()
        .zip(&accumulators)
        .map(|(cell, acc)| match acc.finish(cell.id, params.search_window_s) {
            Ok(profile) => detect_toa(&profile, params),
            Err(ReceiverError::NoScheduledSubframes) | Err(_) => ToaMeasurement {
                cell_id: cell.id,
                toa_s: 0.0,
                quality_db: 0.0,
                detected: false,
            },
        })
        .collect();

    let serving = plan.cells[ue.serving_cell].id;
    let reference_cell = choose_reference(&toas, serving);
    let rstds = match reference_cell {
        Some(r) => {
            let q = |x: f64| if opts.quantize_rstd { quantize_rstd(x) } else { x };
            form_rstd_with(&toas, r, q).unwrap_or_default()
        }
        None => Vec::new(),
    };
    let position = |id: u16| plan.cells[id as usize].position;
    let init = plan.cells[ue.serving_cell].position;
    let n_meas = rstds.iter().filter(|r| r.neighbor_cell_id != r.reference_cell_id).count();
    let (estimate, converged) = match reference_cell {
        Some(r) => {
            let problem = TdoaProblem::from_measurements(position(r), &rstds, position);
            match solve(&problem, init) {
                Ok(res) => (res.estimate, res.converged),
                Err(_) => (init, false),
            }
        }
        None => (init, false),
    };
    DropOutcome {
        result: DropResult {
            drop_id,
            truth: ue.position,
            estimate,
            error_m: estimate.distance(ue.position),
            converged,
            n_meas,
        },
        toas,
        rstds,
        reference_cell,
    }
}

/// UE drop `drop_id`; identical for every technology.
pub fn make_drop(deployment: &Deployment, seed: u64, drop_id: usize) -> UeDrop {
    let s = drop_seed(seed, drop_id as u64);
    drop_ue(deployment, &mut ChaCha8Rng::seed_from_u64(mix(s, &[UE])), s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechReport {
    pub name: String,
    pub results: Vec<DropResult>,
    pub measurements: Vec<MeasurementRow>,
    pub cdf: ErrorCdf,
    pub percentiles: Vec<(f64, f64)>,
    pub fraction_within_target: f64,
}

impl TechReport {
    pub fn median_m(&self) -> f64 {
        self.cdf.percentile(50.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub techs: Vec<TechReport>,
    pub wall_clock: Duration,
}

impl CampaignReport {
    pub fn tech(&self, name: &str) -> Option<&TechReport> {
        self.techs.iter().find(|t| t.name == name)
    }
}

/// Run `techs` (all technologies of the scenario when empty).
pub fn run(scenario: &Scenario, techs: &[String]) -> Result<CampaignReport, CampaignError> {
    run_with(scenario, techs, &RunOptions::default())
}

pub fn run_with(scenario: &Scenario, techs: &[String], opts: &RunOptions) -> Result<CampaignReport, CampaignError> {
    let start = Instant::now();
    let names: Vec<String> = if techs.is_empty() {
        scenario.tech.keys().cloned().collect()
    } else {
        techs.to_vec()
    };
    let deployment = scenario.deployment();
    let params = scenario.receiver_params();
    let plans = names
        .iter()
        .map(|n| TechPlan::new(scenario, n))
        .collect::<Result<Vec<_>, _>>()?;

    let per_drop: Vec<Vec<DropOutcome>> = (0..scenario.campaign.n_drops)
        .into_par_iter()
        .map(|drop_id| {
            let ue = make_drop(&deployment, scenario.campaign.seed, drop_id);
            plans
                .iter()
                .map(|p| simulate_drop(p, scenario, &deployment, &params, &ue, drop_id, opts))
                .collect()
        })
        .collect();

    let mut reports = Vec::new();
    for (t, plan) in plans.iter().enumerate() {
        let outcomes: Vec<&DropOutcome> = per_drop.iter().map(|d| &d[t]).collect();
        let errors: Vec<f64> = outcomes.iter().map(|o| o.result.error_m).collect();
        let cdf = cdf(&errors).map_err(|source| CampaignError::Position {
            tech: plan.name.clone(),
            source,
        })?;
        let measurements = outcomes
            .iter()
            .flat_map(|o| {
                o.toas.iter().map(|toa| MeasurementRow {
                    drop_id: o.result.drop_id,
                    toa: *toa,
                    rstd_s: o.rstds.iter().find(|r| r.neighbor_cell_id == toa.cell_id).map(|r| r.rstd_s),
                })
            })
            .collect();
        reports.push(TechReport {
            name: plan.name.clone(),
            results: outcomes.iter().map(|o| o.result.clone()).collect(),
            measurements,
            percentiles: REPORT_PERCENTILES.iter().map(|&q| (q, cdf.percentile(q))).collect(),
            fraction_within_target: cdf.fraction_within(ACCURACY_TARGET_M),
            cdf,
        });
    }
    Ok(CampaignReport {
        techs: reports,
        wall_clock: start.elapsed(),
    })
}

pub fn results_csv(t: &TechReport) -> String {
    let mut s = String::from("drop_id,true_x,true_y,est_x,est_y,err_m,converged,n_meas\n");
    for r in &t.results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.drop_id, r.truth.x, r.truth.y, r.estimate.x, r.estimate.y, r.error_m, r.converged, r.n_meas
        );
    }
    s
}

pub fn cdf_csv(t: &TechReport) -> String {
    let mut s = String::from("err_m,cum_prob\n");
    for (e, p) in t.cdf.table(CDF_POINTS) {
        let _ = writeln!(s, "{e},{p}");
    }
    s
}

pub fn measurements_csv(t: &TechReport) -> String {
    let mut s = String::from("drop_id,cell_id,detected,toa_s,rstd_s,quality_db\n");
    for m in &t.measurements {
        let rstd = m.rstd_s.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            m.drop_id, m.toa.cell_id, m.toa.detected, m.toa.toa_s, rstd, m.toa.quality_db
        );
    }
    s
}

pub fn summary_csv(report: &CampaignReport) -> String {
    let mut s = String::from("tech,n_drops");
    for q in REPORT_PERCENTILES {
        let _ = write!(s, ",p{q}_m");
    }
    s.push_str(",frac_le_50m\n");
    for t in &report.techs {
        let _ = write!(s, "{},{}", t.name, t.results.len());
        for (_, v) in &t.percentiles {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{}", t.fraction_within_target);
    }
    s
}

/// Write all CSV files of `report` into `dir`.
pub fn write_outputs(report: &CampaignReport, dir: &Path) -> Result<Vec<PathBuf>, CampaignError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| CampaignError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    for t in &report.techs {
        for (suffix, body) in [
            ("results", results_csv(t)),
            ("cdf", cdf_csv(t)),
            ("measurements", measurements_csv(t)),
        ] {
            files.push((dir.join(format!("{}_{suffix}.csv", t.name)), body));
        }
    }
    files.push((dir.join("summary.csv"), summary_csv(report)));
    for (path, body) in &files {
        std::fs::write(path, body).map_err(io_err(path))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Assistance data of technology `tech` as seen by a UE served by the cell
/// with index `serving`: that cell is the reference, all others neighbours.
pub fn assistance_data(scenario: &Scenario, tech: &str, serving: usize) -> Result<AssistanceData, CampaignError> {
    let band = scenario.campaign.band;
    let mut cells: Vec<CellAssistance> = scenario
        .cell_configs(tech)?
        .into_iter()
        .zip(scenario.deployment().cells)
        .map(|(cc, cell)| CellAssistance {
            cell_id: cell.id,
            band,
            config: cc.config,
        })
        .collect();
    let reference = cells.remove(serving);
    Ok(AssistanceData {
        reference,
        neighbors: cells,
    })
}

/// UE capabilities matching the PRS bandwidth of technology `tech`.
pub fn capabilities_for(scenario: &Scenario, tech: &str) -> Result<Capabilities, CampaignError> {
    let prbs = scenario.cell_config(tech, 0)?.config.prs_bandwidth_prbs();
    let max_bandwidth = match prbs {
        0..=1 => BandwidthClass::Nb,
        2..=6 => BandwidthClass::M1,
        7..=25 => BandwidthClass::M2,
        _ => BandwidthClass::Wideband,
    };
    Ok(Capabilities {
        supported_bands: vec![scenario.campaign.band],
        max_bandwidth,
        inter_frequency_rstd: false,
    })
}

/// Full LPP exchange for drop `drop_id`, the UE measuring with the simulated
/// receiver chain.
pub fn session_transcript(
    scenario: &Scenario,
    tech: &str,
    drop_id: usize,
) -> Result<(Vec<TranscriptEntry>, ServerSession), CampaignError> {
    let deployment = scenario.deployment();
    let ue = make_drop(&deployment, scenario.campaign.seed, drop_id);
    let plan = TechPlan::new(scenario, tech)?;
    let mut server = ServerSession::new(assistance_data(scenario, tech, ue.serving_cell)?);
    let mut client = UeSession::new(capabilities_for(scenario, tech)?);
    let params = scenario.receiver_params();
    let transcript = run_session(&mut server, &mut client, |_| {
        simulate_drop(&plan, scenario, &deployment, &params, &ue, drop_id, &RunOptions::default()).rstds
    })?;
    Ok((transcript, server))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_drops: usize) -> Scenario {
        let mut s = Scenario::builtin("fig5-desk").unwrap();
        s.campaign.n_drops = n_drops;
        s
    }

    #[test]
    fn seeds_are_spread() {
        assert_ne!(drop_seed(42, 0), drop_seed(42, 1));
        assert_eq!(drop_seed(42, 7), drop_seed(42, 7));
        assert_ne!(name_key("m1"), name_key("m2"));
    }

    #[test]
    fn zero_drops_is_an_empty_cdf() {
        let err = run(&small(0), &["lte".into()]).unwrap_err();
        assert!(matches!(err, CampaignError::Position { source: PositionError::Empty, .. }));
    }

    #[test]
    fn drops_are_shared_and_deterministic() {
        let s = small(3);
        let a = run(&s, &["lte".into(), "m1".into()]).unwrap();
        let b = run(&s, &["m1".into()]).unwrap();
        assert_eq!(a.tech("m1").unwrap().results, b.tech("m1").unwrap().results);
        assert_eq!(
            a.techs[0].results.iter().map(|r| r.truth).collect::<Vec<_>>(),
            a.techs[1].results.iter().map(|r| r.truth).collect::<Vec<_>>()
        );
    }

    #[test]
    fn lte_drop_is_accurate() {
        let r = run(&small(4), &["lte".into()]).unwrap();
        for d in &r.techs[0].results {
            assert!(d.n_meas >= 5, "{d:?}");
            assert!(d.error_m < 100.0, "{d:?}");
        }
        assert!(r.techs[0].median_m() < 10.0, "{}", r.techs[0].median_m());
        assert_eq!(r.techs[0].measurements.len(), 4 * 21);
    }

    #[test]
    fn transcript_completes() {
        let (t, server) = session_transcript(&small(1), "lte", 0).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(server.phase(), crate::lpp_session::Phase::Done);
        assert!(server.location().unwrap().len() >= 3);
    }

    #[test]
    fn assistance_covers_every_cell() {
        let s = small(1);
        let a = assistance_data(&s, "m1", 4).unwrap();
        assert_eq!(a.reference.cell_id, 4);
        assert_eq!(a.cells().count(), 21);
        for c in a.cells() {
            assert_eq!(c.config, s.cell_config("m1", c.cell_id).unwrap().config);
        }
    }

    #[test]
    fn csv_shapes() {
        let r = run(&small(2), &["nbiot".into()]).unwrap();
        let t = &r.techs[0];
        assert_eq!(results_csv(t).lines().count(), 3);
        assert_eq!(cdf_csv(t).lines().count(), 201);
        assert_eq!(measurements_csv(t).lines().count(), 1 + 2 * 21);
        assert_eq!(summary_csv(&r).lines().count(), 2);
    }
}
