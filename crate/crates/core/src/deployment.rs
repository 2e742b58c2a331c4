//! Hexagonal macro deployment, UE drops and per-link propagation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
pub const SUBCARRIER_SPACING_HZ: f64 = 15_000.0;
pub const SECTORS_PER_SITE: usize = 3;
/// UEs are not dropped closer than this to a site.
pub const MIN_UE_DISTANCE_M: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;

    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;

    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub index: usize,
    pub position: Point,
    /// Hexagonal ring the site belongs to, 0 for the centre.
    pub ring: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Global cell index, `3 * site + sector`. Also used as PCI and PRS id.
    pub id: u16,
    pub site: usize,
    pub sector: u8,
    pub azimuth_deg: f64,
    pub position: Point,
}

/// Radio parameters shared by all cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub carrier_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    /// Host LTE carrier bandwidth over which the transmit power is spread.
    pub carrier_prbs: u16,
    /// Extra loss on every link: building penetration and antenna gain
    /// not captured by the omnidirectional cells.
    pub coupling_loss_db: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            carrier_hz: 700e6,
            tx_power_dbm: 46.0,
            noise_figure_db: 5.0,
            carrier_prbs: 50,
            coupling_loss_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub sites: Vec<Site>,
    pub cells: Vec<Cell>,
    pub isd_m: f64,
    pub rings: u32,
    pub radio: RadioParams,
    /// Standard deviation of the per-cell transmit clock offset; zero models
    /// perfect network synchronization.
    pub sync_error_std_s: f64,
}

/// Sites on a hexagonal grid with `rings` rings around a centre site, three
/// cells per site.
pub fn hex_layout(isd_m: f64, rings: u32) -> Deployment {
    let r = rings as i64;
    let mut coords = Vec::new();
    for q in -r..=r {
        for s in (-r).max(-q - r)..=r.min(-q + r) {
            let ring = q.abs().max(s.abs()).max((q + s).abs()) as u32;
            let position = Point::new(isd_m * (q as f64 + s as f64 / 2.0), isd_m * 3f64.sqrt() / 2.0 * s as f64);
            let angle = position.y.atan2(position.x).rem_euclid(2.0 * PI);
            coords.push((ring, angle, position));
        }
    }
    coords.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let sites: Vec<Site> = coords
        .into_iter()
        .enumerate()
        .map(|(index, (ring, _, position))| Site { index, position, ring })
        .collect();
    let cells = sites
        .iter()
        .flat_map(|site| {
            (0..SECTORS_PER_SITE).map(move |sector| Cell {
                id: (SECTORS_PER_SITE * site.index + sector) as u16,
                site: site.index,
                sector: sector as u8,
                azimuth_deg: 30.0 + 120.0 * sector as f64,
                position: site.position,
            })
        })
        .collect();
    Deployment {
        sites,
        cells,
        isd_m,
        rings,
        radio: RadioParams::default(),
        sync_error_std_s: 0.0,
    }
}

impl Deployment {
    /// Largest distance between a UE in the drop area and any cell.
    pub fn max_link_distance_m(&self) -> f64 {
        self.rings as f64 * self.isd_m + self.isd_m / 3f64.sqrt()
    }

    /// Mean received power in dBm of `cell` at `position`.
    pub fn received_power_dbm(&self, cell: &Cell, position: Point) -> f64 {
        self.radio.tx_power_dbm - path_loss(cell.position.distance(position), self.radio.carrier_hz)
    }

    /// Cell with the largest mean received power at `position`, ties broken
    /// towards the lower cell id.
    pub fn serving_cell(&self, position: Point) -> usize {
        serving_cell_by_power(&self.cell_powers_dbm(position))
    }

    pub fn cell_powers_dbm(&self, position: Point) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| self.received_power_dbm(c, position))
            .collect()
    }
}

/// Index of the largest received power, first one on ties.
pub fn serving_cell_by_power(powers_dbm: &[f64]) -> usize {
    powers_dbm
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
        .0
}

/// Urban macro log-distance path loss in dB; distances below 1 m are clamped.
pub fn path_loss(distance_m: f64, carrier_hz: f64) -> f64 {
    let d = distance_m.max(1.0);
    128.1 + 37.6 * (d / 1000.0).log10() + 20.0 * (carrier_hz / 2e9).log10()
}

/// A UE position for one Monte-Carlo drop.
#[derive(Debug, Clone, PartialEq)]
pub struct UeDrop {
    pub position: Point,
    pub serving_cell: usize,
    pub rng_seed: u64,
}

/// Drop a UE uniformly inside the coverage hexagon of the centre site.
pub fn drop_ue<R: Rng + ?Sized>(deployment: &Deployment, rng: &mut R, rng_seed: u64) -> UeDrop {
    let circumradius = deployment.isd_m / 3f64.sqrt();
    let position = loop {
        let p = Point::new(
            rng.random_range(-circumradius..circumradius),
            rng.random_range(-circumradius..circumradius),
        );
        if inside_hexagon(p, circumradius) && p.norm() >= MIN_UE_DISTANCE_M {
            break p;
        }
    };
    UeDrop {
        position,
        serving_cell: deployment.serving_cell(position),
        rng_seed,
    }
}

/// Point inside a hexagon with flat top/bottom edges... rotated so that
/// vertices sit on the x axis, matching the site grid orientation.
fn inside_hexagon(p: Point, circumradius: f64) -> bool {
    let inradius = circumradius * 3f64.sqrt() / 2.0;
    // Hexagon with two vertices on the y axis; its edges face the six
    // neighbouring sites at multiples of 60 degrees.
    (0..3).all(|k| {
        let a = k as f64 * PI / 3.0;
        (p.x * a.cos() + p.y * a.sin()).abs() <= inradius
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelProfile {
    Awgn,
    ShortDelaySpread,
    LongDelaySpread,
}

impl FromStr for ChannelProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "awgn" => Ok(ChannelProfile::Awgn),
            "short-delay-spread" => Ok(ChannelProfile::ShortDelaySpread),
            "long-delay-spread" => Ok(ChannelProfile::LongDelaySpread),
            _ => Err(format!(
                "unknown channel profile {s:?}; expected awgn, short-delay-spread or long-delay-spread"
            )),
        }
    }
}

impl fmt::Display for ChannelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelProfile::Awgn => "awgn",
            ChannelProfile::ShortDelaySpread => "short-delay-spread",
            ChannelProfile::LongDelaySpread => "long-delay-spread",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub excess_delay_s: f64,
    pub mean_power_db: f64,
}

impl ChannelProfile {
    /// Power delay profile normalized to 0 dB total power.
    pub fn taps(self) -> Vec<Tap> {
        let raw: &[(f64, f64)] = match self {
            ChannelProfile::Awgn => &[(0.0, 0.0)],
            ChannelProfile::ShortDelaySpread => &[(0.0, 0.0), (0.2e-6, -3.0), (0.5e-6, -6.0)],
            ChannelProfile::LongDelaySpread => &[
                (0.0, 0.0),
                (0.5e-6, -1.5),
                (1.2e-6, -3.0),
                (2.3e-6, -5.0),
                (3.7e-6, -8.0),
                (5.0e-6, -11.0),
            ],
        };
        let total: f64 = raw.iter().map(|&(_, p)| 10f64.powf(p / 10.0)).sum();
        let norm = 10.0 * total.log10();
        raw.iter()
            .map(|&(d, p)| Tap {
                excess_delay_s: d,
                mean_power_db: p - norm,
            })
            .collect()
    }

    pub fn is_fading(self) -> bool {
        self != ChannelProfile::Awgn
    }
}

/// Propagation from one cell to one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub cell: usize,
    pub distance_m: f64,
    /// Geometric delay, distance / c.
    pub true_delay_s: f64,
    /// Transmit clock offset of the cell.
    pub clock_offset_s: f64,
    pub path_loss_db: f64,
    pub profile: ChannelProfile,
    pub taps: Vec<Tap>,
    /// Current small-scale fading realization, one complex gain per tap.
    pub gains: Vec<Complex64>,
    /// Per-resource-element signal to noise ratio at the receiver.
    pub snr_db: f64,
}

impl Link {
    /// Draw a new Rayleigh realization of the tap gains. The AWGN profile
    /// keeps a unit gain.
    pub fn redraw_fading<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.gains = draw_gains(self.profile, &self.taps, rng);
    }

    /// Delay of the first path including the transmit clock offset.
    pub fn arrival_delay_s(&self) -> f64 {
        self.true_delay_s + self.clock_offset_s
    }

    /// Linear amplitude for unit noise power per resource element.
    pub fn amplitude(&self) -> f64 {
        10f64.powf(self.snr_db / 20.0)
    }

    /// Channel frequency response at baseband frequency `freq_hz`, scaled by
    /// [`Link::amplitude`].
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let a = self.amplitude();
        self.taps
            .iter()
            .zip(&self.gains)
            .map(|(tap, g)| {
                let phase = -2.0 * PI * freq_hz * (self.arrival_delay_s() + tap.excess_delay_s);
                g * Complex64::from_polar(a, phase)
            })
            .sum()
    }
}

fn draw_gains<R: Rng + ?Sized>(profile: ChannelProfile, taps: &[Tap], rng: &mut R) -> Vec<Complex64> {
    taps.iter()
        .map(|tap| {
            let amp = 10f64.powf(tap.mean_power_db / 20.0);
            if profile.is_fading() {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) * (amp / 2f64.sqrt())
            } else {
                Complex64::new(amp, 0.0)
            }
        })
        .collect()
}

/// Thermal noise power in dBm over `bandwidth_hz`.
pub fn noise_floor_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Build the link from `cell` to a UE at `ue`.
///
/// The transmit power is spread evenly over the host carrier, so the PRS
/// occupying `signal_prbs` PRBs receives the matching fraction of it. The SNR
/// compares that power with the noise over the same bandwidth.
pub fn make_link<R: Rng + ?Sized>(
    deployment: &Deployment,
    cell: usize,
    ue: Point,
    profile: ChannelProfile,
    signal_prbs: u16,
    rng: &mut R,
) -> Link {
    let c = &deployment.cells[cell];
    let radio = &deployment.radio;
    let distance_m = c.position.distance(ue);
    let path_loss_db = path_loss(distance_m, radio.carrier_hz);
    let signal_bw = 12.0 * SUBCARRIER_SPACING_HZ * f64::from(signal_prbs);
    let carrier_bw = 12.0 * SUBCARRIER_SPACING_HZ * f64::from(radio.carrier_prbs);
    let signal_power =
        radio.tx_power_dbm + 10.0 * (signal_bw / carrier_bw).log10() - path_loss_db - radio.coupling_loss_db;
    let snr_db = signal_power - noise_floor_dbm(signal_bw, radio.noise_figure_db);
    let clock_offset_s = if deployment.sync_error_std_s > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        z * deployment.sync_error_std_s
    } else {
        0.0
    };
    let taps = profile.taps();
    let gains = draw_gains(profile, &taps, rng);
    Link {
        cell,
        distance_m,
        true_delay_s: distance_m / SPEED_OF_LIGHT,
        clock_offset_s,
        path_loss_db,
        profile,
        taps,
        gains,
        snr_db,
    }
}
