//! OFDM modulation on a common sample raster and superposition of the
//! per-cell signals seen by one UE.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::deployment::{Link, SUBCARRIER_SPACING_HZ};
use crate::re_mapping::{ResourceGrid, SYMBOLS_PER_SLOT, SYMBOLS_PER_SUBFRAME};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 30.72e6;
/// Basic time unit, one sample at 30.72 Msps.
pub const TS: f64 = 1.0 / (15_000.0 * 2048.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("raster mismatch: {0}")]
    RasterMismatch(String),
}

/// Sample raster of an OFDM carrier with 15 kHz subcarriers and normal CP.
#[derive(Clone)]
pub struct OfdmRaster {
    fft_size: usize,
    n_subcarriers: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for OfdmRaster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OfdmRaster")
            .field("fft_size", &self.fft_size)
            .field("n_subcarriers", &self.n_subcarriers)
            .finish()
    }
}

impl PartialEq for OfdmRaster {
    fn eq(&self, other: &Self) -> bool {
        self.fft_size == other.fft_size && self.n_subcarriers == other.n_subcarriers
    }
}

impl OfdmRaster {
    pub fn new(sample_rate_hz: f64, n_subcarriers: usize) -> Result<Self, ChannelError> {
        let ratio = sample_rate_hz / SUBCARRIER_SPACING_HZ;
        let fft_size = ratio.round() as usize;
        if (ratio - fft_size as f64).abs() > 1e-9 || fft_size == 0 || !fft_size.is_multiple_of(128) {
            return Err(ChannelError::RasterMismatch(format!(
                "sample rate {sample_rate_hz} Hz is not 15 kHz times a multiple of 128"
            )));
        }
        if n_subcarriers >= fft_size {
            return Err(ChannelError::RasterMismatch(format!(
                "{n_subcarriers} subcarriers do not fit an FFT of size {fft_size}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            fft_size,
            n_subcarriers,
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fft_size as f64 * SUBCARRIER_SPACING_HZ
    }

    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz()
    }

    pub fn cp_len(&self, symbol: usize) -> usize {
        let base = if symbol.is_multiple_of(SYMBOLS_PER_SLOT) { 160 } else { 144 };
        base * self.fft_size / 2048
    }

    pub fn samples_per_subframe(&self) -> usize {
        30_720 * self.fft_size / 2048
    }

    /// Offset of the first useful sample of `symbol` within a subframe.
    pub fn symbol_start(&self, symbol: usize) -> usize {
        (0..symbol).map(|s| self.cp_len(s) + self.fft_size).sum::<usize>() + self.cp_len(symbol)
    }

    /// Signed baseband index of `subcarrier`; the DC subcarrier is left empty.
    pub fn signed_index(&self, subcarrier: usize) -> i64 {
        let half = (self.n_subcarriers / 2) as i64;
        let s = subcarrier as i64;
        if s < half {
            s - half
        } else {
            s - half + 1
        }
    }

    /// FFT bin carrying `subcarrier`.
    pub fn bin(&self, subcarrier: usize) -> usize {
        self.signed_index(subcarrier).rem_euclid(self.fft_size as i64) as usize
    }

    /// Baseband frequency of `subcarrier` in Hz.
    pub fn frequency_hz(&self, subcarrier: usize) -> f64 {
        self.signed_index(subcarrier) as f64 * SUBCARRIER_SPACING_HZ
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }

    fn check_grid(&self, grid: &ResourceGrid) -> Result<(), ChannelError> {
        if grid.n_subcarriers() != self.n_subcarriers {
            return Err(ChannelError::RasterMismatch(format!(
                "grid has {} subcarriers, raster expects {}",
                grid.n_subcarriers(),
                self.n_subcarriers
            )));
        }
        Ok(())
    }

    /// One subframe of time samples with unit energy per resource element.
    pub fn modulate(&self, grid: &ResourceGrid) -> Result<Vec<Complex64>, ChannelError> {
        self.check_grid(grid)?;
        let n = self.fft_size;
        let scale = 1.0 / (n as f64).sqrt();
        let mut out = Vec::with_capacity(self.samples_per_subframe());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for symbol in 0..SYMBOLS_PER_SUBFRAME {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for (k, &v) in grid.symbol(symbol).iter().enumerate() {
                buf[self.bin(k)] = v * scale;
            }
            self.inverse(&mut buf);
            let cp = self.cp_len(symbol);
            out.extend_from_slice(&buf[n - cp..]);
            out.extend_from_slice(&buf);
        }
        Ok(out)
    }

    /// Inverse of [`OfdmRaster::modulate`] for one subframe of samples.
    pub fn demodulate(&self, samples: &[Complex64]) -> Result<ResourceGrid, ChannelError> {
        if samples.len() < self.samples_per_subframe() {
            return Err(ChannelError::RasterMismatch(format!(
                "{} samples are shorter than a subframe of {}",
                samples.len(),
                self.samples_per_subframe()
            )));
        }
        let n = self.fft_size;
        let scale = 1.0 / (n as f64).sqrt();
        let mut grid = ResourceGrid::new(self.n_subcarriers);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for symbol in 0..SYMBOLS_PER_SUBFRAME {
            let start = self.symbol_start(symbol);
            buf.copy_from_slice(&samples[start..start + n]);
            self.forward(&mut buf);
            for (k, v) in grid.symbol_mut(symbol).iter_mut().enumerate() {
                *v = buf[self.bin(k)] * scale;
            }
        }
        Ok(grid)
    }
}

/// Transmitted subframes of one cell, keyed by subframe index relative to the
/// start of the received buffer.
pub type CellGrids = BTreeMap<u32, ResourceGrid>;

/// Received samples covering `n_subframes` subframes.
///
/// Each cell's grids are OFDM modulated, passed through the taps of its link
/// at integer-sample delays, scaled by the link amplitude and summed. Complex
/// white Gaussian noise of variance `noise_power` per sample is added; with
/// unit noise power the per-resource-element SNR equals the link SNR.
pub fn synthesize_rx<R: Rng + ?Sized>(
    links: &[Link],
    grids: &[CellGrids],
    raster: &OfdmRaster,
    n_subframes: u32,
    noise_power: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>, ChannelError> {
    if links.len() != grids.len() {
        return Err(ChannelError::RasterMismatch(format!(
            "{} links but {} grid sets",
            links.len(),
            grids.len()
        )));
    }
    let sps = raster.samples_per_subframe();
    let len = sps * n_subframes as usize;
    let mut rx = vec![Complex64::new(0.0, 0.0); len];
    let fs = raster.sample_rate_hz();
    for (link, cell_grids) in links.iter().zip(grids) {
        let mut tx = vec![Complex64::new(0.0, 0.0); len];
        for (&sf, grid) in cell_grids {
            if sf >= n_subframes {
                continue;
            }
            let start = sf as usize * sps;
            tx[start..start + sps].copy_from_slice(&raster.modulate(grid)?);
        }
        let a = link.amplitude();
        for (tap, g) in link.taps.iter().zip(&link.gains) {
            let delay = ((link.arrival_delay_s() + tap.excess_delay_s) * fs).round() as i64;
            let h = g * a;
            for (n, &x) in tx.iter().enumerate() {
                let m = n as i64 + delay;
                if (0..len as i64).contains(&m) {
                    rx[m as usize] += h * x;
                }
            }
        }
    }
    add_noise(&mut rx, noise_power, rng);
    Ok(rx)
}

/// Add circular complex Gaussian noise of variance `noise_power`.
pub fn add_noise<R: Rng + ?Sized>(samples: &mut [Complex64], noise_power: f64, rng: &mut R) {
    if noise_power <= 0.0 {
        return;
    }
    let sigma = (noise_power / 2.0).sqrt();
    for v in samples {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(re, im) * sigma;
    }
}

/// Frequency response of `link` on every subcarrier of the raster.
pub fn link_response(link: &Link, raster: &OfdmRaster) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(0.0, 0.0); raster.n_subcarriers()];
    let a = link.amplitude();
    for (tap, g) in link.taps.iter().zip(&link.gains) {
        let tau = link.arrival_delay_s() + tap.excess_delay_s;
        let step = Complex64::from_polar(1.0, -2.0 * PI * SUBCARRIER_SPACING_HZ * tau);
        let first = g * a * Complex64::from_polar(1.0, -2.0 * PI * raster.frequency_hz(0) * tau);
        // Phase advances by one subcarrier per step except across DC.
        let mut cur = first;
        for (k, v) in h.iter_mut().enumerate() {
            if k > 0 {
                cur *= step;
                if k == raster.n_subcarriers() / 2 {
                    cur *= step;
                }
            }
            *v += cur;
        }
    }
    h
}

/// Demodulated subframe seen by the UE, computed directly in the frequency
/// domain: each transmitting cell contributes its grid times its channel
/// response, plus noise of variance `noise_power` per resource element.
///
/// This matches demodulating [`synthesize_rx`] output whenever every path
/// delay lies within the cyclic prefix.
pub fn synthesize_demodulated<R: Rng + ?Sized>(
    responses: &[(&[Complex64], &ResourceGrid)],
    n_subcarriers: usize,
    noise_power: f64,
    rng: &mut R,
) -> Result<ResourceGrid, ChannelError> {
    let mut y = ResourceGrid::new(n_subcarriers);
    for (h, grid) in responses {
        if grid.n_subcarriers() != n_subcarriers || h.len() != n_subcarriers {
            return Err(ChannelError::RasterMismatch(format!(
                "grid of {} subcarriers on a {n_subcarriers}-subcarrier raster",
                grid.n_subcarriers()
            )));
        }
        for (symbol, k, x) in grid.populated() {
            let v = y.get(symbol, k) + h[k] * x;
            y.set(symbol, k, v);
        }
    }
    for symbol in 0..SYMBOLS_PER_SUBFRAME {
        add_noise(y.symbol_mut(symbol), noise_power, rng);
    }
    Ok(y)
}
