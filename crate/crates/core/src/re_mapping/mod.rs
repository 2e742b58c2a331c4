//! Mapping of PRS and NPRS sequences onto the time-frequency resource grid.
//!
//! Within each PRS symbol two of the twelve subcarriers of every PRB carry
//! PRS. The occupied subcarrier moves diagonally from symbol to symbol and is
//! shifted by `identity mod 6`, which gives six mutually orthogonal mappings.

mod sequence;

use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use thiserror::Error;

pub use sequence::{gold_sequence, prs_c_init, prs_sequence, PrsSequence, NORMAL_CP, PRS_SEQUENCE_LEN};

use crate::prs_config::{frequency_shift, DeploymentMode, HoppingConfig, PrsConfig};

pub const SYMBOLS_PER_SUBFRAME: usize = 14;
pub const SYMBOLS_PER_SLOT: usize = 7;
pub const SUBCARRIERS_PER_PRB: usize = 12;
/// Largest carrier the PRS sequence is dimensioned for.
pub const MAX_CARRIER_PRBS: u16 = 110;
/// Symbols carrying cell-specific reference signals (antenna ports 0 and 1).
pub const CRS_SYMBOLS: [usize; 4] = [0, 4, 7, 11];
/// Control region excluded from LTE PRS.
pub const CONTROL_SYMBOLS: [usize; 3] = [0, 1, 2];
/// Last two symbols of each slot, which may carry NB-IoT NRS.
pub const NRS_SYMBOLS: [usize; 4] = [5, 6, 12, 13];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("invalid symbol-set combination: {0}")]
    InvalidCombination(String),
    #[error("allocation of {n_prbs} PRB at block {first_block} is outside the {carrier_prbs}-PRB carrier")]
    OutOfCarrier {
        carrier_prbs: u16,
        first_block: u16,
        n_prbs: u16,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technology {
    Lte,
    LteM,
    NbIot,
}

impl Technology {
    pub fn of(cfg: &PrsConfig) -> Self {
        match cfg {
            PrsConfig::Lte(_) => Technology::Lte,
            PrsConfig::Ltem(_) => Technology::LteM,
            PrsConfig::Nprs(_) => Technology::NbIot,
        }
    }
}

/// Which NPRS parts determined the subframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NprsPartMode {
    PartAOrBoth,
    PartBOnly,
}

/// OFDM symbols of a subframe that carry PRS, as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SymbolSet(u16);

impl SymbolSet {
    pub fn all() -> Self {
        Self((1 << SYMBOLS_PER_SUBFRAME) - 1)
    }

    pub fn empty() -> Self {
        Self(0)
    }

    pub fn from_symbols(symbols: impl IntoIterator<Item = usize>) -> Self {
        Self(symbols.into_iter().fold(0, |acc, s| {
            assert!(s < SYMBOLS_PER_SUBFRAME, "symbol {s} out of range");
            acc | 1 << s
        }))
    }

    pub fn without(self, symbols: &[usize]) -> Self {
        Self(symbols.iter().fold(self.0, |acc, &s| acc & !(1 << s)))
    }

    pub fn contains(self, symbol: usize) -> bool {
        symbol < SYMBOLS_PER_SUBFRAME && self.0 & (1 << symbol) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..SYMBOLS_PER_SUBFRAME).filter(move |&s| self.contains(s))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for SymbolSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Symbols carrying PRS for a technology. LTE and LTE-M take no deployment
/// arguments; NB-IoT needs both.
pub fn symbol_set(
    tech: Technology,
    mode: Option<DeploymentMode>,
    parts: Option<NprsPartMode>,
) -> Result<SymbolSet, MappingError> {
    let lte_like = SymbolSet::all().without(&CONTROL_SYMBOLS).without(&CRS_SYMBOLS);
    match (tech, mode, parts) {
        (Technology::Lte | Technology::LteM, None, None) => Ok(lte_like),
        (Technology::NbIot, Some(mode), Some(parts)) => {
            let base = match mode {
                DeploymentMode::Inband => lte_like,
                DeploymentMode::Guardband | DeploymentMode::Standalone => SymbolSet::all(),
            };
            Ok(match parts {
                NprsPartMode::PartAOrBoth => base,
                NprsPartMode::PartBOnly => base.without(&NRS_SYMBOLS),
            })
        }
        (Technology::NbIot, _, _) => Err(MappingError::InvalidCombination(
            "NB-IoT needs a deployment mode and a configuration part mode".into(),
        )),
        (tech, _, _) => Err(MappingError::InvalidCombination(format!(
            "{tech:?} takes no NB-IoT deployment arguments"
        ))),
    }
}

/// Symbol set of a configuration.
pub fn config_symbol_set(cfg: &PrsConfig) -> SymbolSet {
    let result = match cfg {
        PrsConfig::Lte(_) => symbol_set(Technology::Lte, None, None),
        PrsConfig::Ltem(_) => symbol_set(Technology::LteM, None, None),
        PrsConfig::Nprs(c) => symbol_set(
            Technology::NbIot,
            Some(c.deployment_mode),
            Some(if c.part_a.is_some() {
                NprsPartMode::PartAOrBoth
            } else {
                NprsPartMode::PartBOnly
            }),
        ),
    };
    result.expect("combination derived from a config is always valid")
}

/// Frequency placement of a PRS inside its carrier, in blocks of six
/// subcarriers (two blocks per PRB).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrsAllocation {
    pub carrier_prbs: u16,
    pub first_block: u16,
    pub n_prbs: u16,
}

impl PrsAllocation {
    /// `n_prbs` centred in the carrier.
    pub fn centered(carrier_prbs: u16, n_prbs: u16) -> Self {
        Self {
            carrier_prbs,
            first_block: carrier_prbs.saturating_sub(n_prbs),
            n_prbs,
        }
    }

    /// `n_prbs` starting at PRB `prb` of the carrier.
    pub fn at_prb(carrier_prbs: u16, prb: u16, n_prbs: u16) -> Self {
        Self {
            carrier_prbs,
            first_block: 2 * prb,
            n_prbs,
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        SUBCARRIERS_PER_PRB * self.carrier_prbs as usize
    }

    fn check(&self) -> Result<(), MappingError> {
        if self.first_block + 2 * self.n_prbs > 2 * self.carrier_prbs || self.carrier_prbs > MAX_CARRIER_PRBS {
            Err(MappingError::OutOfCarrier {
                carrier_prbs: self.carrier_prbs,
                first_block: self.first_block,
                n_prbs: self.n_prbs,
            })
        } else {
            Ok(())
        }
    }
}

/// Indices of the length-220 sequence mapped onto an allocation.
///
/// Standalone and guardband NPRS use the two central elements. Everything
/// else takes the portion a full-carrier PRS would place at the same
/// frequency, two elements per PRB.
pub fn sequence_slice(
    alloc: &PrsAllocation,
    tech: Technology,
    mode: Option<DeploymentMode>,
) -> Result<Range<usize>, MappingError> {
    if tech == Technology::NbIot && matches!(mode, Some(DeploymentMode::Standalone | DeploymentMode::Guardband)) {
        let mid = PRS_SEQUENCE_LEN / 2;
        return Ok(mid - 1..mid + 1);
    }
    alloc.check()?;
    let start = (alloc.first_block + MAX_CARRIER_PRBS - alloc.carrier_prbs) as usize;
    Ok(start..start + 2 * alloc.n_prbs as usize)
}

/// Allocation used by `cfg` in a subframe with hopping band `band_index`.
pub fn config_allocation(cfg: &PrsConfig, band_index: u8) -> PrsAllocation {
    match cfg {
        PrsConfig::Lte(c) => PrsAllocation::centered(c.carrier_prbs, c.bandwidth_prbs),
        PrsConfig::Ltem(c) => match &c.hopping {
            Some(HoppingConfig { band_prb_offsets, .. }) => {
                let start = band_prb_offsets[band_index as usize % band_prb_offsets.len()];
                PrsAllocation::at_prb(c.carrier_prbs, start, c.bandwidth_prbs)
            }
            None => PrsAllocation::centered(c.carrier_prbs, c.bandwidth_prbs),
        },
        PrsConfig::Nprs(c) => match (c.deployment_mode, c.inband_prb_index) {
            (DeploymentMode::Inband, Some(prb)) => PrsAllocation::at_prb(c.carrier_prbs, prb, 1),
            _ => PrsAllocation::at_prb(1, 0, 1),
        },
    }
}

/// One resource element occupied by PRS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrsRe {
    pub symbol: usize,
    pub subcarrier: usize,
    /// Index into the PRS sequence of the symbol.
    pub seq_index: usize,
}

/// Resource elements of `cfg` for hopping band `band_index`. The positions do
/// not depend on the subframe number.
pub fn prs_resource_elements(cfg: &PrsConfig, band_index: u8) -> Result<Vec<PrsRe>, MappingError> {
    prs_resource_elements_in(cfg, band_index, config_symbol_set(cfg))
}

/// Resource elements of `cfg` restricted to `symbols`.
pub fn prs_resource_elements_in(
    cfg: &PrsConfig,
    band_index: u8,
    symbols: SymbolSet,
) -> Result<Vec<PrsRe>, MappingError> {
    let alloc = config_allocation(cfg, band_index);
    let mode = match cfg {
        PrsConfig::Nprs(c) => Some(c.deployment_mode),
        _ => None,
    };
    let slice = sequence_slice(&alloc, Technology::of(cfg), mode)?;
    alloc.check()?;
    let shift = usize::from(frequency_shift(cfg.identity()));
    let mut out = Vec::new();
    for symbol in symbols.iter() {
        let l = symbol % SYMBOLS_PER_SLOT;
        let offset = (6 - l + shift) % 6;
        for m in 0..2 * alloc.n_prbs as usize {
            out.push(PrsRe {
                symbol,
                subcarrier: 6 * (alloc.first_block as usize + m) + offset,
                seq_index: slice.start + m,
            });
        }
    }
    Ok(out)
}

/// One subframe of complex baseband symbols, 14 OFDM symbols by
/// `n_subcarriers`. Unused elements hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    n_subcarriers: usize,
    data: Vec<Complex64>,
}

impl ResourceGrid {
    pub fn new(n_subcarriers: usize) -> Self {
        Self {
            n_subcarriers,
            data: vec![Complex64::new(0.0, 0.0); SYMBOLS_PER_SUBFRAME * n_subcarriers],
        }
    }

    /// Empty grid sized for the carrier of `cfg`.
    pub fn for_config(cfg: &PrsConfig) -> Self {
        Self::new(config_allocation(cfg, 0).n_subcarriers())
    }

    pub fn n_symbols(&self) -> usize {
        SYMBOLS_PER_SUBFRAME
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn get(&self, symbol: usize, subcarrier: usize) -> Complex64 {
        self.data[symbol * self.n_subcarriers + subcarrier]
    }

    pub fn set(&mut self, symbol: usize, subcarrier: usize, value: Complex64) {
        self.data[symbol * self.n_subcarriers + subcarrier] = value;
    }

    pub fn symbol(&self, symbol: usize) -> &[Complex64] {
        &self.data[symbol * self.n_subcarriers..(symbol + 1) * self.n_subcarriers]
    }

    pub fn symbol_mut(&mut self, symbol: usize) -> &mut [Complex64] {
        &mut self.data[symbol * self.n_subcarriers..(symbol + 1) * self.n_subcarriers]
    }

    /// Non-zero elements as `(symbol, subcarrier, value)`.
    pub fn populated(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.data.iter().enumerate().filter(|(_, v)| v.norm_sqr() > 0.0).map(|(i, &v)| {
            (i / self.n_subcarriers, i % self.n_subcarriers, v)
        })
    }
}

/// Slot number (0..=19) of `symbol` in subframe `abs_sf`.
pub fn slot_number(abs_sf: u16, symbol: usize) -> u8 {
    (2 * (abs_sf % 10) as usize + symbol / SYMBOLS_PER_SLOT) as u8
}

/// Write the PRS of `cfg` for subframe `abs_sf` into `grid`.
pub fn map_subframe(
    grid: &mut ResourceGrid,
    cfg: &PrsConfig,
    abs_sf: u16,
    band_index: u8,
) -> Result<(), MappingError> {
    map_symbols(grid, cfg, abs_sf, band_index, config_symbol_set(cfg))
}

/// As [`map_subframe`] but only for the symbols in `symbols`.
pub fn map_symbols(
    grid: &mut ResourceGrid,
    cfg: &PrsConfig,
    abs_sf: u16,
    band_index: u8,
    symbols: SymbolSet,
) -> Result<(), MappingError> {
    let res = prs_resource_elements_in(cfg, band_index, symbols)?;
    let id = cfg.identity();
    let mut current: Option<(usize, PrsSequence)> = None;
    for re in res {
        if current.as_ref().is_none_or(|(s, _)| *s != re.symbol) {
            let l = (re.symbol % SYMBOLS_PER_SLOT) as u8;
            let seq = prs_sequence(l, slot_number(abs_sf, re.symbol), id, NORMAL_CP);
            current = Some((re.symbol, seq));
        }
        let (_, seq) = current.as_ref().expect("sequence set above");
        grid.set(re.symbol, re.subcarrier, seq[re.seq_index]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::prs_config::{LtePrsConfig, LtemPrsConfig, NprsBitmapConfig, NprsConfig, NprsPeriodicConfig};

    fn lte(bandwidth: u16, pci: u16) -> PrsConfig {
        PrsConfig::Lte(LtePrsConfig {
            carrier_prbs: 50,
            bandwidth_prbs: bandwidth,
            period_t_prs: 160,
            occasion_length: 1,
            subframe_offset: 0,
            muting: None,
            physical_cell_id: pci,
        })
    }

    fn nprs(mode: DeploymentMode, prb: Option<u16>, part_a: bool, id: u16, carrier: u16) -> PrsConfig {
        PrsConfig::Nprs(NprsConfig {
            part_a: part_a.then(|| NprsBitmapConfig {
                nprs_bitmap: "1111111111".parse().unwrap(),
                muting: None,
            }),
            part_b: Some(NprsPeriodicConfig {
                period_t_prs: 160,
                offset_fraction_a: Default::default(),
                occasion_length: 10,
                muting: None,
            }),
            prs_id: id,
            deployment_mode: mode,
            inband_prb_index: prb,
            carrier_prbs: carrier,
        })
    }

    #[test]
    fn symbol_sets() {
        let all = symbol_set(Technology::NbIot, Some(DeploymentMode::Standalone), Some(NprsPartMode::PartAOrBoth)).unwrap();
        assert_eq!(all.len(), 14);

        let lte = symbol_set(Technology::Lte, None, None).unwrap();
        assert_eq!(lte.iter().collect::<Vec<_>>(), vec![3, 5, 6, 8, 9, 10, 12, 13]);
        assert!(!lte.contains(0) && !lte.contains(1) && !lte.contains(2));

        let inband_a = symbol_set(Technology::NbIot, Some(DeploymentMode::Inband), Some(NprsPartMode::PartAOrBoth)).unwrap();
        assert_eq!(inband_a, lte);
        let inband_b = symbol_set(Technology::NbIot, Some(DeploymentMode::Inband), Some(NprsPartMode::PartBOnly)).unwrap();
        assert_eq!(inband_b, inband_a.without(&[5, 6, 12, 13]));
        assert_eq!(inband_b.iter().collect::<Vec<_>>(), vec![3, 8, 9, 10]);

        let guard_b = symbol_set(Technology::NbIot, Some(DeploymentMode::Guardband), Some(NprsPartMode::PartBOnly)).unwrap();
        assert_eq!(guard_b.iter().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 7, 8, 9, 10, 11]);

        assert!(symbol_set(Technology::NbIot, None, None).is_err());
        assert!(symbol_set(Technology::Lte, Some(DeploymentMode::Inband), None).is_err());
    }

    #[test]
    fn sequence_slices() {
        let standalone = sequence_slice(&PrsAllocation::at_prb(1, 0, 1), Technology::NbIot, Some(DeploymentMode::Standalone)).unwrap();
        assert_eq!(standalone, 220 / 2 - 1..220 / 2 + 1);
        assert_eq!(standalone, 109..111);

        let full = sequence_slice(&PrsAllocation::centered(50, 50), Technology::Lte, None).unwrap();
        assert_eq!(full.len(), 100);
        assert_eq!(full, 60..160);

        let a = sequence_slice(&PrsAllocation::at_prb(50, 10, 1), Technology::NbIot, Some(DeploymentMode::Inband)).unwrap();
        let b = sequence_slice(&PrsAllocation::at_prb(50, 11, 1), Technology::NbIot, Some(DeploymentMode::Inband)).unwrap();
        assert_eq!(a.len(), 2);
        assert!(a.end <= b.start);

        // A 100-PRB carrier assigns elements 10 + 2p, 11 + 2p to PRB p.
        let p = 37;
        let inband = sequence_slice(&PrsAllocation::at_prb(100, p, 1), Technology::NbIot, Some(DeploymentMode::Inband)).unwrap();
        assert_eq!(inband, 10 + 2 * p as usize..12 + 2 * p as usize);

        let ltem = sequence_slice(&PrsAllocation::at_prb(50, 22, 6), Technology::LteM, None).unwrap();
        assert_eq!(ltem, 104..116);

        assert!(matches!(
            sequence_slice(&PrsAllocation::at_prb(50, 48, 6), Technology::LteM, None),
            Err(MappingError::OutOfCarrier { .. })
        ));
    }

    #[test]
    fn two_res_per_prb_per_symbol() {
        let mut grid = ResourceGrid::new(12);
        let cfg = PrsConfig::Lte(LtePrsConfig {
            carrier_prbs: 6,
            bandwidth_prbs: 6,
            period_t_prs: 160,
            occasion_length: 1,
            subframe_offset: 0,
            muting: None,
            physical_cell_id: 7,
        });
        let mut big = ResourceGrid::for_config(&cfg);
        map_subframe(&mut big, &cfg, 0, 0).unwrap();
        for symbol in 0..14 {
            for prb in 0..6 {
                let n = (0..12).filter(|k| big.get(symbol, 12 * prb + k).norm() > 0.0).count();
                assert_eq!(n, if symbol_set(Technology::Lte, None, None).unwrap().contains(symbol) { 2 } else { 0 });
            }
        }
        // Every populated value is unit magnitude.
        assert!(big.populated().all(|(_, _, v)| (v.norm() - 1.0).abs() < 1e-12));
        grid.set(0, 0, Complex64::new(1.0, 0.0));
        assert_eq!(grid.populated().count(), 1);
    }

    #[test]
    fn six_shifts_are_disjoint() {
        let sets: Vec<HashSet<(usize, usize)>> = (0..6)
            .map(|id| {
                prs_resource_elements(&lte(50, id), 0)
                    .unwrap()
                    .into_iter()
                    .map(|re| (re.symbol, re.subcarrier))
                    .collect()
            })
            .collect();
        for i in 0..6 {
            for j in i + 1..6 {
                assert!(sets[i].is_disjoint(&sets[j]), "{i} vs {j}");
            }
        }
        // The six classes tile every PRS symbol of every PRB.
        let union: HashSet<_> = sets.iter().flatten().copied().collect();
        assert_eq!(union.len(), 8 * 600);
    }

    #[test]
    fn empty_symbol_set_leaves_grid_unchanged() {
        let cfg = lte(50, 9);
        let mut grid = ResourceGrid::for_config(&cfg);
        grid.set(0, 5, Complex64::new(0.5, -0.5));
        let before = grid.clone();
        map_symbols(&mut grid, &cfg, 4, 0, SymbolSet::empty()).unwrap();
        assert_eq!(grid, before);
    }

    #[test]
    fn sequence_depends_on_slot() {
        let cfg = lte(6, 3);
        let mut g0 = ResourceGrid::for_config(&cfg);
        let mut g1 = ResourceGrid::for_config(&cfg);
        map_subframe(&mut g0, &cfg, 0, 0).unwrap();
        map_subframe(&mut g1, &cfg, 1, 0).unwrap();
        assert_ne!(g0, g1);
        let mut g10 = ResourceGrid::for_config(&cfg);
        map_subframe(&mut g10, &cfg, 10, 0).unwrap();
        assert_eq!(g0, g10);
    }

    #[test]
    fn ltem_hopping_band_placement() {
        let cfg = PrsConfig::Ltem(LtemPrsConfig {
            carrier_prbs: 50,
            bandwidth_prbs: 6,
            period_t_prs: 160,
            occasion_length: 6,
            occasion_interval: Some(80),
            subframe_offset: 0,
            prs_id: 1,
            hopping: Some(HoppingConfig {
                n_bands: 2,
                band_prb_offsets: vec![22, 2],
            }),
            muting: None,
            muting_group_size: None,
        });
        let band0 = prs_resource_elements(&cfg, 0).unwrap();
        let band1 = prs_resource_elements(&cfg, 1).unwrap();
        assert!(band0.iter().all(|re| (264..336).contains(&re.subcarrier)));
        assert!(band1.iter().all(|re| (24..96).contains(&re.subcarrier)));
        assert_eq!(band0.iter().map(|r| r.seq_index).min(), Some(104));
        assert_eq!(band1.iter().map(|r| r.seq_index).min(), Some(64));
    }

    #[test]
    fn inband_nprs_lands_on_lte_prs() {
        for p in [0u16, 13, 50, 99] {
            let id = 41;
            let lte_cfg = PrsConfig::Lte(LtePrsConfig {
                carrier_prbs: 100,
                bandwidth_prbs: 100,
                period_t_prs: 160,
                occasion_length: 1,
                subframe_offset: 0,
                muting: None,
                physical_cell_id: id,
            });
            let nb = nprs(DeploymentMode::Inband, Some(p), true, id, 100);
            let mut lte_grid = ResourceGrid::for_config(&lte_cfg);
            let mut nb_grid = ResourceGrid::for_config(&nb);
            map_subframe(&mut lte_grid, &lte_cfg, 3, 0).unwrap();
            map_subframe(&mut nb_grid, &nb, 3, 0).unwrap();
            let mut n = 0;
            for (s, k, v) in nb_grid.populated() {
                assert_eq!(lte_grid.get(s, k), v);
                assert!((12 * p as usize..12 * p as usize + 12).contains(&k));
                n += 1;
            }
            assert_eq!(n, 16);
        }
    }

    #[test]
    fn standalone_nprs_uses_central_elements() {
        let nb = nprs(DeploymentMode::Standalone, None, false, 5, 50);
        let res = prs_resource_elements(&nb, 0).unwrap();
        assert!(res.iter().all(|re| re.subcarrier < 12));
        assert!(res.iter().all(|re| re.seq_index == 109 || re.seq_index == 110));
        assert_eq!(res.len(), 2 * 10);
        assert_eq!(ResourceGrid::for_config(&nb).n_subcarriers(), 12);
    }
}
