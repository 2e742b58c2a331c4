//! Length-31 Gold sequence and the QPSK PRS sequence built on it.

use num_complex::Complex64;

/// Elements of one PRS sequence, enough for a 110-PRB carrier at two
/// elements per PRB.
pub const PRS_SEQUENCE_LEN: usize = 220;

const FAST_FORWARD: usize = 1600;
const REG_MASK: u32 = 0x7fff_ffff;

/// Pseudo-random bits c(n), n = 0..len, of the LTE length-31 Gold sequence
/// seeded with `c_init`.
///
/// x1 follows x^31 + x^3 + 1 from the fixed state x1(0) = 1, x2 follows
/// x^31 + x^3 + x^2 + x + 1 from `c_init`, and both are advanced 1600 steps
/// before output starts.
pub fn gold_sequence(c_init: u32, len: usize) -> Vec<u8> {
    // Bit i of each register holds x(n + i).
    let mut x1: u32 = 1;
    let mut x2: u32 = c_init & REG_MASK;
    let mut out = Vec::with_capacity(len);
    for n in 0..FAST_FORWARD + len {
        if n >= FAST_FORWARD {
            out.push(((x1 ^ x2) & 1) as u8);
        }
        let f1 = (x1 ^ (x1 >> 3)) & 1;
        let f2 = (x2 ^ (x2 >> 1) ^ (x2 >> 2) ^ (x2 >> 3)) & 1;
        x1 = (x1 >> 1) | (f1 << 30);
        x2 = (x2 >> 1) | (f2 << 30);
    }
    out
}

/// Normal cyclic prefix flag used in the seed.
pub const NORMAL_CP: u32 = 1;

/// Seed of the PRS sequence for symbol `l` of slot `ns` and identity `id`:
/// 2^10 (7(ns+1) + l + 1)(2 id + 1) + 2 id + N_CP, reduced to 31 bits.
pub fn prs_c_init(l: u8, ns: u8, id: u16, n_cp: u32) -> u32 {
    let id = u64::from(id);
    let v = (1u64 << 10) * (7 * (u64::from(ns) + 1) + u64::from(l) + 1) * (2 * id + 1)
        + 2 * id
        + u64::from(n_cp);
    (v % (1u64 << 31)) as u32
}

/// 220 QPSK symbols of one PRS sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PrsSequence {
    values: Vec<Complex64>,
}

impl PrsSequence {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Index<usize> for PrsSequence {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.values[i]
    }
}

/// PRS sequence for symbol `l` (0..=13) of slot `ns` (0..=19).
pub fn prs_sequence(l: u8, ns: u8, id: u16, n_cp: u32) -> PrsSequence {
    assert!(l <= 13, "symbol index {l} out of range");
    assert!(ns <= 19, "slot index {ns} out of range");
    let c = gold_sequence(prs_c_init(l, ns, id, n_cp), 2 * PRS_SEQUENCE_LEN);
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let values = c
        .chunks_exact(2)
        .map(|p| Complex64::new(a * (1.0 - 2.0 * f64::from(p[0])), a * (1.0 - 2.0 * f64::from(p[1]))))
        .collect();
    PrsSequence { values }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Straight-line recurrence over explicit x1/x2 arrays.
    fn reference_gold(c_init: u32, len: usize) -> Vec<u8> {
        let total = FAST_FORWARD + len + 31;
        let mut x1 = vec![0u8; total];
        let mut x2 = vec![0u8; total];
        x1[0] = 1;
        for (i, x) in x2.iter_mut().enumerate().take(31) {
            *x = ((c_init >> i) & 1) as u8;
        }
        for n in 0..total - 31 {
            x1[n + 31] = (x1[n + 3] + x1[n]) % 2;
            x2[n + 31] = (x2[n + 3] + x2[n + 2] + x2[n + 1] + x2[n]) % 2;
        }
        (0..len).map(|n| (x1[n + FAST_FORWARD] + x2[n + FAST_FORWARD]) % 2).collect()
    }

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|b| b - b'0').collect()
    }

    #[test]
    fn frozen_regression_vectors() {
        assert_eq!(gold_sequence(11265, 32), bits("01110111100110100001101001001011"));
        assert_eq!(gold_sequence(0x1234567, 32), bits("00000110010100111000011010010100"));
        assert_eq!(gold_sequence(1, 32), bits("00000010100000110000001101110100"));
    }

    #[test]
    fn matches_reference_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c: u32 = rng.random_range(0..1 << 31);
            assert_eq!(gold_sequence(c, 600), reference_gold(c, 600));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(gold_sequence(987654, 300), gold_sequence(987654, 300));
    }

    #[test]
    fn distinct_seeds_give_distinct_prefixes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut differing = 0;
        for _ in 0..1000 {
            let a: u32 = rng.random_range(0..1 << 31);
            let b: u32 = rng.random_range(0..1 << 31);
            if a == b {
                continue;
            }
            if gold_sequence(a, 256) != gold_sequence(b, 256) {
                differing += 1;
            }
        }
        assert!(differing >= 999, "{differing}");
    }

    #[test]
    fn seed_formula() {
        assert_eq!(prs_c_init(3, 0, 0, NORMAL_CP), 11265);
        assert_eq!(prs_c_init(0, 0, 1, NORMAL_CP), 1024 * 8 * 3 + 2 + 1);
        // Largest PRS id and indices stay within 31 bits without wrapping.
        let max = (1u64 << 10) * (7 * 20 + 13 + 1) * (2 * 4095 + 1) + 2 * 4095 + 1;
        assert!(max < 1 << 31);
        assert_eq!(u64::from(prs_c_init(13, 19, 4095, NORMAL_CP)), max);
    }

    #[test]
    fn prs_sequence_properties() {
        let a = prs_sequence(3, 0, 7, NORMAL_CP);
        assert_eq!(a.len(), PRS_SEQUENCE_LEN);
        assert_eq!(a, prs_sequence(3, 0, 7, NORMAL_CP));
        assert_ne!(a, prs_sequence(3, 0, 8, NORMAL_CP));
        assert_ne!(a, prs_sequence(4, 0, 7, NORMAL_CP));
        assert_ne!(a, prs_sequence(3, 1, 7, NORMAL_CP));
        for v in a.values() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert!((v.re.abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }
}
