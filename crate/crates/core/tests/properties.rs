use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use otdoa_core::deployment::{hex_layout, serving_cell_by_power, Point};
use otdoa_core::lpp_session::{decode, encode, sample as lpp_sample};
use otdoa_core::positioner::{cdf, solve, TdoaProblem};
use otdoa_core::prs_config::{sample, validate, BitString, LtePrsConfig, LtemPrsConfig, NprsConfig, PrsConfig};
use otdoa_core::receiver::{form_rstd_with, quantize_rstd, ToaMeasurement, RSTD_RESOLUTION_S};
use otdoa_core::scheduler::{expand, expand_lte, expand_ltem, CYCLE_SUBFRAMES};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn subframes(cfg: &PrsConfig) -> BTreeSet<u16> {
    expand(cfg, None).unwrap().subframes().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lpp_messages_round_trip(seed in any::<u64>()) {
        let msg = lpp_sample::message(&mut rng(seed));
        prop_assert_eq!(decode(&encode(&msg)), Ok(msg));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sampled_configs_validate(seed in any::<u64>()) {
        let cfg = sample::any(&mut rng(seed));
        prop_assert!(validate(cfg).is_ok());
    }

    #[test]
    fn nprs_both_parts_is_the_intersection(seed in any::<u64>()) {
        let mut cfg: NprsConfig = sample::nprs(&mut rng(seed));
        prop_assume!(cfg.part_a.is_some() && cfg.part_b.is_some());
        let both = subframes(&PrsConfig::Nprs(cfg.clone()));
        let b = cfg.part_b.take();
        let only_a = subframes(&PrsConfig::Nprs(cfg.clone()));
        cfg.part_b = b;
        cfg.part_a = None;
        let only_b = subframes(&PrsConfig::Nprs(cfg));
        prop_assert_eq!(both, only_a.intersection(&only_b).copied().collect::<BTreeSet<_>>());
    }

    #[test]
    fn single_occasion_ltem_is_legacy_lte(seed in any::<u64>()) {
        let lte: LtePrsConfig = sample::lte(&mut rng(seed));
        let ltem = LtemPrsConfig {
            carrier_prbs: lte.carrier_prbs,
            bandwidth_prbs: lte.bandwidth_prbs,
            period_t_prs: lte.period_t_prs,
            occasion_length: lte.occasion_length,
            occasion_interval: None,
            subframe_offset: lte.subframe_offset,
            prs_id: lte.physical_cell_id,
            hopping: None,
            muting: lte.muting.clone(),
            muting_group_size: None,
        };
        prop_assert_eq!(expand_lte(&lte), expand_ltem(&ltem));
    }

    #[test]
    fn lte_schedule_repeats_every_muting_super_period(seed in any::<u64>()) {
        let cfg = sample::lte(&mut rng(seed));
        let period = u32::from(cfg.period_t_prs) * cfg.muting.as_ref().map_or(1, |m| m.len() as u32);
        prop_assume!(CYCLE_SUBFRAMES.is_multiple_of(period));
        let set: BTreeSet<u32> = expand_lte(&cfg).subframes().map(u32::from).collect();
        for &sf in &set {
            if sf + period < CYCLE_SUBFRAMES {
                prop_assert!(set.contains(&(sf + period)));
            }
        }
    }

    #[test]
    fn bit_strings_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..64)) {
        let b = BitString::from(bits);
        prop_assert_eq!(b.to_string().parse::<BitString>().unwrap(), b);
    }

    #[test]
    fn rigid_motion_moves_the_estimate(
        angle in 0.0..std::f64::consts::TAU,
        tx in -5e3..5e3f64,
        ty in -5e3..5e3f64,
        ux in -300.0..300.0f64,
        uy in -300.0..300.0f64,
    ) {
        let sites: Vec<Point> = hex_layout(700.0, 1).sites.iter().map(|s| s.position).collect();
        let (sin, cos) = angle.sin_cos();
        let moved = |p: Point| Point::new(cos * p.x - sin * p.y + tx, sin * p.x + cos * p.y + ty);
        let ue = Point::new(ux, uy);
        let a = TdoaProblem::noise_free(sites[0], sites[1..].to_vec(), ue);
        let b = TdoaProblem::noise_free(moved(sites[0]), sites[1..].iter().map(|p| moved(*p)).collect(), moved(ue));
        let ra = solve(&a, sites[0]).unwrap();
        let rb = solve(&b, moved(sites[0])).unwrap();
        prop_assert!(ra.converged && rb.converged);
        prop_assert!(ra.estimate.distance(ue) < 0.01);
        prop_assert!(moved(ra.estimate).distance(rb.estimate) < 0.01);
    }

    #[test]
    fn quantization_error_is_at_most_half_a_unit(raw in -1e-4..1e-4f64) {
        prop_assert!((quantize_rstd(raw) - raw).abs() <= RSTD_RESOLUTION_S / 2.0 + 1e-18);
    }

    #[test]
    fn rstds_ignore_a_common_clock_shift(
        toas in proptest::collection::vec(0.0..5e-6f64, 2..10),
        shift in -1e-3..1e-3f64,
    ) {
        let make = |offset: f64| -> Vec<ToaMeasurement> {
            toas.iter().enumerate().map(|(i, t)| ToaMeasurement {
                cell_id: i as u16,
                toa_s: t + offset,
                quality_db: 10.0,
                detected: true,
            }).collect()
        };
        let a = form_rstd_with(&make(0.0), 0, |x| x).unwrap();
        let b = form_rstd_with(&make(shift), 0, |x| x).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.rstd_s - y.rstd_s).abs() < 1e-15);
        }
    }

    #[test]
    fn serving_cell_survives_power_scaling(
        powers in proptest::collection::vec(-140.0..-40.0f64, 1..30),
        offset in -50.0..50.0f64,
    ) {
        let shifted: Vec<f64> = powers.iter().map(|p| p + offset).collect();
        prop_assert_eq!(serving_cell_by_power(&powers), serving_cell_by_power(&shifted));
    }

    #[test]
    fn percentiles_are_monotone(errors in proptest::collection::vec(0.0..1e3f64, 1..100)) {
        let c = cdf(&errors).unwrap();
        let qs = [40.0, 50.0, 67.0, 80.0, 90.0, 95.0];
        for w in qs.windows(2) {
            prop_assert!(c.percentile(w[0]) <= c.percentile(w[1]));
        }
    }
}
