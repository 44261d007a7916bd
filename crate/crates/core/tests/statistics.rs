//! Monte Carlo checks of equivariance and Born statistics at fixed seeds.

use std::f64::consts::PI;

use num_complex::Complex64;
use pilotwave_core::apparatus::{ExperimentChain, Selection, Sign, Stage, TransverseMode};
use pilotwave_core::ensemble::{
    self, compare_to_born, run_ensemble, run_ensemble_with_mode, sample_initial,
};
use pilotwave_core::entangled::{run_scenario_ensemble, singlet, MeasurementOrder, ScenarioConfig};
use pilotwave_core::spinor::{MeasurementAxis, Spinor};
use pilotwave_core::trajectory::{critical_geometry, propagate_analytic};
use pilotwave_core::wavefield::{DeviceConfig, Polarity, WaveField};

fn device(theta: f64, polarity: Polarity) -> DeviceConfig {
    DeviceConfig::new(
        MeasurementAxis::new(theta).unwrap(),
        polarity,
        1.0,
        100.0,
        5.0,
    )
    .unwrap()
}

fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn equivariance_at_the_exit_plane() {
    let d = device(0.0, Polarity::Standard);
    let n = 20_000;
    for p_plus in [0.3f64, 2.0 / 3.0] {
        let f = WaveField::new(
            d,
            Complex64::new(p_plus.sqrt(), 0.0),
            Complex64::new((1.0 - p_plus).sqrt(), 0.0),
        )
        .unwrap();
        let y_end = 1.5 * d.overlap_length();
        let (ulo, uhi) = d.upper_band(y_end);
        let (llo, lhi) = d.lower_band(y_end);
        let mut upper = Vec::new();
        let mut lower = Vec::new();
        for z0 in sample_initial(n, d.w(), 11) {
            let z = propagate_analytic(z0, &f, -1.0, y_end).unwrap().end().z;
            if (ulo - 1e-12..=uhi + 1e-12).contains(&z) {
                upper.push(z);
            } else {
                assert!(
                    (llo - 1e-12..=lhi + 1e-12).contains(&z),
                    "z={z} outside both bands"
                );
                lower.push(z);
            }
        }
        let freq = upper.len() as f64 / n as f64;
        assert!(
            (freq - p_plus).abs() <= 3.0 * sigma(p_plus, n as u64),
            "freq {freq}"
        );
        // Uniform inside each band: mean at the band centre.
        for (band, (lo, hi)) in [(&upper, (ulo, uhi)), (&lower, (llo, lhi))] {
            let mean = band.iter().sum::<f64>() / band.len() as f64;
            let tol = 4.0 * (hi - lo) / (12.0 * band.len() as f64).sqrt();
            assert!((mean - 0.5 * (lo + hi)).abs() <= tol);
        }
    }
}

#[test]
fn geometric_probability_inside_mc_interval() {
    let d = device(0.0, Polarity::Standard);
    let n = 40_000;
    for (i, angle) in [0.3f64, 0.7, 1.1, 1.9, 2.6].into_iter().enumerate() {
        let s = Spinor::new(
            Complex64::new(angle.cos(), 0.0),
            Complex64::from_polar(angle.sin(), 0.4 * i as f64),
        )
        .unwrap();
        let chain = ExperimentChain::single(d, s).unwrap();
        let stats = run_ensemble(&chain, n, 100 + i as u64).unwrap();
        let freq = *stats.counts.get(&vec![Sign::Plus]).unwrap_or(&0) as f64 / n as f64;
        let g = critical_geometry(&WaveField::from_spinor(d, &s).unwrap());
        assert!(
            (g.p_plus_geometric - freq).abs() <= 3.0 * sigma(g.p_plus_geometric, n),
            "angle {angle}"
        );
    }
}

#[test]
fn chain_frequencies_match_born_products() {
    let chain = ExperimentChain::new(
        vec![
            Stage {
                device: device(0.8, Polarity::Reversed),
                selection: Selection::KeepLowerPort,
            },
            Stage {
                device: device(2.1, Polarity::Standard),
                selection: Selection::KeepUpperPort,
            },
            Stage {
                device: device(0.3, Polarity::Reversed),
                selection: Selection::MeasureBoth,
            },
        ],
        Spinor::real(0.6, 0.8).unwrap(),
    )
    .unwrap();
    let stats = run_ensemble(&chain, 50_000, 77).unwrap();
    let report = compare_to_born(&stats, &chain);
    assert!(report.pass, "{report:#?}");
    assert!(report.survival.is_some());
    assert_eq!(
        stats.counts.values().sum::<u64>() + stats.n_discarded,
        stats.n_total
    );
}

#[test]
fn transverse_modes_agree_statistically() {
    let s = Spinor::real(0.6, 0.8).unwrap();
    let chain = ExperimentChain::new(
        vec![
            Stage {
                device: device(0.0, Polarity::Standard),
                selection: Selection::KeepUpperPort,
            },
            Stage {
                device: device(0.0, Polarity::Reversed),
                selection: Selection::MeasureBoth,
            },
        ],
        s,
    )
    .unwrap();
    let n = 40_000;
    let fresh = run_ensemble_with_mode(&chain, n, 5, TransverseMode::Fresh).unwrap();
    let carry = run_ensemble_with_mode(&chain, n, 5, TransverseMode::CarryThrough).unwrap();
    let p = 0.36;
    for st in [&fresh, &carry] {
        let survival = st.survivors() as f64 / n as f64;
        assert!((survival - p).abs() <= 4.0 * sigma(p, n));
        assert!(compare_to_born(st, &chain).pass);
    }
}

#[test]
fn counts_are_seed_deterministic() {
    let chain = ExperimentChain::single(
        device(1.0, Polarity::Standard),
        Spinor::real(0.6, 0.8).unwrap(),
    )
    .unwrap();
    assert_eq!(
        run_ensemble(&chain, 5000, 9).unwrap(),
        run_ensemble(&chain, 5000, 9).unwrap()
    );
    assert_ne!(
        run_ensemble(&chain, 5000, 9).unwrap(),
        run_ensemble(&chain, 5000, 10).unwrap()
    );
}

#[test]
fn particle_two_marginals_do_not_signal() {
    let n = 20_000;
    let mut cfg = ScenarioConfig {
        state: singlet(),
        device1: Some(device(0.0, Polarity::Standard)),
        device2: device(PI / 3.0, Polarity::Standard),
        order: MeasurementOrder::Particle1First,
        z0_1: 0.0,
        z0_2: 0.0,
    };
    let plus2 = |counts: &std::collections::BTreeMap<(Option<Sign>, Sign), u64>| {
        counts
            .iter()
            .filter(|((_, s2), _)| *s2 == Sign::Plus)
            .map(|(_, c)| *c)
            .sum::<u64>() as f64
            / n as f64
    };
    let present = plus2(&run_scenario_ensemble(&cfg, n, 21).unwrap());
    cfg.device1 = None;
    let absent = plus2(&run_scenario_ensemble(&cfg, n, 22).unwrap());
    let se = (2.0 * 0.25 / n as f64).sqrt();
    assert!(
        (present - absent).abs() <= 3.0 * se,
        "{present} vs {absent}"
    );
}

#[test]
fn measurement_order_changes_individuals_not_frequencies() {
    let n = 20_000;
    let mut cfg = ScenarioConfig {
        state: singlet(),
        device1: Some(device(0.0, Polarity::Standard)),
        device2: device(0.0, Polarity::Standard),
        order: MeasurementOrder::Particle1First,
        z0_1: 0.0,
        z0_2: 0.0,
    };
    let first = run_scenario_ensemble(&cfg, n, 3).unwrap();
    cfg.order = MeasurementOrder::Particle2First;
    let second = run_scenario_ensemble(&cfg, n, 3).unwrap();
    // Same positions, different individual outcomes...
    assert_ne!(first, second);
    // ...identical joint statistics.
    let key = (Some(Sign::Plus), Sign::Minus);
    let f1 = *first.get(&key).unwrap() as f64 / n as f64;
    let f2 = *second.get(&key).unwrap() as f64 / n as f64;
    assert!((f1 - f2).abs() <= 3.0 * (2.0 * 0.25 / n as f64).sqrt());
    for counts in [&first, &second] {
        assert_eq!(counts.keys().filter(|(a, b)| *a == Some(*b)).count(), 0);
    }
}

#[test]
fn stage_streams_are_independent_of_chain_length() {
    let one = ExperimentChain::single(device(0.0, Polarity::Standard), Spinor::up_z()).unwrap();
    let two = ExperimentChain::new(
        vec![
            Stage {
                device: device(0.0, Polarity::Standard),
                selection: Selection::KeepUpperPort,
            },
            Stage {
                device: device(1.0, Polarity::Standard),
                selection: Selection::MeasureBoth,
            },
        ],
        Spinor::up_z(),
    )
    .unwrap();
    for i in 0..20 {
        assert_eq!(
            ensemble::particle_positions(&one, 4, i)[0],
            ensemble::particle_positions(&two, 4, i)[0]
        );
    }
}
