//! Property checks over random spinors, axes and start positions.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use pilotwave_core::apparatus::{pass_device, Sign};
use pilotwave_core::spinor::{
    born_probabilities, decompose, eigenspinors, recompose, MeasurementAxis, Spinor,
};
use pilotwave_core::trajectory::{critical_geometry, propagate_analytic, Branch};
use pilotwave_core::wavefield::{guidance_velocity, DeviceConfig, Polarity, WaveField};
use proptest::prelude::*;

fn spinor_strategy() -> impl Strategy<Value = Spinor> {
    (0.0..PI, 0.0..TAU, 0.0..TAU).prop_map(|(half_angle, phase_a, phase_b)| {
        Spinor::new(
            Complex64::from_polar((half_angle / 2.0).cos(), phase_a),
            Complex64::from_polar((half_angle / 2.0).sin(), phase_b),
        )
        .unwrap()
    })
}

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

proptest! {
    #[test]
    fn eigenspinors_are_orthonormal(theta in -10.0f64..10.0) {
        let (p, m) = eigenspinors(MeasurementAxis::new(theta).unwrap());
        prop_assert!(p.inner(&m).norm() <= 1e-12);
        prop_assert!((p.norm_sqr() - 1.0).abs() <= 1e-12);
        prop_assert!((m.norm_sqr() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn decompose_recompose_is_exact(s in spinor_strategy(), theta in 0.0f64..TAU) {
        let axis = MeasurementAxis::new(theta).unwrap();
        let (a, b) = decompose(&s, axis);
        prop_assert!((a.norm_sqr() + b.norm_sqr() - 1.0).abs() <= 1e-12);
        let back = recompose(a, b, axis);
        prop_assert!((back[0] - s.c_plus()).norm() <= 1e-12);
        prop_assert!((back[1] - s.c_minus()).norm() <= 1e-12);
    }

    #[test]
    fn born_ignores_global_phase(s in spinor_strategy(), theta in 0.0f64..TAU, phi in 0.0f64..TAU) {
        let axis = MeasurementAxis::new(theta).unwrap();
        let (p, m) = born_probabilities(&s, axis);
        let (pp, mm) = born_probabilities(&s.with_global_phase(phi), axis);
        prop_assert!((p - pp).abs() <= 1e-12 && (m - mm).abs() <= 1e-12);
        prop_assert!((p + m - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn overlap_drift_ignores_position_and_phases(
        p_plus in 0.0f64..1.0, phase_a in 0.0f64..TAU, phase_b in 0.0f64..TAU,
        fy in 0.01f64..0.99, fz in 0.01f64..0.99,
    ) {
        let d = device(0.0, Polarity::Standard);
        let f = WaveField::new(d, Complex64::from_polar(p_plus.sqrt(), phase_a), Complex64::from_polar((1.0 - p_plus).sqrt(), phase_b)).unwrap();
        let y = fy * d.overlap_length();
        let (lo, hi) = (d.upper_band(y).0, d.lower_band(y).1);
        let z = lo + fz * (hi - lo);
        let (vy, vz) = f.velocity(y, z).unwrap();
        prop_assert!((vy - d.k_prime()).abs() <= 1e-9);
        prop_assert!((vz - 5.0 * (2.0 * p_plus - 1.0)).abs() <= 1e-9);
    }

    #[test]
    fn velocity_invariant_under_rescaling(s in spinor_strategy(), scale in 0.01f64..100.0, phase in 0.0f64..TAU, y in 0.1f64..9.0, fz in 0.05f64..0.95) {
        let d = device(0.4, Polarity::Standard);
        let f = WaveField::from_spinor(d, &s).unwrap();
        let (lo, hi) = (d.upper_band(y).0, d.lower_band(y).1);
        let z = lo + fz * (hi - lo);
        let [psi, gy, gz] = f.psi_with_gradient(y, z);
        let c = Complex64::from_polar(scale, phase);
        let mul = |v: [Complex64; 2]| [v[0] * c, v[1] * c];
        let a = guidance_velocity(psi, gy, gz).unwrap();
        let b = guidance_velocity(mul(psi), mul(gy), mul(gz)).unwrap();
        prop_assert!((a.0 - b.0).abs() <= 1e-9 && (a.1 - b.1).abs() <= 1e-9);
    }

    #[test]
    fn exit_law_and_geometry(p_plus in 0.0f64..=1.0, z0 in -0.5f64..=0.5, kappa in 0.5f64..20.0, w in 0.1f64..3.0) {
        let d = DeviceConfig::new(MeasurementAxis::z(), Polarity::Standard, w, 100.0, kappa).unwrap();
        let f = WaveField::new(d, Complex64::new(p_plus.sqrt(), 0.0), Complex64::new((1.0 - p_plus).sqrt(), 0.0)).unwrap();
        let g = critical_geometry(&f);
        prop_assert!((g.p_plus_geometric - p_plus).abs() <= 1e-12);
        let z0 = z0 * w;
        prop_assume!((z0 - g.z_critical).abs() > 1e-12 * w);
        let r = propagate_analytic(z0, &f, -0.1, 1.2 * d.overlap_length()).unwrap();
        prop_assert_eq!(r.exit_branch == Branch::Upper, z0 > g.z_critical);
        for seg in r.breakpoints.windows(2) {
            prop_assert!(seg[1].t > seg[0].t && seg[1].y > seg[0].y);
        }
    }

    #[test]
    fn post_spinor_is_idempotent(s in spinor_strategy(), theta in 0.0f64..TAU, z0 in -0.5f64..0.5, z1 in -0.5f64..=0.5, reversed in any::<bool>()) {
        let pol = if reversed { Polarity::Reversed } else { Polarity::Standard };
        let d = device(theta, pol);
        let first = pass_device(&s, z0, &d).unwrap();
        let again = pass_device(&first.post_spinor, z1, &d).unwrap();
        prop_assert_eq!(again.label.sign, first.label.sign);
        prop_assert_eq!(again.branch, first.branch);
    }
}

#[test]
fn p_plus_of_up_z_is_cos_squared_half_angle() {
    for i in 0..100 {
        let theta = i as f64 * TAU / 100.0 + 0.013;
        let (p, _) = born_probabilities(&Spinor::up_z(), MeasurementAxis::new(theta).unwrap());
        assert!(
            (p - (theta / 2.0).cos().powi(2)).abs() <= 1e-12,
            "theta={theta}"
        );
    }
}

#[test]
fn symmetric_input_gives_opposite_labels_in_reversed_device() {
    let grid: Vec<f64> = (0..40).map(|i| -0.5 + (i as f64 + 0.5) / 40.0).collect();
    for theta in [0.0, 0.9, PI / 2.0] {
        let (p, m) = eigenspinors(MeasurementAxis::new(theta + PI / 2.0).unwrap());
        for s in [p, m] {
            // Eigenspinors of the perpendicular axis have |a₊| = |a₋| here.
            for &z0 in &grid {
                let a = pass_device(&s, z0, &device(theta, Polarity::Standard)).unwrap();
                let b = pass_device(&s, z0, &device(theta, Polarity::Reversed)).unwrap();
                assert_eq!(a.branch, b.branch);
                assert_eq!(a.label.sign, b.label.sign.flip());
            }
        }
    }
    assert_eq!(Sign::Plus.flip(), Sign::Minus);
}

#[test]
fn probability_is_conserved_across_the_device() {
    // |Ψ|² is constant between region edges, so a midpoint rule on each
    // sub-interval between edges is exact.
    let d = device(0.0, Polarity::Standard);
    for p_plus in [0.0f64, 0.2, 2.0 / 3.0, 1.0] {
        let f = WaveField::new(
            d,
            Complex64::new(p_plus.sqrt(), 0.0),
            Complex64::new((1.0f64 - p_plus).sqrt(), 0.0),
        )
        .unwrap();
        let line_integral = |y: f64| -> f64 {
            let mut edges = vec![-0.5, 0.5];
            if y >= 0.0 {
                let (a, b) = d.upper_band(y);
                let (c, e) = d.lower_band(y);
                edges = vec![a, b, c, e];
            }
            edges.sort_by(f64::total_cmp);
            edges
                .windows(2)
                .map(|s| (s[1] - s[0]) * f.density(y, 0.5 * (s[0] + s[1])))
                .sum()
        };
        let incident = line_integral(-1.0);
        assert!((incident - 1.0).abs() <= 1e-12);
        for y in [1.01 * d.overlap_length(), 2.0 * d.overlap_length(), 30.0] {
            let downstream = line_integral(y);
            assert!(
                (downstream - incident).abs() <= 1e-9,
                "p+={p_plus} y={y}: {downstream}"
            );
        }
    }
}

#[test]
fn final_positions_never_cross() {
    let d = device(0.0, Polarity::Standard);
    for p_plus in [0.1f64, 0.5, 2.0 / 3.0, 0.95] {
        let f = WaveField::new(
            d,
            Complex64::new(p_plus.sqrt(), 0.0),
            Complex64::new((1.0f64 - p_plus).sqrt(), 0.0),
        )
        .unwrap();
        let y_end = 1.5 * d.overlap_length();
        let mut last = f64::NEG_INFINITY;
        for i in 0..1000 {
            let z0 = -0.5 + (i as f64 + 0.5) / 1000.0;
            let z = propagate_analytic(z0, &f, -1.0, y_end).unwrap().end().z;
            assert!(z > last, "p+={p_plus} crossing at z0={z0}");
            last = z;
        }
    }
}
