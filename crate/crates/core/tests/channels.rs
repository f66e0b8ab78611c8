use std::f64::consts::PI;

use num_complex::Complex64;
use ssb_isac::harness::{build_world, RcsKind, ScenarioConfig};
use ssb_isac::scene::{build_codebook, upa_steering, ArrayGeometry};
use ssb_isac::{CVector, Point3, SPEED_OF_LIGHT};

/// Phase step per element along a panel axis for a unit direction component.
fn phase_steps(a: &CVector, m_h: usize) -> (Complex64, Complex64) {
    (a[1] / a[0], a[m_h] / a[0])
}

/// Steering vector written straight from the direction cosines of `d`.
fn steering_from_direction(d: &Point3, side: usize) -> CVector {
    let u = d.normalize();
    CVector::from_fn(side * side, |k, _| {
        let (v, h) = ((k / side) as f64, (k % side) as f64);
        Complex64::from_polar(1.0, -PI * (v * u.z + h * u.y))
    })
}

#[test]
fn channels_follow_the_geometry() {
    let cfg = ScenarioConfig::default();
    let (scene, channels) = build_world(&cfg, cfg.z_m, RcsKind::Sw2).unwrap();
    let rx = scene.layout.receiver.position;
    let lambda = SPEED_OF_LIGHT / cfg.fc_hz;
    for (q, p) in scene.grid.centers().iter().enumerate() {
        for (j, ap) in scene.layout.illuminators.iter().enumerate() {
            let h = &channels.sensing[q][j];
            let (l_tx, l_rx) = ((p - ap.position).norm(), (rx - p).norm());
            assert!((h.gain * l_tx.powi(2) * l_rx.powi(2) - 1.0).abs() < 1e-12);
            assert!((h.delay * SPEED_OF_LIGHT - (l_tx + l_rx)).abs() < 1e-9);
            // Carrier phase, reduced to one cycle.
            let cycles = (l_tx + l_rx) / lambda;
            let expected = Complex64::from_polar(1.0, -2.0 * PI * cycles.fract());
            assert!((h.phase - expected).norm() < 1e-6);
            let tx = steering_from_direction(&(p - ap.position), cfg.m_v);
            let rxv = steering_from_direction(&(rx - p), cfg.m_v);
            assert!((&h.h_tx - tx).norm() < 1e-9);
            assert!((&h.h_rx - rxv).norm() < 1e-9);
        }
    }
}

#[test]
fn bistatic_operator_is_rank_one() {
    let cfg = ScenarioConfig::default();
    let (_, channels) = build_world(&cfg, cfg.z_m, RcsKind::Sw2).unwrap();
    let h = &channels.sensing[1][2];
    let x = CVector::from_fn(144, |k, _| {
        Complex64::new((k as f64).sin(), (k as f64).cos())
    });
    let dense = h.matrix();
    assert!((&dense * &x - h.apply(&x)).norm() < 1e-12 * (dense.norm() * x.norm()));
    let v = h.h_rx.clone();
    let via_dense = v.dotc(&(&dense * &x));
    assert!((via_dense - h.combined(&v, &x)).norm() < 1e-10 * via_dense.norm());
    let svd = dense.svd(false, false);
    assert!(svd.singular_values[1] < 1e-12 * svd.singular_values[0]);
}

#[test]
fn steering_vectors_have_unit_modulus_entries() {
    let geom = ArrayGeometry::square(6).unwrap();
    let a = upa_steering(0.4, -0.2, &geom).unwrap();
    assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
    let (dh, dv) = phase_steps(&a, 6);
    assert!((dh - Complex64::from_polar(1.0, -PI * 0.4f64.sin() * 0.2f64.cos())).norm() < 1e-12);
    assert!((dv - Complex64::from_polar(1.0, PI * 0.2f64.sin())).norm() < 1e-12);
    assert!(upa_steering(0.0, 2.0, &geom).is_err());
}

#[test]
fn codebook_repeats_each_beam_four_times() {
    let geom = ArrayGeometry::square(12).unwrap();
    let book = build_codebook(&geom).unwrap();
    // Azimuth indices -6..=6 and elevation indices 0..=-6.
    assert_eq!(book.block_count(), 13 * 7);
    assert_eq!(book.len(), 4 * 13 * 7);
    for b in 0..book.block_count() {
        let first = book.column(4 * b);
        assert!((first.norm() - 1.0).abs() < 1e-12);
        for k in 1..4 {
            assert_eq!(book.column(4 * b + k), first);
        }
    }
    let (theta, phi) = book.angle_pairs()[0];
    assert!((theta + PI / 2.0).abs() < 1e-12 && phi == 0.0);
}

#[test]
fn schedule_pairs_voxel_and_column_by_index() {
    let cfg = ScenarioConfig::default();
    let (scene, _) = build_world(&cfg, cfg.z_m, RcsKind::Sw2).unwrap();
    for (q, e) in scene.schedule.entries().iter().enumerate() {
        assert_eq!((e.voxel, e.column), (q, q));
        assert_eq!(scene.ssb_column(q), scene.codebook.column(q));
    }
}
