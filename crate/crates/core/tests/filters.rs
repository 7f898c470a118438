use nalgebra::DVector;
use rfs_fuse_core::filters::{FilterParams, FilterState, Posterior};
use rfs_fuse_core::models::{BirthKind, BirthModel, MotionModel, SensorModel};
use rfs_fuse_core::rfs::SourceKind;

const KINDS: [SourceKind; 3] = [SourceKind::Phd, SourceKind::Mb, SourceKind::Lmb];

fn birth(kind: SourceKind) -> BirthModel {
    let b = BirthModel::at_sites(BirthKind::MultiBernoulli, 0.05, &[[0.0, 0.0]], [30.0, 5.0, 30.0, 5.0]);
    if kind == SourceKind::Phd {
        b.as_poisson()
    } else {
        b
    }
}

/// One target moving at (5, -3) per step, detected every step without clutter.
fn track(kind: SourceKind, sensor: &SensorModel, measure: impl Fn([f64; 2]) -> DVector<f64>) -> FilterState {
    let motion = MotionModel::constant_velocity(1.0, 1.0, 0.99);
    let b = birth(kind);
    let mut state = FilterState::new(kind, FilterParams::default());
    for k in 1..=30u64 {
        let pos = [5.0 * k as f64, -3.0 * k as f64];
        state.predict(&motion, &b, k).unwrap();
        state.update(&[measure(pos)], sensor).unwrap();
    }
    state
}

#[test]
fn every_filter_locks_onto_a_single_target() {
    let sensor = SensorModel::linear(0.95, 5.0, 0.0, [-500.0, 500.0], [-500.0, 500.0]);
    for kind in KINDS {
        let state = track(kind, &sensor, |p| DVector::from_vec(p.to_vec()));
        let est = state.extract().unwrap();
        assert_eq!(est.len(), 1, "{kind:?}");
        assert!((est[0][0] - 150.0).abs() < 5.0 && (est[0][2] + 90.0).abs() < 5.0, "{kind:?}: {est:?}");
        assert!((est[0][1] - 5.0).abs() < 1.0 && (est[0][3] + 3.0).abs() < 1.0, "{kind:?}: {est:?}");
        assert!((state.expected_cardinality() - 1.0).abs() < 0.1, "{kind:?}");
    }
}

#[test]
fn range_bearing_tracking() {
    let sensor = SensorModel::range_bearing([-200.0, 100.0], 0.95, 2.0, 0.01, 0.0, 2000.0);
    for kind in KINDS {
        let state = track(kind, &sensor, |p| sensor.measure(&DVector::from_vec(vec![p[0], 0.0, p[1], 0.0])).unwrap());
        let est = state.extract().unwrap();
        assert_eq!(est.len(), 1, "{kind:?}");
        assert!((est[0][0] - 150.0).abs() < 10.0 && (est[0][2] + 90.0).abs() < 10.0, "{kind:?}: {est:?}");
    }
}

#[test]
fn silent_sensor_loses_the_target() {
    let sensor = SensorModel::linear(0.95, 5.0, 0.0, [-500.0, 500.0], [-500.0, 500.0]);
    let motion = MotionModel::constant_velocity(1.0, 1.0, 0.99);
    for kind in KINDS {
        let mut state = track(kind, &sensor, |p| DVector::from_vec(p.to_vec()));
        let before = state.expected_cardinality();
        for k in 31..=40u64 {
            state.predict(&motion, &birth(kind), k).unwrap();
            state.update(&[], &sensor).unwrap();
        }
        assert!(state.extract().unwrap().is_empty(), "{kind:?}");
        assert!(state.expected_cardinality() < 0.5 * before, "{kind:?}");
    }
}

#[test]
fn lmb_label_survives_tracking() {
    let sensor = SensorModel::linear(0.95, 5.0, 0.0, [-500.0, 500.0], [-500.0, 500.0]);
    let state = track(SourceKind::Lmb, &sensor, |p| DVector::from_vec(p.to_vec()));
    let Posterior::Lmb(lmb) = &state.posterior else { unreachable!() };
    let confirmed: Vec<_> = lmb.tracks.iter().filter(|(_, t)| t.existence > 0.5).collect();
    assert_eq!(confirmed.len(), 1);
    // born at the first step
    assert_eq!(confirmed[0].0.birth_time, 1);
}
