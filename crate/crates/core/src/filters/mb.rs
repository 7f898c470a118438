use nalgebra::DVector;

use super::{cap_tracks, misdetected_existence, reduce_track, wrong_kind, FilterState, Posterior};
use crate::error::Result;
use crate::gm::{GaussianComponent, GaussianMixture};
use crate::models::{clutter_intensity, cv_predict, prepare_update, BirthModel, MotionModel, PreparedUpdate, SensorModel};
use crate::rfs::{BernoulliComponent, MbPosterior, SourceKind};

fn mb_mut(state: &mut FilterState) -> Result<&mut MbPosterior> {
    if state.kind() != SourceKind::Mb {
        return Err(wrong_kind(SourceKind::Mb, state));
    }
    match &mut state.posterior {
        Posterior::Mb(mb) => Ok(mb),
        _ => unreachable!(),
    }
}

pub(super) fn predict_track(track: &mut BernoulliComponent, motion: &MotionModel) {
    track.existence *= motion.survival;
    for c in &mut track.spatial.components {
        let (m, p) = cv_predict(&c.mean, &c.covariance, motion);
        c.mean = m;
        c.covariance = p;
    }
}

pub(super) fn birth_tracks(birth: &BirthModel) -> impl Iterator<Item = BernoulliComponent> + '_ {
    birth.components.iter().map(|b| {
        BernoulliComponent::new(
            b.weight.clamp(0.0, 1.0),
            GaussianMixture::new(vec![GaussianComponent::new(1.0, b.mean.clone(), b.covariance.clone())]),
        )
    })
}

/// Survival-weighted existence, predicted spatial moments, birth tracks appended.
pub fn mb_predict(state: &mut FilterState, motion: &MotionModel, birth: &BirthModel) -> Result<()> {
    let mb = mb_mut(state)?;
    for track in &mut mb.tracks {
        predict_track(track, motion);
    }
    mb.tracks.extend(birth_tracks(birth));
    Ok(())
}

pub(super) fn prepare_track(track: &BernoulliComponent, sensor: &SensorModel) -> Result<Vec<PreparedUpdate>> {
    track
        .spatial
        .iter()
        .map(|c| prepare_update(&c.mean, &c.covariance, sensor))
        .collect()
}

/// Cardinality-balanced multi-Bernoulli update: legacy (missed) tracks plus
/// one measurement-updated track per measurement.
pub fn mb_update(state: &mut FilterState, measurements: &[DVector<f64>], sensor: &SensorModel) -> Result<()> {
    let params = state.params;
    let mb = mb_mut(state)?;
    let pd = sensor.detection;

    let mut out: Vec<BernoulliComponent> = mb
        .tracks
        .iter()
        .map(|t| BernoulliComponent::new(misdetected_existence(t.existence, pd), t.spatial.clone()))
        .collect();

    if pd > 0.0 && !measurements.is_empty() {
        let prepared = mb
            .tracks
            .iter()
            .map(|t| prepare_track(t, sensor))
            .collect::<Result<Vec<_>>>()?;
        for z in measurements {
            let mut numerator = 0.0;
            let mut denominator = clutter_intensity(z, sensor);
            let mut spatial = Vec::new();
            for (track, preps) in mb.tracks.iter().zip(&prepared) {
                let r = track.existence;
                let terms: Vec<f64> = track
                    .spatial
                    .iter()
                    .zip(preps)
                    .map(|(c, p)| pd * c.weight * p.likelihood(z))
                    .collect();
                let rho: f64 = terms.iter().sum();
                let miss = 1.0 - r * pd;
                if rho <= 0.0 || miss <= 0.0 {
                    continue;
                }
                numerator += r * (1.0 - r) * rho / (miss * miss);
                denominator += r * rho / miss;
                let odds = r / (1.0 - r).max(f64::EPSILON);
                for (t, p) in terms.iter().zip(preps) {
                    let w = odds * t;
                    if w > 0.0 {
                        spatial.push(GaussianComponent::new(w, p.posterior_mean(z), p.posterior_cov().clone()));
                    }
                }
            }
            if !(denominator > 0.0) || spatial.is_empty() {
                continue;
            }
            let existence = (numerator / denominator).clamp(0.0, 1.0);
            let mut gm = GaussianMixture::new(spatial);
            gm.normalize();
            out.push(BernoulliComponent::new(existence, gm));
        }
    }

    let mut tracks = cap_tracks(out, |t| t.existence, &params);
    for t in &mut tracks {
        reduce_track(t, &params);
    }
    mb.tracks = tracks;
    Ok(())
}

/// Mode of the Poisson-binomial cardinality distribution with the given
/// existence probabilities. Ties resolve to the smaller count.
pub fn cardinality_mode(existence: &[f64]) -> usize {
    let mut dist = vec![1.0];
    for &r in existence {
        let mut next = vec![0.0; dist.len() + 1];
        for (n, &p) in dist.iter().enumerate() {
            next[n] += p * (1.0 - r);
            next[n + 1] += p * r;
        }
        dist = next;
    }
    let mut best = 0;
    for (n, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = n;
        }
    }
    best
}

/// Mean states of the most probable tracks, as many as the cardinality mode.
pub fn mb_extract(state: &FilterState) -> Result<Vec<DVector<f64>>> {
    let Posterior::Mb(mb) = &state.posterior else {
        return Err(wrong_kind(SourceKind::Mb, state));
    };
    let existence: Vec<f64> = mb.tracks.iter().map(|t| t.existence).collect();
    let count = cardinality_mode(&existence);
    let mut order: Vec<usize> = (0..mb.tracks.len()).collect();
    order.sort_by(|&a, &b| existence[b].total_cmp(&existence[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(count)
        .filter_map(|i| mb.tracks[i].mean_state())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::FilterParams;
    use crate::models::BirthKind;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn track(r: f64, mean: [f64; 4]) -> BernoulliComponent {
        BernoulliComponent::new(
            r,
            GaussianMixture::new(vec![GaussianComponent::new(
                1.0,
                DVector::from_row_slice(&mean),
                DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 25.0, 100.0, 25.0])),
            )]),
        )
    }

    fn state(tracks: Vec<BernoulliComponent>) -> FilterState {
        let mut s = FilterState::new(SourceKind::Mb, FilterParams::default());
        s.posterior = Posterior::Mb(MbPosterior::new(tracks));
        s
    }

    fn tracks(s: &FilterState) -> &[BernoulliComponent] {
        match &s.posterior {
            Posterior::Mb(mb) => &mb.tracks,
            _ => unreachable!(),
        }
    }

    fn sensor(pd: f64, clutter: f64) -> SensorModel {
        SensorModel::linear(pd, 10.0, clutter, [-1000.0, 1000.0], [-1000.0, 1000.0])
    }

    #[test]
    fn predict_examples() {
        let motion = MotionModel::constant_velocity(1.0, 25.0, 0.95);
        let none = BirthModel {
            kind: BirthKind::MultiBernoulli,
            components: vec![],
        };
        let mut s = state(vec![track(0.8, [0.0; 4])]);
        mb_predict(&mut s, &motion, &none).unwrap();
        assert_relative_eq!(tracks(&s)[0].existence, 0.76);

        let mut s = state(vec![]);
        let birth = BirthModel::at_sites(
            BirthKind::MultiBernoulli,
            0.03,
            &[[0.0, 0.0], [400.0, -600.0], [-800.0, -200.0], [-200.0, 800.0]],
            [10.0; 4],
        );
        mb_predict(&mut s, &motion, &birth).unwrap();
        assert_eq!(tracks(&s).len(), 4);
        assert_relative_eq!(s.expected_cardinality(), 0.12, epsilon = 1e-15);

        let mut s = state(vec![track(0.3, [0.0; 4]), track(0.9, [5.0, 0.0, 5.0, 0.0])]);
        mb_predict(&mut s, &MotionModel::constant_velocity(1.0, 25.0, 1.0), &none).unwrap();
        assert_eq!(tracks(&s)[0].existence, 0.3);
        assert_eq!(tracks(&s)[1].existence, 0.9);
    }

    #[test]
    fn misdetection_only() {
        let mut s = state(vec![track(0.5, [0.0; 4])]);
        mb_update(&mut s, &[], &sensor(0.9, 10.0)).unwrap();
        assert_relative_eq!(tracks(&s)[0].existence, 0.05 / 0.55, epsilon = 1e-15);
    }

    #[test]
    fn zero_detection_is_identity() {
        let prior = vec![track(0.5, [0.0; 4]), track(0.2, [300.0, 1.0, 0.0, 0.0])];
        let mut s = state(prior.clone());
        mb_update(&mut s, &[DVector::from_vec(vec![0.0, 0.0])], &sensor(0.0, 10.0)).unwrap();
        assert_eq!(tracks(&s), prior.as_slice());
    }

    #[test]
    fn confident_track_confirmed_by_measurement() {
        let mut s = state(vec![track(0.99, [20.0, 0.0, -30.0, 0.0])]);
        mb_update(&mut s, &[DVector::from_vec(vec![20.0, -30.0])], &sensor(1.0, 1e-9)).unwrap();
        let updated = tracks(&s).iter().map(|t| t.existence).fold(0.0, f64::max);
        assert!(updated >= 0.99, "{updated}");
    }

    #[test]
    fn cardinality_mode_by_enumeration() {
        assert_eq!(cardinality_mode(&[0.99]), 1);
        assert_eq!(cardinality_mode(&[0.1, 0.1]), 0);
        assert_eq!(cardinality_mode(&[1.0, 1.0, 1.0]), 3);
        assert_eq!(cardinality_mode(&[]), 0);
        assert_eq!(cardinality_mode(&[0.6, 0.6, 0.6]), 2);
    }

    #[test]
    fn extract_takes_most_probable_tracks() {
        let s = state(vec![track(0.2, [1.0, 0.0, 0.0, 0.0]), track(0.99, [2.0, 0.0, 0.0, 0.0])]);
        let est = mb_extract(&s).unwrap();
        assert_eq!(est.len(), 1);
        assert_eq!(est[0][0], 2.0);
        let s = state(vec![track(1.0, [0.0; 4]), track(1.0, [0.0; 4]), track(1.0, [0.0; 4])]);
        assert_eq!(mb_extract(&s).unwrap().len(), 3);
    }

    #[test]
    fn update_respects_caps_and_normalization() {
        let mut s = state((0..60).map(|i| track(0.5, [i as f64 * 30.0 - 900.0, 0.0, 0.0, 0.0])).collect());
        let zs: Vec<_> = (0..10).map(|i| DVector::from_vec(vec![i as f64 * 30.0 - 900.0, 1.0])).collect();
        mb_update(&mut s, &zs, &sensor(0.9, 10.0)).unwrap();
        assert!(tracks(&s).len() <= 50);
        for t in tracks(&s) {
            assert!(t.spatial.len() <= 20);
            assert!((0.0..=1.0).contains(&t.existence));
            assert_relative_eq!(crate::gm::gm_mass(&t.spatial), 1.0, epsilon = 1e-9);
        }
    }
}
