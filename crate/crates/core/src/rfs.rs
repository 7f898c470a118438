//! Posterior representations of the local filters and their flattening into
//! a single Gaussian mixture for the unlabeled PHD.
//!
//! An MB or LMB posterior's PHD is `sum_l r_l s_l(x)`; with GM spatial
//! densities this is one mixture whose component `j` corresponds to the pair
//! (track, component-within-track). [`IndexMap`] records that bijection so
//! fitted weights can be scattered back to the tracks.

use crate::error::{Error, Result};
use crate::gm::{gm_mass, GaussianComponent, GaussianMixture};

/// Tolerance on the per-track spatial weight normalization.
pub const SPATIAL_NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliComponent {
    pub existence: f64,
    pub spatial: GaussianMixture,
}

impl BernoulliComponent {
    pub fn new(existence: f64, spatial: GaussianMixture) -> Self {
        Self { existence, spatial }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.existence) {
            return Err(Error::Invariant(format!(
                "existence probability {} outside [0, 1]",
                self.existence
            )));
        }
        let total = gm_mass(&self.spatial);
        if (total - 1.0).abs() > SPATIAL_NORMALIZATION_TOL {
            return Err(Error::Invariant(format!(
                "spatial weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    /// Mean of the spatial density.
    pub fn mean_state(&self) -> Option<nalgebra::DVector<f64>> {
        self.spatial.mean_state()
    }
}

/// Track label: (birth time, index among the tracks born at that time).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrackLabel {
    pub birth_time: u64,
    pub birth_index: u64,
}

impl TrackLabel {
    pub const fn new(birth_time: u64, birth_index: u64) -> Self {
        Self {
            birth_time,
            birth_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MbPosterior {
    pub tracks: Vec<BernoulliComponent>,
}

impl MbPosterior {
    pub fn new(tracks: Vec<BernoulliComponent>) -> Self {
        Self { tracks }
    }

    pub fn expected_cardinality(&self) -> f64 {
        self.tracks.iter().map(|t| t.existence).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LmbPosterior {
    pub tracks: Vec<(TrackLabel, BernoulliComponent)>,
}

impl LmbPosterior {
    pub fn new(tracks: Vec<(TrackLabel, BernoulliComponent)>) -> Self {
        Self { tracks }
    }

    pub fn expected_cardinality(&self) -> f64 {
        self.tracks.iter().map(|(_, t)| t.existence).sum()
    }

    pub fn check_distinct_labels(&self) -> Result<()> {
        let mut labels: Vec<TrackLabel> = self.tracks.iter().map(|(l, _)| *l).collect();
        labels.sort_unstable();
        for pair in labels.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateLabel {
                    birth_time: pair[0].birth_time,
                    birth_index: pair[0].birth_index,
                });
            }
        }
        Ok(())
    }

    /// Drops the labels, keeping the current track order.
    pub fn strip_labels(&self) -> MbPosterior {
        MbPosterior::new(self.tracks.iter().map(|(_, t)| t.clone()).collect())
    }

    /// Stable sort of the tracks by label.
    pub fn sort_by_label(&mut self) {
        self.tracks.sort_by_key(|(l, _)| *l);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Phd,
    Mb,
    Lmb,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Phd => "phd",
            SourceKind::Mb => "mb",
            SourceKind::Lmb => "lmb",
        }
    }
}

/// Bijection between flattened component index `j` and
/// (track position, component position) pairs, both zero-based. For a PHD
/// source every component is its own track.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    entries: Vec<(usize, usize)>,
    track_sizes: Vec<usize>,
}

impl IndexMap {
    pub fn identity(len: usize) -> Self {
        Self {
            entries: (0..len).map(|j| (j, 0)).collect(),
            track_sizes: vec![1; len],
        }
    }

    /// Lexicographic enumeration over tracks with the given component counts.
    pub fn from_track_sizes(track_sizes: Vec<usize>) -> Self {
        let entries = track_sizes
            .iter()
            .enumerate()
            .flat_map(|(l, &n)| (0..n).map(move |i| (l, i)))
            .collect();
        Self {
            entries,
            track_sizes,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_tracks(&self) -> usize {
        self.track_sizes.len()
    }

    pub fn track_sizes(&self) -> &[usize] {
        &self.track_sizes
    }

    /// (track, component) for flattened index `j`.
    pub fn pair(&self, j: usize) -> Option<(usize, usize)> {
        self.entries.get(j).copied()
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }
}

/// Flattened GM of a posterior's unlabeled PHD.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedGm {
    pub gm: GaussianMixture,
    pub index_map: IndexMap,
    pub source_kind: SourceKind,
}

impl UnifiedGm {
    pub fn mass(&self) -> f64 {
        gm_mass(&self.gm)
    }
}

/// A PHD filter's posterior intensity already is its PHD.
pub fn poisson_phd(intensity: &GaussianMixture) -> UnifiedGm {
    UnifiedGm {
        gm: intensity.clone(),
        index_map: IndexMap::identity(intensity.len()),
        source_kind: SourceKind::Phd,
    }
}

fn flatten<'a>(tracks: impl Iterator<Item = &'a BernoulliComponent>, kind: SourceKind) -> Result<UnifiedGm> {
    let mut components = Vec::new();
    let mut sizes = Vec::new();
    for track in tracks {
        track.validate()?;
        sizes.push(track.spatial.len());
        components.extend(
            track
                .spatial
                .iter()
                .map(|c| GaussianComponent::new(track.existence * c.weight, c.mean.clone(), c.covariance.clone())),
        );
    }
    Ok(UnifiedGm {
        gm: GaussianMixture::new(components),
        index_map: IndexMap::from_track_sizes(sizes),
        source_kind: kind,
    })
}

/// Unified GM `sum_l sum_i r_l w_{l,i} N(x; mu_{l,i}, P_{l,i})` of an MB posterior.
pub fn mb_to_unified(mb: &MbPosterior) -> Result<UnifiedGm> {
    flatten(mb.tracks.iter(), SourceKind::Mb)
}

/// Same construction as [`mb_to_unified`] with tracks taken in label order.
///
/// The index map refers to positions in label order; call
/// [`LmbPosterior::sort_by_label`] first when the map is used to write back.
pub fn lmb_to_unified(lmb: &LmbPosterior) -> Result<UnifiedGm> {
    lmb.check_distinct_labels()?;
    let mut ordered: Vec<&(TrackLabel, BernoulliComponent)> = lmb.tracks.iter().collect();
    ordered.sort_by_key(|(l, _)| *l);
    flatten(ordered.into_iter().map(|(_, t)| t), SourceKind::Lmb)
}

/// Inverse of the flattening: groups unified weights by track.
pub fn scatter_weights(unified_weights: &[f64], index_map: &IndexMap) -> Result<Vec<Vec<f64>>> {
    if unified_weights.len() != index_map.len() {
        return Err(Error::LengthMismatch {
            expected: index_map.len(),
            found: unified_weights.len(),
        });
    }
    let mut out: Vec<Vec<f64>> = index_map
        .track_sizes()
        .iter()
        .map(|&n| Vec::with_capacity(n))
        .collect();
    for (&w, &(track, _)) in unified_weights.iter().zip(index_map.entries()) {
        out[track].push(w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bc(r: f64, parts: &[(f64, f64)]) -> BernoulliComponent {
        BernoulliComponent::new(
            r,
            parts.iter().map(|&(w, m)| GaussianComponent::scalar(w, m, 1.0)).collect(),
        )
    }

    #[test]
    fn poisson_identity() {
        let gm: GaussianMixture = [GaussianComponent::scalar(2.0, 0.0, 1.0)].into_iter().collect();
        let u = poisson_phd(&gm);
        assert_relative_eq!(u.mass(), 2.0);
        assert_eq!(u.source_kind, SourceKind::Phd);
        assert!(poisson_phd(&GaussianMixture::empty()).gm.is_empty());
        let gm2: GaussianMixture = [GaussianComponent::scalar(0.3, 0.0, 1.0), GaussianComponent::scalar(0.7, 1.0, 1.0)]
            .into_iter()
            .collect();
        assert_relative_eq!(poisson_phd(&gm2).mass(), 1.0);
    }

    #[test]
    fn mb_flattening() {
        let u = mb_to_unified(&MbPosterior::new(vec![bc(0.8, &[(1.0, 0.0)])])).unwrap();
        assert_relative_eq!(u.gm.components[0].weight, 0.8);

        let two = mb_to_unified(&MbPosterior::new(vec![bc(0.5, &[(1.0, 0.0)]), bc(0.5, &[(1.0, 3.0)])])).unwrap();
        assert_relative_eq!(two.mass(), 1.0);

        let u = mb_to_unified(&MbPosterior::new(vec![bc(0.6, &[(0.25, 0.0), (0.75, 1.0)])])).unwrap();
        assert_relative_eq!(u.gm.components[0].weight, 0.15);
        assert_relative_eq!(u.gm.components[1].weight, 0.45);
        assert_eq!(u.index_map.pair(0), Some((0, 0)));
        assert_eq!(u.index_map.pair(1), Some((0, 1)));
    }

    #[test]
    fn mb_rejects_unnormalized_track() {
        let err = mb_to_unified(&MbPosterior::new(vec![bc(0.5, &[(0.5, 0.0)])]));
        assert!(matches!(err, Err(Error::Invariant(_))));
    }

    #[test]
    fn lmb_flattening_in_label_order() {
        let lmb = LmbPosterior::new(vec![
            (TrackLabel::new(1, 2), bc(0.5, &[(1.0, 5.0)])),
            (TrackLabel::new(1, 1), bc(0.5, &[(1.0, 0.0)])),
        ]);
        let u = lmb_to_unified(&lmb).unwrap();
        assert_relative_eq!(u.mass(), 1.0);
        // label (1,1) comes first
        assert_eq!(u.gm.components[0].mean[0], 0.0);
        assert_eq!(u.gm.components[1].mean[0], 5.0);

        let single = LmbPosterior::new(vec![(TrackLabel::new(0, 1), bc(1.0, &[(1.0, 0.0)]))]);
        assert_relative_eq!(lmb_to_unified(&single).unwrap().mass(), 1.0);
    }

    #[test]
    fn lmb_duplicate_labels() {
        let lmb = LmbPosterior::new(vec![
            (TrackLabel::new(1, 1), bc(0.5, &[(1.0, 5.0)])),
            (TrackLabel::new(1, 1), bc(0.5, &[(1.0, 0.0)])),
        ]);
        assert_eq!(
            lmb_to_unified(&lmb),
            Err(Error::DuplicateLabel {
                birth_time: 1,
                birth_index: 1
            })
        );
    }

    #[test]
    fn lmb_matches_mb_when_sorted() {
        let mut lmb = LmbPosterior::new(vec![
            (TrackLabel::new(2, 1), bc(0.3, &[(0.4, 1.0), (0.6, 2.0)])),
            (TrackLabel::new(1, 1), bc(0.9, &[(1.0, 0.0)])),
        ]);
        lmb.sort_by_label();
        let a = lmb_to_unified(&lmb).unwrap();
        let b = mb_to_unified(&lmb.strip_labels()).unwrap();
        assert_eq!(a.gm, b.gm);
        assert_eq!(a.index_map, b.index_map);
    }

    #[test]
    fn scatter() {
        let map = IndexMap::from_track_sizes(vec![2, 1]);
        let out = scatter_weights(&[0.1, 0.3, 0.2], &map).unwrap();
        assert_eq!(out, vec![vec![0.1, 0.3], vec![0.2]]);

        let id = IndexMap::identity(3);
        let flat: Vec<f64> = scatter_weights(&[0.1, 0.3, 0.2], &id).unwrap().concat();
        assert_eq!(flat, vec![0.1, 0.3, 0.2]);

        assert!(matches!(
            scatter_weights(&[0.1], &map),
            Err(Error::LengthMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn scatter_round_trip_reproduces_products() {
        let mb = MbPosterior::new(vec![bc(0.6, &[(0.25, 0.0), (0.75, 1.0)]), bc(0.2, &[(1.0, 4.0)])]);
        let u = mb_to_unified(&mb).unwrap();
        let out = scatter_weights(&u.gm.weights(), &u.index_map).unwrap();
        for (track, ws) in mb.tracks.iter().zip(&out) {
            for (c, w) in track.spatial.iter().zip(ws) {
                assert_eq!(*w, track.existence * c.weight);
            }
        }
    }
}
