//! Per-sensor GM-PHD, GM-MB (cardinality-balanced MeMBer) and GM-LMB
//! recursions.

mod lmb;
mod mb;
mod phd;

pub use lmb::{lmb_extract, lmb_predict, lmb_update};
pub use mb::{cardinality_mode, mb_extract, mb_predict, mb_update};
pub use phd::{phd_extract, phd_predict, phd_update};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gm::{gm_mass, gm_reduce, GaussianMixture};
use crate::models::{BirthModel, MotionModel, SensorModel};
use crate::rfs::{lmb_to_unified, mb_to_unified, poisson_phd, BernoulliComponent, LmbPosterior, MbPosterior, SourceKind, UnifiedGm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterCaps {
    pub max_gcs: usize,
    pub max_tracks: usize,
    pub max_gcs_per_track: usize,
}

impl Default for FilterCaps {
    fn default() -> Self {
        Self {
            max_gcs: 200,
            max_tracks: 50,
            max_gcs_per_track: 20,
        }
    }
}

/// Tuning shared by the three recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub caps: FilterCaps,
    /// Components lighter than this are dropped during reduction. For MB/LMB
    /// tracks it applies to the normalized spatial weights.
    pub prune_weight: f64,
    /// Squared Mahalanobis merging threshold.
    pub merge_threshold: f64,
    /// Tracks with existence below this are dropped.
    pub prune_existence: f64,
    /// Weight / existence above which a component or track is reported.
    pub extraction_threshold: f64,
    /// Squared Mahalanobis gate used by the LMB clustering.
    pub gate: f64,
    /// Hypotheses per cluster in the LMB ranked assignment.
    pub k_best: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            caps: FilterCaps::default(),
            prune_weight: 1e-5,
            merge_threshold: 4.0,
            prune_existence: 1e-3,
            extraction_threshold: 0.5,
            gate: 25.0,
            k_best: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Phd(GaussianMixture),
    Mb(MbPosterior),
    Lmb(LmbPosterior),
}

/// A local filter: posterior plus its tuning. Owned by one sensor pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub posterior: Posterior,
    pub params: FilterParams,
    /// Next birth index for the current birth time (LMB only).
    pub next_birth_index: u64,
}

impl FilterState {
    pub fn new(kind: SourceKind, params: FilterParams) -> Self {
        let posterior = match kind {
            SourceKind::Phd => Posterior::Phd(GaussianMixture::empty()),
            SourceKind::Mb => Posterior::Mb(MbPosterior::default()),
            SourceKind::Lmb => Posterior::Lmb(LmbPosterior::default()),
        };
        Self {
            posterior,
            params,
            next_birth_index: 1,
        }
    }

    pub fn kind(&self) -> SourceKind {
        match self.posterior {
            Posterior::Phd(_) => SourceKind::Phd,
            Posterior::Mb(_) => SourceKind::Mb,
            Posterior::Lmb(_) => SourceKind::Lmb,
        }
    }

    pub fn predict(&mut self, motion: &MotionModel, birth: &BirthModel, time: u64) -> Result<()> {
        match self.kind() {
            SourceKind::Phd => phd_predict(self, motion, birth),
            SourceKind::Mb => mb_predict(self, motion, birth),
            SourceKind::Lmb => lmb_predict(self, motion, birth, time),
        }
    }

    pub fn update(&mut self, measurements: &[DVector<f64>], sensor: &SensorModel) -> Result<()> {
        match self.kind() {
            SourceKind::Phd => phd_update(self, measurements, sensor),
            SourceKind::Mb => mb_update(self, measurements, sensor),
            SourceKind::Lmb => lmb_update(self, measurements, sensor),
        }
    }

    /// State estimates (labels dropped for LMB).
    pub fn extract(&self) -> Result<Vec<DVector<f64>>> {
        match self.kind() {
            SourceKind::Phd => phd_extract(self),
            SourceKind::Mb => mb_extract(self),
            SourceKind::Lmb => Ok(lmb_extract(self)?.into_iter().map(|(_, x)| x).collect()),
        }
    }

    /// Unified GM of the unlabeled PHD.
    pub fn unified(&self) -> Result<UnifiedGm> {
        match &self.posterior {
            Posterior::Phd(gm) => Ok(poisson_phd(gm)),
            Posterior::Mb(mb) => mb_to_unified(mb),
            Posterior::Lmb(lmb) => lmb_to_unified(lmb),
        }
    }

    pub fn expected_cardinality(&self) -> f64 {
        match &self.posterior {
            Posterior::Phd(gm) => gm_mass(gm),
            Posterior::Mb(mb) => mb.expected_cardinality(),
            Posterior::Lmb(lmb) => lmb.expected_cardinality(),
        }
    }
}

fn wrong_kind(expected: SourceKind, state: &FilterState) -> Error {
    Error::WrongKind {
        expected: expected.as_str(),
        found: state.kind().as_str(),
    }
}

/// Reduces a track's spatial mixture and restores unit mass.
fn reduce_track(track: &mut BernoulliComponent, params: &FilterParams) {
    let mut spatial = track.spatial.clone();
    spatial.normalize();
    let mut reduced = gm_reduce(
        &spatial,
        params.prune_weight,
        params.merge_threshold,
        params.caps.max_gcs_per_track,
    );
    if reduced.is_empty() {
        // keep the heaviest component rather than leaving an empty density
        reduced = gm_reduce(&spatial, 0.0, params.merge_threshold, 1);
    }
    reduced.normalize();
    track.spatial = reduced;
}

/// Drops improbable tracks and keeps the `max_tracks` most probable ones,
/// preserving the relative order of the survivors.
fn cap_tracks<T>(tracks: Vec<T>, existence: impl Fn(&T) -> f64, params: &FilterParams) -> Vec<T> {
    let mut indexed: Vec<(usize, T)> = tracks
        .into_iter()
        .filter(|t| existence(t) >= params.prune_existence)
        .enumerate()
        .collect();
    if indexed.len() > params.caps.max_tracks {
        indexed.sort_by(|a, b| existence(&b.1).total_cmp(&existence(&a.1)).then(a.0.cmp(&b.0)));
        indexed.truncate(params.caps.max_tracks);
        indexed.sort_by_key(|(i, _)| *i);
    }
    indexed.into_iter().map(|(_, t)| t).collect()
}

/// Existence after a missed detection: `r (1 - pd) / (1 - r pd)`.
pub fn misdetected_existence(r: f64, detection: f64) -> f64 {
    let denom = 1.0 - r * detection;
    if denom <= 0.0 {
        0.0
    } else {
        (r * (1.0 - detection) / denom).clamp(0.0, 1.0)
    }
}
