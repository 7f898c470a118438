//! LMB update through a δ-GLMB expansion: gate tracks against measurements,
//! split into independent clusters, enumerate the K best association
//! hypotheses per cluster by ranked assignment and marginalize back to one
//! Bernoulli component per label.

use nalgebra::DVector;

use super::mb::{birth_tracks, predict_track, prepare_track};
use super::{cap_tracks, misdetected_existence, reduce_track, wrong_kind, FilterState, Posterior};
use crate::assignment::{k_best, CostMatrix};
use crate::error::{Error, Result};
use crate::gm::{GaussianComponent, GaussianMixture};
use crate::models::{clutter_intensity, BirthModel, MotionModel, PreparedUpdate, SensorModel};
use crate::rfs::{BernoulliComponent, LmbPosterior, SourceKind, TrackLabel};

/// Floor applied to clutter intensities and miss factors before taking logs.
const LOG_FLOOR: f64 = 1e-300;

fn lmb_mut(state: &mut FilterState) -> Result<&mut LmbPosterior> {
    if state.kind() != SourceKind::Lmb {
        return Err(wrong_kind(SourceKind::Lmb, state));
    }
    match &mut state.posterior {
        Posterior::Lmb(lmb) => Ok(lmb),
        _ => unreachable!(),
    }
}

/// Same arithmetic as the MB prediction; births are labelled `(time, 1..)`.
pub fn lmb_predict(state: &mut FilterState, motion: &MotionModel, birth: &BirthModel, time: u64) -> Result<()> {
    let lmb = lmb_mut(state)?;
    for (_, track) in &mut lmb.tracks {
        predict_track(track, motion);
    }
    let mut index = 1;
    let mut born = Vec::new();
    for track in birth_tracks(birth) {
        let label = TrackLabel::new(time, index);
        if lmb.tracks.iter().any(|(l, _)| *l == label) {
            return Err(Error::DuplicateLabel {
                birth_time: time,
                birth_index: index,
            });
        }
        born.push((label, track));
        index += 1;
    }
    lmb.tracks.extend(born);
    lmb.sort_by_label();
    state.next_birth_index = index;
    Ok(())
}

struct TrackTerms {
    prepared: Vec<PreparedUpdate>,
    /// (measurement index, pd * sum_i w_i q_i(z)) for gated measurements.
    gated: Vec<(usize, f64)>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// LMB measurement update.
pub fn lmb_update(state: &mut FilterState, measurements: &[DVector<f64>], sensor: &SensorModel) -> Result<()> {
    let params = state.params;
    let lmb = lmb_mut(state)?;
    let pd = sensor.detection;
    let n = lmb.tracks.len();

    let mut terms = Vec::with_capacity(n);
    for (_, track) in &lmb.tracks {
        let prepared = if pd > 0.0 && !measurements.is_empty() {
            prepare_track(track, sensor)?
        } else {
            Vec::new()
        };
        let mut gated = Vec::new();
        for (j, z) in measurements.iter().enumerate() {
            if prepared.is_empty() {
                break;
            }
            let inside = prepared.iter().any(|p| p.mahalanobis_sq(z) < params.gate);
            if !inside {
                continue;
            }
            let rho: f64 = track
                .spatial
                .iter()
                .zip(&prepared)
                .map(|(c, p)| pd * c.weight * p.likelihood(z))
                .sum();
            if rho > 0.0 {
                gated.push((j, rho));
            }
        }
        terms.push(TrackTerms { prepared, gated });
    }

    // tracks sharing a gated measurement end up in the same cluster
    let mut parent: Vec<usize> = (0..n).collect();
    let mut owner: Vec<Option<usize>> = vec![None; measurements.len()];
    for (t, tt) in terms.iter().enumerate() {
        for &(j, _) in &tt.gated {
            match owner[j] {
                None => owner[j] = Some(t),
                Some(o) => {
                    let (a, b) = (find(&mut parent, o), find(&mut parent, t));
                    if a != b {
                        parent[b] = a;
                    }
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut root_slot: Vec<Option<usize>> = vec![None; n];
    for t in 0..n {
        let root = find(&mut parent, t);
        match root_slot[root] {
            Some(slot) => clusters[slot].push(t),
            None => {
                root_slot[root] = Some(clusters.len());
                clusters.push(vec![t]);
            }
        }
    }

    let mut updated: Vec<Option<BernoulliComponent>> = vec![None; n];
    for cluster in &clusters {
        let tracks: Vec<&BernoulliComponent> = cluster.iter().map(|&t| &lmb.tracks[t].1).collect();
        let cluster_terms: Vec<&TrackTerms> = cluster.iter().map(|&t| &terms[t]).collect();
        let results = update_cluster(&tracks, &cluster_terms, measurements, sensor, params.k_best);
        for (&t, r) in cluster.iter().zip(results) {
            updated[t] = Some(r);
        }
    }

    let tracks: Vec<(TrackLabel, BernoulliComponent)> = lmb
        .tracks
        .iter()
        .zip(updated)
        .map(|((l, _), u)| (*l, u.expect("every track belongs to a cluster")))
        .collect();
    let mut tracks = cap_tracks(tracks, |(_, t)| t.existence, &params);
    for (_, t) in &mut tracks {
        reduce_track(t, &params);
    }
    lmb.tracks = tracks;
    Ok(())
}

fn update_cluster(
    tracks: &[&BernoulliComponent],
    terms: &[&TrackTerms],
    measurements: &[DVector<f64>],
    sensor: &SensorModel,
    k: usize,
) -> Vec<BernoulliComponent> {
    let pd = sensor.detection;
    let mut meas: Vec<usize> = terms.iter().flat_map(|t| t.gated.iter().map(|&(j, _)| j)).collect();
    meas.sort_unstable();
    meas.dedup();

    if meas.is_empty() {
        return tracks
            .iter()
            .map(|t| BernoulliComponent::new(misdetected_existence(t.existence, pd), t.spatial.clone()))
            .collect();
    }

    let n = tracks.len();
    let m = meas.len();
    // columns: cluster measurements, then one miss column per track
    let mut cost = CostMatrix::new(n, m + n, f64::INFINITY);
    for (a, (track, tt)) in tracks.iter().zip(terms).enumerate() {
        let r = track.existence;
        for &(j, rho) in &tt.gated {
            let col = meas.binary_search(&j).expect("gated measurement is in the cluster");
            let kappa = clutter_intensity(&measurements[j], sensor).max(LOG_FLOOR);
            let ratio = r * rho / kappa;
            if ratio > 0.0 {
                cost.set(a, col, -ratio.ln());
            }
        }
        cost.set(a, m + a, -(1.0 - r * pd).max(LOG_FLOOR).ln());
    }

    let hypotheses = k_best(&cost, k);
    if hypotheses.is_empty() {
        return tracks
            .iter()
            .map(|t| BernoulliComponent::new(misdetected_existence(t.existence, pd), t.spatial.clone()))
            .collect();
    }
    let best = hypotheses[0].1;
    let raw: Vec<f64> = hypotheses.iter().map(|(_, c)| (best - c).exp()).collect();
    let total: f64 = raw.iter().sum();

    // per track: miss mass and per-measurement detection mass
    let mut miss = vec![0.0; n];
    let mut detect = vec![vec![0.0; m]; n];
    for ((assignment, _), w) in hypotheses.iter().zip(&raw) {
        let w = w / total;
        for (a, &col) in assignment.iter().enumerate() {
            if col < m {
                detect[a][col] += w;
            } else {
                miss[a] += w;
            }
        }
    }

    tracks
        .iter()
        .zip(terms)
        .enumerate()
        .map(|(a, (track, tt))| {
            let r = track.existence;
            let miss_mass = miss[a] * misdetected_existence(r, pd);
            let mut components: Vec<GaussianComponent> = track
                .spatial
                .iter()
                .map(|c| c.with_weight(miss_mass * c.weight))
                .collect();
            let mut existence = miss_mass;
            for (col, &mass) in detect[a].iter().enumerate() {
                if mass <= 0.0 {
                    continue;
                }
                let z = &measurements[meas[col]];
                let likes: Vec<f64> = track
                    .spatial
                    .iter()
                    .zip(&tt.prepared)
                    .map(|(c, p)| c.weight * p.likelihood(z))
                    .collect();
                let norm: f64 = likes.iter().sum();
                if !(norm > 0.0) {
                    continue;
                }
                existence += mass;
                for (l, p) in likes.iter().zip(&tt.prepared) {
                    components.push(GaussianComponent::new(
                        mass * l / norm,
                        p.posterior_mean(z),
                        p.posterior_cov().clone(),
                    ));
                }
            }
            let mut spatial = GaussianMixture::new(components.into_iter().filter(|c| c.weight > 0.0).collect());
            if spatial.is_empty() {
                spatial = track.spatial.clone();
            }
            spatial.normalize();
            BernoulliComponent::new(existence.clamp(0.0, 1.0), spatial)
        })
        .collect()
}

/// Labels and mean states of tracks with existence above the threshold.
pub fn lmb_extract(state: &FilterState) -> Result<Vec<(TrackLabel, DVector<f64>)>> {
    let Posterior::Lmb(lmb) = &state.posterior else {
        return Err(wrong_kind(SourceKind::Lmb, state));
    };
    Ok(lmb
        .tracks
        .iter()
        .filter(|(_, t)| t.existence > state.params.extraction_threshold)
        .filter_map(|(l, t)| t.mean_state().map(|m| (*l, m)))
        .collect())
}
