//! Centralized arithmetic-average fusion of heterogeneous local posteriors.
//!
//! Every sensor's unlabeled PHD is a Gaussian mixture whose means and
//! covariances stay fixed; only the component weights are refitted so that
//! each local PHD approaches the fusion-weighted average of all of them.
//! The fit is a coordinate descent on `ISD(D_i, D_AA)` with the closed-form
//! per-coordinate minimizer, a weight floor, relaxation and a fading
//! learning rate. Cardinality consensus rescales the result afterwards.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::{FilterState, Posterior};
use crate::gm::{gaussian_evaluations, CrossTermTable, GaussianMixture};
use crate::rfs::{poisson_phd, scatter_weights, IndexMap, SourceKind, UnifiedGm};

/// Existence probabilities are capped here after cardinality consensus.
pub const MAX_EXISTENCE: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// Fusion weights `w_i`, positive and summing to one.
    pub fusion_weights: Vec<f64>,
    /// Initial learning rate.
    pub alpha1: f64,
    /// Fading rate; `alpha_{t+1} = beta * alpha_t`.
    pub beta: f64,
    /// Weight floor applied to every per-coordinate minimizer.
    pub floor: f64,
    /// The fit stops once every sensor's ISD to the average is at most this.
    pub conv_threshold: f64,
    pub t_max: usize,
    pub cc_enabled: bool,
    pub fit_enabled: bool,
    /// Use the plain sum of the local cardinalities instead of their
    /// weighted mean.
    pub cc_literal_sum: bool,
}

impl FusionConfig {
    /// Defaults with uniform fusion weights over `sensors` sensors.
    pub fn uniform(sensors: usize) -> Self {
        Self {
            fusion_weights: vec![1.0 / sensors.max(1) as f64; sensors],
            alpha1: 0.2,
            beta: 0.6,
            floor: 0.01,
            conv_threshold: 1e-4,
            t_max: 3,
            cc_enabled: true,
            fit_enabled: true,
            cc_literal_sum: false,
        }
    }

    pub fn validate(&self, sensors: usize) -> Result<()> {
        if self.fusion_weights.len() != sensors {
            return Err(Error::LengthMismatch {
                expected: sensors,
                found: self.fusion_weights.len(),
            });
        }
        if self.fusion_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidConfig("fusion weights must be positive".into()));
        }
        let total: f64 = self.fusion_weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("fusion weights sum to {total}, not 1")));
        }
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha1 must lie in (0, 1), got {}", self.alpha1)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidConfig(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.floor >= 0.0) || !(self.conv_threshold >= 0.0) {
            return Err(Error::InvalidConfig("floor and conv_threshold must be nonnegative".into()));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidConfig("t_max must be positive".into()));
        }
        Ok(())
    }
}

/// Unified GMs and expected cardinalities of all sensors at one fusion event.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionSnapshot {
    pub unified: Vec<UnifiedGm>,
    pub cardinalities: Vec<f64>,
}

impl FusionSnapshot {
    pub fn from_states(states: &[FilterState]) -> Result<Self> {
        let unified = states.iter().map(|s| s.unified()).collect::<Result<Vec<_>>>()?;
        let cardinalities = states.iter().map(|s| s.expected_cardinality()).collect();
        let snap = Self { unified, cardinalities };
        snap.check_dims()?;
        Ok(snap)
    }

    /// Snapshot of plain PHD intensities.
    pub fn from_mixtures(mixtures: &[GaussianMixture]) -> Result<Self> {
        let unified: Vec<UnifiedGm> = mixtures.iter().map(poisson_phd).collect();
        let cardinalities = unified.iter().map(|u| u.mass()).collect();
        let snap = Self { unified, cardinalities };
        snap.check_dims()?;
        Ok(snap)
    }

    fn check_dims(&self) -> Result<()> {
        let mut dim = None;
        for u in &self.unified {
            if let Some(d) = u.gm.dim() {
                match dim {
                    None => dim = Some(d),
                    Some(e) if e != d => return Err(Error::DimensionMismatch { expected: e, found: d }),
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn num_sensors(&self) -> usize {
        self.unified.len()
    }

    /// Pre-fusion weights of every sensor.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.unified.iter().map(|u| u.gm.weights()).collect()
    }

    /// Cross-term table over all sensors' components, sensor `i` in block `i`.
    pub fn table(&self) -> Result<CrossTermTable> {
        let mixtures: Vec<&GaussianMixture> = self.unified.iter().map(|u| &u.gm).collect();
        CrossTermTable::build(&mixtures)
    }
}

fn check_sensor(snapshot: &FusionSnapshot, i: usize, config: &FusionConfig, table: &CrossTermTable) -> Result<()> {
    let n = snapshot.num_sensors();
    if n < 2 {
        return Err(Error::FusionUndefined("at least two sensors are required".into()));
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    if config.fusion_weights.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: config.fusion_weights.len(),
        });
    }
    if table.num_mixtures() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: table.num_mixtures(),
        });
    }
    if config.fusion_weights[i] >= 1.0 {
        return Err(Error::FusionUndefined(format!("fusion weight of sensor {i} is 1")));
    }
    Ok(())
}

/// `sum_{s != i} w_s sum_l omega_s^l N(mu_i^j; mu_s^l, P_i^j + P_s^l)` for one `j`.
fn external_term(table: &CrossTermTable, config: &FusionConfig, i: usize, j: usize, weights: &[Vec<f64>]) -> f64 {
    let row = table.row(table.global(i, j));
    let mut acc = 0.0;
    for (s, ws) in weights.iter().enumerate() {
        if s == i {
            continue;
        }
        let block = &row[table.block(s)];
        acc += config.fusion_weights[s] * block.iter().zip(ws).map(|(t, w)| t * w).sum::<f64>();
    }
    acc
}

fn sibling_term(table: &CrossTermTable, i: usize, j: usize, own: &[f64]) -> f64 {
    let row = &table.row(table.global(i, j))[table.block(i)];
    row.iter()
        .zip(own)
        .enumerate()
        .filter(|(k, _)| *k != j)
        .map(|(_, (t, w))| t * w)
        .sum()
}

fn minimizer(table: &CrossTermTable, i: usize, j: usize, w_i: f64, external: f64, sibling: f64) -> Result<f64> {
    let self_overlap = table.get((i, j), (i, j));
    if !(self_overlap > 0.0) {
        return Err(Error::DegenerateCovariance);
    }
    Ok((external / (1.0 - w_i) - sibling) / self_overlap)
}

/// Unconstrained minimizer of `ISD(D_i, D_AA)` over the weight of component
/// `j` of sensor `i`, all other weights held at `current_weights`. May be
/// negative.
pub fn bfom_weight(
    snapshot: &FusionSnapshot,
    i: usize,
    j: usize,
    current_weights: &[Vec<f64>],
    config: &FusionConfig,
    table: &CrossTermTable,
) -> Result<f64> {
    check_sensor(snapshot, i, config, table)?;
    if current_weights.len() != snapshot.num_sensors() {
        return Err(Error::LengthMismatch {
            expected: snapshot.num_sensors(),
            found: current_weights.len(),
        });
    }
    for (s, w) in current_weights.iter().enumerate() {
        if w.len() != table.block_len(s) {
            return Err(Error::LengthMismatch {
                expected: table.block_len(s),
                found: w.len(),
            });
        }
    }
    if j >= table.block_len(i) {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: table.block_len(i),
        });
    }
    let external = external_term(table, config, i, j, current_weights);
    let sibling = sibling_term(table, i, j, &current_weights[i]);
    minimizer(table, i, j, config.fusion_weights[i], external, sibling)
}

/// Quantities of sensor `i`'s fit that do not change across iterations:
/// the other sensors' weights are frozen at their pre-fusion values.
struct SensorFit<'a> {
    table: &'a CrossTermTable,
    i: usize,
    w_i: f64,
    external: Vec<f64>,
    /// `int R^2` with `R = sum_{s != i} w_s D_s`.
    rest_energy: f64,
}

impl<'a> SensorFit<'a> {
    fn new(snapshot: &FusionSnapshot, i: usize, config: &FusionConfig, table: &'a CrossTermTable) -> Result<Self> {
        check_sensor(snapshot, i, config, table)?;
        let weights = snapshot.weights();
        let external = (0..table.block_len(i))
            .map(|j| external_term(table, config, i, j, &weights))
            .collect();
        let mut rest_energy = 0.0;
        for s in 0..weights.len() {
            if s == i {
                continue;
            }
            for u in 0..weights.len() {
                if u == i {
                    continue;
                }
                rest_energy += config.fusion_weights[s]
                    * config.fusion_weights[u]
                    * table.quadratic(s, &weights[s], u, &weights[u]);
            }
        }
        Ok(Self {
            table,
            i,
            w_i: config.fusion_weights[i],
            external,
            rest_energy,
        })
    }

    fn bfom(&self, j: usize, own: &[f64]) -> Result<f64> {
        minimizer(
            self.table,
            self.i,
            j,
            self.w_i,
            self.external[j],
            sibling_term(self.table, self.i, j, own),
        )
    }

    /// `ISD(D_i, D_AA) = int ((1 - w_i) D_i - R)^2`.
    fn objective(&self, own: &[f64]) -> f64 {
        let a = 1.0 - self.w_i;
        let own_energy = self.table.quadratic(self.i, own, self.i, own);
        let cross: f64 = own.iter().zip(&self.external).map(|(w, e)| w * e).sum();
        (a * a * own_energy - 2.0 * a * cross + self.rest_energy).max(0.0)
    }

    fn sweep(&self, own: &[f64], floor: f64, alpha: f64, mut observe: impl FnMut(usize, &[f64])) -> Result<Vec<f64>> {
        let mut w = own.to_vec();
        for j in 0..w.len() {
            let clamped = self.bfom(j, &w)?.max(floor);
            w[j] = alpha * clamped + (1.0 - alpha) * w[j];
            observe(j, &w);
        }
        Ok(w)
    }
}

fn check_alpha(alpha_t: f64) -> Result<()> {
    if !(alpha_t > 0.0 && alpha_t <= 1.0) {
        return Err(Error::InvalidConfig(format!("learning rate must lie in (0, 1], got {alpha_t}")));
    }
    Ok(())
}

/// One Gauss-Seidel pass over sensor `i`'s components starting from
/// `current`, the other sensors frozen at their snapshot weights.
pub fn sweep(
    snapshot: &FusionSnapshot,
    i: usize,
    current: &[f64],
    config: &FusionConfig,
    table: &CrossTermTable,
    alpha_t: f64,
) -> Result<Vec<f64>> {
    sweep_observed(snapshot, i, current, config, table, alpha_t, |_, _| {})
}

/// [`sweep`] calling `observe(j, weights)` after coordinate `j` is updated.
pub fn sweep_observed(
    snapshot: &FusionSnapshot,
    i: usize,
    current: &[f64],
    config: &FusionConfig,
    table: &CrossTermTable,
    alpha_t: f64,
    observe: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    check_alpha(alpha_t)?;
    let fit = SensorFit::new(snapshot, i, config, table)?;
    if current.len() != table.block_len(i) {
        return Err(Error::LengthMismatch {
            expected: table.block_len(i),
            found: current.len(),
        });
    }
    fit.sweep(current, config.floor, alpha_t, observe)
}

pub fn learning_rate_update(alpha_t: f64, beta: f64) -> f64 {
    beta * alpha_t
}

/// `ISD(D_i, D_AA)` with sensor `i` at weights `own` and the others at their
/// snapshot weights.
pub fn fit_objective(
    snapshot: &FusionSnapshot,
    i: usize,
    own: &[f64],
    config: &FusionConfig,
    table: &CrossTermTable,
) -> Result<f64> {
    let fit = SensorFit::new(snapshot, i, config, table)?;
    if own.len() != table.block_len(i) {
        return Err(Error::LengthMismatch {
            expected: table.block_len(i),
            found: own.len(),
        });
    }
    Ok(fit.objective(own))
}

pub fn converged(
    snapshot: &FusionSnapshot,
    i: usize,
    own: &[f64],
    config: &FusionConfig,
    table: &CrossTermTable,
) -> Result<bool> {
    Ok(fit_objective(snapshot, i, own, config, table)? <= config.conv_threshold)
}

/// Weighted mean of the local cardinality estimates.
pub fn cardinality_consensus(cardinalities: &[f64], fusion_weights: &[f64]) -> Result<f64> {
    if cardinalities.len() != fusion_weights.len() {
        return Err(Error::LengthMismatch {
            expected: fusion_weights.len(),
            found: cardinalities.len(),
        });
    }
    Ok(cardinalities.iter().zip(fusion_weights).map(|(n, w)| n * w).sum())
}

fn consensus(config: &FusionConfig, cardinalities: &[f64]) -> Result<f64> {
    if config.cc_literal_sum {
        Ok(cardinalities.iter().sum())
    } else {
        cardinality_consensus(cardinalities, &config.fusion_weights)
    }
}

/// Writes fitted weights into a PHD filter and, with CC enabled, rescales
/// them to the consensus cardinality.
pub fn feedback_phd(state: &mut FilterState, fitted: &[f64], n_aa: f64, config: &FusionConfig) -> Result<()> {
    let Posterior::Phd(gm) = &mut state.posterior else {
        return Err(Error::WrongKind {
            expected: SourceKind::Phd.as_str(),
            found: state.kind().as_str(),
        });
    };
    gm.set_weights(fitted)?;
    let n_i: f64 = fitted.iter().sum();
    if config.cc_enabled && n_i > 0.0 {
        gm.scale(n_aa / n_i);
    }
    Ok(())
}

/// Writes fitted weights into an MB or LMB filter, renormalizing per track,
/// and with CC enabled rescales existence probabilities by `n_aa / n_i`.
pub fn feedback_mb_lmb(
    state: &mut FilterState,
    fitted: &[f64],
    index_map: &IndexMap,
    n_aa: f64,
    n_i: f64,
    config: &FusionConfig,
) -> Result<()> {
    let per_track = scatter_weights(fitted, index_map)?;
    let ratio = if config.cc_enabled && n_i > 0.0 { Some(n_aa / n_i) } else { None };
    let mut tracks: Vec<&mut crate::rfs::BernoulliComponent> = match &mut state.posterior {
        Posterior::Mb(mb) => mb.tracks.iter_mut().collect(),
        Posterior::Lmb(lmb) => {
            lmb.sort_by_label();
            lmb.tracks.iter_mut().map(|(_, t)| t).collect()
        }
        Posterior::Phd(_) => {
            return Err(Error::WrongKind {
                expected: "mb or lmb",
                found: SourceKind::Phd.as_str(),
            })
        }
    };
    if tracks.len() != per_track.len() {
        return Err(Error::LengthMismatch {
            expected: tracks.len(),
            found: per_track.len(),
        });
    }
    for (track, w) in tracks.iter_mut().zip(&per_track) {
        if track.spatial.len() != w.len() {
            return Err(Error::LengthMismatch {
                expected: track.spatial.len(),
                found: w.len(),
            });
        }
        let total: f64 = w.iter().sum();
        let normalized: Vec<f64> = if total > 0.0 && total.is_finite() {
            w.iter().map(|x| x / total).collect()
        } else {
            vec![1.0 / w.len() as f64; w.len()]
        };
        track.spatial.set_weights(&normalized)?;
        if let Some(ratio) = ratio {
            track.existence = (track.existence * ratio).clamp(0.0, MAX_EXISTENCE);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub sensor: usize,
    /// 0 is the pre-fit state.
    pub iteration: usize,
    pub isd: f64,
    /// Learning rate used to reach this iterate (0 for the pre-fit record).
    pub alpha: f64,
    pub elapsed_ns: u64,
    /// Gaussian evaluations since the start of the fusion event.
    pub gaussian_evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusionDiagnostics {
    pub records: Vec<IterationRecord>,
    /// Fit iterations actually run.
    pub iterations: usize,
    pub consensus_cardinality: f64,
    pub elapsed_ns: u64,
    pub gaussian_evaluations: u64,
}

/// One fusion event: fit every sensor's weights against the average of all
/// snapshots, apply cardinality consensus and feed the result back.
/// Means, covariances, component counts and labels are left untouched.
pub fn fuse_once(states: &[FilterState], config: &FusionConfig) -> Result<(Vec<FilterState>, FusionDiagnostics)> {
    let start = Instant::now();
    let evals_start = gaussian_evaluations();
    let n = states.len();
    if n < 2 {
        return Err(Error::FusionUndefined("at least two sensors are required".into()));
    }
    if !config.fit_enabled && !config.cc_enabled {
        return Err(Error::InvalidConfig("fusion requires the fit or cardinality consensus".into()));
    }
    config.validate(n)?;

    let snapshot = FusionSnapshot::from_states(states)?;
    let mut weights = snapshot.weights();
    let mut diagnostics = FusionDiagnostics::default();

    if config.fit_enabled {
        let table = snapshot.table()?;
        let fits = (0..n)
            .map(|i| SensorFit::new(&snapshot, i, config, &table))
            .collect::<Result<Vec<_>>>()?;
        let evals = || gaussian_evaluations() - evals_start;
        let elapsed = |s: &Instant| s.elapsed().as_nanos() as u64;
        for (i, fit) in fits.iter().enumerate() {
            diagnostics.records.push(IterationRecord {
                sensor: i,
                iteration: 0,
                isd: fit.objective(&weights[i]),
                alpha: 0.0,
                elapsed_ns: elapsed(&start),
                gaussian_evaluations: evals(),
            });
        }
        let mut alpha = config.alpha1;
        for t in 1..=config.t_max {
            let updated = fits
                .par_iter()
                .zip(weights.par_iter())
                .map(|(fit, w)| {
                    let next = fit.sweep(w, config.floor, alpha, |_, _| {})?;
                    let isd = fit.objective(&next);
                    Ok((next, isd))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut all_converged = true;
            for (i, (next, isd)) in updated.into_iter().enumerate() {
                all_converged &= isd <= config.conv_threshold;
                weights[i] = next;
                diagnostics.records.push(IterationRecord {
                    sensor: i,
                    iteration: t,
                    isd,
                    alpha,
                    elapsed_ns: elapsed(&start),
                    gaussian_evaluations: evals(),
                });
            }
            diagnostics.iterations = t;
            alpha = learning_rate_update(alpha, config.beta);
            if all_converged {
                break;
            }
        }
    }

    let n_aa = consensus(config, &snapshot.cardinalities)?;
    diagnostics.consensus_cardinality = n_aa;

    let mut out = states.to_vec();
    for (i, state) in out.iter_mut().enumerate() {
        let unified = &snapshot.unified[i];
        match unified.source_kind {
            SourceKind::Phd => feedback_phd(state, &weights[i], n_aa, config)?,
            SourceKind::Mb | SourceKind::Lmb => feedback_mb_lmb(
                state,
                &weights[i],
                &unified.index_map,
                n_aa,
                snapshot.cardinalities[i],
                config,
            )?,
        }
    }

    diagnostics.elapsed_ns = start.elapsed().as_nanos() as u64;
    diagnostics.gaussian_evaluations = gaussian_evaluations() - evals_start;
    Ok((out, diagnostics))
}
