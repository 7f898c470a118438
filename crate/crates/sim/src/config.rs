//! Experiment and scenario configuration, read from JSON.

use rfs_fuse_core::filters::FilterParams;
use rfs_fuse_core::fusion::FusionConfig;
use rfs_fuse_core::models::{BirthKind, BirthModel, MotionModel, SensorModel};
use rfs_fuse_core::rfs::SourceKind;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }
}

/// A scripted target: alive for steps `birth_step <= k < death_step`,
/// starting from `state` = `[x, vx, y, vy]` at its birth step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub birth_step: u64,
    pub death_step: u64,
    pub state: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSpec {
    pub step: f64,
    pub noise_scale: f64,
    pub survival: f64,
}

impl MotionSpec {
    pub fn model(&self) -> MotionModel {
        MotionModel::constant_velocity(self.step, self.noise_scale, self.survival)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthSpec {
    pub existence: f64,
    pub sites: Vec<[f64; 2]>,
    pub std: [f64; 4],
}

impl BirthSpec {
    /// Multi-Bernoulli birth for MB/LMB filters, the Poisson intensity with
    /// the same weights for PHD filters.
    pub fn model(&self, kind: SourceKind) -> BirthModel {
        let mb = BirthModel::at_sites(BirthKind::MultiBernoulli, self.existence, &self.sites, self.std);
        match kind {
            SourceKind::Phd => mb.as_poisson(),
            SourceKind::Mb | SourceKind::Lmb => mb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SensorSpec {
    /// Observes `[x, y]`; its field of view is the ROI.
    Linear {
        detection: f64,
        noise_std: f64,
        clutter_rate: f64,
    },
    RangeBearing {
        position: [f64; 2],
        detection: f64,
        range_std: f64,
        /// Radians.
        bearing_std: f64,
        clutter_rate: f64,
        radius: f64,
    },
}

impl SensorSpec {
    pub fn model(&self, roi: &Rect) -> SensorModel {
        match *self {
            SensorSpec::Linear {
                detection,
                noise_std,
                clutter_rate,
            } => SensorModel::linear(detection, noise_std, clutter_rate, roi.x, roi.y),
            SensorSpec::RangeBearing {
                position,
                detection,
                range_std,
                bearing_std,
                clutter_rate,
                radius,
            } => SensorModel::range_bearing(position, detection, range_std, bearing_std, clutter_rate, radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub roi: Rect,
    pub duration: u64,
    pub targets: Vec<TargetSpec>,
    pub motion: MotionSpec,
    pub birth: BirthSpec,
    pub sensors: Vec<SensorSpec>,
    pub seed: u64,
    pub runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Phd,
    Mb,
    Lmb,
}

impl FilterKind {
    pub fn source_kind(self) -> SourceKind {
        match self {
            FilterKind::Phd => SourceKind::Phd,
            FilterKind::Mb => SourceKind::Mb,
            FilterKind::Lmb => SourceKind::Lmb,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.source_kind().as_str()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Noncooperative,
    CcOnly,
    Fit,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Noncooperative => "noncooperative",
            Mode::CcOnly => "cc_only",
            Mode::Fit => "fit",
        }
    }
}

/// Fusion settings as written in the config file. Missing fusion weights
/// mean uniform weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSpec {
    #[serde(default)]
    pub fusion_weights: Option<Vec<f64>>,
    pub alpha1: f64,
    pub beta: f64,
    pub floor: f64,
    pub conv_threshold: f64,
    pub t_max: usize,
    #[serde(default)]
    pub cc_literal_sum: bool,
}

impl Default for FusionSpec {
    fn default() -> Self {
        let d = FusionConfig::uniform(1);
        Self {
            fusion_weights: None,
            alpha1: d.alpha1,
            beta: d.beta,
            floor: d.floor,
            conv_threshold: d.conv_threshold,
            t_max: d.t_max,
            cc_literal_sum: d.cc_literal_sum,
        }
    }
}

impl FusionSpec {
    pub fn config(&self, sensors: usize) -> FusionConfig {
        let mut c = FusionConfig::uniform(sensors);
        if let Some(w) = &self.fusion_weights {
            c.fusion_weights = w.clone();
        }
        c.alpha1 = self.alpha1;
        c.beta = self.beta;
        c.floor = self.floor;
        c.conv_threshold = self.conv_threshold;
        c.t_max = self.t_max;
        c.cc_literal_sum = self.cc_literal_sum;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub max_gcs: usize,
    pub max_tracks: usize,
    pub max_gcs_per_track: usize,
    pub prune_weight: f64,
    pub merge_threshold: f64,
    pub prune_existence: f64,
    pub extraction_threshold: f64,
    pub gate: f64,
    pub k_best: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        let p = FilterParams::default();
        Self {
            max_gcs: p.caps.max_gcs,
            max_tracks: p.caps.max_tracks,
            max_gcs_per_track: p.caps.max_gcs_per_track,
            prune_weight: p.prune_weight,
            merge_threshold: p.merge_threshold,
            prune_existence: p.prune_existence,
            extraction_threshold: p.extraction_threshold,
            gate: p.gate,
            k_best: p.k_best,
        }
    }
}

impl FilterSpec {
    pub fn params(&self) -> FilterParams {
        let mut p = FilterParams::default();
        p.caps.max_gcs = self.max_gcs;
        p.caps.max_tracks = self.max_tracks;
        p.caps.max_gcs_per_track = self.max_gcs_per_track;
        p.prune_weight = self.prune_weight;
        p.merge_threshold = self.merge_threshold;
        p.prune_existence = self.prune_existence;
        p.extraction_threshold = self.extraction_threshold;
        p.gate = self.gate;
        p.k_best = self.k_best;
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OspaSpec {
    pub c: f64,
    pub p: f64,
}

impl Default for OspaSpec {
    fn default() -> Self {
        Self { c: 100.0, p: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub filter_assignment: Vec<FilterKind>,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default)]
    pub fusion: FusionSpec,
    pub mode: Mode,
    #[serde(default)]
    pub fit_iteration_sweep: Vec<usize>,
    #[serde(default)]
    pub ospa: OspaSpec,
}

/// One group of results: a fusion mode and, for the fit, its iteration count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant {
    pub mode: Mode,
    pub t_fit: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> SimResult<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> SimResult<()> {
        let s = &self.scenario;
        let bad = |msg: String| Err(SimError::Config(msg));
        if s.sensors.len() != self.filter_assignment.len() {
            return bad(format!(
                "{} sensors but {} filter assignments",
                s.sensors.len(),
                self.filter_assignment.len()
            ));
        }
        if s.sensors.is_empty() {
            return bad("at least one sensor is required".into());
        }
        if s.runs == 0 || s.duration == 0 {
            return bad("runs and duration must be positive".into());
        }
        if !(s.roi.x[0] < s.roi.x[1] && s.roi.y[0] < s.roi.y[1]) {
            return bad("empty region of interest".into());
        }
        for (n, t) in s.targets.iter().enumerate() {
            if t.birth_step == 0 || t.birth_step >= t.death_step || t.death_step > s.duration + 1 {
                return bad(format!(
                    "target {n}: need 1 <= birth_step < death_step <= duration + 1, got {} and {}",
                    t.birth_step, t.death_step
                ));
            }
        }
        let motion = s.motion.model();
        motion.validate()?;
        for sensor in &s.sensors {
            sensor.model(&s.roi).validate()?;
        }
        for kind in &self.filter_assignment {
            s.birth.model(kind.source_kind()).validate()?;
        }
        crate::scenario::generate_truth(s)?;
        if s.sensors.len() >= 2 || self.mode == Mode::Noncooperative {
            let fusion = self.fusion.config(s.sensors.len());
            if self.mode != Mode::Noncooperative {
                fusion.validate(s.sensors.len())?;
            }
        } else {
            return bad("fusion needs at least two sensors".into());
        }
        if self.fit_iteration_sweep.contains(&0) {
            return bad("fit iteration counts must be positive".into());
        }
        if !(self.ospa.c > 0.0) || !(self.ospa.p >= 1.0) {
            return bad("OSPA needs c > 0 and p >= 1".into());
        }
        Ok(())
    }

    /// Result groups in output order. A fit experiment also runs both
    /// baselines; an empty sweep falls back to the configured `t_max`.
    pub fn variants(&self) -> Vec<Variant> {
        let base = |mode| Variant { mode, t_fit: 0 };
        match self.mode {
            Mode::Noncooperative => vec![base(Mode::Noncooperative)],
            Mode::CcOnly => vec![base(Mode::CcOnly)],
            Mode::Fit => {
                let mut v = vec![base(Mode::Noncooperative), base(Mode::CcOnly)];
                let sweep = if self.fit_iteration_sweep.is_empty() {
                    vec![self.fusion.t_max]
                } else {
                    self.fit_iteration_sweep.clone()
                };
                v.extend(sweep.into_iter().map(|t_fit| Variant { mode: Mode::Fit, t_fit }));
                v
            }
        }
    }

    /// Fusion configuration for a variant, `None` when no fusion happens.
    pub fn fusion_for(&self, variant: Variant) -> Option<FusionConfig> {
        let mut c = self.fusion.config(self.scenario.sensors.len());
        match variant.mode {
            Mode::Noncooperative => return None,
            Mode::CcOnly => c.fit_enabled = false,
            Mode::Fit => c.t_max = variant.t_fit,
        }
        Some(c)
    }

    /// Default birth sites.
    pub fn birth_sites() -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [400.0, -600.0], [-800.0, -200.0], [-200.0, 800.0]]
    }

    /// Twelve targets, three per birth site, born at steps 1, 11, 21 and
    /// dying at 71, 81, 91.
    pub fn default_targets() -> Vec<TargetSpec> {
        let velocities: [[[f64; 2]; 3]; 4] = [
            [[10.0, 5.0], [-8.0, 10.0], [5.0, -12.0]],
            [[-10.0, 8.0], [5.0, 12.0], [-12.0, 2.0]],
            [[12.0, 0.0], [10.0, 10.0], [8.0, -9.0]],
            [[10.0, -10.0], [0.0, -14.0], [-8.0, -12.0]],
        ];
        let mut targets = Vec::new();
        for (site, vs) in Self::birth_sites().iter().zip(velocities) {
            for (n, v) in vs.iter().enumerate() {
                targets.push(TargetSpec {
                    birth_step: 1 + 10 * n as u64,
                    death_step: 71 + 10 * n as u64,
                    state: [site[0], v[0], site[1], v[1]],
                });
            }
        }
        targets
    }

    fn base_scenario(sensors: Vec<SensorSpec>) -> ScenarioConfig {
        ScenarioConfig {
            roi: Rect {
                x: [-1000.0, 1000.0],
                y: [-1000.0, 1000.0],
            },
            duration: 100,
            targets: Self::default_targets(),
            motion: MotionSpec {
                step: 1.0,
                noise_scale: 25.0,
                survival: 0.95,
            },
            birth: BirthSpec {
                existence: 0.03,
                sites: Self::birth_sites(),
                std: [10.0; 4],
            },
            sensors,
            seed: 2024,
            runs: 20,
        }
    }

    fn default_fusion() -> FusionSpec {
        FusionSpec {
            conv_threshold: 0.0,
            ..FusionSpec::default()
        }
    }

    /// Four linear sensors running GM-PHD filters.
    pub fn linear_homogeneous() -> Self {
        let sensor = SensorSpec::Linear {
            detection: 0.9,
            noise_std: 10.0,
            clutter_rate: 10.0,
        };
        Self {
            scenario: Self::base_scenario(vec![sensor; 4]),
            filter_assignment: vec![FilterKind::Phd; 4],
            filter: FilterSpec::default(),
            fusion: Self::default_fusion(),
            mode: Mode::Fit,
            fit_iteration_sweep: (1..=6).collect(),
            ospa: OspaSpec::default(),
        }
    }

    /// Four linear sensors running two PHD, one MB and one LMB filter.
    pub fn linear_heterogeneous() -> Self {
        Self {
            filter_assignment: vec![FilterKind::Phd, FilterKind::Phd, FilterKind::Mb, FilterKind::Lmb],
            ..Self::linear_homogeneous()
        }
    }

    /// Four range-bearing sensors running two PHD, one MB and one LMB filter.
    pub fn rangebearing() -> Self {
        let positions = [[-500.0, -800.0], [-500.0, 800.0], [600.0, 800.0], [600.0, -800.0]];
        let sensors = positions
            .iter()
            .map(|&position| SensorSpec::RangeBearing {
                position,
                detection: 0.9,
                range_std: 10.0,
                bearing_std: std::f64::consts::PI / 90.0,
                clutter_rate: 10.0,
                radius: 2000.0,
            })
            .collect();
        Self {
            scenario: Self::base_scenario(sensors),
            ..Self::linear_heterogeneous()
        }
    }
}
