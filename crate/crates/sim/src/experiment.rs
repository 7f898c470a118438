//! Monte Carlo runs: local filtering per sensor, optional fusion, OSPA scoring.

use rayon::prelude::*;
use rfs_fuse_core::filters::FilterState;
use rfs_fuse_core::fusion::fuse_once;
use rfs_fuse_core::metrics::ospa;
use rfs_fuse_core::models::{BirthModel, SensorModel};

use crate::config::{ExperimentConfig, FilterKind, Mode, Variant};
use crate::error::{SimError, SimResult};
use crate::scenario::{generate_measurements, generate_truth, stream_rng, Truth};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall-clock fusion times. Off gives byte-reproducible output.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { timing: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub run: usize,
    pub step: u64,
    pub sensor: usize,
    pub filter_kind: FilterKind,
    pub mode: Mode,
    pub t_fit: usize,
    pub ospa: f64,
    pub ospa_loc: f64,
    pub ospa_card: f64,
    pub n_est: usize,
    pub n_true: usize,
    /// Duration of this step's fusion event; `None` when no fusion ran.
    pub fusion_time_ns: Option<u64>,
}

impl StepRecord {
    pub fn variant(&self) -> Variant {
        Variant {
            mode: self.mode,
            t_fit: self.t_fit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    /// Sorted by variant, run, step and sensor.
    pub records: Vec<StepRecord>,
}

impl ResultTable {
    /// Mean OSPA of one sensor over all runs and steps of a variant.
    pub fn grand_mean(&self, variant: Variant, sensor: usize) -> Option<f64> {
        mean(
            self.records
                .iter()
                .filter(|r| r.variant() == variant && r.sensor == sensor)
                .map(|r| r.ospa),
        )
    }

    /// Mean OSPA over all sensors, runs and steps of a variant.
    pub fn grand_mean_all(&self, variant: Variant) -> Option<f64> {
        mean(self.records.iter().filter(|r| r.variant() == variant).map(|r| r.ospa))
    }
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

struct Setup {
    truth: Truth,
    sensors: Vec<SensorModel>,
    births: Vec<BirthModel>,
}

impl Setup {
    fn new(config: &ExperimentConfig) -> SimResult<Self> {
        let s = &config.scenario;
        Ok(Self {
            truth: generate_truth(s)?,
            sensors: s.sensors.iter().map(|spec| spec.model(&s.roi)).collect(),
            births: config
                .filter_assignment
                .iter()
                .map(|k| s.birth.model(k.source_kind()))
                .collect(),
        })
    }
}

fn run_once(config: &ExperimentConfig, setup: &Setup, variant: Variant, run: usize, options: RunOptions) -> SimResult<Vec<StepRecord>> {
    let scenario = &config.scenario;
    let motion = scenario.motion.model();
    let params = config.filter.params();
    let fusion = config.fusion_for(variant);
    let mut states: Vec<FilterState> = config
        .filter_assignment
        .iter()
        .map(|k| FilterState::new(k.source_kind(), params))
        .collect();
    let mut records = Vec::with_capacity(scenario.duration as usize * states.len());

    for step in 1..=scenario.duration {
        let alive = setup.truth.at(step);
        for (sensor, state) in states.iter_mut().enumerate() {
            let model = &setup.sensors[sensor];
            let mut rng = stream_rng(scenario.seed, run, sensor, step);
            let z = generate_measurements(alive, model, &mut rng)?;
            let wrap = |source| SimError::Step { run, step, sensor, source };
            state.predict(&motion, &setup.births[sensor], step).map_err(wrap)?;
            state.update(&z, model).map_err(wrap)?;
        }

        let mut fusion_time = None;
        if let Some(fc) = &fusion {
            let (fused, diag) = fuse_once(&states, fc).map_err(|source| SimError::Fusion { run, step, source })?;
            states = fused;
            fusion_time = Some(if options.timing { diag.elapsed_ns } else { 0 });
        }

        let truth = setup.truth.positions(step);
        for (sensor, state) in states.iter().enumerate() {
            let wrap = |source| SimError::Step { run, step, sensor, source };
            let est: Vec<[f64; 2]> = state.extract().map_err(wrap)?.iter().map(|x| [x[0], x[2]]).collect();
            let o = ospa(&est, &truth, config.ospa.c, config.ospa.p).map_err(wrap)?;
            records.push(StepRecord {
                run,
                step,
                sensor,
                filter_kind: config.filter_assignment[sensor],
                mode: variant.mode,
                t_fit: variant.t_fit,
                ospa: o.total,
                ospa_loc: o.loc,
                ospa_card: o.card,
                n_est: est.len(),
                n_true: truth.len(),
                fusion_time_ns: fusion_time,
            });
        }
    }
    Ok(records)
}

/// Runs the given variants on the configured number of runs. Every variant
/// sees the same measurement streams.
pub fn run_variants(config: &ExperimentConfig, variants: &[Variant], options: RunOptions) -> SimResult<ResultTable> {
    config.validate()?;
    let setup = Setup::new(config)?;
    let jobs: Vec<(Variant, usize)> = variants
        .iter()
        .flat_map(|&v| (0..config.scenario.runs).map(move |r| (v, r)))
        .collect();
    let chunks = jobs
        .par_iter()
        .map(|&(v, r)| run_once(config, &setup, v, r, options))
        .collect::<SimResult<Vec<_>>>()?;
    let mut records: Vec<StepRecord> = chunks.into_iter().flatten().collect();
    let order: Vec<Variant> = variants.to_vec();
    let position = |v: Variant| order.iter().position(|&o| o == v).unwrap_or(usize::MAX);
    records.sort_by(|a, b| {
        (position(a.variant()), a.run, a.step, a.sensor).cmp(&(position(b.variant()), b.run, b.step, b.sensor))
    });
    Ok(ResultTable { records })
}

/// All variants of the configured mode.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> SimResult<ResultTable> {
    run_variants(config, &config.variants(), options)
}
