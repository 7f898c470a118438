//! Ground truth and synthetic measurements.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rfs_fuse_core::models::{wrap_angle, Region, SensorModel};

use crate::config::ScenarioConfig;
use crate::error::{SimError, SimResult};

/// Alive targets per step; `steps[k - 1]` holds `(target id, state)` at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub steps: Vec<Vec<(usize, [f64; 4])>>,
}

impl Truth {
    pub fn at(&self, step: u64) -> &[(usize, [f64; 4])] {
        &self.steps[(step - 1) as usize]
    }

    pub fn positions(&self, step: u64) -> Vec<[f64; 2]> {
        self.at(step).iter().map(|(_, x)| [x[0], x[2]]).collect()
    }

    pub fn count(&self, step: u64) -> usize {
        self.at(step).len()
    }
}

/// Noise-free constant-velocity trajectories. Fails if any target leaves
/// the region of interest while alive.
pub fn generate_truth(scenario: &ScenarioConfig) -> SimResult<Truth> {
    let dt = scenario.motion.step;
    let mut steps = vec![Vec::new(); scenario.duration as usize];
    for (id, target) in scenario.targets.iter().enumerate() {
        let mut x = target.state;
        for k in target.birth_step..target.death_step.min(scenario.duration + 1) {
            if !scenario.roi.contains([x[0], x[2]]) {
                return Err(SimError::Config(format!(
                    "target {id} leaves the region of interest at step {k}: ({}, {})",
                    x[0], x[2]
                )));
            }
            steps[(k - 1) as usize].push((id, x));
            x = [x[0] + dt * x[1], x[1], x[2] + dt * x[3], x[3]];
        }
    }
    Ok(Truth { steps })
}

/// Independent stream for one (run, sensor, step) triple.
pub fn stream_rng(seed: u64, run: usize, sensor: usize, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(run as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(sensor as u64).to_le_bytes());
    key[24..].copy_from_slice(&step.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn sample_clutter(sensor: &SensorModel, rng: &mut impl Rng) -> DVector<f64> {
    match sensor.fov {
        Region::Rectangle { x, y } => DVector::from_vec(vec![rng.gen_range(x[0]..=x[1]), rng.gen_range(y[0]..=y[1])]),
        Region::Disk { radius } => {
            // bearing uniform on (-pi, pi]
            let b = PI - rng.gen_range(0.0..2.0 * PI);
            DVector::from_vec(vec![rng.gen_range(0.0..=radius), b])
        }
    }
}

/// Detections of the alive targets plus Poisson clutter, in random order.
pub fn generate_measurements(
    truth: &[(usize, [f64; 4])],
    sensor: &SensorModel,
    rng: &mut impl Rng,
) -> SimResult<Vec<DVector<f64>>> {
    let mut out = Vec::new();
    let noise: Vec<Normal<f64>> = (0..2)
        .map(|i| Normal::new(0.0, sensor.noise_cov[(i, i)].sqrt()))
        .collect::<Result<_, _>>()
        .map_err(|e| SimError::Config(format!("measurement noise: {e}")))?;
    let angular = matches!(sensor.fov, Region::Disk { .. });
    for (_, x) in truth {
        if !rng.gen_bool(sensor.detection) {
            continue;
        }
        let state = DVector::from_row_slice(x);
        let mut z = sensor.measure(&state)?;
        z[0] += noise[0].sample(rng);
        z[1] += noise[1].sample(rng);
        if angular {
            z[1] = wrap_angle(z[1]);
        }
        out.push(z);
    }
    if sensor.clutter_rate > 0.0 {
        let count = Poisson::new(sensor.clutter_rate)
            .map_err(|e| SimError::Config(format!("clutter rate: {e}")))?
            .sample(rng) as usize;
        out.extend((0..count).map(|_| sample_clutter(sensor, rng)));
    }
    out.shuffle(rng);
    Ok(out)
}
