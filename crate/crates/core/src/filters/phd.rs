use nalgebra::DVector;

use super::{wrong_kind, FilterState, Posterior};
use crate::error::Result;
use crate::gm::{gm_reduce, GaussianComponent, GaussianMixture};
use crate::models::{clutter_intensity, cv_predict, prepare_update, BirthModel, MotionModel, SensorModel};
use crate::rfs::SourceKind;

fn intensity_mut(state: &mut FilterState) -> Result<&mut GaussianMixture> {
    if state.kind() != SourceKind::Phd {
        return Err(wrong_kind(SourceKind::Phd, state));
    }
    match &mut state.posterior {
        Posterior::Phd(gm) => Ok(gm),
        _ => unreachable!(),
    }
}

/// Survival-weighted prediction of every component plus the birth intensity.
pub fn phd_predict(state: &mut FilterState, motion: &MotionModel, birth: &BirthModel) -> Result<()> {
    let gm = intensity_mut(state)?;
    for c in &mut gm.components {
        let (m, p) = cv_predict(&c.mean, &c.covariance, motion);
        c.weight *= motion.survival;
        c.mean = m;
        c.covariance = p;
    }
    gm.components.extend(
        birth
            .components
            .iter()
            .map(|b| GaussianComponent::new(b.weight, b.mean.clone(), b.covariance.clone())),
    );
    Ok(())
}

/// GM-PHD measurement update followed by pruning, merging and capping.
pub fn phd_update(state: &mut FilterState, measurements: &[DVector<f64>], sensor: &SensorModel) -> Result<()> {
    let params = state.params;
    let gm = intensity_mut(state)?;
    let pd = sensor.detection;
    let mut out = Vec::with_capacity(gm.len() * (1 + measurements.len()));
    out.extend(gm.iter().map(|c| c.with_weight((1.0 - pd) * c.weight)));

    if pd > 0.0 && !measurements.is_empty() {
        let prepared = gm
            .iter()
            .map(|c| prepare_update(&c.mean, &c.covariance, sensor))
            .collect::<Result<Vec<_>>>()?;
        let mut terms = vec![0.0; gm.len()];
        for z in measurements {
            for ((t, c), prep) in terms.iter_mut().zip(gm.iter()).zip(&prepared) {
                *t = pd * c.weight * prep.likelihood(z);
            }
            let denom = clutter_intensity(z, sensor) + terms.iter().sum::<f64>();
            if !(denom > 0.0) {
                continue;
            }
            for (t, prep) in terms.iter().zip(&prepared) {
                let w = t / denom;
                // anything this light is removed by the reduction anyway
                if w < params.prune_weight {
                    continue;
                }
                out.push(GaussianComponent::new(w, prep.posterior_mean(z), prep.posterior_cov().clone()));
            }
        }
    }

    *gm = gm_reduce(
        &GaussianMixture::new(out),
        params.prune_weight,
        params.merge_threshold,
        params.caps.max_gcs,
    );
    Ok(())
}

/// Means of the components heavier than the extraction threshold, one each.
pub fn phd_extract(state: &FilterState) -> Result<Vec<DVector<f64>>> {
    match &state.posterior {
        Posterior::Phd(gm) => Ok(gm
            .iter()
            .filter(|c| c.weight > state.params.extraction_threshold)
            .map(|c| c.mean.clone())
            .collect()),
        _ => Err(wrong_kind(SourceKind::Phd, state)),
    }
}
