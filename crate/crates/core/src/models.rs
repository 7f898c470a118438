//! Target dynamics, sensor models and the Gaussian moment-propagation
//! kernels shared by the local filters.
//!
//! States are `[x, vx, y, vy]`. Linear sensors observe planar position;
//! range-bearing sensors observe `(range, bearing)` with bearing measured
//! clockwise from the +y axis, `atan2(dx, dy)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gm::cholesky;

/// Indices of the planar position within the state vector.
pub const POSITION_INDICES: [usize; 2] = [0, 2];

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    pub transition: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub survival: f64,
    pub step: f64,
}

impl MotionModel {
    /// Nearly-constant-velocity model on `[x, vx, y, vy]`:
    /// `F = I2 (x) [[1, T], [0, 1]]`, `Q = q * I2 (x) [[T^2/2, T/2], [T/2, T]]`.
    pub fn constant_velocity(step: f64, noise_scale: f64, survival: f64) -> Self {
        let block_f = DMatrix::from_row_slice(2, 2, &[1.0, step, 0.0, 1.0]);
        let block_q = DMatrix::from_row_slice(2, 2, &[step * step / 2.0, step / 2.0, step / 2.0, step]);
        let eye = DMatrix::<f64>::identity(2, 2);
        Self {
            transition: eye.kronecker(&block_f),
            process_noise: eye.kronecker(&block_q) * noise_scale,
            survival,
            step,
        }
    }

    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.survival) {
            return Err(Error::InvalidConfig(format!("survival {} outside [0, 1]", self.survival)));
        }
        let d = self.dim();
        if !self.transition.is_square() || self.process_noise.shape() != (d, d) {
            return Err(Error::InvalidConfig("motion matrices are not square of equal size".into()));
        }
        let asym = (&self.process_noise - self.process_noise.transpose()).amax();
        if asym > 1e-12 * self.process_noise.amax().max(1.0) {
            return Err(Error::InvalidConfig("process noise is not symmetric".into()));
        }
        let min_eig = self.process_noise.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-9 * self.process_noise.amax().max(1.0) {
            return Err(Error::InvalidConfig("process noise is not positive semidefinite".into()));
        }
        Ok(())
    }

    /// Deterministic step `F x` used by the ground-truth generator.
    pub fn propagate(&self, state: &DVector<f64>) -> DVector<f64> {
        &self.transition * state
    }
}

/// `(F mu, F P F^T + Q)`.
pub fn cv_predict(mean: &DVector<f64>, covariance: &DMatrix<f64>, model: &MotionModel) -> (DVector<f64>, DMatrix<f64>) {
    let f = &model.transition;
    let cov = f * covariance * f.transpose() + &model.process_noise;
    (f * mean, (&cov + cov.transpose()) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorKind {
    Linear,
    RangeBearing { position: [f64; 2] },
}

/// Field of view / measurement region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Axis-aligned rectangle in position space (linear sensors).
    Rectangle { x: [f64; 2], y: [f64; 2] },
    /// Disk of the given radius around the sensor. The matching measurement
    /// region is `[0, radius] x (-pi, pi]`.
    Disk { radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub kind: SensorKind,
    pub detection: f64,
    pub noise_cov: DMatrix<f64>,
    pub clutter_rate: f64,
    pub fov: Region,
}

impl SensorModel {
    pub fn linear(detection: f64, noise_std: f64, clutter_rate: f64, x: [f64; 2], y: [f64; 2]) -> Self {
        Self {
            kind: SensorKind::Linear,
            detection,
            noise_cov: DMatrix::from_diagonal_element(2, 2, noise_std * noise_std),
            clutter_rate,
            fov: Region::Rectangle { x, y },
        }
    }

    pub fn range_bearing(
        position: [f64; 2],
        detection: f64,
        range_std: f64,
        bearing_std: f64,
        clutter_rate: f64,
        radius: f64,
    ) -> Self {
        Self {
            kind: SensorKind::RangeBearing { position },
            detection,
            noise_cov: DMatrix::from_diagonal(&DVector::from_vec(vec![range_std * range_std, bearing_std * bearing_std])),
            clutter_rate,
            fov: Region::Disk { radius },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.detection) {
            return Err(Error::InvalidConfig(format!("detection {} outside [0, 1]", self.detection)));
        }
        if self.clutter_rate < 0.0 {
            return Err(Error::InvalidConfig("negative clutter rate".into()));
        }
        if self.noise_cov.shape() != (2, 2) || cholesky(&self.noise_cov).is_err() {
            return Err(Error::InvalidConfig("measurement noise must be a 2x2 SPD matrix".into()));
        }
        match (self.kind, self.fov) {
            (SensorKind::Linear, Region::Rectangle { .. }) | (SensorKind::RangeBearing { .. }, Region::Disk { .. }) => Ok(()),
            _ => Err(Error::InvalidConfig("field of view does not match sensor kind".into())),
        }
    }

    /// Lebesgue measure of the measurement region.
    pub fn region_volume(&self) -> f64 {
        match self.fov {
            Region::Rectangle { x, y } => (x[1] - x[0]) * (y[1] - y[0]),
            Region::Disk { radius } => radius * 2.0 * PI,
        }
    }

    /// Whether a measurement lies in the measurement region.
    pub fn in_region(&self, z: &DVector<f64>) -> bool {
        match self.fov {
            Region::Rectangle { x, y } => z[0] >= x[0] && z[0] <= x[1] && z[1] >= y[0] && z[1] <= y[1],
            Region::Disk { radius } => z[0] >= 0.0 && z[0] <= radius && z[1] > -PI && z[1] <= PI,
        }
    }

    /// Noise-free measurement of a state.
    pub fn measure(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self.kind {
            SensorKind::Linear => Ok(DVector::from_vec(vec![x[POSITION_INDICES[0]], x[POSITION_INDICES[1]]])),
            SensorKind::RangeBearing { .. } => range_bearing(x, self),
        }
    }
}

/// `(range, bearing)` of a state as seen by a range-bearing sensor.
pub fn range_bearing(x: &DVector<f64>, sensor: &SensorModel) -> Result<DVector<f64>> {
    let SensorKind::RangeBearing { position } = sensor.kind else {
        return Err(Error::InvalidConfig("range_bearing needs a range-bearing sensor".into()));
    };
    range_bearing_at(x, position)
}

fn range_bearing_at(x: &DVector<f64>, position: [f64; 2]) -> Result<DVector<f64>> {
    let dx = x[POSITION_INDICES[0]] - position[0];
    let dy = x[POSITION_INDICES[1]] - position[1];
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::UndefinedBearing);
    }
    Ok(DVector::from_vec(vec![dx.hypot(dy), dx.atan2(dy)]))
}

/// Planar position `[x, y]` of a `(range, bearing)` measurement.
pub fn range_bearing_inverse(z: &DVector<f64>, position: [f64; 2]) -> [f64; 2] {
    [position[0] + z[0] * z[1].sin(), position[1] + z[0] * z[1].cos()]
}

/// Uniform clutter intensity `kappa / |region|` inside the region, zero outside.
pub fn clutter_intensity(z: &DVector<f64>, sensor: &SensorModel) -> f64 {
    if sensor.in_region(z) {
        sensor.clutter_rate / sensor.region_volume()
    } else {
        0.0
    }
}

/// Measurement-independent part of a Gaussian measurement update, reusable
/// across all measurements of a scan.
#[derive(Debug, Clone)]
pub struct PreparedUpdate {
    prior_mean: DVector<f64>,
    predicted_z: DVector<f64>,
    s_lower: DMatrix<f64>,
    log_norm: f64,
    gain: DMatrix<f64>,
    posterior_cov: DMatrix<f64>,
    angle_index: Option<usize>,
}

impl PreparedUpdate {
    fn new(
        prior_mean: &DVector<f64>,
        prior_cov: &DMatrix<f64>,
        predicted_z: DVector<f64>,
        innovation_cov: DMatrix<f64>,
        cross_cov: DMatrix<f64>,
        angle_index: Option<usize>,
    ) -> Result<Self> {
        let chol = cholesky(&innovation_cov)?;
        let m = predicted_z.len();
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        let log_norm = -0.5 * (m as f64 * (2.0 * PI).ln() + log_det);
        // K = C S^{-1}  <=>  S K^T = C^T
        let gain = chol.solve(&cross_cov.transpose()).transpose();
        let s = symmetrize(&innovation_cov);
        let post = prior_cov - &gain * s * gain.transpose();
        Ok(Self {
            prior_mean: prior_mean.clone(),
            predicted_z,
            s_lower: chol.l(),
            log_norm,
            gain,
            posterior_cov: symmetrize(&post),
            angle_index,
        })
    }

    pub fn innovation(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut nu = z - &self.predicted_z;
        if let Some(i) = self.angle_index {
            nu[i] = wrap_angle(nu[i]);
        }
        nu
    }

    pub fn predicted_measurement(&self) -> &DVector<f64> {
        &self.predicted_z
    }

    /// Squared Mahalanobis distance of `z` under the predictive density.
    pub fn mahalanobis_sq(&self, z: &DVector<f64>) -> f64 {
        let nu = self.innovation(z);
        match self.s_lower.solve_lower_triangular(&nu) {
            Some(y) => y.norm_squared(),
            None => f64::INFINITY,
        }
    }

    /// `ln N(z; z_hat, S)`.
    pub fn log_likelihood(&self, z: &DVector<f64>) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(z)
    }

    pub fn likelihood(&self, z: &DVector<f64>) -> f64 {
        self.log_likelihood(z).exp()
    }

    pub fn posterior_mean(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.prior_mean + &self.gain * self.innovation(z)
    }

    pub fn posterior_cov(&self) -> &DMatrix<f64> {
        &self.posterior_cov
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn position_selector(dim: usize) -> Result<DMatrix<f64>> {
    if dim <= POSITION_INDICES[1] {
        return Err(Error::DimensionMismatch {
            expected: POSITION_INDICES[1] + 1,
            found: dim,
        });
    }
    let mut h = DMatrix::zeros(2, dim);
    h[(0, POSITION_INDICES[0])] = 1.0;
    h[(1, POSITION_INDICES[1])] = 1.0;
    Ok(h)
}

/// Kalman update through a linear measurement matrix.
pub fn prepare_linear(mean: &DVector<f64>, cov: &DMatrix<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<PreparedUpdate> {
    let pht = cov * h.transpose();
    let s = h * &pht + r;
    PreparedUpdate::new(mean, cov, h * mean, s, pht, None)
}

/// Unscented-transform sigma points and weights with `alpha = 1`,
/// `beta = 0`, `kappa = 3 - d`.
pub fn sigma_points(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
    let d = mean.len();
    let kappa = 3.0 - d as f64;
    let scale = d as f64 + kappa;
    let chol = cholesky(&(cov * scale))?;
    let l = chol.l();
    let mut points = Vec::with_capacity(2 * d + 1);
    let mut weights = Vec::with_capacity(2 * d + 1);
    points.push(mean.clone());
    // centre weight fixed by normalization: kappa / (d + kappa) analytically
    weights.push(1.0 - d as f64 / scale);
    for i in 0..d {
        let col = l.column(i);
        points.push(mean + col);
        weights.push(0.5 / scale);
    }
    for i in 0..d {
        let col = l.column(i);
        points.push(mean - col);
        weights.push(0.5 / scale);
    }
    Ok((points, weights))
}

/// Unscented update for an arbitrary measurement function. `angle_index`
/// marks a measurement component whose differences are wrapped.
pub fn prepare_unscented<F>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    h: F,
    r: &DMatrix<f64>,
    angle_index: Option<usize>,
) -> Result<PreparedUpdate>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let (points, weights) = sigma_points(mean, cov)?;
    let images = points.iter().map(&h).collect::<Result<Vec<_>>>()?;
    let wrap = |mut v: DVector<f64>| {
        if let Some(i) = angle_index {
            v[i] = wrap_angle(v[i]);
        }
        v
    };
    let anchor = images[0].clone();
    let mut z_hat = anchor.clone();
    for (w, img) in weights.iter().zip(&images).skip(1) {
        z_hat += wrap(img - &anchor) * *w;
    }
    // the centre term contributes zero offset from the anchor
    let z_hat = wrap(z_hat);
    let m = z_hat.len();
    let mut s = r.clone();
    let mut c = DMatrix::zeros(mean.len(), m);
    for ((w, img), pt) in weights.iter().zip(&images).zip(&points) {
        let dz = wrap(img - &z_hat);
        let dx = pt - mean;
        s += &dz * dz.transpose() * *w;
        c += &dx * dz.transpose() * *w;
    }
    PreparedUpdate::new(mean, cov, z_hat, s, c, angle_index)
}

/// Measurement-independent update terms for either sensor kind.
pub fn prepare_update(mean: &DVector<f64>, cov: &DMatrix<f64>, sensor: &SensorModel) -> Result<PreparedUpdate> {
    match sensor.kind {
        SensorKind::Linear => prepare_linear(mean, cov, &position_selector(mean.len())?, &sensor.noise_cov),
        SensorKind::RangeBearing { position } => {
            prepare_unscented(mean, cov, |x| range_bearing_at(x, position), &sensor.noise_cov, Some(1))
        }
    }
}

/// Kalman update with a linear position sensor. Returns the posterior mean,
/// covariance and the predictive likelihood `N(z; H mu, H P H^T + R)`.
pub fn linear_update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    z: &DVector<f64>,
    sensor: &SensorModel,
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    if sensor.kind != SensorKind::Linear {
        return Err(Error::InvalidConfig("linear_update needs a linear sensor".into()));
    }
    let prep = prepare_linear(mean, cov, &position_selector(mean.len())?, &sensor.noise_cov)?;
    Ok((prep.posterior_mean(z), prep.posterior_cov().clone(), prep.likelihood(z)))
}

/// Unscented update with a range-bearing sensor.
pub fn ut_update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    z: &DVector<f64>,
    sensor: &SensorModel,
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let SensorKind::RangeBearing { position } = sensor.kind else {
        return Err(Error::InvalidConfig("ut_update needs a range-bearing sensor".into()));
    };
    let prep = prepare_unscented(mean, cov, |x| range_bearing_at(x, position), &sensor.noise_cov, Some(1))?;
    Ok((prep.posterior_mean(z), prep.posterior_cov().clone(), prep.likelihood(z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BirthKind {
    MultiBernoulli,
    Poisson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthComponent {
    /// Existence probability (MB) or expected count (Poisson).
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthModel {
    pub kind: BirthKind,
    pub components: Vec<BirthComponent>,
}

impl BirthModel {
    /// Birth sites at the given planar positions with zero velocity,
    /// common existence `r` and covariance `diag(std)^2`.
    pub fn at_sites(kind: BirthKind, r: f64, sites: &[[f64; 2]], std: [f64; 4]) -> Self {
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(4, std.iter().map(|s| s * s)));
        Self {
            kind,
            components: sites
                .iter()
                .map(|p| BirthComponent {
                    weight: r,
                    mean: DVector::from_vec(vec![p[0], 0.0, p[1], 0.0]),
                    covariance: cov.clone(),
                })
                .collect(),
        }
    }

    /// The same sites reinterpreted as a Poisson intensity with matching
    /// first moment.
    pub fn as_poisson(&self) -> Self {
        Self {
            kind: BirthKind::Poisson,
            components: self.components.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            if c.weight < 0.0 || (self.kind == BirthKind::MultiBernoulli && c.weight > 1.0) {
                return Err(Error::InvalidConfig(format!("birth weight {} out of range", c.weight)));
            }
        }
        Ok(())
    }

    pub fn expected_count(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn roi_sensor() -> SensorModel {
        SensorModel::linear(0.9, 10.0, 10.0, [-1000.0, 1000.0], [-1000.0, 1000.0])
    }

    fn rb_sensor(position: [f64; 2]) -> SensorModel {
        SensorModel::range_bearing(position, 0.9, 10.0, PI / 90.0, 10.0, 2000.0)
    }

    #[test]
    fn cv_predict_examples() {
        let model = MotionModel::constant_velocity(1.0, 0.0, 0.95);
        let mean = DVector::from_vec(vec![0.0, 10.0, 0.0, 0.0]);
        let (m, c) = cv_predict(&mean, &DMatrix::zeros(4, 4), &model);
        assert_eq!(m.as_slice(), &[10.0, 10.0, 0.0, 0.0]);
        assert_eq!(c, DMatrix::zeros(4, 4));

        let (_, c) = cv_predict(&DVector::zeros(4), &DMatrix::identity(4, 4), &model);
        assert_relative_eq!(c, &model.transition * model.transition.transpose(), epsilon = 1e-15);

        let model_b = MotionModel::constant_velocity(1.0, 25.0, 0.95);
        let (_, c) = cv_predict(&DVector::zeros(4), &DMatrix::zeros(4, 4), &model_b);
        assert_eq!(c, model_b.process_noise);
        assert_relative_eq!(c[(0, 0)], 12.5);
        assert_relative_eq!(c[(0, 1)], 12.5);
        assert_relative_eq!(c[(1, 1)], 25.0);
        assert_relative_eq!(c[(2, 2)], 12.5);
        assert_eq!(c[(0, 2)], 0.0);
        model_b.validate().unwrap();
    }

    #[test]
    fn linear_update_examples() {
        let sensor = roi_sensor();
        let mean = DVector::from_vec(vec![3.0, 1.0, -4.0, 2.0]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![50.0, 4.0, 80.0, 9.0]));
        let z = DVector::from_vec(vec![3.0, -4.0]);
        let (m, _, _) = linear_update(&mean, &cov, &z, &sensor).unwrap();
        assert_relative_eq!(m, mean, epsilon = 1e-12);

        let mut vague = sensor.clone();
        vague.noise_cov = DMatrix::identity(2, 2) * 1e12;
        let (m, c, _) = linear_update(&mean, &cov, &DVector::from_vec(vec![100.0, 100.0]), &vague).unwrap();
        assert_relative_eq!(m, mean, max_relative = 1e-6);
        assert_relative_eq!(c, cov, max_relative = 1e-6);

        let mut hundred = sensor.clone();
        hundred.noise_cov = DMatrix::identity(2, 2) * 100.0;
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 1.0, 100.0, 1.0]));
        let (m, c, lik) = linear_update(&DVector::zeros(4), &cov, &DVector::from_vec(vec![10.0, 0.0]), &hundred).unwrap();
        assert_relative_eq!(m[0], 5.0, epsilon = 1e-12);
        assert_relative_eq!(c[(0, 0)], 50.0, epsilon = 1e-12);
        // N([10, 0]; 0, 200 I)
        let expected = (-0.5 * 100.0 / 200.0f64).exp() / (2.0 * PI * 200.0);
        assert_relative_eq!(lik, expected, max_relative = 1e-12);
    }

    #[test]
    fn range_bearing_examples() {
        let origin = rb_sensor([0.0, 0.0]);
        let z = range_bearing(&DVector::from_vec(vec![0.0, 0.0, 100.0, 0.0]), &origin).unwrap();
        assert_relative_eq!(z[0], 100.0);
        assert_relative_eq!(z[1], 0.0);
        let z = range_bearing(&DVector::from_vec(vec![100.0, 0.0, 0.0, 0.0]), &origin).unwrap();
        assert_relative_eq!(z[0], 100.0);
        assert_relative_eq!(z[1], PI / 2.0);
        let s1 = rb_sensor([-500.0, -800.0]);
        let z = range_bearing(&DVector::from_vec(vec![-400.0, 0.0, -800.0, 0.0]), &s1).unwrap();
        assert_relative_eq!(z[0], 100.0);
        assert_relative_eq!(z[1], PI / 2.0);
        assert_eq!(
            range_bearing(&DVector::from_vec(vec![-500.0, 3.0, -800.0, 1.0]), &s1),
            Err(Error::UndefinedBearing)
        );
    }

    #[test]
    fn range_bearing_inverse_round_trip() {
        let pos = [600.0, -800.0];
        let s = rb_sensor(pos);
        for &(x, y) in &[(0.0, 0.0), (-999.0, 999.0), (600.0, -1000.0), (1000.0, -799.0), (123.4, 567.8)] {
            let z = range_bearing(&DVector::from_vec(vec![x, 0.0, y, 0.0]), &s).unwrap();
            let back = range_bearing_inverse(&z, pos);
            assert!((back[0] - x).abs() < 1e-9 && (back[1] - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sigma_weights_sum_to_one() {
        let (pts, w) = sigma_points(&DVector::zeros(4), &DMatrix::identity(4, 4)).unwrap();
        assert_eq!(pts.len(), 9);
        // one ulp of rounding in the running sum
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= f64::EPSILON);
        let (_, w2) = sigma_points(&DVector::zeros(2), &DMatrix::identity(2, 2)).unwrap();
        assert!((w2.iter().sum::<f64>() - 1.0).abs() <= f64::EPSILON);
        assert_relative_eq!(w[0], -1.0 / 3.0);
    }

    #[test]
    fn unscented_is_exact_on_linear_maps() {
        let sensor = roi_sensor();
        let mean = DVector::from_vec(vec![100.0, 3.0, -250.0, -1.0]);
        let cov = DMatrix::from_row_slice(
            4,
            4,
            &[120.0, 5.0, 10.0, 0.0, 5.0, 9.0, 0.0, 1.0, 10.0, 0.0, 80.0, 2.0, 0.0, 1.0, 2.0, 4.0],
        );
        let z = DVector::from_vec(vec![110.0, -240.0]);
        let (m_lin, c_lin, l_lin) = linear_update(&mean, &cov, &z, &sensor).unwrap();
        let h = position_selector(4).unwrap();
        let prep = prepare_unscented(&mean, &cov, |x| Ok(&h * x), &sensor.noise_cov, None).unwrap();
        assert_relative_eq!(prep.posterior_mean(&z), m_lin, max_relative = 1e-8);
        assert_relative_eq!(prep.posterior_cov().clone(), c_lin, max_relative = 1e-8, epsilon = 1e-9);
        assert_relative_eq!(prep.likelihood(&z), l_lin, max_relative = 1e-8);
    }

    #[test]
    fn ut_noise_free_consistency() {
        let mut sensor = rb_sensor([-500.0, -800.0]);
        sensor.noise_cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1e-10, 1e-14]));
        let mean = DVector::from_vec(vec![200.0, 5.0, 100.0, -3.0]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1e-4, 1e-4, 1e-4, 1e-4]));
        let z = range_bearing(&mean, &sensor).unwrap();
        let (m, _, _) = ut_update(&mean, &cov, &z, &sensor).unwrap();
        let back = range_bearing(&m, &sensor).unwrap();
        assert!((back[0] - z[0]).abs() < 1e-6, "range {} vs {}", back[0], z[0]);
        assert!((back[1] - z[1]).abs() < 1e-6, "bearing {} vs {}", back[1], z[1]);
    }

    #[test]
    fn bearing_innovation_wraps() {
        let sensor = rb_sensor([0.0, 0.0]);
        // target almost straight down the -y axis: bearing near +-pi
        let bearing: f64 = 3.1;
        let mean = DVector::from_vec(vec![500.0 * bearing.sin(), 0.0, 500.0 * bearing.cos(), 0.0]);
        let cov = DMatrix::identity(4, 4) * 1e-6;
        let prep = prepare_update(&mean, &cov, &sensor).unwrap();
        let nu = prep.innovation(&DVector::from_vec(vec![500.0, -3.1]));
        assert_relative_eq!(nu[1].abs(), 2.0 * PI - 6.2, epsilon = 1e-6);
        assert!(nu[1].abs() < 0.1);
    }

    #[test]
    fn clutter_density() {
        let lin = roi_sensor();
        assert_relative_eq!(clutter_intensity(&DVector::from_vec(vec![0.0, 0.0]), &lin), 2.5e-6);
        assert_eq!(clutter_intensity(&DVector::from_vec(vec![1500.0, 0.0]), &lin), 0.0);
        let rb = rb_sensor([0.0, 0.0]);
        assert_relative_eq!(
            clutter_intensity(&DVector::from_vec(vec![10.0, 0.3]), &rb),
            10.0 / (2000.0 * 2.0 * PI)
        );
        assert_relative_eq!(10.0 / (2000.0 * 2.0 * PI), 7.9577e-4, max_relative = 1e-4);
        assert_eq!(clutter_intensity(&DVector::from_vec(vec![2500.0, 0.3]), &rb), 0.0);
    }

    #[test]
    fn ut_predictive_likelihood_integrates_to_one() {
        let sensor = rb_sensor([-500.0, -800.0]);
        let mean = DVector::from_vec(vec![0.0, 1.0, 0.0, 1.0]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![400.0, 4.0, 400.0, 4.0]));
        let prep = prepare_update(&mean, &cov, &sensor).unwrap();
        let zc = prep.predicted_measurement().clone();
        // coarse midpoint grid over +-8 sigma of the predictive density
        let (nr, nb) = (200, 200);
        let (hr, hb) = (8.0 * 30.0, 8.0 * 0.06);
        let (dr, db) = (2.0 * hr / nr as f64, 2.0 * hb / nb as f64);
        let mut total = 0.0;
        for i in 0..nr {
            for j in 0..nb {
                let z = DVector::from_vec(vec![
                    zc[0] - hr + (i as f64 + 0.5) * dr,
                    zc[1] - hb + (j as f64 + 0.5) * db,
                ]);
                total += prep.likelihood(&z) * dr * db;
            }
        }
        assert!((total - 1.0).abs() < 0.01, "integral {total}");
    }

    #[test]
    fn covariance_stays_psd_after_predict() {
        let model = MotionModel::constant_velocity(1.0, 25.0, 0.95);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 2.0, 0.0]));
        let (_, c) = cv_predict(&DVector::zeros(4), &cov, &model);
        assert!(c.symmetric_eigenvalues().min() > -1e-12);
    }
}
