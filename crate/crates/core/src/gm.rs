//! Gaussian and Gaussian-mixture primitives.
//!
//! Densities are evaluated through a Cholesky factorization of the
//! (symmetrized) covariance; no explicit inverse is ever formed. The
//! integrated squared difference (ISD) between two mixtures has a closed
//! form in terms of the pairwise overlaps `N(mu_a; mu_b, P_a + P_b)`, which
//! [`CrossTermTable`] caches so that repeated weight-only evaluations do not
//! touch a single Gaussian.

use std::cell::Cell;
use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest dimension handled by the allocation-free overlap kernel.
const STACK_DIM: usize = 8;

thread_local! {
    static GAUSSIAN_EVALS: Cell<u64> = const { Cell::new(0) };
}

/// Number of Gaussian density evaluations performed on the current thread.
///
/// Counts calls to [`eval_gaussian`], [`log_eval_gaussian`] and
/// [`gaussian_overlap`]. Used to verify that weight fitting reuses the
/// cross-term cache instead of re-evaluating densities.
pub fn gaussian_evaluations() -> u64 {
    GAUSSIAN_EVALS.with(|c| c.get())
}

fn count_eval() {
    GAUSSIAN_EVALS.with(|c| c.set(c.get() + 1));
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        Self {
            weight,
            mean,
            covariance,
        }
    }

    /// One-dimensional component, mostly for tests and fixtures.
    pub fn scalar(weight: f64, mean: f64, variance: f64) -> Self {
        Self::new(
            weight,
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, variance),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn with_weight(&self, weight: f64) -> Self {
        Self {
            weight,
            ..self.clone()
        }
    }
}

/// Weighted sum of Gaussians representing an intensity (PHD) or, when the
/// weights sum to one, a probability density.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianMixture {
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Self {
        Self { components }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GaussianComponent> {
        self.components.iter()
    }

    pub fn push(&mut self, component: GaussianComponent) {
        self.components.push(component);
    }

    /// Dimension shared by all components, `None` for an empty mixture.
    pub fn dim(&self) -> Option<usize> {
        self.components.first().map(GaussianComponent::dim)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: weights.len(),
            });
        }
        for (c, &w) in self.components.iter_mut().zip(weights) {
            c.weight = w;
        }
        Ok(())
    }

    /// Multiplies every weight by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.components {
            c.weight *= factor;
        }
    }

    /// Rescales weights to sum to one; a zero-mass mixture becomes uniform.
    pub fn normalize(&mut self) {
        let total = gm_mass(self);
        if total > 0.0 && total.is_finite() {
            self.scale(1.0 / total);
        } else if !self.is_empty() {
            let w = 1.0 / self.len() as f64;
            for c in &mut self.components {
                c.weight = w;
            }
        }
    }

    /// Weighted mean of the component means.
    pub fn mean_state(&self) -> Option<DVector<f64>> {
        let dim = self.dim()?;
        let total = gm_mass(self);
        let mut acc = DVector::zeros(dim);
        for c in &self.components {
            acc.axpy(c.weight, &c.mean, 1.0);
        }
        if total > 0.0 {
            acc /= total;
        }
        Some(acc)
    }

    /// Pointwise intensity `sum_j w_j N(x; mu_j, P_j)`.
    pub fn intensity(&self, x: &DVector<f64>) -> Result<f64> {
        self.components.iter().try_fold(0.0, |acc, c| {
            Ok(acc + c.weight * eval_gaussian(x, &c.mean, &c.covariance)?)
        })
    }

    fn check_dims(&self) -> Result<Option<usize>> {
        let dim = self.dim();
        if let Some(d) = dim {
            for c in &self.components {
                if c.dim() != d || c.covariance.nrows() != d || c.covariance.ncols() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: c.dim(),
                    });
                }
            }
        }
        Ok(dim)
    }
}

impl FromIterator<GaussianComponent> for GaussianMixture {
    fn from_iter<T: IntoIterator<Item = GaussianComponent>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky factor of the symmetrized covariance.
pub fn cholesky(cov: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if !cov.is_square() {
        return Err(Error::DegenerateCovariance);
    }
    symmetrized(cov)
        .cholesky()
        .ok_or(Error::DegenerateCovariance)
}

fn log_norm_from_chol(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, dim: usize) -> f64 {
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (dim as f64 * (2.0 * PI).ln() + log_det)
}

/// Natural log of `N(x; mean, cov)`.
pub fn log_eval_gaussian(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let d = mean.len();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    if cov.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: cov.nrows(),
        });
    }
    count_eval();
    let chol = cholesky(cov)?;
    let diff = x - mean;
    let solved = chol.l_dirty().solve_lower_triangular(&diff).ok_or(Error::DegenerateCovariance)?;
    Ok(log_norm_from_chol(&chol, d) - 0.5 * solved.norm_squared())
}

/// `N(x; mean, cov)`.
pub fn eval_gaussian(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    log_eval_gaussian(x, mean, cov).map(f64::exp)
}

/// `N(mu_a; mu_b, P_a + P_b)`, the integral of the product of the two
/// unit-weight Gaussians.
pub fn gaussian_overlap(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: b.dim(),
        });
    }
    if d <= STACK_DIM {
        count_eval();
        overlap_small(
            a.mean.as_slice(),
            a.covariance.as_slice(),
            b.mean.as_slice(),
            b.covariance.as_slice(),
            d,
        )
    } else {
        let sum = &a.covariance + &b.covariance;
        eval_gaussian(&a.mean, &b.mean, &sum)
    }
}

/// Mahalanobis distances beyond this make `exp(-maha / 2)` underflow to 0.
const UNDERFLOW_MAHA: f64 = 1500.0;

// Column-major inputs; in-place Cholesky on a stack buffer.
fn overlap_small(ma: &[f64], ca: &[f64], mb: &[f64], cb: &[f64], d: usize) -> Result<f64> {
    let mut s = [0.0f64; STACK_DIM * STACK_DIM];
    for j in 0..d {
        for i in j..d {
            let upper = ca[i * d + j] + cb[i * d + j];
            let lower = ca[j * d + i] + cb[j * d + i];
            s[i * STACK_DIM + j] = 0.5 * (upper + lower);
        }
    }
    // a single coordinate's Mahalanobis distance never exceeds the joint one
    for i in 0..d {
        let v = s[i * STACK_DIM + i];
        let diff = ma[i] - mb[i];
        if v > 0.0 && diff * diff > UNDERFLOW_MAHA * v {
            return Ok(0.0);
        }
    }
    // lower-triangular factor stored row-major in `s`
    let mut diag_prod = 1.0;
    for j in 0..d {
        let mut diag = s[j * STACK_DIM + j];
        for k in 0..j {
            diag -= s[j * STACK_DIM + k] * s[j * STACK_DIM + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::DegenerateCovariance);
        }
        let l_jj = diag.sqrt();
        s[j * STACK_DIM + j] = l_jj;
        diag_prod *= l_jj;
        for i in (j + 1)..d {
            let mut v = s[i * STACK_DIM + j];
            for k in 0..j {
                v -= s[i * STACK_DIM + k] * s[j * STACK_DIM + k];
            }
            s[i * STACK_DIM + j] = v / l_jj;
        }
    }
    let mut y = [0.0f64; STACK_DIM];
    let mut maha = 0.0;
    for i in 0..d {
        let mut v = ma[i] - mb[i];
        for k in 0..i {
            v -= s[i * STACK_DIM + k] * y[k];
        }
        y[i] = v / s[i * STACK_DIM + i];
        maha += y[i] * y[i];
    }
    if !(diag_prod > 0.0) || !diag_prod.is_finite() {
        // product over- or underflowed; fall back to logs
        let log_det: f64 = (0..d).map(|j| 2.0 * s[j * STACK_DIM + j].ln()).sum();
        return Ok((-0.5 * (d as f64 * (2.0 * PI).ln() + log_det + maha)).exp());
    }
    Ok((-0.5 * maha).exp() / (diag_prod * (2.0 * PI).powi(d as i32).sqrt()))
}

/// Total mass `sum_j w_j`: the expected number of targets for a PHD.
pub fn gm_mass(gm: &GaussianMixture) -> f64 {
    gm.components.iter().map(|c| c.weight).sum()
}

/// Cached pairwise overlaps `N(mu_a; mu_b, P_a + P_b)` among the components
/// of one or more mixtures. Entries are computed once and mirrored, so the
/// table is exactly symmetric.
#[derive(Debug, Clone)]
pub struct CrossTermTable {
    offsets: Vec<usize>,
    n: usize,
    values: Vec<f64>,
}

impl CrossTermTable {
    pub fn build(mixtures: &[&GaussianMixture]) -> Result<Self> {
        let mut dim = None;
        for gm in mixtures {
            if let Some(d) = gm.check_dims()? {
                match dim {
                    None => dim = Some(d),
                    Some(expected) if expected != d => {
                        return Err(Error::DimensionMismatch { expected, found: d })
                    }
                    _ => {}
                }
            }
        }
        let mut offsets = Vec::with_capacity(mixtures.len() + 1);
        let mut n = 0;
        offsets.push(0);
        for gm in mixtures {
            n += gm.len();
            offsets.push(n);
        }
        let all: Vec<&GaussianComponent> = mixtures.iter().flat_map(|gm| gm.iter()).collect();
        let mut values = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v = gaussian_overlap(all[a], all[b])?;
                values[a * n + b] = v;
                values[b * n + a] = v;
            }
        }
        Ok(Self { offsets, n, values })
    }

    pub fn num_mixtures(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total_components(&self) -> usize {
        self.n
    }

    /// Global index range occupied by mixture `mix`.
    pub fn block(&self, mix: usize) -> Range<usize> {
        self.offsets[mix]..self.offsets[mix + 1]
    }

    pub fn block_len(&self, mix: usize) -> usize {
        self.offsets[mix + 1] - self.offsets[mix]
    }

    pub fn global(&self, mix: usize, idx: usize) -> usize {
        self.offsets[mix] + idx
    }

    /// Entry between component `a.1` of mixture `a.0` and `b.1` of `b.0`.
    pub fn get(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        self.values[self.global(a.0, a.1) * self.n + self.global(b.0, b.1)]
    }

    /// Row of global component `g` against every cached component.
    pub fn row(&self, g: usize) -> &[f64] {
        &self.values[g * self.n..(g + 1) * self.n]
    }

    /// Quadratic form `u^T T_{ab} v` between the blocks of mixtures `a` and `b`.
    pub fn quadratic(&self, a: usize, u: &[f64], b: usize, v: &[f64]) -> f64 {
        let rb = self.block(b);
        self.block(a)
            .zip(u)
            .map(|(g, &ui)| {
                if ui == 0.0 {
                    return 0.0;
                }
                let row = &self.row(g)[rb.clone()];
                ui * row.iter().zip(v).map(|(t, vj)| t * vj).sum::<f64>()
            })
            .sum()
    }
}

fn check_same_dim(p: &GaussianMixture, q: &GaussianMixture) -> Result<()> {
    let dp = p.check_dims()?;
    let dq = q.check_dims()?;
    if let (Some(a), Some(b)) = (dp, dq) {
        if a != b {
            return Err(Error::DimensionMismatch {
                expected: a,
                found: b,
            });
        }
    }
    Ok(())
}

/// Closed-form integrated squared difference `int (p - q)^2 dx`.
///
/// If `table` is given it must have been built from `[p, q]`; its cached
/// overlaps are used and the current weights of `p` and `q` applied.
pub fn gm_isd(p: &GaussianMixture, q: &GaussianMixture, table: Option<&CrossTermTable>) -> Result<f64> {
    check_same_dim(p, q)?;
    let wp = p.weights();
    let wq = q.weights();
    let (pp, qq, pq) = match table {
        Some(t) => {
            if t.num_mixtures() != 2 || t.block_len(0) != p.len() || t.block_len(1) != q.len() {
                return Err(Error::LengthMismatch {
                    expected: p.len() + q.len(),
                    found: t.total_components(),
                });
            }
            (
                t.quadratic(0, &wp, 0, &wp),
                t.quadratic(1, &wq, 1, &wq),
                t.quadratic(0, &wp, 1, &wq),
            )
        }
        None => (
            self_term(p)?,
            self_term(q)?,
            cross_term(p, q)?,
        ),
    };
    Ok((pp + qq - 2.0 * pq).max(0.0))
}

fn self_term(p: &GaussianMixture) -> Result<f64> {
    let mut acc = 0.0;
    for (a, ca) in p.iter().enumerate() {
        acc += ca.weight * ca.weight * gaussian_overlap(ca, ca)?;
        for cb in &p.components[a + 1..] {
            acc += 2.0 * ca.weight * cb.weight * gaussian_overlap(ca, cb)?;
        }
    }
    Ok(acc)
}

fn cross_term(p: &GaussianMixture, q: &GaussianMixture) -> Result<f64> {
    let mut acc = 0.0;
    for ca in p.iter() {
        for cb in q.iter() {
            acc += ca.weight * cb.weight * gaussian_overlap(ca, cb)?;
        }
    }
    Ok(acc)
}

/// Partial derivative of `ISD(p || q)` with respect to the weight of
/// component `n` of `p`.
pub fn gm_isd_gradient(p: &GaussianMixture, q: &GaussianMixture, n: usize) -> Result<f64> {
    check_same_dim(p, q)?;
    let target = p.components.get(n).ok_or(Error::IndexOutOfRange {
        index: n,
        len: p.len(),
    })?;
    let mut siblings = 0.0;
    for (k, c) in p.iter().enumerate() {
        if k != n {
            siblings += c.weight * gaussian_overlap(target, c)?;
        }
    }
    let own = target.weight * gaussian_overlap(target, target)?;
    let mut external = 0.0;
    for c in q.iter() {
        external += c.weight * gaussian_overlap(target, c)?;
    }
    Ok(2.0 * siblings + 2.0 * own - 2.0 * external)
}

/// Second partial derivative of `ISD(p || q)` with respect to the weight of
/// component `n` of `p`: `2 / (|2 P_n|^{1/2} (2 pi)^{d/2})`, always positive.
pub fn gm_isd_second_derivative(p: &GaussianMixture, n: usize) -> Result<f64> {
    let c = p.components.get(n).ok_or(Error::IndexOutOfRange {
        index: n,
        len: p.len(),
    })?;
    let d = c.dim();
    let chol = cholesky(&(&c.covariance * 2.0))?;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    Ok(2.0 / ((0.5 * log_det).exp() * (2.0 * PI).powf(d as f64 / 2.0)))
}

/// Pruning, merging and capping parameters for [`gm_reduce`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceConfig {
    pub prune_threshold: f64,
    /// Squared Mahalanobis distance below which components merge.
    pub merge_threshold: f64,
    pub cap: usize,
}

impl ReduceConfig {
    pub const fn new(prune_threshold: f64, merge_threshold: f64, cap: usize) -> Self {
        Self {
            prune_threshold,
            merge_threshold,
            cap,
        }
    }
}

impl Default for ReduceConfig {
    fn default() -> Self {
        Self::new(1e-5, 4.0, 200)
    }
}

/// Prune light components, greedily merge neighbours of the heaviest
/// remaining component by moment matching, then keep the `cap` heaviest.
pub fn gm_reduce(gm: &GaussianMixture, prune_threshold: f64, merge_threshold: f64, cap: usize) -> GaussianMixture {
    let mut kept: Vec<(GaussianComponent, Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>)> = gm
        .iter()
        .filter(|c| c.weight >= prune_threshold && c.weight > 0.0)
        .map(|c| (c.clone(), cholesky(&c.covariance).ok()))
        .collect();

    let mut merged = Vec::new();
    while !kept.is_empty() {
        let mut best = 0;
        for (i, (c, _)) in kept.iter().enumerate() {
            if c.weight > kept[best].0.weight {
                best = i;
            }
        }
        let anchor_mean = kept[best].0.mean.clone();
        let mut group = Vec::new();
        let mut rest = Vec::with_capacity(kept.len());
        for (i, entry) in kept.into_iter().enumerate() {
            let close = i == best
                || match &entry.1 {
                    Some(chol) => {
                        let diff = &entry.0.mean - &anchor_mean;
                        diff.dot(&chol.solve(&diff)) < merge_threshold
                    }
                    None => false,
                };
            if close {
                group.push(entry.0);
            } else {
                rest.push(entry);
            }
        }
        kept = rest;
        merged.push(moment_match(&group));
    }

    // `merged` is in extraction order: heaviest anchor first.
    merged.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    merged.truncate(cap);
    GaussianMixture::new(merged)
}

/// Moment-matched single Gaussian carrying the summed weight.
pub fn moment_match(group: &[GaussianComponent]) -> GaussianComponent {
    if group.len() == 1 {
        return group[0].clone();
    }
    let total: f64 = group.iter().map(|c| c.weight).sum();
    let d = group[0].dim();
    let mut mean = DVector::zeros(d);
    for c in group {
        mean.axpy(c.weight / total, &c.mean, 1.0);
    }
    let mut cov = DMatrix::zeros(d, d);
    for c in group {
        let diff = &c.mean - &mean;
        cov += (&c.covariance + &diff * diff.transpose()) * (c.weight / total);
    }
    GaussianComponent::new(total, mean, symmetrized(&cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mix(parts: &[(f64, f64, f64)]) -> GaussianMixture {
        parts.iter().map(|&(w, m, v)| GaussianComponent::scalar(w, m, v)).collect()
    }

    #[test]
    fn standard_normal_values() {
        let x = DVector::from_element(1, 0.0);
        let m = DVector::from_element(1, 0.0);
        let c = DMatrix::from_element(1, 1, 1.0);
        assert_relative_eq!(eval_gaussian(&x, &m, &c).unwrap(), 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-15);
        let x1 = DVector::from_element(1, 1.0);
        assert_relative_eq!(
            eval_gaussian(&x1, &m, &c).unwrap(),
            (-0.5f64).exp() / (2.0 * PI).sqrt(),
            epsilon = 1e-15
        );
        let x2 = DVector::from_vec(vec![0.3, -1.0]);
        let i2 = DMatrix::identity(2, 2);
        assert_relative_eq!(eval_gaussian(&x2, &x2, &i2).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_covariance_is_an_error() {
        let x = DVector::zeros(2);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(eval_gaussian(&x, &x, &c), Err(Error::DegenerateCovariance));
        let neg = DMatrix::from_element(1, 1, -1.0);
        assert_eq!(
            eval_gaussian(&DVector::zeros(1), &DVector::zeros(1), &neg),
            Err(Error::DegenerateCovariance)
        );
    }

    #[test]
    fn overlap_kernel_matches_nalgebra_path() {
        let a = GaussianComponent::new(
            1.0,
            DVector::from_vec(vec![1.0, 2.0, -1.0]),
            DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]),
        );
        let b = GaussianComponent::new(
            1.0,
            DVector::from_vec(vec![0.5, 1.0, 0.0]),
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.2, 0.0, 0.7, 0.0, 0.2, 0.0, 2.0]),
        );
        let direct = eval_gaussian(&a.mean, &b.mean, &(&a.covariance + &b.covariance)).unwrap();
        assert_relative_eq!(gaussian_overlap(&a, &b).unwrap(), direct, max_relative = 1e-13);
    }

    #[test]
    fn mass() {
        assert_eq!(gm_mass(&GaussianMixture::empty()), 0.0);
        assert_relative_eq!(gm_mass(&mix(&[(0.4, 0.0, 1.0), (0.6, 1.0, 1.0)])), 1.0);
        assert_relative_eq!(gm_mass(&mix(&[(1.0, 0.0, 1.0), (0.5, 1.0, 1.0), (0.5, 2.0, 1.0)])), 2.0);
    }

    #[test]
    fn isd_closed_form_examples() {
        let p = mix(&[(1.0, 0.0, 1.0)]);
        let half = mix(&[(0.5, 0.0, 1.0)]);
        let unit = 1.0 / (2.0 * PI.sqrt());
        assert_relative_eq!(gm_isd(&p, &GaussianMixture::empty(), None).unwrap(), unit, max_relative = 1e-14);
        assert_relative_eq!(gm_isd(&p, &half, None).unwrap(), 0.25 * unit, max_relative = 1e-12);
        let q = mix(&[(0.3, -1.0, 0.5), (0.9, 2.0, 2.0)]);
        assert!(gm_isd(&q, &q, None).unwrap() < 1e-12);
    }

    #[test]
    fn isd_with_table_matches_direct() {
        let p = mix(&[(0.3, -1.0, 0.5), (0.9, 2.0, 2.0)]);
        let q = mix(&[(1.1, 0.0, 1.0)]);
        let table = CrossTermTable::build(&[&p, &q]).unwrap();
        assert_relative_eq!(
            gm_isd(&p, &q, Some(&table)).unwrap(),
            gm_isd(&p, &q, None).unwrap(),
            max_relative = 1e-13
        );
        let wrong = CrossTermTable::build(&[&q, &p]).unwrap();
        assert!(gm_isd(&p, &q, Some(&wrong)).is_err());
    }

    #[test]
    fn isd_dimension_mismatch() {
        let p = mix(&[(1.0, 0.0, 1.0)]);
        let q = GaussianMixture::new(vec![GaussianComponent::new(1.0, DVector::zeros(2), DMatrix::identity(2, 2))]);
        assert!(matches!(gm_isd(&p, &q, None), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gradient_examples() {
        let p = mix(&[(1.0, 0.0, 1.0)]);
        assert_relative_eq!(gm_isd_gradient(&p, &p, 0).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(
            gm_isd_gradient(&p, &GaussianMixture::empty(), 0).unwrap(),
            1.0 / PI.sqrt(),
            max_relative = 1e-14
        );
        assert!(matches!(
            gm_isd_gradient(&p, &p, 3),
            Err(Error::IndexOutOfRange { index: 3, len: 1 })
        ));
    }

    #[test]
    fn second_derivative_is_twice_self_overlap() {
        let p = mix(&[(0.2, 1.0, 3.0)]);
        let c = &p.components[0];
        assert_relative_eq!(
            gm_isd_second_derivative(&p, 0).unwrap(),
            2.0 * gaussian_overlap(c, c).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn table_is_exactly_symmetric() {
        let p = mix(&[(0.3, -1.0, 0.5), (0.9, 2.0, 2.0)]);
        let q = mix(&[(1.1, 0.0, 1.0), (0.2, 5.0, 0.1)]);
        let t = CrossTermTable::build(&[&p, &q]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(t.row(a)[b], t.row(b)[a]);
            }
        }
        assert_eq!(t.get((0, 1), (1, 0)), t.get((1, 0), (0, 1)));
    }

    #[test]
    fn reduce_prunes_merges_and_caps() {
        assert!(gm_reduce(&mix(&[(1e-7, 0.0, 1.0)]), 1e-5, 4.0, 200).is_empty());

        let merged = gm_reduce(&mix(&[(0.5, 0.0, 1.0), (0.5, 0.0, 1.0)]), 1e-5, 4.0, 200);
        assert_eq!(merged.len(), 1);
        let c = &merged.components[0];
        assert_relative_eq!(c.weight, 1.0);
        assert_relative_eq!(c.mean[0], 0.0);
        assert_relative_eq!(c.covariance[(0, 0)], 1.0);

        let many: GaussianMixture = (0..250)
            .map(|i| GaussianComponent::scalar(1.0 + i as f64, 100.0 * i as f64, 1.0))
            .collect();
        let capped = gm_reduce(&many, 1e-5, 4.0, 200);
        assert_eq!(capped.len(), 200);
        assert!(capped.iter().all(|c| c.weight >= 51.0));
    }

    #[test]
    fn merge_preserves_mass_and_moments() {
        let gm = mix(&[(0.2, 0.0, 1.0), (0.6, 1.0, 2.0)]);
        let out = gm_reduce(&gm, 1e-5, 4.0, 10);
        assert_eq!(out.len(), 1);
        let c = &out.components[0];
        assert_relative_eq!(c.weight, 0.8, epsilon = 1e-15);
        assert_relative_eq!(c.mean[0], 0.75, epsilon = 1e-15);
        // 0.25*(1 + 0.5625) + 0.75*(2 + 0.0625)
        assert_relative_eq!(c.covariance[(0, 0)], 1.9375, epsilon = 1e-14);
    }
}
