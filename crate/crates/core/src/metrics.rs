//! OSPA distance between finite sets of planar points, with its
//! localization / cardinality decomposition.

use crate::assignment::{solve, CostMatrix};
use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaResult {
    pub total: f64,
    pub loc: f64,
    pub card: f64,
    pub c: f64,
    pub p: f64,
}

fn dist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Optimal-assignment cost `min_pi sum_i min(d(x_i, y_pi(i)), c)^p` of the
/// smaller set into the larger one.
pub fn cutoff_assignment_cost(small: &[Point], large: &[Point], c: f64, p: f64) -> f64 {
    if small.is_empty() {
        return 0.0;
    }
    let cost = CostMatrix::from_fn(small.len(), large.len(), |i, j| dist(&small[i], &large[j]).min(c).powf(p));
    // every entry is finite, so an assignment always exists
    solve(&cost).map(|(_, v)| v).unwrap_or(f64::INFINITY)
}

/// OSPA metric of order `p` with cutoff `c`.
///
/// With `n = max(|X|, |Y|)` and `m = min(|X|, |Y|)`, the total is
/// `((assignment + c^p (n - m)) / n)^{1/p}`; `loc` and `card` report the two
/// summands, each divided by `n` and raised to `1/p`.
pub fn ospa(estimates: &[Point], truth: &[Point], c: f64, p: f64) -> Result<OspaResult> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidConfig(format!("OSPA cutoff must be positive, got {c}")));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidConfig(format!("OSPA order must be >= 1, got {p}")));
    }
    let (small, large) = if estimates.len() <= truth.len() {
        (estimates, truth)
    } else {
        (truth, estimates)
    };
    let n = large.len();
    if n == 0 {
        return Ok(OspaResult {
            total: 0.0,
            loc: 0.0,
            card: 0.0,
            c,
            p,
        });
    }
    let loc_raw = cutoff_assignment_cost(small, large, c, p);
    let card_raw = c.powf(p) * (n - small.len()) as f64;
    let nf = n as f64;
    Ok(OspaResult {
        total: ((loc_raw + card_raw) / nf).powf(1.0 / p).min(c),
        loc: (loc_raw / nf).powf(1.0 / p),
        card: (card_raw / nf).powf(1.0 / p),
        c,
        p,
    })
}
