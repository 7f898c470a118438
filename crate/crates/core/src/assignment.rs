//! Linear assignment: optimal (Hungarian, shortest augmenting path with
//! potentials) and K-best ranked (Murty).
//!
//! Costs are row-major `rows x cols` with `rows <= cols`; `f64::INFINITY`
//! marks a forbidden pairing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, fill: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![fill; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    fn forbid(&mut self, r: usize, c: usize) {
        self.set(r, c, f64::INFINITY);
    }

    fn force(&mut self, r: usize, c: usize) {
        for cc in 0..self.cols {
            if cc != c {
                self.forbid(r, cc);
            }
        }
        for rr in 0..self.rows {
            if rr != r {
                self.forbid(rr, c);
            }
        }
    }

    /// Total cost of an assignment `row -> column`.
    pub fn cost_of(&self, assignment: &[usize]) -> f64 {
        assignment.iter().enumerate().map(|(r, &c)| self.get(r, c)).sum()
    }
}

/// Minimum-cost assignment of every row to a distinct column.
///
/// Returns `None` when no finite-cost assignment exists.
pub fn solve(cost: &CostMatrix) -> Option<(Vec<usize>, f64)> {
    let n = cost.rows;
    let m = cost.cols;
    if n == 0 {
        return Some((Vec::new(), 0.0));
    }
    if n > m {
        return None;
    }
    // 1-based potentials; column 0 is the virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return None;
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    let total = cost.cost_of(&assignment);
    Some((assignment, total))
}

struct Node {
    cost: f64,
    seq: usize,
    assignment: Vec<usize>,
    matrix: CostMatrix,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // min-heap on cost, ties broken by creation order
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// The `k` lowest-cost assignments in non-decreasing cost order (Murty's
/// partitioning). Fewer are returned if fewer feasible assignments exist.
pub fn k_best(cost: &CostMatrix, k: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let Some((assignment, c)) = solve(cost) else {
        return out;
    };
    let mut seq = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        cost: c,
        seq,
        assignment,
        matrix: cost.clone(),
    });
    while let Some(node) = heap.pop() {
        // report the cost under the original matrix
        out.push((node.assignment.clone(), cost.cost_of(&node.assignment)));
        if out.len() == k {
            break;
        }
        let mut working = node.matrix;
        for r in 0..cost.rows {
            let mut child = working.clone();
            child.forbid(r, node.assignment[r]);
            if let Some((a, c)) = solve(&child) {
                seq += 1;
                heap.push(Node {
                    cost: c,
                    seq,
                    assignment: a,
                    matrix: child,
                });
            }
            working.force(r, node.assignment[r]);
        }
    }
    out
}
