//! Primal transportation simplex on a spanning-tree basis.
//!
//! Rows and columns with zero mass are removed before the basis is built and
//! re-attached afterwards (with tight dual values), so every node of the
//! working problem carries positive mass. The initial basis comes from the
//! northwest-corner rule. The entering cell has the most negative reduced
//! cost until a long run of degenerate pivots, after which Bland's rule (the
//! first negative cell in row-major order) takes over, so the method cannot
//! cycle. Among tied leaving candidates the lowest cell index leaves.

use crate::error::{Error, Result};

/// Optimal primal flows and dual potentials of a balanced transportation
/// problem. `cost(i, j) >= u[i] + v[j]` everywhere, with equality on every
/// positive flow.
#[derive(Clone, Debug)]
pub(crate) struct Solution {
    /// Positive flows `(row, col, mass)` in row-major order.
    pub flows: Vec<(usize, usize, f64)>,
    pub objective: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Solves `min sum c_ij x_ij` subject to row sums `supply`, column sums
/// `demand`, `x >= 0`. `cost` is row-major `supply.len() x demand.len()`.
/// Inputs are assumed validated and balanced.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Solution> {
    let (a, b) = (supply.len(), demand.len());
    let rows: Vec<usize> = (0..a).filter(|&i| supply[i] > 0.0).collect();
    let cols: Vec<usize> = (0..b).filter(|&j| demand[j] > 0.0).collect();

    let mut u = vec![0.0; a];
    let mut v = vec![0.0; b];
    let mut flows = Vec::new();

    if !rows.is_empty() && !cols.is_empty() {
        let sub_supply: Vec<f64> = rows.iter().map(|&i| supply[i]).collect();
        let sub_demand: Vec<f64> = cols.iter().map(|&j| demand[j]).collect();
        let sub_cost: Vec<f64> = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| cost[i * b + j]))
            .collect();
        let mut tree = Tree::northwest(&sub_supply, &sub_demand, &sub_cost);
        tree.optimize()?;
        let (su, sv) = tree.potentials();
        for (k, &i) in rows.iter().enumerate() {
            u[i] = su[k];
        }
        for (k, &j) in cols.iter().enumerate() {
            v[j] = sv[k];
        }
        for (cell, x) in tree.final_flows() {
            if x > 0.0 {
                let (r, c) = (cell / cols.len(), cell % cols.len());
                flows.push((rows[r], cols[c], x));
            }
        }
        flows.sort_by_key(|&(i, j, _)| (i, j));
    }

    // Zero-mass nodes: pick the tightest dual value that stays feasible.
    let active_rows = rows.clone();
    for j in (0..b).filter(|&j| demand[j] <= 0.0) {
        v[j] = active_rows
            .iter()
            .map(|&i| cost[i * b + j] - u[i])
            .fold(f64::INFINITY, f64::min);
        if !v[j].is_finite() {
            v[j] = 0.0;
        }
    }
    for i in (0..a).filter(|&i| supply[i] <= 0.0) {
        u[i] = (0..b)
            .map(|j| cost[i * b + j] - v[j])
            .fold(f64::INFINITY, f64::min);
        if !u[i].is_finite() {
            u[i] = 0.0;
        }
    }

    let objective = flows.iter().map(|&(i, j, x)| cost[i * b + j] * x).sum();
    Ok(Solution {
        flows,
        objective,
        u,
        v,
    })
}

/// Basis of the working problem: `rows + cols - 1` cells forming a spanning
/// tree over the bipartite row/column node set. Nodes `0..rows` are rows,
/// `rows..rows + cols` columns.
struct Tree<'a> {
    rows: usize,
    cols: usize,
    supply: &'a [f64],
    demand: &'a [f64],
    cost: &'a [f64],
    /// Basic cells (row-major index) with their current flow.
    basis: Vec<(usize, f64)>,
    /// Basis positions incident to each node.
    incident: Vec<Vec<usize>>,
    /// Rooted view of the tree, refreshed by `reroot`.
    parent: Vec<usize>,
    parent_pos: Vec<usize>,
    depth: Vec<usize>,
    /// Dual potentials: `u` for row nodes, `v` for column nodes.
    pot: Vec<f64>,
    stack: Vec<usize>,
}

/// Consecutive degenerate pivots tolerated under the largest-violation rule
/// before switching to pure Bland for the rest of the solve.
const DEGENERATE_STREAK: usize = 50;

impl<'a> Tree<'a> {
    fn northwest(supply: &'a [f64], demand: &'a [f64], cost: &'a [f64]) -> Self {
        let (rows, cols) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        let mut basis = Vec::with_capacity(rows + cols - 1);
        loop {
            let x = s[i].min(d[j]).max(0.0);
            basis.push((i * cols + j, x));
            s[i] -= x;
            d[j] -= x;
            if i + 1 == rows && j + 1 == cols {
                break;
            }
            // Advance along whichever line is exhausted; at the last row or
            // column there is only one direction left.
            if j + 1 == cols || (i + 1 < rows && s[i] <= d[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        let n = rows + cols;
        let mut incident = vec![Vec::new(); n];
        for (pos, &(cell, _)) in basis.iter().enumerate() {
            incident[cell / cols].push(pos);
            incident[rows + cell % cols].push(pos);
        }
        let mut tree = Tree {
            rows,
            cols,
            supply,
            demand,
            cost,
            basis,
            incident,
            parent: vec![usize::MAX; n],
            parent_pos: vec![usize::MAX; n],
            depth: vec![0; n],
            pot: vec![0.0; n],
            stack: Vec::with_capacity(n),
        };
        tree.reroot();
        tree
    }

    fn cost_scale(&self) -> f64 {
        self.cost
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()))
            .max(1.0)
    }

    /// Node at the other end of basis position `pos` from `node`.
    fn across(&self, node: usize, pos: usize) -> usize {
        let cell = self.basis[pos].0;
        if node < self.rows {
            self.rows + cell % self.cols
        } else {
            cell / self.cols
        }
    }

    /// Depth-first pass from row 0 that fills parents, depths and the
    /// potentials (`u[0] = 0`, `u[r] + v[c] = cost` on basic cells).
    fn reroot(&mut self) {
        self.parent.fill(usize::MAX);
        self.parent[0] = 0;
        self.parent_pos[0] = usize::MAX;
        self.depth[0] = 0;
        self.pot[0] = 0.0;
        self.stack.clear();
        self.stack.push(0);
        while let Some(node) = self.stack.pop() {
            for k in 0..self.incident[node].len() {
                let pos = self.incident[node][k];
                let next = self.across(node, pos);
                if self.parent[next] != usize::MAX {
                    continue;
                }
                self.parent[next] = node;
                self.parent_pos[next] = pos;
                self.depth[next] = self.depth[node] + 1;
                self.pot[next] = self.cost[self.basis[pos].0] - self.pot[node];
                self.stack.push(next);
            }
        }
    }

    fn potentials(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.pot[..self.rows].to_vec(),
            self.pot[self.rows..].to_vec(),
        )
    }

    fn reduced_cost(&self, cell: usize) -> f64 {
        let (r, c) = (cell / self.cols, cell % self.cols);
        self.cost[cell] - self.pot[r] - self.pot[self.rows + c]
    }

    /// Entering cell: the most negative reduced cost (first in row-major
    /// order on ties), or with `bland` the first negative one.
    fn entering(&self, is_basic: &[bool], tol: f64, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (cell, &basic) in is_basic.iter().enumerate().take(self.rows * self.cols) {
            if basic {
                continue;
            }
            let rc = self.reduced_cost(cell);
            if rc < -tol {
                if bland {
                    return Some(cell);
                }
                if best.is_none_or(|(_, b)| rc < b) {
                    best = Some((cell, rc));
                }
            }
        }
        best.map(|(cell, _)| cell)
    }

    fn optimize(&mut self) -> Result<()> {
        let tol = 1e-12 * self.cost_scale();
        let limit = 1000 + 50 * self.rows * self.cols * (self.rows + self.cols);
        let mut is_basic = vec![false; self.rows * self.cols];
        for &(cell, _) in &self.basis {
            is_basic[cell] = true;
        }
        let mut bland = false;
        let mut streak = 0;
        let mut path = Vec::with_capacity(self.rows + self.cols);
        for _ in 0..limit {
            let Some(entering) = self.entering(&is_basic, tol, bland) else {
                return Ok(());
            };
            let (leaving, theta) = self.pivot(entering, &mut path);
            is_basic[entering] = true;
            is_basic[leaving] = false;
            if theta > 0.0 {
                streak = 0;
            } else {
                streak += 1;
                bland |= streak >= DEGENERATE_STREAK;
            }
            self.reroot();
        }
        Err(Error::NotConverged(limit))
    }

    /// Brings `entering` into the basis and returns the cell that left and
    /// the flow shifted around the cycle.
    fn pivot(&mut self, entering: usize, path: &mut Vec<usize>) -> (usize, f64) {
        let (p, q) = (entering / self.cols, entering % self.cols);
        self.tree_path(q, p, path);
        // path[0] touches column q and is a minus cell; signs alternate.
        let mut theta = f64::INFINITY;
        let mut leave_pos = usize::MAX;
        for (k, &pos) in path.iter().enumerate() {
            if k % 2 == 0 {
                let (cell, x) = self.basis[pos];
                let better = x < theta || (x == theta && cell < self.basis[leave_pos].0);
                if better {
                    theta = x;
                    leave_pos = pos;
                }
            }
        }
        for (k, &pos) in path.iter().enumerate() {
            let x = &mut self.basis[pos].1;
            if k % 2 == 0 {
                *x = (*x - theta).max(0.0);
            } else {
                *x += theta;
            }
        }
        let leaving = self.basis[leave_pos].0;
        let (lr, lc) = (leaving / self.cols, self.rows + leaving % self.cols);
        self.incident[lr].retain(|&x| x != leave_pos);
        self.incident[lc].retain(|&x| x != leave_pos);
        self.basis[leave_pos] = (entering, theta);
        self.incident[p].push(leave_pos);
        self.incident[self.rows + q].push(leave_pos);
        (leaving, theta)
    }

    /// Basis positions along the unique tree path from column `q` to row `p`.
    fn tree_path(&self, q: usize, p: usize, path: &mut Vec<usize>) {
        path.clear();
        let (mut a, mut b) = (self.rows + q, p);
        let mut tail = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                path.push(self.parent_pos[a]);
                a = self.parent[a];
            } else {
                tail.push(self.parent_pos[b]);
                b = self.parent[b];
            }
        }
        path.extend(tail.into_iter().rev());
    }

    /// Flows recomputed from the tree structure by peeling leaves, so every
    /// row and column balances up to a single rounding step.
    fn final_flows(&self) -> Vec<(usize, f64)> {
        let (rows, cols) = (self.rows, self.cols);
        let n = rows + cols;
        let mut remaining: Vec<f64> = self
            .supply
            .iter()
            .chain(self.demand.iter())
            .copied()
            .collect();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (pos, &(cell, _)) in self.basis.iter().enumerate() {
            incident[cell / cols].push(pos);
            incident[rows + cell % cols].push(pos);
        }
        let mut degree: Vec<usize> = incident.iter().map(Vec::len).collect();
        let mut used = vec![false; self.basis.len()];
        let mut flow = vec![0.0; self.basis.len()];
        let mut leaves: Vec<usize> = (0..n).filter(|&k| degree[k] == 1).rev().collect();
        while let Some(node) = leaves.pop() {
            if degree[node] != 1 {
                continue;
            }
            let Some(&pos) = incident[node].iter().find(|&&p| !used[p]) else {
                continue;
            };
            used[pos] = true;
            let cell = self.basis[pos].0;
            let other = if node < rows {
                rows + cell % cols
            } else {
                cell / cols
            };
            let x = remaining[node].max(0.0);
            flow[pos] = x;
            remaining[node] = 0.0;
            remaining[other] -= x;
            degree[node] -= 1;
            degree[other] -= 1;
            if degree[other] == 1 {
                leaves.push(other);
            }
        }
        self.basis
            .iter()
            .zip(flow)
            .map(|(&(cell, _), x)| (cell, x))
            .collect()
    }
}
