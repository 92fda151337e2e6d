//! Exact balanced optimal transport.
//!
//! [`solve_transportation`] solves the Kantorovich linear program
//! `min sum d_ij p_ij` over the transportation polytope of two nonnegative
//! mass vectors with equal totals. [`wasserstein2_sq`] specializes it to
//! probability histograms over shared bin centers with quadratic cost, and
//! [`fractional_assignment`] to unit supplies with capacitated demands.

mod simplex;

use crate::error::{Error, Result};

/// Balance tolerance applied relative to `max(1, total mass)`.
pub const BALANCE_TOL: f64 = 1e-9;

/// A balanced transportation problem with a row-major `a x b` cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem {
    supply: Vec<f64>,
    demand: Vec<f64>,
    cost: Vec<f64>,
}

impl TransportProblem {
    pub fn new(supply: Vec<f64>, demand: Vec<f64>, cost: Vec<f64>) -> Result<Self> {
        if supply.is_empty() || demand.is_empty() {
            return Err(Error::InvalidProblem("empty supply or demand".into()));
        }
        if cost.len() != supply.len() * demand.len() {
            return Err(Error::InvalidProblem(format!(
                "cost has {} entries, expected {}x{}",
                cost.len(),
                supply.len(),
                demand.len()
            )));
        }
        if let Some(x) = supply
            .iter()
            .chain(&demand)
            .find(|x| !x.is_finite() || **x < 0.0)
        {
            return Err(Error::InvalidProblem(format!(
                "negative or non-finite mass {x}"
            )));
        }
        if let Some(c) = cost.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidProblem(format!(
                "negative or non-finite cost {c}"
            )));
        }
        let (s, d): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
        if (s - d).abs() > BALANCE_TOL * s.max(d).max(1.0) {
            return Err(Error::Unbalanced {
                supply: s,
                demand: d,
            });
        }
        Ok(TransportProblem {
            supply,
            demand,
            cost,
        })
    }

    pub fn supply(&self) -> &[f64] {
        &self.supply
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.demand.len() + j]
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }
}

/// Optimal plan as a sparse list of positive flows.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
    pub objective: f64,
}

impl TransportPlan {
    pub fn row_sums(&self, rows: usize) -> Vec<f64> {
        let mut sums = vec![0.0; rows];
        for &(i, _, x) in &self.entries {
            sums[i] += x;
        }
        sums
    }

    pub fn col_sums(&self, cols: usize) -> Vec<f64> {
        let mut sums = vec![0.0; cols];
        for &(_, j, x) in &self.entries {
            sums[j] += x;
        }
        sums
    }
}

/// Dual potentials of an optimal plan: `cost(i, j) >= row[i] + col[j]`,
/// tight on every flow. Fixed up to a common shift.
#[derive(Clone, Debug, PartialEq)]
pub struct Duals {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

pub fn solve_transportation(p: &TransportProblem) -> Result<TransportPlan> {
    solve_with_duals(p).map(|(plan, _)| plan)
}

pub fn solve_with_duals(p: &TransportProblem) -> Result<(TransportPlan, Duals)> {
    let sol = simplex::solve(&p.supply, &p.demand, &p.cost)?;
    Ok((
        TransportPlan {
            entries: sol.flows,
            objective: sol.objective,
        },
        Duals {
            row: sol.u,
            col: sol.v,
        },
    ))
}

/// A normalized histogram over `k` shared bins, with the pixel count it was
/// built from.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    weights: Vec<f64>,
    count: u64,
}

impl Histogram {
    pub fn new(weights: Vec<f64>, count: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidProblem("histogram of empty region".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidProblem("negative histogram weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProblem(format!(
                "histogram weights sum to {sum}"
            )));
        }
        Ok(Histogram { weights, count })
    }

    /// Normalizes integer bin counts. The total must be positive.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidProblem("histogram of empty region".into()));
        }
        let weights = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Histogram {
            weights,
            count: total,
        })
    }

    /// A histogram with all mass in `bin`.
    pub fn one_hot(k: usize, bin: usize, count: u64) -> Self {
        let mut weights = vec![0.0; k];
        weights[bin] = 1.0;
        Histogram {
            weights,
            count: count.max(1),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Squared Euclidean distances between `k` bin centers, reused across solves.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundCost {
    k: usize,
    cost: Vec<f64>,
}

impl GroundCost {
    pub fn from_centers(centers: &[Vec<f64>]) -> Self {
        let k = centers.len();
        let mut cost = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                cost[i * k + j] = squared_distance(&centers[i], &centers[j]);
            }
        }
        GroundCost { k, cost }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.k + j]
    }

    /// Squared 2-Wasserstein distance between two nonnegative weight vectors
    /// of length `k`. Both are renormalized to unit mass before solving.
    /// Returns exactly zero when the normalized weights coincide.
    pub fn w2_sq(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != self.k || b.len() != self.k {
            return Err(Error::InvalidProblem(format!(
                "histogram lengths {} and {} for {} centers",
                a.len(),
                b.len(),
                self.k
            )));
        }
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        if !(sa > 0.0 && sb > 0.0) {
            return Err(Error::InvalidProblem("histogram with no mass".into()));
        }
        // The cost is symmetric, so solving one canonical orientation makes
        // the result exactly symmetric in its arguments.
        let swap = a
            .iter()
            .map(|x| x / sa)
            .zip(b.iter().map(|x| x / sb))
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            == Some(std::cmp::Ordering::Greater);
        let (a, b, sa, sb) = if swap { (b, a, sb, sa) } else { (a, b, sa, sb) };
        let rows: Vec<usize> = (0..self.k).filter(|&i| a[i] > 0.0).collect();
        let cols: Vec<usize> = (0..self.k).filter(|&j| b[j] > 0.0).collect();
        let supply: Vec<f64> = rows.iter().map(|&i| a[i] / sa).collect();
        let demand: Vec<f64> = cols.iter().map(|&j| b[j] / sb).collect();
        if rows == cols && supply == demand {
            return Ok(0.0);
        }
        let cost: Vec<f64> = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| self.get(i, j)))
            .collect();
        let sol = simplex::solve(&supply, &demand, &cost)?;
        Ok(sol.objective.max(0.0))
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared 2-Wasserstein distance between two histograms over `centers`,
/// with ground cost `||c_i - c_j||^2`.
pub fn wasserstein2_sq(u: &Histogram, v: &Histogram, centers: &[Vec<f64>]) -> Result<f64> {
    if u.len() != centers.len() || v.len() != centers.len() {
        return Err(Error::InvalidProblem(format!(
            "histogram lengths {} and {} for {} centers",
            u.len(),
            v.len(),
            centers.len()
        )));
    }
    GroundCost::from_centers(centers).w2_sq(u.weights(), v.weights())
}

/// Result of [`fractional_assignment`].
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Optimal dual value per demand node, shifted so the minimum is zero.
    pub mu: Vec<f64>,
    /// Demand node receiving the largest share of each supply node
    /// (the whole unit when capacities are integral).
    pub assignment: Vec<usize>,
    pub objective: f64,
    pub plan: TransportPlan,
}

/// Solves the assignment problem with unit supplies over `n` rows and
/// demand capacities `capacities` (summing to `n`). `costs` is row-major
/// `n x capacities.len()`.
///
/// The returned `mu` makes each row's assignment a minimizer of
/// `costs[i][j] - mu[j]`, i.e. the optimal plan is a power diagram with
/// additive weights `mu`.
pub fn fractional_assignment(costs: &[f64], capacities: &[f64]) -> Result<Assignment> {
    let m = capacities.len();
    if m == 0 || !costs.len().is_multiple_of(m) {
        return Err(Error::InvalidProblem(format!(
            "cost length {} is not a multiple of {m} capacities",
            costs.len()
        )));
    }
    let n = costs.len() / m;
    let problem = TransportProblem::new(vec![1.0; n], capacities.to_vec(), costs.to_vec())?;
    let (plan, duals) = solve_with_duals(&problem)?;
    let mut best = vec![(0usize, -1.0f64); n];
    for &(i, j, x) in &plan.entries {
        if x > best[i].1 {
            best[i] = (j, x);
        }
    }
    let shift = duals.col.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Assignment {
        mu: duals.col.iter().map(|v| v - shift).collect(),
        assignment: best.into_iter().map(|(j, _)| j).collect(),
        objective: plan.objective,
        plan,
    })
}
