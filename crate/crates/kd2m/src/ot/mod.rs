//! Discrete optimal transport: squared-Euclidean cost matrices, an exact
//! transportation-simplex solver, and a log-domain Sinkhorn solver for
//! larger batches.

mod exact;
mod sinkhorn;

pub use exact::{solve_exact, solve_exact_with_margin};
pub use sinkhorn::solve_sinkhorn;

use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Problem size threshold below which the automatic solver stays exact.
pub const AUTO_EXACT_LIMIT: usize = 4096;
/// Largest problem the exact solver accepts.
pub const EXACT_SIZE_LIMIT: usize = 250_000;

/// Non-negative weights summing to one: an empirical distribution over
/// support points given elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty weight vector".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidMeasure(format!("weight {i} is {w}")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, expected 1")));
        }
        Ok(DiscreteMeasure { weights })
    }

    pub fn uniform(n: usize) -> Self {
        DiscreteMeasure { weights: vec![1.0 / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Pairwise ground costs; all entries finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        for ((i, j), &v) in entries.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j, value: v });
            }
            if v < 0.0 {
                return Err(Error::InvalidMeasure(format!("negative cost {v} at ({i}, {j})")));
            }
        }
        Ok(CostMatrix { entries })
    }

    pub fn n_rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn mean(&self) -> f64 {
        self.entries.sum() / (self.entries.len() as f64)
    }
}

/// Which solver produced a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverTag {
    Exact,
    Sinkhorn { epsilon: f64, converged: bool },
}

/// A coupling between two discrete measures plus its transport cost.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub gamma: Array2<f64>,
    pub cost: f64,
    pub solver_tag: SolverTag,
}

impl TransportPlan {
    /// Largest L1 deviation of the plan's marginals from the given measures.
    pub fn marginal_violation(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
        let mut viol = 0.0;
        for (i, &w) in a.weights().iter().enumerate() {
            let row_sum: f64 = self.gamma.row(i).sum();
            viol += (row_sum - w).abs();
        }
        for (j, &w) in b.weights().iter().enumerate() {
            let col_sum: f64 = self.gamma.column(j).sum();
            viol += (col_sum - w).abs();
        }
        viol
    }
}

/// Solver selection for metric computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolverConfig {
    /// Exact when n*m <= 4096, otherwise Sinkhorn with epsilon tied to the
    /// mean ground cost.
    #[default]
    Auto,
    Exact,
    Sinkhorn { epsilon: f64, max_iter: usize, tol: f64 },
}

/// Squared Euclidean cost matrix between two point clouds (rows = points).
pub fn cost_matrix(zs: &Array2<f64>, zt: &Array2<f64>) -> Result<CostMatrix> {
    if zs.ncols() != zt.ncols() {
        return Err(Error::shape("cost_matrix feature dim", zs.ncols(), zt.ncols()));
    }
    let (n, m) = (zs.nrows(), zt.nrows());
    let mut entries = Array2::zeros((n, m));
    for i in 0..n {
        let zi = zs.row(i);
        for j in 0..m {
            let zj = zt.row(j);
            let mut acc = 0.0;
            for k in 0..zs.ncols() {
                let d = zi[k] - zj[k];
                acc += d * d;
            }
            entries[[i, j]] = acc;
        }
    }
    CostMatrix::new(entries)
}

/// Solve with the configured solver.
pub fn solve(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    c: &CostMatrix,
    config: SolverConfig,
) -> Result<TransportPlan> {
    match config {
        SolverConfig::Exact => solve_exact(a, b, c),
        SolverConfig::Sinkhorn { epsilon, max_iter, tol } => {
            solve_sinkhorn(a, b, c, epsilon, max_iter, tol)
        }
        SolverConfig::Auto => {
            if a.len() * b.len() <= AUTO_EXACT_LIMIT {
                solve_exact(a, b, c)
            } else {
                let epsilon = (0.05 * c.mean()).max(1e-9);
                solve_sinkhorn(a, b, c, epsilon, 1000, 1e-6)
            }
        }
    }
}

fn check_shapes(a: &DiscreteMeasure, b: &DiscreteMeasure, c: &CostMatrix) -> Result<()> {
    if a.len() != c.n_rows() {
        return Err(Error::shape("source weights vs cost rows", c.n_rows(), a.len()));
    }
    if b.len() != c.n_cols() {
        return Err(Error::shape("target weights vs cost cols", c.n_cols(), b.len()));
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if (ma - mb).abs() > 1e-6 {
        return Err(Error::MarginalMismatch { source_mass: ma, target_mass: mb });
    }
    Ok(())
}
