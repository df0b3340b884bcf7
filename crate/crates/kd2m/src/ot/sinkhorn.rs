//! Entropic optimal transport via Sinkhorn iterations in the log domain.
//!
//! Potentials are updated with log-sum-exp reductions so the kernel
//! exp(-C/epsilon) never materializes un-stabilized; this keeps small
//! epsilon values usable on normalized features.

use super::{check_shapes, CostMatrix, DiscreteMeasure, SolverTag, TransportPlan};
use crate::error::{Error, Result};
use ndarray::Array2;

/// Entropic plan with marginal violation at most `tol` (L1) on convergence.
/// Running out of iterations is not fatal: the plan is returned with
/// `converged: false` in its solver tag.
pub fn solve_sinkhorn(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    c: &CostMatrix,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("sinkhorn epsilon must be > 0, got {epsilon}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("sinkhorn tol must be > 0, got {tol}")));
    }
    check_shapes(a, b, c)?;
    let (n, m) = (a.len(), b.len());

    let log_a: Vec<f64> = a.weights().iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = b.weights().iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];
    let mut converged = false;

    for _ in 0..max_iter {
        for i in 0..n {
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                row.push((g[j] - c.entries()[[i, j]]) / epsilon);
            }
            f[i] = epsilon * (log_a[i] - log_sum_exp(&row));
        }
        for j in 0..m {
            let mut col = Vec::with_capacity(n);
            for i in 0..n {
                col.push((f[i] - c.entries()[[i, j]]) / epsilon);
            }
            g[j] = epsilon * (log_b[j] - log_sum_exp(&col));
        }
        if marginal_violation(&f, &g, c, epsilon, a, b) <= tol {
            converged = true;
            break;
        }
    }

    let mut gamma = Array2::zeros((n, m));
    let mut cost = 0.0;
    for i in 0..n {
        for j in 0..m {
            let w = ((f[i] + g[j] - c.entries()[[i, j]]) / epsilon).exp();
            gamma[[i, j]] = w;
            cost += w * c.entries()[[i, j]];
        }
    }

    Ok(TransportPlan {
        gamma,
        cost,
        solver_tag: SolverTag::Sinkhorn { epsilon, converged },
    })
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

fn marginal_violation(
    f: &[f64],
    g: &[f64],
    c: &CostMatrix,
    epsilon: f64,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
) -> f64 {
    let (n, m) = (f.len(), g.len());
    let mut col_sums = vec![0.0f64; m];
    let mut viol = 0.0;
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..m {
            let w = ((f[i] + g[j] - c.entries()[[i, j]]) / epsilon).exp();
            row_sum += w;
            col_sums[j] += w;
        }
        viol += (row_sum - a.weights()[i]).abs();
    }
    for j in 0..m {
        viol += (col_sums[j] - b.weights()[j]).abs();
    }
    viol
}
