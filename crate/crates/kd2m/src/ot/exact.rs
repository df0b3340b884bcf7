//! Exact transportation simplex on the bipartite graph.
//!
//! Primal network simplex specialized to the transportation polytope: the
//! basis is a spanning tree over n source + m target nodes. Entering arcs
//! follow the most-negative reduced cost while pivots make progress and
//! switch to Bland's smallest-index rule during degenerate stretches, so
//! cycling is impossible; the leaving arc always breaks ties by smallest
//! index. Uniform marginals make the initial basis heavily degenerate,
//! which pure Bland's rule handles correctly but unacceptably slowly.

use super::{check_shapes, CostMatrix, DiscreteMeasure, SolverTag, TransportPlan, EXACT_SIZE_LIMIT};
use crate::error::{Error, Result};
use ndarray::Array2;

#[derive(Debug, Clone)]
struct BasisArc {
    row: usize,
    col: usize,
    flow: f64,
}

/// Optimal vertex solution of the transportation LP.
pub fn solve_exact(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    c: &CostMatrix,
) -> Result<TransportPlan> {
    solve_exact_with_margin(a, b, c).map(|(plan, _)| plan)
}

/// Exact solve that also reports the uniqueness margin: the smallest reduced
/// cost over non-basic arcs at the optimum. A margin near zero means another
/// optimal vertex exists (the plan is not unique).
pub fn solve_exact_with_margin(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    c: &CostMatrix,
) -> Result<(TransportPlan, f64)> {
    check_shapes(a, b, c)?;
    let (n, m) = (a.len(), b.len());
    if n * m > EXACT_SIZE_LIMIT {
        return Err(Error::Config(format!(
            "exact solver limited to n*m <= {EXACT_SIZE_LIMIT}, got {}",
            n * m
        )));
    }

    let ra: Vec<f64> = a.weights().to_vec();
    // rebalance target mass onto the source mass so the LP is consistent
    let scale = a.total_mass() / b.total_mass();
    let rb: Vec<f64> = b.weights().iter().map(|w| w * scale).collect();

    // northwest-corner initial basis: a staircase spanning tree with
    // exactly n + m - 1 arcs, degenerate zero flows included
    let mut arcs: Vec<BasisArc> = Vec::with_capacity(n + m - 1);
    {
        let (mut i, mut j) = (0usize, 0usize);
        let mut ar = ra[0];
        let mut bc = rb[0];
        loop {
            arcs.push(BasisArc { row: i, col: j, flow: ar.min(bc).max(0.0) });
            if i == n - 1 && j == m - 1 {
                break;
            }
            if ar <= bc && i < n - 1 {
                bc -= ar;
                i += 1;
                ar = ra[i];
            } else if j < m - 1 {
                ar -= bc;
                j += 1;
                bc = rb[j];
            } else {
                bc -= ar;
                i += 1;
                ar = ra[i];
            }
        }
    }
    debug_assert_eq!(arcs.len(), n + m - 1);

    let mut is_basic = vec![false; n * m];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n + m];
    for (aid, arc) in arcs.iter().enumerate() {
        is_basic[arc.row * m + arc.col] = true;
        adj[arc.row].push(aid);
        adj[n + arc.col].push(aid);
    }

    let max_abs_cost = c.entries().iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let enter_tol = 1e-11 * (1.0 + max_abs_cost);
    let pivot_limit = 1000 + 50 * n * m;

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut optimal = false;
    let mut bland_mode = false;

    for _ in 0..pivot_limit {
        compute_potentials(&arcs, &adj, n, c, &mut u, &mut v);

        let mut entering = None;
        if bland_mode {
            // smallest-index eligible arc
            'scan: for i in 0..n {
                for j in 0..m {
                    if is_basic[i * m + j] {
                        continue;
                    }
                    if c.entries()[[i, j]] - u[i] - v[j] < -enter_tol {
                        entering = Some((i, j));
                        break 'scan;
                    }
                }
            }
        } else {
            // most negative reduced cost, ties toward smallest index
            let mut best = -enter_tol;
            for i in 0..n {
                for j in 0..m {
                    if is_basic[i * m + j] {
                        continue;
                    }
                    let r = c.entries()[[i, j]] - u[i] - v[j];
                    if r < best {
                        best = r;
                        entering = Some((i, j));
                    }
                }
            }
        }
        let Some((ei, ej)) = entering else {
            optimal = true;
            break;
        };

        // unique tree path from row node ei to column node n + ej; arcs at
        // even positions lose flow, odd positions gain
        let path = tree_path(&arcs, &adj, n, m, ei, n + ej);
        let mut delta = f64::INFINITY;
        for (k, &aid) in path.iter().enumerate() {
            if k % 2 == 0 {
                delta = delta.min(arcs[aid].flow);
            }
        }
        let mut leaving = usize::MAX;
        let mut leaving_key = usize::MAX;
        for (k, &aid) in path.iter().enumerate() {
            if k % 2 == 0 && arcs[aid].flow <= delta {
                let key = arcs[aid].row * m + arcs[aid].col;
                if key < leaving_key {
                    leaving_key = key;
                    leaving = aid;
                }
            }
        }

        // degenerate pivots engage Bland's rule until flow moves again
        bland_mode = delta <= 0.0;

        for (k, &aid) in path.iter().enumerate() {
            if k % 2 == 0 {
                arcs[aid].flow = (arcs[aid].flow - delta).max(0.0);
            } else {
                arcs[aid].flow += delta;
            }
        }

        // swap leaving arc for the entering arc, reusing its slot
        let old = arcs[leaving].clone();
        is_basic[old.row * m + old.col] = false;
        adj[old.row].retain(|&x| x != leaving);
        adj[n + old.col].retain(|&x| x != leaving);
        arcs[leaving] = BasisArc { row: ei, col: ej, flow: delta };
        is_basic[ei * m + ej] = true;
        adj[ei].push(leaving);
        adj[n + ej].push(leaving);
    }

    if !optimal {
        return Err(Error::Conditioning(
            "transportation simplex exceeded its pivot limit".into(),
        ));
    }

    let mut margin = f64::INFINITY;
    for i in 0..n {
        for j in 0..m {
            if !is_basic[i * m + j] {
                margin = margin.min(c.entries()[[i, j]] - u[i] - v[j]);
            }
        }
    }
    if !margin.is_finite() {
        margin = f64::INFINITY; // no non-basic arcs (1x1 problem)
    }

    let mut gamma = Array2::zeros((n, m));
    let mut cost = 0.0;
    for arc in &arcs {
        gamma[[arc.row, arc.col]] = arc.flow;
        cost += arc.flow * c.entries()[[arc.row, arc.col]];
    }

    Ok((TransportPlan { gamma, cost, solver_tag: SolverTag::Exact }, margin))
}

/// Dual potentials from the basis tree: u[i] + v[j] = C[i,j] on basic arcs.
fn compute_potentials(
    arcs: &[BasisArc],
    adj: &[Vec<usize>],
    n: usize,
    c: &CostMatrix,
    u: &mut [f64],
    v: &mut [f64],
) {
    let total = adj.len();
    let mut known = vec![false; total];
    let mut stack = Vec::with_capacity(total);
    known[0] = true;
    u[0] = 0.0;
    stack.push(0usize);
    while let Some(node) = stack.pop() {
        for &aid in &adj[node] {
            let arc = &arcs[aid];
            let (rn, cn) = (arc.row, n + arc.col);
            let other = if rn == node { cn } else { rn };
            if known[other] {
                continue;
            }
            known[other] = true;
            if other >= n {
                v[other - n] = c.entries()[[arc.row, arc.col]] - u[arc.row];
            } else {
                u[other] = c.entries()[[arc.row, arc.col]] - v[arc.col];
            }
            stack.push(other);
        }
    }
}

/// Arc ids along the unique tree path from `start` to `goal`.
fn tree_path(
    arcs: &[BasisArc],
    adj: &[Vec<usize>],
    n: usize,
    _m: usize,
    start: usize,
    goal: usize,
) -> Vec<usize> {
    let total = adj.len();
    let mut parent_arc = vec![usize::MAX; total];
    let mut parent_node = vec![usize::MAX; total];
    let mut visited = vec![false; total];
    let mut queue = std::collections::VecDeque::new();
    visited[start] = true;
    queue.push_back(start);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        for &aid in &adj[node] {
            let arc = &arcs[aid];
            let (rn, cn) = (arc.row, n + arc.col);
            let other = if rn == node { cn } else { rn };
            if visited[other] {
                continue;
            }
            visited[other] = true;
            parent_arc[other] = aid;
            parent_node[other] = node;
            queue.push_back(other);
        }
    }
    debug_assert!(visited[goal], "basis tree disconnected");
    let mut path = Vec::new();
    let mut node = goal;
    while node != start {
        path.push(parent_arc[node]);
        node = parent_node[node];
    }
    path.reverse();
    path
}
