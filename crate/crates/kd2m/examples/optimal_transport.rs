//! Exact vs entropic optimal transport on a small point-cloud instance:
//! the Sinkhorn cost approaches the exact cost as epsilon shrinks.
//!
//! ```bash
//! cargo run --example optimal_transport
//! ```

use kd2m::ot::{cost_matrix, solve_exact, solve_sinkhorn, DiscreteMeasure, SolverTag};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> kd2m::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 12;
    let zs = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0));
    let zt = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0) + 0.5);

    let cost = cost_matrix(&zs, &zt)?;
    let uniform = DiscreteMeasure::uniform(n);

    let exact = solve_exact(&uniform, &uniform, &cost)?;
    println!("exact transportation simplex: cost = {:.6}", exact.cost);
    println!(
        "plan marginal violation: {:.2e}",
        exact.marginal_violation(&uniform, &uniform)
    );

    println!("\nentropic path (log-domain Sinkhorn):");
    for epsilon in [1.0, 0.3, 0.1, 0.03, 0.01] {
        let plan = solve_sinkhorn(&uniform, &uniform, &cost, epsilon, 20_000, 1e-9)?;
        let converged = matches!(plan.solver_tag, SolverTag::Sinkhorn { converged: true, .. });
        println!(
            "  epsilon = {epsilon:<5} cost = {:.6}  (excess {:+.2e}, converged = {converged})",
            plan.cost,
            plan.cost - exact.cost
        );
    }
    Ok(())
}
