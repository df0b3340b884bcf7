//! Closed-form Gaussian discrepancies: the Bures term, the Gaussian W2 in
//! full and diagonal modes, and the (asymmetric) Gaussian KL, evaluated on
//! moments fitted from samples.
//!
//! ```bash
//! cargo run --example gaussian_closed_forms
//! ```

use kd2m::linalg::{bures, sqrtm_psd, SymMatrix};
use kd2m::metrics::{fit_gaussian, kl_gaussian, w2_gaussian, CovMode};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> kd2m::Result<()> {
    // matrix square root and Bures on hand-picked covariances
    let a = SymMatrix::from_diag(&[1.0, 4.0])?;
    let b = SymMatrix::from_diag(&[4.0, 1.0])?;
    let root = sqrtm_psd(&a)?;
    println!("sqrt(diag(1,4)) diagonal = ({}, {})", root.entries()[[0, 0]], root.entries()[[1, 1]]);
    println!("bures(diag(1,4), diag(4,1)) = {}  (commuting case: (1-2)^2 + (2-1)^2)", bures(&a, &b)?);

    // fit two sample clouds and compare their Gaussian approximations
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let zs = Array2::from_shape_fn((400, 3), |(_, j)| {
        let v: f64 = rng.sample(rand_distr::StandardNormal);
        v * (1.0 + j as f64 * 0.5)
    });
    let zt = Array2::from_shape_fn((400, 3), |(_, j)| {
        let v: f64 = rng.sample(rand_distr::StandardNormal);
        v * (1.0 + j as f64 * 0.2) + 1.0
    });

    for mode in [CovMode::Diagonal, CovMode::Full] {
        let gs = fit_gaussian(&zs, mode, 1e-4)?;
        let gt = fit_gaussian(&zt, mode, 1e-4)?;
        let w2 = w2_gaussian(&gs, &gt)?.value;
        let kl_st = kl_gaussian(&gs, &gt)?.value;
        let kl_ts = kl_gaussian(&gt, &gs)?.value;
        println!("\nmode {mode:?}:");
        println!("  W2^2(S, T) = {w2:.4}");
        println!("  KL(S || T) = {kl_st:.4}, KL(T || S) = {kl_ts:.4}  (asymmetric)");
    }
    Ok(())
}
