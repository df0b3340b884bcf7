//! Evaluate every feature-distribution metric on one pair of labeled
//! batches, showing values, gradients, and the per-class detail of the
//! class-conditional metrics.
//!
//! ```bash
//! cargo run --example metric_playground
//! ```

use kd2m::metrics::{compute_feature_metric, FeatureMetric, LabeledBatch, MetricOptions};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> kd2m::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 40;
    // two 3-class batches, the second shifted per class
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let zs = Array2::from_shape_fn((n, 4), |(i, _)| {
        let base: f64 = rng.sample(rand_distr::StandardNormal);
        base + (i % 3) as f64
    });
    let zt = Array2::from_shape_fn((n, 4), |(i, _)| {
        let base: f64 = rng.sample(rand_distr::StandardNormal);
        base + (i % 3) as f64 * 1.3 + 0.2
    });
    let logits_s = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));
    let logits_t = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));

    let s = LabeledBatch::new(zs, labels.clone(), Some(logits_s))?;
    let t = LabeledBatch::new(zt, labels, Some(logits_t))?;
    let opts = MetricOptions::default();

    println!("metric   value      gradient?   per-class detail");
    for metric in FeatureMetric::ALL {
        let result = compute_feature_metric(metric, &s, &t, &opts)?;
        let detail: Vec<String> = result
            .detail
            .iter()
            .map(|term| match term.value {
                Some(v) => format!("class {} = {:.3}", term.class, v),
                None => format!("class {} skipped", term.class),
            })
            .collect();
        println!(
            "{:<8} {:<10.4} {:<11} {}",
            metric.name(),
            result.value,
            if result.grad_zs.is_some() { "yes" } else { "no" },
            if detail.is_empty() { "-".to_string() } else { detail.join(", ") }
        );
    }
    Ok(())
}
