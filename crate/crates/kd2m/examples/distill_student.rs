//! Full distillation run: train a wide teacher, then train a narrow
//! student twice — once plain, once with a feature-distribution penalty —
//! and compare test accuracies.
//!
//! ```bash
//! cargo run --example distill_student
//! ```

use kd2m::data::{gen_moons, split};
use kd2m::distill::{distill, train_teacher, DistillConfig, MetricKind};
use kd2m::nn::{Activation, MlpSpec, Role};

fn main() -> kd2m::Result<()> {
    let full = gen_moons(2000, 0.05, 7)?;
    let (train, test) = split(&full, 0.5, 1)?;

    let teacher_encoder = MlpSpec::new(vec![2, 64, 8], Activation::Relu, Role::Encoder)?;
    let teacher_head = MlpSpec::new(vec![8, 2], Activation::Relu, Role::Head)?;
    let teacher_config = DistillConfig { epochs: 40, batch_size: 16, seed: 100, ..DistillConfig::default() };
    let (teacher, teacher_log) =
        train_teacher(&teacher_encoder, &teacher_head, &train, &test, &teacher_config)?;
    println!("teacher  (hidden 64): test accuracy {:.4}", teacher_log.final_test_accuracy());

    // the student gets a quarter of the width and a short epoch budget
    let student_encoder = MlpSpec::new(vec![2, 16, 8], Activation::Relu, Role::Encoder)?;
    let student_head = MlpSpec::new(vec![8, 2], Activation::Relu, Role::Head)?;
    let base = DistillConfig { epochs: 15, batch_size: 64, seed: 0, ..DistillConfig::default() };

    let baseline_config = DistillConfig { metric: MetricKind::None, lambda: 0.0, ..base.clone() };
    let (_, baseline_log) =
        distill(&student_encoder, &student_head, &teacher, &train, &test, &baseline_config)?;
    println!("baseline (hidden 16): test accuracy {:.4}", baseline_log.final_test_accuracy());

    for metric in [MetricKind::Cw2E, MetricKind::W2G, MetricKind::ClassicalKd] {
        let config = DistillConfig { metric, lambda: 1.0, ..base.clone() };
        let (_, log) = distill(&student_encoder, &student_head, &teacher, &train, &test, &config)?;
        println!(
            "{:<8} (lambda 1.0): test accuracy {:.4}  (final distillation loss {:.4})",
            metric.name(),
            log.final_test_accuracy(),
            log.epochs.last().map(|e| e.mean_loss_d).unwrap_or(0.0)
        );
    }
    Ok(())
}
