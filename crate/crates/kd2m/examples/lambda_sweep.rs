//! Sensitivity to the distillation weight: moderate lambda values help,
//! an absurd one over-regularizes and wrecks accuracy.
//!
//! ```bash
//! cargo run --example lambda_sweep
//! ```

use kd2m::data::{gen_moons, split};
use kd2m::distill::{distill, train_teacher, DistillConfig, MetricKind};
use kd2m::nn::{Activation, MlpSpec, Role};

fn main() -> kd2m::Result<()> {
    let full = gen_moons(1200, 0.05, 7)?;
    let (train, test) = split(&full, 0.5, 1)?;

    let teacher_encoder = MlpSpec::new(vec![2, 64, 8], Activation::Relu, Role::Encoder)?;
    let teacher_head = MlpSpec::new(vec![8, 2], Activation::Relu, Role::Head)?;
    let teacher_config = DistillConfig { epochs: 40, batch_size: 16, seed: 100, ..DistillConfig::default() };
    let (teacher, _) = train_teacher(&teacher_encoder, &teacher_head, &train, &test, &teacher_config)?;

    let student_encoder = MlpSpec::new(vec![2, 16, 8], Activation::Relu, Role::Encoder)?;
    let student_head = MlpSpec::new(vec![8, 2], Activation::Relu, Role::Head)?;

    println!("lambda    test accuracy  (metric cw2_e, 15 epochs)");
    for lambda in [0.0, 0.01, 0.1, 1.0, 1e6] {
        let config = DistillConfig {
            metric: if lambda == 0.0 { MetricKind::None } else { MetricKind::Cw2E },
            lambda,
            epochs: 15,
            batch_size: 64,
            seed: 0,
            ..DistillConfig::default()
        };
        let (_, log) = distill(&student_encoder, &student_head, &teacher, &train, &test, &config)?;
        let note = match log.diverged_at_epoch {
            Some(epoch) => format!("  <- diverged at epoch {epoch}, kept last finite state"),
            None => String::new(),
        };
        println!("{lambda:<9} {:.4}{note}", log.final_test_accuracy());
    }
    Ok(())
}
