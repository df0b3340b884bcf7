//! Supervised teacher training on the two-moons task with the built-in
//! schedule (SGD, momentum 0.9, cosine annealing), printing the per-epoch
//! log and saving the model.
//!
//! ```bash
//! cargo run --example train_teacher
//! ```

use kd2m::data::{gen_moons, split};
use kd2m::distill::{train_teacher, DistillConfig};
use kd2m::nn::{save_model, Activation, MlpSpec, Role};
use std::path::PathBuf;

fn main() -> kd2m::Result<()> {
    let full = gen_moons(1200, 0.05, 7)?;
    let (train, test) = split(&full, 0.5, 1)?;

    let encoder = MlpSpec::new(vec![2, 64, 8], Activation::Relu, Role::Encoder)?;
    let head = MlpSpec::new(vec![8, 2], Activation::Relu, Role::Head)?;
    let config = DistillConfig { epochs: 20, batch_size: 16, seed: 100, ..DistillConfig::default() };

    let (model, log) = train_teacher(&encoder, &head, &train, &test, &config)?;

    println!("epoch    lr        loss_c   train_acc  test_acc");
    for r in &log.epochs {
        println!(
            "{:>5}  {:.6}  {:.4}   {:.4}     {:.4}",
            r.epoch, r.lr, r.mean_loss_c, r.train_accuracy, r.test_accuracy
        );
    }

    let out_dir = PathBuf::from("target/example-output");
    std::fs::create_dir_all(&out_dir).expect("create output dir");
    let path = out_dir.join("teacher.json");
    save_model(&model, &path)?;
    println!("\nsaved teacher to {}", path.display());
    Ok(())
}
