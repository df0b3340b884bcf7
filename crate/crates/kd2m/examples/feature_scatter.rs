//! Feature-alignment scatter: project teacher (red) and student (blue)
//! features through a shared PCA and write SVGs before and after
//! distillation, printing the exact W2 alongside.
//!
//! ```bash
//! cargo run --example feature_scatter
//! ```

use kd2m::data::{gen_moons, split};
use kd2m::distill::{distill, train_teacher, DistillConfig, MetricKind};
use kd2m::nn::{forward, init_mlp, Activation, Mlp, MlpModel, MlpSpec, Role};
use kd2m::ot::{cost_matrix, solve_exact, DiscreteMeasure};
use kd2m::plot::{project_clouds, render_scatter_svg, save_svg};
use ndarray::Array2;
use std::path::{Path, PathBuf};

fn scatter(teacher: &MlpModel, student_encoder: &Mlp, x: &Array2<f64>, path: &Path) -> kd2m::Result<f64> {
    let zt = forward(&teacher.encoder, x)?.output().clone();
    let zs = forward(student_encoder, x)?.output().clone();
    let cost = cost_matrix(&zs, &zt)?;
    let uniform = DiscreteMeasure::uniform(x.nrows());
    let w2 = solve_exact(&uniform, &uniform, &cost)?.cost.max(0.0).sqrt();
    let projection = project_clouds(&zt, &zs)?;
    let svg = render_scatter_svg(&projection, &format!("feature alignment (W2 = {w2:.4})"));
    save_svg(path, &svg)?;
    Ok(w2)
}

fn main() -> kd2m::Result<()> {
    let out_dir = PathBuf::from("target/example-output");
    std::fs::create_dir_all(&out_dir).expect("create output dir");

    let full = gen_moons(1200, 0.05, 7)?;
    let (train, test) = split(&full, 0.5, 1)?;
    let probe: Vec<usize> = (0..150).collect();
    let (probe_x, _) = test.gather(&probe);

    let teacher_encoder = MlpSpec::new(vec![2, 64, 8], Activation::Relu, Role::Encoder)?;
    let teacher_head = MlpSpec::new(vec![8, 2], Activation::Relu, Role::Head)?;
    let teacher_config = DistillConfig { epochs: 40, batch_size: 16, seed: 100, ..DistillConfig::default() };
    let (teacher, _) = train_teacher(&teacher_encoder, &teacher_head, &train, &test, &teacher_config)?;

    let student_encoder = MlpSpec::new(vec![2, 16, 8], Activation::Relu, Role::Encoder)?;
    let student_head = MlpSpec::new(vec![8, 2], Activation::Relu, Role::Head)?;
    let config = DistillConfig {
        metric: MetricKind::Cw2E,
        lambda: 1.0,
        epochs: 15,
        batch_size: 64,
        seed: 0,
        ..DistillConfig::default()
    };

    let initial = init_mlp(&student_encoder, config.seed);
    let before_path = out_dir.join("scatter_before.svg");
    let w2_before = scatter(&teacher, &initial, &probe_x, &before_path)?;
    println!("before distillation: W2 = {w2_before:.4} -> {}", before_path.display());

    let (student, _) = distill(&student_encoder, &student_head, &teacher, &train, &test, &config)?;
    let after_path = out_dir.join("scatter_after.svg");
    let w2_after = scatter(&teacher, &student.encoder, &probe_x, &after_path)?;
    println!("after distillation:  W2 = {w2_after:.4} -> {}", after_path.display());
    Ok(())
}
