//! Command-line front end: data generation, teacher training, distillation,
//! bound checking, feature plots, and the metric benchmark table.
//!
//! Exit codes: 0 success, 1 failed check, 2 usage/config error, 3 runtime
//! divergence.

use clap::{Parser, Subcommand, ValueEnum};
use kd2m::bench::{run_bench, save_bench_csv, BenchSetup};
use kd2m::config::RunConfigFile;
use kd2m::data::{gen_blobs, gen_moons, gen_spirals, load_csv, save_csv, split};
use kd2m::distill::{self, MetricKind};
use kd2m::error::Error;
use kd2m::nn::{load_model, save_model};
use kd2m::ot::{self, DiscreteMeasure};
use kd2m::plot::{project_clouds, render_scatter_svg, save_svg};
use kd2m::theory::{self, RiskLoss};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "kd2m", version, about = "Knowledge distillation through distribution matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Blobs,
    Moons,
    Spirals,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV.
    GenData {
        #[arg(long, value_enum)]
        dataset: DatasetKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
        /// Number of classes (blobs only).
        #[arg(long, default_value_t = 3)]
        classes: usize,
        /// Feature dimension (blobs only).
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Spiral turns (spirals only).
        #[arg(long, default_value_t = 1.5)]
        turns: f64,
    },
    /// Train a teacher network per the run configuration.
    TrainTeacher {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Distill a student against a frozen teacher.
    Distill {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        teacher: PathBuf,
        /// Override the configured metric (w2_e, cw2_e, jw2_e, w2_g, cw2_g,
        /// kl_g, none, classical_kd).
        #[arg(long)]
        metric: Option<String>,
        /// Override the configured trade-off weight.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Check the W2-vs-encoder-distance bound on data subsets.
    BoundCheck {
        #[arg(long)]
        teacher: PathBuf,
        #[arg(long)]
        student: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 256)]
        subset: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-trial table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Emit an SVG scatter of teacher (red) vs student (blue) features.
    PlotFeatures {
        #[arg(long)]
        teacher: PathBuf,
        #[arg(long)]
        student: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Cap on plotted points (exact W2 is computed on the same subset).
        #[arg(long, default_value_t = 500)]
        max_points: usize,
    },
    /// Distill with every metric over shared seeds and tabulate accuracies.
    BenchMetrics {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        teacher: PathBuf,
        /// Model file whose architecture defines the student (weights are
        /// re-initialized per seed).
        #[arg(long)]
        student: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seeds.
        #[arg(long, default_value = "0,1,2,3,4")]
        seeds: String,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        /// Optional run config supplying training hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged(_)
        | Error::Conditioning(_)
        | Error::NonFinite { .. }
        | Error::EigNoConvergence { .. }
        | Error::NotPsd { .. } => 3,
        _ => 2,
    }
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("KD2M_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_thread_pool();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}

fn run(cli: Cli) -> kd2m::Result<i32> {
    match cli.command {
        Command::GenData { dataset, n, seed, noise, out, classes, dim, turns } => {
            let data = match dataset {
                DatasetKind::Blobs => gen_blobs(n, classes, dim, noise, seed)?,
                DatasetKind::Moons => gen_moons(n, noise, seed)?,
                DatasetKind::Spirals => gen_spirals(n, turns, noise, seed)?,
            };
            save_csv(&data, &out)?;
            println!("wrote {} rows, {} classes to {}", data.len(), data.n_classes, out.display());
            Ok(0)
        }
        Command::TrainTeacher { config, out, log } => {
            let cfg = RunConfigFile::load(&config)?;
            let (_, train, test) = cfg.dataset.build_split()?;
            let enc = cfg.teacher.encoder_spec(train.dim())?;
            let head = cfg.teacher.head_spec(train.n_classes)?;
            let (model, train_log) = distill::train_teacher(&enc, &head, &train, &test, &cfg.train)?;
            save_model(&model, &out)?;
            if let Some(path) = log.or(cfg.outputs.log_csv) {
                train_log.save_csv(&path)?;
            }
            if let Some(path) = &cfg.outputs.log_json {
                train_log.save_json(path)?;
            }
            println!(
                "teacher trained: final test accuracy {:.4} ({} epochs) -> {}",
                train_log.final_test_accuracy(),
                train_log.epochs.len(),
                out.display()
            );
            Ok(0)
        }
        Command::Distill { config, teacher, metric, lambda, out, log } => {
            let cfg = RunConfigFile::load(&config)?;
            let mut train_cfg = cfg.train.clone();
            if let Some(name) = metric {
                train_cfg.metric = MetricKind::parse(&name)?;
            }
            if let Some(l) = lambda {
                train_cfg.lambda = l;
            }
            train_cfg.validate()?;
            let teacher_model = load_model(&teacher)?;
            let (_, train, test) = cfg.dataset.build_split()?;
            let enc = cfg.student.encoder_spec(train.dim())?;
            let head = cfg.student.head_spec(train.n_classes)?;
            if enc.output_dim() != teacher_model.latent_dim() {
                return Err(Error::Config(format!(
                    "student latent dim {} does not match teacher latent dim {}; \
                     distillation compares feature distributions in one shared latent space",
                    enc.output_dim(),
                    teacher_model.latent_dim()
                )));
            }
            let (student, train_log) =
                distill::distill(&enc, &head, &teacher_model, &train, &test, &train_cfg)?;
            save_model(&student, &out)?;
            if let Some(path) = log.or(cfg.outputs.log_csv) {
                train_log.save_csv(&path)?;
            }
            if let Some(path) = &cfg.outputs.log_json {
                train_log.save_json(path)?;
            }
            let last = train_log.epochs.last();
            println!(
                "distilled with {} (lambda {}): final loss_c {:.6}, loss_d {:.6}, test accuracy {:.4}",
                train_cfg.metric.name(),
                train_cfg.lambda,
                last.map(|e| e.mean_loss_c).unwrap_or(0.0),
                last.map(|e| e.mean_loss_d).unwrap_or(0.0),
                train_log.final_test_accuracy()
            );
            if let Some(epoch) = train_log.diverged_at_epoch {
                eprintln!("training diverged at epoch {epoch}; kept last finite parameters");
                return Ok(3);
            }
            Ok(0)
        }
        Command::BoundCheck { teacher, student, data, trials, subset, seed, out, csv } => {
            let teacher_model = load_model(&teacher)?;
            let student_model = load_model(&student)?;
            let dataset = load_csv(&data)?;
            let reports = theory::bound_trials(
                &teacher_model,
                &student_model,
                &dataset,
                trials,
                subset,
                seed,
                RiskLoss::default(),
            )?;
            let all_hold = reports.iter().all(|r| r.holds_theorem1);

            #[derive(Serialize)]
            struct BoundCheckFile<'a> {
                n_trials: usize,
                all_hold: bool,
                trials: &'a [theory::BoundReport],
            }
            let file = BoundCheckFile { n_trials: reports.len(), all_hold, trials: &reports };
            let mut text = serde_json::to_string_pretty(&file)
                .map_err(|e| Error::Model(format!("serialize report: {e}")))?;
            text.push('\n');
            std::fs::write(&out, text).map_err(|e| Error::io(out.display().to_string(), e))?;

            if let Some(csv_path) = csv {
                use std::io::Write;
                let f = std::fs::File::create(&csv_path)
                    .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
                let mut w = std::io::BufWriter::new(f);
                writeln!(w, "trial,w2,l2_encoders,diagonal_coupling_cost,holds_theorem1,risk_source,risk_target,risk_gap")
                    .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
                for (i, r) in reports.iter().enumerate() {
                    writeln!(
                        w,
                        "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                        i,
                        r.w2,
                        r.l2_encoders,
                        r.diagonal_coupling_cost,
                        r.holds_theorem1,
                        r.risk_source.unwrap_or(f64::NAN),
                        r.risk_target.unwrap_or(f64::NAN),
                        r.risk_gap.unwrap_or(f64::NAN)
                    )
                    .map_err(|e| Error::io(csv_path.display().to_string(), e))?;
                }
            }

            let worst = reports
                .iter()
                .map(|r| r.w2 - r.l2_encoders)
                .fold(f64::NEG_INFINITY, f64::max);
            println!(
                "{} trials: theorem holds on all = {all_hold} (worst w2 - l2 = {worst:.3e}) -> {}",
                reports.len(),
                out.display()
            );
            Ok(if all_hold { 0 } else { 1 })
        }
        Command::PlotFeatures { teacher, student, data, out, max_points } => {
            let teacher_model = load_model(&teacher)?;
            let student_model = load_model(&student)?;
            let dataset = load_csv(&data)?;
            if max_points == 0 {
                return Err(Error::Config("max_points must be >= 1".into()));
            }
            // evenly spaced subset keeps the selection deterministic
            let take = max_points.min(dataset.len());
            let idx: Vec<usize> = (0..take).map(|k| k * dataset.len() / take).collect();
            let subset = dataset.subset(&idx, "plot");
            let (zt, _) = teacher_model.forward_full(&subset.x)?;
            let (zs, _) = student_model.forward_full(&subset.x)?;

            let cost = ot::cost_matrix(&zs, &zt)?;
            let uniform = DiscreteMeasure::uniform(subset.len());
            let plan = ot::solve_exact(&uniform, &uniform, &cost)?;
            let w2 = plan.cost.max(0.0).sqrt();

            let projection = project_clouds(&zt, &zs)?;
            let svg = render_scatter_svg(&projection, &format!("feature alignment (W2 = {w2:.4})"));
            save_svg(&out, &svg)?;
            println!("plotted {} points per cloud; exact W2 = {w2:.6} -> {}", subset.len(), out.display());
            Ok(0)
        }
        Command::BenchMetrics {
            data,
            teacher,
            student,
            out,
            seeds,
            lambda,
            config,
            test_fraction,
            split_seed,
        } => {
            let dataset = load_csv(&data)?;
            let (train, test) = split(&dataset, test_fraction, split_seed)?;
            let teacher_model = load_model(&teacher)?;
            let student_model = load_model(&student)?;
            let seeds: Vec<u64> = seeds
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|e| Error::Config(format!("bad seed {s:?}: {e}")))
                })
                .collect::<kd2m::Result<_>>()?;
            let base_config = match config {
                Some(path) => RunConfigFile::load(&path)?.train,
                None => distill::DistillConfig::default(),
            };
            let enc_spec = student_model.encoder.spec.clone();
            let head_spec = student_model.head.spec.clone();
            if enc_spec.input_dim() != train.dim() {
                return Err(Error::shape("student input dim", train.dim(), enc_spec.input_dim()));
            }
            if head_spec.output_dim() != train.n_classes {
                return Err(Error::shape("student head width", train.n_classes, head_spec.output_dim()));
            }
            if enc_spec.output_dim() != teacher_model.latent_dim() {
                return Err(Error::Config(format!(
                    "student latent dim {} does not match teacher latent dim {}",
                    enc_spec.output_dim(),
                    teacher_model.latent_dim()
                )));
            }
            let setup = BenchSetup {
                teacher: &teacher_model,
                student_encoder: &enc_spec,
                student_head: &head_spec,
                train: &train,
                test: &test,
                base_config: &base_config,
                seeds: &seeds,
                lambda,
            };
            let rows = run_bench(&setup)?;
            save_bench_csv(&rows, &out)?;

            let mut names: Vec<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
            names.dedup();
            println!("metric            mean accuracy over {} seeds", seeds.len());
            for name in names {
                let accs: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.metric == name)
                    .map(|r| r.accuracy)
                    .collect();
                let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                println!("{name:<17} {mean:.4}");
            }
            println!("table -> {}", out.display());
            Ok(0)
        }
    }
}
