//! Metric comparison sweeps: one full distillation per (metric, seed) cell,
//! plus baseline and teacher rows, written as a sorted CSV table.
//!
//! Cells are independent and may run in parallel; the output order is
//! sorted by (metric, seed), never by arrival.

use crate::data::Dataset;
use crate::distill::{self, DistillConfig, MetricKind};
use crate::error::{Error, Result};
use crate::nn::{MlpModel, MlpSpec};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub metric: String,
    pub seed: u64,
    pub lambda: f64,
    pub accuracy: f64,
    pub final_loss_d: f64,
    pub wall_time_s: f64,
}

pub struct BenchSetup<'a> {
    pub teacher: &'a MlpModel,
    pub student_encoder: &'a MlpSpec,
    pub student_head: &'a MlpSpec,
    pub train: &'a Dataset,
    pub test: &'a Dataset,
    pub base_config: &'a DistillConfig,
    pub seeds: &'a [u64],
    pub lambda: f64,
}

enum Cell {
    Teacher,
    Baseline,
    Metric(MetricKind),
}

/// Run every registry metric plus baseline and teacher rows for each seed:
/// exactly (|registry| + 2) * |seeds| rows.
pub fn run_bench(setup: &BenchSetup) -> Result<Vec<BenchRow>> {
    if setup.seeds.is_empty() {
        return Err(Error::Config("bench needs at least one seed".into()));
    }
    let mut cells: Vec<(Cell, u64)> = Vec::new();
    for &seed in setup.seeds {
        cells.push((Cell::Teacher, seed));
        cells.push((Cell::Baseline, seed));
        for metric in MetricKind::REGISTRY {
            cells.push((Cell::Metric(metric), seed));
        }
    }

    let rows: Result<Vec<BenchRow>> = cells
        .par_iter()
        .map(|(cell, seed)| run_cell(setup, cell, *seed))
        .collect();
    let mut rows = rows?;
    rows.sort_by(|a, b| a.metric.cmp(&b.metric).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

fn run_cell(setup: &BenchSetup, cell: &Cell, seed: u64) -> Result<BenchRow> {
    let started = Instant::now();
    match cell {
        Cell::Teacher => {
            let accuracy = distill::evaluate(setup.teacher, setup.test)?;
            Ok(BenchRow {
                metric: "teacher".into(),
                seed,
                lambda: 0.0,
                accuracy,
                final_loss_d: 0.0,
                wall_time_s: 0.0,
            })
        }
        Cell::Baseline => {
            let config = DistillConfig {
                metric: MetricKind::None,
                lambda: 0.0,
                seed,
                ..setup.base_config.clone()
            };
            let (_, log) = distill::distill(
                setup.student_encoder,
                setup.student_head,
                setup.teacher,
                setup.train,
                setup.test,
                &config,
            )?;
            Ok(BenchRow {
                metric: "baseline".into(),
                seed,
                lambda: 0.0,
                accuracy: log.final_test_accuracy(),
                final_loss_d: 0.0,
                wall_time_s: started.elapsed().as_secs_f64(),
            })
        }
        Cell::Metric(metric) => {
            let config = DistillConfig {
                metric: *metric,
                lambda: setup.lambda,
                seed,
                ..setup.base_config.clone()
            };
            let (_, log) = distill::distill(
                setup.student_encoder,
                setup.student_head,
                setup.teacher,
                setup.train,
                setup.test,
                &config,
            )?;
            Ok(BenchRow {
                metric: metric.name().into(),
                seed,
                lambda: setup.lambda,
                accuracy: log.final_test_accuracy(),
                final_loss_d: log.epochs.last().map(|e| e.mean_loss_d).unwrap_or(0.0),
                wall_time_s: started.elapsed().as_secs_f64(),
            })
        }
    }
}

pub fn save_bench_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "metric,seed,lambda,accuracy,final_loss_d,wall_time_s")
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{:.16e},{:.3}",
            r.metric, r.seed, r.lambda, r.accuracy, r.final_loss_d, r.wall_time_s
        )
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_moons, split};
    use crate::nn::{Activation, Role};

    #[test]
    fn bench_emits_expected_row_grid() {
        let full = gen_moons(120, 0.05, 1).unwrap();
        let (train, test) = split(&full, 0.5, 0).unwrap();
        let cfg = DistillConfig { epochs: 1, batch_size: 30, ..DistillConfig::default() };
        let enc = MlpSpec::new(vec![2, 8, 4], Activation::Tanh, Role::Encoder).unwrap();
        let head = MlpSpec::new(vec![4, 2], Activation::Tanh, Role::Head).unwrap();
        let (teacher, _) = distill::train_teacher(&enc, &head, &train, &test, &cfg).unwrap();

        let senc = MlpSpec::new(vec![2, 4, 4], Activation::Tanh, Role::Encoder).unwrap();
        let shead = MlpSpec::new(vec![4, 2], Activation::Tanh, Role::Head).unwrap();
        let setup = BenchSetup {
            teacher: &teacher,
            student_encoder: &senc,
            student_head: &shead,
            train: &train,
            test: &test,
            base_config: &cfg,
            seeds: &[1, 2],
            lambda: 0.1,
        };
        let rows = run_bench(&setup).unwrap();
        assert_eq!(rows.len(), (MetricKind::REGISTRY.len() + 2) * 2);
        // sorted by metric then seed
        let mut sorted = rows.clone();
        sorted.sort_by(|a, b| a.metric.cmp(&b.metric).then(a.seed.cmp(&b.seed)));
        assert_eq!(rows, sorted);
        assert!(rows.iter().filter(|r| r.metric == "teacher").count() == 2);
        assert!(rows.iter().filter(|r| r.metric == "baseline").count() == 2);
    }

    #[test]
    fn baseline_row_matches_direct_run() {
        let full = gen_moons(80, 0.05, 2).unwrap();
        let (train, test) = split(&full, 0.5, 0).unwrap();
        let cfg = DistillConfig { epochs: 1, batch_size: 20, seed: 7, ..DistillConfig::default() };
        let enc = MlpSpec::new(vec![2, 6, 3], Activation::Tanh, Role::Encoder).unwrap();
        let head = MlpSpec::new(vec![3, 2], Activation::Tanh, Role::Head).unwrap();
        let (teacher, _) = distill::train_teacher(&enc, &head, &train, &test, &cfg).unwrap();
        let senc = MlpSpec::new(vec![2, 3, 3], Activation::Tanh, Role::Encoder).unwrap();
        let shead = MlpSpec::new(vec![3, 2], Activation::Tanh, Role::Head).unwrap();

        let setup = BenchSetup {
            teacher: &teacher,
            student_encoder: &senc,
            student_head: &shead,
            train: &train,
            test: &test,
            base_config: &cfg,
            seeds: &[7],
            lambda: 0.1,
        };
        let rows = run_bench(&setup).unwrap();
        let bench_baseline = rows.iter().find(|r| r.metric == "baseline").unwrap();

        let direct_cfg = DistillConfig { metric: MetricKind::None, lambda: 0.0, seed: 7, ..cfg };
        let (_, log) = distill::distill(&senc, &shead, &teacher, &train, &test, &direct_cfg).unwrap();
        assert_eq!(bench_baseline.accuracy, log.final_test_accuracy());
    }
}
