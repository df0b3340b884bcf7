//! Training procedures: supervised teacher training, distillation steps
//! that add a feature-distribution penalty to the classification loss, a
//! classical prediction-space KD baseline, and evaluation.
//!
//! The distribution gradient is routed only into the student encoder; the
//! head is trained by the classification loss alone. The classical KD
//! baseline is the exception: it penalizes predictions, so its gradient
//! flows through head and encoder like any logit loss.

use crate::data::{minibatches, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{
    compute_feature_metric, CovMode, FeatureMetric, LabeledBatch, MetricOptions, DEFAULT_RIDGE,
};
use crate::nn::{
    self, backward, cosine_lr, forward, init_mlp, sgd_momentum_step, softmax_cross_entropy,
    Gradients, MlpModel, MlpSpec, TrainingMeta,
};
use crate::ot::SolverConfig;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Metric selector for a distillation run. `None` is the plain supervised
/// baseline; `ClassicalKd` matches predictions instead of features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    W2E,
    Cw2E,
    Jw2E,
    W2G,
    Cw2G,
    KlG,
    None,
    ClassicalKd,
}

impl MetricKind {
    /// Every metric that performs distillation (everything except `None`).
    pub const REGISTRY: [MetricKind; 7] = [
        MetricKind::W2E,
        MetricKind::Cw2E,
        MetricKind::Jw2E,
        MetricKind::W2G,
        MetricKind::Cw2G,
        MetricKind::KlG,
        MetricKind::ClassicalKd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::W2E => "w2_e",
            MetricKind::Cw2E => "cw2_e",
            MetricKind::Jw2E => "jw2_e",
            MetricKind::W2G => "w2_g",
            MetricKind::Cw2G => "cw2_g",
            MetricKind::KlG => "kl_g",
            MetricKind::None => "none",
            MetricKind::ClassicalKd => "classical_kd",
        }
    }

    pub fn parse(name: &str) -> Result<MetricKind> {
        let all = [
            MetricKind::W2E,
            MetricKind::Cw2E,
            MetricKind::Jw2E,
            MetricKind::W2G,
            MetricKind::Cw2G,
            MetricKind::KlG,
            MetricKind::None,
            MetricKind::ClassicalKd,
        ];
        all.into_iter().find(|m| m.name() == name).ok_or_else(|| {
            let valid: Vec<&str> = all.iter().map(|m| m.name()).collect();
            Error::Config(format!("unknown metric {name:?}; valid: {}", valid.join(", ")))
        })
    }

    pub fn as_feature_metric(self) -> Option<FeatureMetric> {
        match self {
            MetricKind::W2E => Some(FeatureMetric::W2Empirical),
            MetricKind::Cw2E => Some(FeatureMetric::Cw2Empirical),
            MetricKind::Jw2E => Some(FeatureMetric::Jw2Empirical),
            MetricKind::W2G => Some(FeatureMetric::W2Gaussian),
            MetricKind::Cw2G => Some(FeatureMetric::Cw2Gaussian),
            MetricKind::KlG => Some(FeatureMetric::KlGaussian),
            MetricKind::None | MetricKind::ClassicalKd => None,
        }
    }

    pub fn is_gaussian(self) -> bool {
        matches!(self, MetricKind::W2G | MetricKind::Cw2G | MetricKind::KlG)
    }
}

/// Everything one training run needs. Defaults follow the reference
/// protocol: SGD at lr 0.01 with momentum 0.9 for 15 epochs, cosine
/// annealed to 1e-4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    pub metric: MetricKind,
    pub lambda: f64,
    pub beta: f64,
    pub gaussian_mode: CovMode,
    pub ridge: f64,
    pub solver: SolverConfig,
    pub lr0: f64,
    pub momentum: f64,
    pub lr_min: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub kd_temperature: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            metric: MetricKind::None,
            lambda: 0.0,
            beta: 1.0,
            gaussian_mode: CovMode::Diagonal,
            ridge: DEFAULT_RIDGE,
            solver: SolverConfig::Auto,
            lr0: 0.01,
            momentum: 0.9,
            lr_min: 1e-4,
            epochs: 15,
            batch_size: 64,
            seed: 0,
            kd_temperature: 2.0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.lambda > 0.0 && self.metric == MetricKind::None {
            return Err(Error::Config(
                "lambda > 0 requires a metric with a gradient path, got metric none".into(),
            ));
        }
        if self.lambda > 0.0 && self.metric.is_gaussian() && self.gaussian_mode == CovMode::Full {
            return Err(Error::Config(
                "full-covariance Gaussian metrics are evaluation-only; train with diagonal mode".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.kd_temperature > 0.0) {
            return Err(Error::Config(format!(
                "kd_temperature must be > 0, got {}",
                self.kd_temperature
            )));
        }
        if !(self.ridge > 0.0) {
            return Err(Error::Config(format!("ridge must be > 0, got {}", self.ridge)));
        }
        if self.beta < 0.0 {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            beta: self.beta,
            gaussian_mode: self.gaussian_mode,
            ridge: self.ridge,
            solver: self.solver,
        }
    }
}

/// One epoch of a training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss_c: f64,
    pub mean_loss_d: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub wall_time_s: f64,
    pub fallback_batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Set when a distillation run hit non-finite numbers and stopped early
    /// with the last finite parameters.
    pub diverged_at_epoch: Option<usize>,
}

impl TrainLog {
    pub fn final_test_accuracy(&self) -> f64 {
        self.epochs.last().map(|e| e.test_accuracy).unwrap_or(0.0)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(
            w,
            "epoch,lr,mean_loss_c,mean_loss_d,train_accuracy,test_accuracy,wall_time_s,fallback_batches"
        )
        .map_err(|e| Error::io(path.display().to_string(), e))?;
        for r in &self.epochs {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.epoch,
                r.lr,
                r.mean_loss_c,
                r.mean_loss_d,
                r.train_accuracy,
                r.test_accuracy,
                r.wall_time_s,
                r.fallback_batches
            )
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        w.flush().map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Model(format!("serialize log: {e}")))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Momentum state for an encoder + head pair.
#[derive(Debug, Clone)]
pub struct ModelVelocity {
    pub encoder: Gradients,
    pub head: Gradients,
}

impl ModelVelocity {
    pub fn zeros_like(model: &MlpModel) -> Self {
        ModelVelocity {
            encoder: Gradients::zeros_like(&model.encoder),
            head: Gradients::zeros_like(&model.head),
        }
    }
}

/// Outcome of one minibatch step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub loss_c: f64,
    pub loss_d: f64,
    /// The metric was degenerate on this batch and the step fell back to
    /// lambda = 0.
    pub fallback: bool,
}

/// Composite gradients of L_c + lambda * L_d for one batch, without
/// applying an update. `frozen_student_logits`, when given, replaces the
/// student logits seen by the joint metric's label cost (the training path
/// detaches that cost, so finite-difference checks freeze it explicitly).
pub fn composite_gradients(
    student: &MlpModel,
    teacher: Option<&MlpModel>,
    x: &Array2<f64>,
    y: &[usize],
    config: &DistillConfig,
    frozen_student_logits: Option<&Array2<f64>>,
) -> Result<(StepOutcome, Gradients, Gradients)> {
    let enc_trace = forward(&student.encoder, x)?;
    let zs = enc_trace.output().clone();
    let head_trace = forward(&student.head, &zs)?;
    let logits_s = head_trace.output().clone();

    let (loss_c, d_logits) = softmax_cross_entropy(&logits_s, y)?;
    let (mut head_grads, d_z_head) = backward(&student.head, &head_trace, &d_logits)?;
    let mut d_z = d_z_head;

    let mut loss_d = 0.0;
    let mut fallback = false;

    if config.lambda > 0.0 && config.metric != MetricKind::None {
        let teacher = teacher.ok_or_else(|| {
            Error::Config("distillation metric requested but no teacher provided".into())
        })?;
        let (zt, logits_t) = teacher.forward_full(x)?;
        match config.metric {
            MetricKind::ClassicalKd => {
                let (value, d_logits_kd) =
                    classical_kd_loss(&logits_s, &logits_t, config.kd_temperature)?;
                loss_d = value;
                let scaled = d_logits_kd.mapv(|g| g * config.lambda);
                let (head_kd, d_z_kd) = backward(&student.head, &head_trace, &scaled)?;
                for l in 0..head_grads.weights.len() {
                    head_grads.weights[l] += &head_kd.weights[l];
                    head_grads.biases[l] += &head_kd.biases[l];
                }
                d_z += &d_z_kd;
            }
            kind => {
                let feature = kind.as_feature_metric().expect("feature metric");
                let s_logits = frozen_student_logits.cloned().unwrap_or_else(|| logits_s.clone());
                let s_batch = LabeledBatch::new(zs.clone(), y.to_vec(), Some(s_logits))?;
                let t_batch = LabeledBatch::new(zt, y.to_vec(), Some(logits_t))?;
                match compute_feature_metric(feature, &s_batch, &t_batch, &config.metric_options()) {
                    Ok(result) => {
                        loss_d = result.value;
                        let grad = result.grad_zs.ok_or_else(|| {
                            Error::Config(format!(
                                "metric {} produced no gradient; not usable for training",
                                kind.name()
                            ))
                        })?;
                        d_z.zip_mut_with(&grad, |acc, &g| *acc += config.lambda * g);
                    }
                    Err(Error::DegenerateBatch(_)) => {
                        fallback = true;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let (enc_grads, _) = backward(&student.encoder, &enc_trace, &d_z)?;
    Ok((StepOutcome { loss_c, loss_d, fallback }, enc_grads, head_grads))
}

/// One SGD-momentum step on the composite objective.
pub fn train_step(
    student: &mut MlpModel,
    velocity: &mut ModelVelocity,
    teacher: Option<&MlpModel>,
    x: &Array2<f64>,
    y: &[usize],
    lr: f64,
    config: &DistillConfig,
) -> Result<StepOutcome> {
    let (outcome, enc_grads, head_grads) =
        composite_gradients(student, teacher, x, y, config, None)?;
    sgd_momentum_step(&mut student.encoder, &enc_grads, &mut velocity.encoder, lr, config.momentum);
    sgd_momentum_step(&mut student.head, &head_grads, &mut velocity.head, lr, config.momentum);
    Ok(outcome)
}

/// Temperature-scaled prediction matching:
/// T^2 * KL(softmax(teacher/T) || softmax(student/T)), batch mean, with the
/// exact gradient w.r.t. the student logits.
pub fn classical_kd_loss(
    student_logits: &Array2<f64>,
    teacher_logits: &Array2<f64>,
    temperature: f64,
) -> Result<(f64, Array2<f64>)> {
    if student_logits.dim() != teacher_logits.dim() {
        return Err(Error::shape(
            "kd logits",
            format!("{:?}", teacher_logits.dim()),
            format!("{:?}", student_logits.dim()),
        ));
    }
    if !(temperature > 0.0) {
        return Err(Error::Config(format!("temperature must be > 0, got {temperature}")));
    }
    let n = student_logits.nrows() as f64;
    let log_ps = log_softmax_rows(&student_logits.mapv(|v| v / temperature));
    let log_pt = log_softmax_rows(&teacher_logits.mapv(|v| v / temperature));
    let mut value = 0.0;
    let mut d_logits = Array2::zeros(student_logits.dim());
    for i in 0..student_logits.nrows() {
        for c in 0..student_logits.ncols() {
            let pt = log_pt[[i, c]].exp();
            let ps = log_ps[[i, c]].exp();
            value += pt * (log_pt[[i, c]] - log_ps[[i, c]]);
            d_logits[[i, c]] = temperature * (ps - pt) / n;
        }
    }
    Ok((temperature * temperature * value / n, d_logits))
}

fn log_softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Argmax accuracy; ties break toward the lowest class index.
pub fn evaluate(model: &MlpModel, dataset: &Dataset) -> Result<f64> {
    if model.n_classes() != dataset.n_classes {
        return Err(Error::shape("model output width", dataset.n_classes, model.n_classes()));
    }
    let (_, logits) = model.forward_full(&dataset.x)?;
    let mut correct = 0usize;
    for (i, &label) in dataset.y.iter().enumerate() {
        let row = logits.row(i);
        let mut best = 0usize;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

fn model_is_finite(model: &MlpModel) -> bool {
    let finite = |m: &nn::Mlp| {
        m.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && m.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    };
    finite(&model.encoder) && finite(&model.head)
}

enum DivergencePolicy {
    /// Plain supervised training treats non-finite losses as a hard error.
    Abort,
    /// Distillation runs keep the last finite parameters and stop early;
    /// the log records where. Huge lambda values can push the oscillating
    /// feature penalty past f64 range, and an over-regularized model is
    /// still a measurable outcome.
    StopEarly,
}

fn run_training(
    encoder_spec: &MlpSpec,
    head_spec: &MlpSpec,
    teacher: Option<&MlpModel>,
    train: &Dataset,
    test: &Dataset,
    config: &DistillConfig,
    policy: DivergencePolicy,
) -> Result<(MlpModel, TrainLog)> {
    config.validate()?;
    if encoder_spec.input_dim() != train.dim() {
        return Err(Error::shape("encoder input dim", train.dim(), encoder_spec.input_dim()));
    }
    if head_spec.output_dim() != train.n_classes {
        return Err(Error::shape("head output dim", train.n_classes, head_spec.output_dim()));
    }
    if let Some(t) = teacher {
        if t.latent_dim() != encoder_spec.output_dim() {
            return Err(Error::Config(format!(
                "student latent dim {} must equal teacher latent dim {}",
                encoder_spec.output_dim(),
                t.latent_dim()
            )));
        }
    }

    let encoder = init_mlp(encoder_spec, config.seed);
    let head = init_mlp(head_spec, config.seed.wrapping_add(1));
    let mut model = MlpModel::new(encoder, head, config.seed, TrainingMeta::default())?;
    let mut velocity = ModelVelocity::zeros_like(&model);
    let mut log = TrainLog::default();

    'epochs: for epoch in 0..config.epochs {
        let started = Instant::now();
        let lr = cosine_lr(config.lr0, config.lr_min, epoch, config.epochs);
        let mut sum_c = 0.0;
        let mut sum_d = 0.0;
        let mut batches = 0usize;
        let mut fallbacks = 0usize;
        for batch in minibatches(train, config.batch_size, config.seed, epoch)? {
            let (x, y) = train.gather(&batch);
            let snapshot = match policy {
                DivergencePolicy::StopEarly => Some(model.clone()),
                DivergencePolicy::Abort => None,
            };
            let step = train_step(&mut model, &mut velocity, teacher, &x, &y, lr, config);
            let bad = match &step {
                Ok(out) => !out.loss_c.is_finite() || !out.loss_d.is_finite() || !model_is_finite(&model),
                Err(Error::NonFinite { .. }) => true,
                Err(_) => false,
            };
            if bad {
                match policy {
                    DivergencePolicy::Abort => {
                        return Err(Error::Diverged(format!(
                            "non-finite loss at epoch {epoch}, batch {batches}"
                        )));
                    }
                    DivergencePolicy::StopEarly => {
                        model = snapshot.expect("snapshot kept for StopEarly");
                        log.diverged_at_epoch = Some(epoch);
                        break 'epochs;
                    }
                }
            }
            let out = step?;
            sum_c += out.loss_c;
            sum_d += out.loss_d;
            batches += 1;
            if out.fallback {
                fallbacks += 1;
            }
        }
        let train_accuracy = evaluate(&model, train)?;
        let test_accuracy = evaluate(&model, test)?;
        log.epochs.push(EpochRecord {
            epoch,
            lr,
            mean_loss_c: sum_c / batches.max(1) as f64,
            mean_loss_d: sum_d / batches.max(1) as f64,
            train_accuracy,
            test_accuracy,
            wall_time_s: started.elapsed().as_secs_f64(),
            fallback_batches: fallbacks,
        });
    }

    model.training_meta = TrainingMeta {
        dataset: train.name.clone(),
        metric: config.metric.name().to_string(),
        lambda: config.lambda,
        epochs: config.epochs,
        final_train_accuracy: log.epochs.last().map(|e| e.train_accuracy).unwrap_or(0.0),
        final_test_accuracy: log.final_test_accuracy(),
    };
    Ok((model, log))
}

/// Plain supervised training; the result is the frozen target for
/// distillation runs. Non-finite losses abort.
pub fn train_teacher(
    encoder_spec: &MlpSpec,
    head_spec: &MlpSpec,
    train: &Dataset,
    test: &Dataset,
    config: &DistillConfig,
) -> Result<(MlpModel, TrainLog)> {
    let mut supervised = config.clone();
    supervised.metric = MetricKind::None;
    supervised.lambda = 0.0;
    run_training(encoder_spec, head_spec, None, train, test, &supervised, DivergencePolicy::Abort)
}

/// Full distillation run: epochs x batches of [`train_step`] against a
/// frozen teacher, cosine-annealed learning rate per epoch.
pub fn distill(
    student_encoder_spec: &MlpSpec,
    student_head_spec: &MlpSpec,
    teacher: &MlpModel,
    train: &Dataset,
    test: &Dataset,
    config: &DistillConfig,
) -> Result<(MlpModel, TrainLog)> {
    run_training(
        student_encoder_spec,
        student_head_spec,
        Some(teacher),
        train,
        test,
        config,
        DivergencePolicy::StopEarly,
    )
}
