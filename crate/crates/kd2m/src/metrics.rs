//! Distribution metrics between student and teacher feature batches.
//!
//! Empirical metrics (W2, class-conditional W2, joint W2) solve a discrete
//! optimal transport problem and differentiate through the frozen optimal
//! plan (envelope rule). Gaussian metrics (W2/Bures, KL) fit (mu, sigma) by
//! maximum likelihood plus a ridge and use the closed forms; in diagonal
//! mode they propagate gradients to the source features by the chain rule
//! through the fitted moments.
//!
//! Every metric returns its squared-distance value directly: the squared
//! form is what the training loop minimizes, and it stays differentiable
//! at zero.

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::nn::softmax_rows;
use crate::ot::{self, DiscreteMeasure, SolverConfig, TransportPlan};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_RIDGE: f64 = 1e-4;

/// Features, labels, and (optionally) classifier logits for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub z: Array2<f64>,
    pub y: Vec<usize>,
    pub logits: Option<Array2<f64>>,
}

impl LabeledBatch {
    pub fn new(z: Array2<f64>, y: Vec<usize>, logits: Option<Array2<f64>>) -> Result<Self> {
        if z.nrows() == 0 {
            return Err(Error::DegenerateBatch("empty batch".into()));
        }
        if z.nrows() != y.len() {
            return Err(Error::shape("batch rows vs labels", z.nrows(), y.len()));
        }
        if let Some(l) = &logits {
            if l.nrows() != z.nrows() {
                return Err(Error::shape("logits rows", z.nrows(), l.nrows()));
            }
        }
        Ok(LabeledBatch { z, y, logits })
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    fn rows_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.y[i] == class).collect()
    }

    fn classes(&self) -> Vec<usize> {
        let mut set: Vec<usize> = self.y.clone();
        set.sort_unstable();
        set.dedup();
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovMode {
    Diagonal,
    Full,
}

/// Fitted Gaussian moments: mean plus either a per-coordinate sigma or a
/// full (ridged) covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: Array1<f64>,
    pub cov: GaussianCov,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GaussianCov {
    Diagonal(Array1<f64>),
    Full(SymMatrix),
}

impl GaussianParams {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mode(&self) -> CovMode {
        match self.cov {
            GaussianCov::Diagonal(_) => CovMode::Diagonal,
            GaussianCov::Full(_) => CovMode::Full,
        }
    }
}

/// Per-class term of a class-conditional metric. `value` is `None` when the
/// class was skipped (absent on one side, or too few samples to fit).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassTerm {
    pub class: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub value: Option<f64>,
}

/// Scalar metric value, optional gradient w.r.t. the source features, and
/// per-class terms for class-conditional metrics.
#[derive(Debug, Clone)]
pub struct MetricResult {
    pub value: f64,
    pub grad_zs: Option<Array2<f64>>,
    pub detail: Vec<ClassTerm>,
}

impl MetricResult {
    fn plain(value: f64, grad_zs: Option<Array2<f64>>) -> Self {
        MetricResult { value, grad_zs, detail: Vec::new() }
    }
}

fn check_same_dim(s: &LabeledBatch, t: &LabeledBatch) -> Result<()> {
    if s.dim() != t.dim() {
        return Err(Error::shape("feature dim", s.dim(), t.dim()));
    }
    Ok(())
}

/// Fixed-plan gradient of sum_ij gamma_ij ||zs_i - zt_j||^2 w.r.t. zs:
/// d/dzs_i = sum_j 2 gamma_ij (zs_i - zt_j).
fn fixed_plan_grad(zs: &Array2<f64>, zt: &Array2<f64>, plan: &TransportPlan) -> Array2<f64> {
    let row_mass = plan.gamma.sum_axis(Axis(1));
    let transported = plan.gamma.dot(zt);
    let mut grad = zs.clone();
    for (i, mut row) in grad.rows_mut().into_iter().enumerate() {
        for k in 0..row.len() {
            row[k] = 2.0 * (row_mass[i] * row[k] - transported[[i, k]]);
        }
    }
    grad
}

fn w2_between_clouds(zs: &Array2<f64>, zt: &Array2<f64>, solver: SolverConfig) -> Result<(f64, TransportPlan)> {
    let c = ot::cost_matrix(zs, zt)?;
    let a = DiscreteMeasure::uniform(zs.nrows());
    let b = DiscreteMeasure::uniform(zt.nrows());
    let plan = ot::solve(&a, &b, &c, solver)?;
    Ok((plan.cost, plan))
}

/// Squared 2-Wasserstein distance between the two feature clouds with
/// uniform weights; labels are ignored.
pub fn w2_empirical(s: &LabeledBatch, t: &LabeledBatch, solver: SolverConfig) -> Result<MetricResult> {
    check_same_dim(s, t)?;
    let (value, plan) = w2_between_clouds(&s.z, &t.z, solver)?;
    let grad = fixed_plan_grad(&s.z, &t.z, &plan);
    Ok(MetricResult::plain(value, Some(grad)))
}

/// Mean of per-class squared W2 over classes present in both batches.
/// Classes on one side only are skipped and recorded in `detail`.
pub fn cw2_empirical(s: &LabeledBatch, t: &LabeledBatch, solver: SolverConfig) -> Result<MetricResult> {
    check_same_dim(s, t)?;
    class_conditional(s, t, |rows_s, rows_t| {
        // present on both sides with any count
        (!rows_s.is_empty() && !rows_t.is_empty()).then_some(())
    }, |zs_c, zt_c| {
        let (value, plan) = w2_between_clouds(zs_c, zt_c, solver)?;
        Ok((value, Some(fixed_plan_grad(zs_c, zt_c, &plan))))
    })
}

/// Joint feature + label-cost W2. The ground cost adds
/// beta * ||p(z_i) - p(z_j)||^2 between softmax probability vectors of the
/// provided logits. Only the feature term contributes to the gradient: the
/// label cost is detached from the encoder.
pub fn jw2_empirical(s: &LabeledBatch, t: &LabeledBatch, beta: f64, solver: SolverConfig) -> Result<MetricResult> {
    check_same_dim(s, t)?;
    if beta < 0.0 {
        return Err(Error::Config(format!("jw2 beta must be >= 0, got {beta}")));
    }
    if beta == 0.0 {
        // reduces to the plain feature metric, bitwise
        return w2_empirical(s, t, solver);
    }
    let (Some(logits_s), Some(logits_t)) = (&s.logits, &t.logits) else {
        return Err(Error::Config("jw2 requires logits on both batches".into()));
    };
    if logits_s.ncols() != logits_t.ncols() {
        return Err(Error::shape("logit width", logits_s.ncols(), logits_t.ncols()));
    }
    let ps = softmax_rows(logits_s);
    let pt = softmax_rows(logits_t);
    let feature = ot::cost_matrix(&s.z, &t.z)?;
    let label = ot::cost_matrix(&ps, &pt)?;
    let joint = ot::CostMatrix::new(feature.entries() + &(label.entries() * beta))?;
    let a = DiscreteMeasure::uniform(s.len());
    let b = DiscreteMeasure::uniform(t.len());
    let plan = ot::solve(&a, &b, &joint, solver)?;
    let grad = fixed_plan_grad(&s.z, &t.z, &plan);
    Ok(MetricResult::plain(plan.cost, Some(grad)))
}

/// Maximum-likelihood Gaussian fit with biased (1/n) covariance plus
/// ridge * I; diagonal mode keeps sigma_i = sqrt(cov_ii).
pub fn fit_gaussian(z: &Array2<f64>, mode: CovMode, ridge: f64) -> Result<GaussianParams> {
    let n = z.nrows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if !(ridge > 0.0) {
        return Err(Error::Config(format!("ridge must be > 0, got {ridge}")));
    }
    let d = z.ncols();
    let mean = z.mean_axis(Axis(0)).expect("n >= 2");
    let cov = match mode {
        CovMode::Diagonal => {
            let mut sigma = Array1::zeros(d);
            for k in 0..d {
                let var: f64 = z.column(k).iter().map(|&v| (v - mean[k]).powi(2)).sum::<f64>() / n as f64;
                sigma[k] = (var + ridge).sqrt();
            }
            GaussianCov::Diagonal(sigma)
        }
        CovMode::Full => {
            let mut cov = Array2::zeros((d, d));
            for i in 0..n {
                for a in 0..d {
                    let da = z[[i, a]] - mean[a];
                    for b in a..d {
                        cov[[a, b]] += da * (z[[i, b]] - mean[b]);
                    }
                }
            }
            let inv_n = 1.0 / n as f64;
            for a in 0..d {
                for b in a..d {
                    cov[[a, b]] *= inv_n;
                    cov[[b, a]] = cov[[a, b]];
                }
                cov[[a, a]] += ridge;
            }
            GaussianCov::Full(SymMatrix::new(cov)?)
        }
    };
    Ok(GaussianParams { mean, cov, ridge })
}

/// Closed-form squared Gaussian W2: mean shift plus the Bures term (full
/// mode) or the sigma shift (diagonal mode). Value only; for gradients use
/// [`w2_gaussian_from_batches`].
pub fn w2_gaussian(gs: &GaussianParams, gt: &GaussianParams) -> Result<MetricResult> {
    if gs.dim() != gt.dim() {
        return Err(Error::shape("gaussian dim", gs.dim(), gt.dim()));
    }
    let mean_term: f64 = gs
        .mean
        .iter()
        .zip(gt.mean.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let value = match (&gs.cov, &gt.cov) {
        (GaussianCov::Diagonal(ss), GaussianCov::Diagonal(st)) => {
            let sigma_term: f64 = ss.iter().zip(st.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            mean_term + sigma_term
        }
        (GaussianCov::Full(cs), GaussianCov::Full(ct)) => mean_term + linalg::bures(cs, ct)?,
        _ => return Err(Error::Config("gaussian covariance mode mismatch".into())),
    };
    Ok(MetricResult::plain(value.max(0.0), None))
}

/// Gaussian KL(S || T), closed form. Value only; diagonal-mode gradients
/// come from [`kl_gaussian_from_batches`]. Clamped at zero.
pub fn kl_gaussian(gs: &GaussianParams, gt: &GaussianParams) -> Result<MetricResult> {
    if gs.dim() != gt.dim() {
        return Err(Error::shape("gaussian dim", gs.dim(), gt.dim()));
    }
    let d = gs.dim() as f64;
    let value = match (&gs.cov, &gt.cov) {
        (GaussianCov::Diagonal(ss), GaussianCov::Diagonal(st)) => {
            if st.iter().any(|&v| v <= 0.0) {
                return Err(Error::Conditioning("target sigma has non-positive entries".into()));
            }
            if ss.iter().any(|&v| v <= 0.0) {
                return Err(Error::Conditioning("source sigma has non-positive entries".into()));
            }
            let mut acc = -d;
            for k in 0..gs.dim() {
                let r = ss[k] / st[k];
                acc += r * r;
                acc += (gt.mean[k] - gs.mean[k]).powi(2) / (st[k] * st[k]);
                acc += 2.0 * (st[k] / ss[k]).ln();
            }
            0.5 * acc
        }
        (GaussianCov::Full(cs), GaussianCov::Full(ct)) => {
            let eig_t = linalg::sym_eig(ct)?;
            let floor = 1e-12 * ct.frobenius_norm().max(1.0);
            if eig_t.values.iter().any(|&l| l <= floor) {
                return Err(Error::Conditioning(
                    "target covariance is numerically singular; increase ridge".into(),
                ));
            }
            let eig_s = linalg::sym_eig(cs)?;
            if eig_s.values.iter().any(|&l| l <= 0.0) {
                return Err(Error::Conditioning(
                    "source covariance is numerically singular; increase ridge".into(),
                ));
            }
            let dim = gs.dim();
            // inv(Sigma_T) from the eigendecomposition
            let mut inv_t = Array2::zeros((dim, dim));
            for k in 0..dim {
                let inv_l = 1.0 / eig_t.values[k];
                for i in 0..dim {
                    let vik = eig_t.vectors[[i, k]] * inv_l;
                    for j in 0..dim {
                        inv_t[[i, j]] += vik * eig_t.vectors[[j, k]];
                    }
                }
            }
            let trace_term = (&inv_t * cs.entries()).sum();
            let delta = &gt.mean - &gs.mean;
            let maha = delta.dot(&inv_t.dot(&delta));
            let log_det_t: f64 = eig_t.values.iter().map(|&l| l.ln()).sum();
            let log_det_s: f64 = eig_s.values.iter().map(|&l| l.ln()).sum();
            0.5 * (trace_term + maha - d + log_det_t - log_det_s)
        }
        _ => return Err(Error::Config("gaussian covariance mode mismatch".into())),
    };
    Ok(MetricResult::plain(value.max(0.0), None))
}

/// Fit both sides and evaluate the Gaussian W2; in diagonal mode the result
/// carries the gradient w.r.t. the source features through (mu, sigma).
pub fn w2_gaussian_from_batches(
    zs: &Array2<f64>,
    zt: &Array2<f64>,
    mode: CovMode,
    ridge: f64,
) -> Result<MetricResult> {
    if zs.ncols() != zt.ncols() {
        return Err(Error::shape("feature dim", zs.ncols(), zt.ncols()));
    }
    let gs = fit_gaussian(zs, mode, ridge)?;
    let gt = fit_gaussian(zt, mode, ridge)?;
    let mut result = w2_gaussian(&gs, &gt)?;
    if let (GaussianCov::Diagonal(ss), GaussianCov::Diagonal(st)) = (&gs.cov, &gt.cov) {
        let n = zs.nrows() as f64;
        let mut grad = Array2::zeros(zs.dim());
        for i in 0..zs.nrows() {
            for k in 0..zs.ncols() {
                let mean_part = 2.0 * (gs.mean[k] - gt.mean[k]) / n;
                let sigma_part = 2.0 * (ss[k] - st[k]) * (zs[[i, k]] - gs.mean[k]) / (n * ss[k]);
                grad[[i, k]] = mean_part + sigma_part;
            }
        }
        result.grad_zs = Some(grad);
    }
    Ok(result)
}

/// Fit both sides and evaluate KL(S || T); diagonal mode carries the source
/// feature gradient.
pub fn kl_gaussian_from_batches(
    zs: &Array2<f64>,
    zt: &Array2<f64>,
    mode: CovMode,
    ridge: f64,
) -> Result<MetricResult> {
    if zs.ncols() != zt.ncols() {
        return Err(Error::shape("feature dim", zs.ncols(), zt.ncols()));
    }
    let gs = fit_gaussian(zs, mode, ridge)?;
    let gt = fit_gaussian(zt, mode, ridge)?;
    let mut result = kl_gaussian(&gs, &gt)?;
    if let (GaussianCov::Diagonal(ss), GaussianCov::Diagonal(st)) = (&gs.cov, &gt.cov) {
        let n = zs.nrows() as f64;
        let mut grad = Array2::zeros(zs.dim());
        for i in 0..zs.nrows() {
            for k in 0..zs.ncols() {
                let st2 = st[k] * st[k];
                let mean_part = (gs.mean[k] - gt.mean[k]) / (n * st2);
                let dsigma = ss[k] / st2 - 1.0 / ss[k];
                let sigma_part = dsigma * (zs[[i, k]] - gs.mean[k]) / (n * ss[k]);
                grad[[i, k]] = mean_part + sigma_part;
            }
        }
        result.grad_zs = Some(grad);
    }
    Ok(result)
}

/// Class-conditional Gaussian W2: per-class fit and closed form, averaged
/// over classes with at least two samples on each side.
pub fn cw2_gaussian(s: &LabeledBatch, t: &LabeledBatch, mode: CovMode, ridge: f64) -> Result<MetricResult> {
    check_same_dim(s, t)?;
    class_conditional(s, t, |rows_s, rows_t| {
        (rows_s.len() >= 2 && rows_t.len() >= 2).then_some(())
    }, |zs_c, zt_c| {
        let r = w2_gaussian_from_batches(zs_c, zt_c, mode, ridge)?;
        Ok((r.value, r.grad_zs))
    })
}

/// Shared skeleton for class-conditional metrics: partition by label,
/// evaluate per usable class, average values, and scatter per-class source
/// gradients back into the full batch. Accumulation follows ascending class
/// order, so results do not depend on scheduling.
fn class_conditional(
    s: &LabeledBatch,
    t: &LabeledBatch,
    usable: impl Fn(&[usize], &[usize]) -> Option<()>,
    per_class: impl Fn(&Array2<f64>, &Array2<f64>) -> Result<(f64, Option<Array2<f64>>)>,
) -> Result<MetricResult> {
    let mut all_classes: Vec<usize> = s.classes();
    for c in t.classes() {
        if !all_classes.contains(&c) {
            all_classes.push(c);
        }
    }
    all_classes.sort_unstable();

    struct ClassResult {
        source_rows: Vec<usize>,
        value: f64,
        grad: Option<Array2<f64>>,
    }
    let mut per_class_results: BTreeMap<usize, ClassResult> = BTreeMap::new();
    let mut detail = Vec::with_capacity(all_classes.len());
    for &class in &all_classes {
        let rows_s = s.rows_of_class(class);
        let rows_t = t.rows_of_class(class);
        if usable(&rows_s, &rows_t).is_none() {
            detail.push(ClassTerm { class, n_source: rows_s.len(), n_target: rows_t.len(), value: None });
            continue;
        }
        let zs_c = select_rows(&s.z, &rows_s);
        let zt_c = select_rows(&t.z, &rows_t);
        let (value, grad) = per_class(&zs_c, &zt_c)?;
        detail.push(ClassTerm {
            class,
            n_source: rows_s.len(),
            n_target: rows_t.len(),
            value: Some(value),
        });
        per_class_results.insert(class, ClassResult { source_rows: rows_s, value, grad });
    }

    if per_class_results.is_empty() {
        return Err(Error::DegenerateBatch(
            "no class usable on both sides of the batch".into(),
        ));
    }

    let n_used = per_class_results.len() as f64;
    let mut value = 0.0;
    let mut grad: Option<Array2<f64>> = None;
    for result in per_class_results.into_values() {
        value += result.value / n_used;
        if let Some(g) = result.grad {
            let full = grad.get_or_insert_with(|| Array2::zeros(s.z.dim()));
            for (local, &row) in result.source_rows.iter().enumerate() {
                for k in 0..s.dim() {
                    full[[row, k]] += g[[local, k]] / n_used;
                }
            }
        }
    }
    Ok(MetricResult { value, grad_zs: grad, detail })
}

fn select_rows(z: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), z.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&z.row(i));
    }
    out
}

/// The feature-space metrics selectable in a distillation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMetric {
    W2Empirical,
    Cw2Empirical,
    Jw2Empirical,
    W2Gaussian,
    Cw2Gaussian,
    KlGaussian,
}

impl FeatureMetric {
    pub const ALL: [FeatureMetric; 6] = [
        FeatureMetric::W2Empirical,
        FeatureMetric::Cw2Empirical,
        FeatureMetric::Jw2Empirical,
        FeatureMetric::W2Gaussian,
        FeatureMetric::Cw2Gaussian,
        FeatureMetric::KlGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureMetric::W2Empirical => "w2_e",
            FeatureMetric::Cw2Empirical => "cw2_e",
            FeatureMetric::Jw2Empirical => "jw2_e",
            FeatureMetric::W2Gaussian => "w2_g",
            FeatureMetric::Cw2Gaussian => "cw2_g",
            FeatureMetric::KlGaussian => "kl_g",
        }
    }
}

/// Options shared by the metric dispatcher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub beta: f64,
    pub gaussian_mode: CovMode,
    pub ridge: f64,
    pub solver: SolverConfig,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            beta: 1.0,
            gaussian_mode: CovMode::Diagonal,
            ridge: DEFAULT_RIDGE,
            solver: SolverConfig::Auto,
        }
    }
}

/// Evaluate one feature metric between a source and a target batch.
pub fn compute_feature_metric(
    metric: FeatureMetric,
    s: &LabeledBatch,
    t: &LabeledBatch,
    opts: &MetricOptions,
) -> Result<MetricResult> {
    match metric {
        FeatureMetric::W2Empirical => w2_empirical(s, t, opts.solver),
        FeatureMetric::Cw2Empirical => cw2_empirical(s, t, opts.solver),
        FeatureMetric::Jw2Empirical => jw2_empirical(s, t, opts.beta, opts.solver),
        FeatureMetric::W2Gaussian => w2_gaussian_from_batches(&s.z, &t.z, opts.gaussian_mode, opts.ridge),
        FeatureMetric::Cw2Gaussian => cw2_gaussian(s, t, opts.gaussian_mode, opts.ridge),
        FeatureMetric::KlGaussian => kl_gaussian_from_batches(&s.z, &t.z, opts.gaussian_mode, opts.ridge),
    }
}
