//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test --test acceptance -- --nocapture` to see them.

use kd2m::bench::{run_bench, BenchSetup};
use kd2m::data::{gen_moons, split, Dataset};
use kd2m::distill::{
    classical_kd_loss, composite_gradients, distill, train_teacher, DistillConfig, MetricKind,
};
use kd2m::gradcheck;
use kd2m::linalg::SymMatrix;
use kd2m::metrics::{
    cw2_gaussian, fit_gaussian, jw2_empirical, kl_gaussian, kl_gaussian_from_batches, w2_empirical,
    w2_gaussian, cw2_empirical, w2_gaussian_from_batches, CovMode, GaussianCov, GaussianParams,
    LabeledBatch,
};
use kd2m::nn::{forward, init_mlp, softmax_cross_entropy, Activation, MlpModel, MlpSpec, Role, TrainingMeta};
use kd2m::ot::{self, cost_matrix, solve_exact, solve_exact_with_margin, DiscreteMeasure, SolverConfig};
use kd2m::theory::check_theorem1;
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::Instant;

fn cloud(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.5..1.5))
}

/// Independent oracle: minimum over all n! permutation plans with uniform
/// 1/n mass, recomputing costs from the points directly.
fn permutation_oracle_cost(zs: &Array2<f64>, zt: &Array2<f64>) -> f64 {
    let n = zs.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    fn recurse(perm: &mut Vec<usize>, k: usize, zs: &Array2<f64>, zt: &Array2<f64>, best: &mut f64) {
        if k == perm.len() {
            let mut cost = 0.0;
            for (i, &j) in perm.iter().enumerate() {
                for c in 0..zs.ncols() {
                    let d = zs[[i, c]] - zt[[j, c]];
                    cost += d * d;
                }
            }
            *best = best.min(cost);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            recurse(perm, k + 1, zs, zt, best);
            perm.swap(k, i);
        }
    }
    recurse(&mut perm, 0, zs, zt, &mut best);
    best / n as f64
}

#[test]
fn acceptance_1_exact_solver_matches_permutation_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let dims = [1usize, 2, 4];
    for trial in 0..200 {
        let n = rng.gen_range(2..=6);
        let d = dims[trial % dims.len()];
        let zs = cloud(n, d, &mut rng);
        let zt = cloud(n, d, &mut rng);
        let c = cost_matrix(&zs, &zt).unwrap();
        let uniform = DiscreteMeasure::uniform(n);
        let plan = solve_exact(&uniform, &uniform, &c).unwrap();
        let oracle = permutation_oracle_cost(&zs, &zt);
        assert!(
            (plan.cost - oracle).abs() <= 1e-9,
            "trial {trial} (n={n}, d={d}): solver {} vs oracle {}",
            plan.cost,
            oracle
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("ACCEPTANCE 1 (exact OT vs permutation oracle, 200 instances in {elapsed:?}): PASS");
}

/// Resample until the exact plan for this cost matrix is unique (margin
/// above threshold); a near-zero reduced cost means another optimal vertex.
fn unique_plan(c: &ot::CostMatrix, n: usize, m: usize) -> bool {
    let a = DiscreteMeasure::uniform(n);
    let b = DiscreteMeasure::uniform(m);
    let (_, margin) = solve_exact_with_margin(&a, &b, c).unwrap();
    margin > 1e-6 * c.mean().max(1e-12)
}

fn labels_8() -> Vec<usize> {
    vec![0, 0, 1, 1, 0, 0, 1, 1]
}

#[test]
fn acceptance_2_gradient_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let trials = 20;
    let (n, d) = (8usize, 4usize);

    // w2_e: fixed-plan analytic vs re-solved central differences
    let mut done = 0;
    while done < trials {
        let zs = cloud(n, d, &mut rng);
        let zt = cloud(n, d, &mut rng);
        if !unique_plan(&cost_matrix(&zs, &zt).unwrap(), n, n) {
            continue;
        }
        let s = LabeledBatch::new(zs.clone(), labels_8(), None).unwrap();
        let t = LabeledBatch::new(zt, labels_8(), None).unwrap();
        let r = w2_empirical(&s, &t, SolverConfig::Exact).unwrap();
        let numeric = gradcheck::finite_diff_matrix(&zs, 1e-4, |z| {
            let sp = LabeledBatch::new(z.clone(), labels_8(), None).unwrap();
            w2_empirical(&sp, &t, SolverConfig::Exact).unwrap().value
        });
        let rel = gradcheck::rel_error(
            r.grad_zs.as_ref().unwrap().as_slice().unwrap(),
            numeric.as_slice().unwrap(),
        );
        assert!(rel < 1e-3, "w2_e trial {done}: rel {rel}");
        done += 1;
    }

    // cw2_e: per-class plans must all be unique
    let mut done = 0;
    while done < trials {
        let zs = cloud(n, d, &mut rng);
        let zt = cloud(n, d, &mut rng);
        let y = labels_8();
        let class_rows = |class: usize| -> Vec<usize> {
            (0..n).filter(|&i| y[i] == class).collect()
        };
        let select = |z: &Array2<f64>, rows: &[usize]| {
            let mut out = Array2::zeros((rows.len(), d));
            for (r, &i) in rows.iter().enumerate() {
                out.row_mut(r).assign(&z.row(i));
            }
            out
        };
        let all_unique = [0usize, 1].iter().all(|&cl| {
            let rs = class_rows(cl);
            let c = cost_matrix(&select(&zs, &rs), &select(&zt, &rs)).unwrap();
            unique_plan(&c, rs.len(), rs.len())
        });
        if !all_unique {
            continue;
        }
        let s = LabeledBatch::new(zs.clone(), y.clone(), None).unwrap();
        let t = LabeledBatch::new(zt, y.clone(), None).unwrap();
        let r = cw2_empirical(&s, &t, SolverConfig::Exact).unwrap();
        let numeric = gradcheck::finite_diff_matrix(&zs, 1e-4, |z| {
            let sp = LabeledBatch::new(z.clone(), y.clone(), None).unwrap();
            cw2_empirical(&sp, &t, SolverConfig::Exact).unwrap().value
        });
        let rel = gradcheck::rel_error(
            r.grad_zs.as_ref().unwrap().as_slice().unwrap(),
            numeric.as_slice().unwrap(),
        );
        assert!(rel < 1e-3, "cw2_e trial {done}: rel {rel}");
        done += 1;
    }

    // jw2_e: joint-cost plan, logits held fixed while features move
    let mut done = 0;
    while done < trials {
        let zs = cloud(n, d, &mut rng);
        let zt = cloud(n, d, &mut rng);
        let ls = cloud(n, 2, &mut rng);
        let lt = cloud(n, 2, &mut rng);
        let s = LabeledBatch::new(zs.clone(), labels_8(), Some(ls.clone())).unwrap();
        let t = LabeledBatch::new(zt.clone(), labels_8(), Some(lt.clone())).unwrap();
        let beta = 0.7;
        // uniqueness on the joint cost
        let ps = kd2m::nn::softmax_rows(&ls);
        let pt = kd2m::nn::softmax_rows(&lt);
        let feat = cost_matrix(&zs, &zt).unwrap();
        let lab = cost_matrix(&ps, &pt).unwrap();
        let joint = ot::CostMatrix::new(feat.entries() + &(lab.entries() * beta)).unwrap();
        if !unique_plan(&joint, n, n) {
            continue;
        }
        let r = jw2_empirical(&s, &t, beta, SolverConfig::Exact).unwrap();
        let numeric = gradcheck::finite_diff_matrix(&zs, 1e-4, |z| {
            let sp = LabeledBatch::new(z.clone(), labels_8(), Some(ls.clone())).unwrap();
            jw2_empirical(&sp, &t, beta, SolverConfig::Exact).unwrap().value
        });
        let rel = gradcheck::rel_error(
            r.grad_zs.as_ref().unwrap().as_slice().unwrap(),
            numeric.as_slice().unwrap(),
        );
        assert!(rel < 1e-3, "jw2_e trial {done}: rel {rel}");
        done += 1;
    }

    // Gaussian metrics, diagonal mode: no plan, tighter tolerance
    for trial in 0..trials {
        let zs = cloud(n, d, &mut rng);
        let zt = cloud(n, d, &mut rng);
        let r = w2_gaussian_from_batches(&zs, &zt, CovMode::Diagonal, 1e-4).unwrap();
        let numeric = gradcheck::finite_diff_matrix(&zs, 1e-4, |z| {
            w2_gaussian_from_batches(z, &zt, CovMode::Diagonal, 1e-4).unwrap().value
        });
        let rel = gradcheck::rel_error(
            r.grad_zs.as_ref().unwrap().as_slice().unwrap(),
            numeric.as_slice().unwrap(),
        );
        assert!(rel < 1e-4, "w2_g trial {trial}: rel {rel}");

        let r = kl_gaussian_from_batches(&zs, &zt, CovMode::Diagonal, 1e-4).unwrap();
        let numeric = gradcheck::finite_diff_matrix(&zs, 1e-4, |z| {
            kl_gaussian_from_batches(z, &zt, CovMode::Diagonal, 1e-4).unwrap().value
        });
        let rel = gradcheck::rel_error(
            r.grad_zs.as_ref().unwrap().as_slice().unwrap(),
            numeric.as_slice().unwrap(),
        );
        assert!(rel < 1e-4, "kl_g trial {trial}: rel {rel}");

        let y = labels_8();
        let s = LabeledBatch::new(zs.clone(), y.clone(), None).unwrap();
        let t = LabeledBatch::new(zt, y.clone(), None).unwrap();
        let r = cw2_gaussian(&s, &t, CovMode::Diagonal, 1e-4).unwrap();
        let numeric = gradcheck::finite_diff_matrix(&zs, 1e-4, |z| {
            let sp = LabeledBatch::new(z.clone(), y.clone(), None).unwrap();
            cw2_gaussian(&sp, &t, CovMode::Diagonal, 1e-4).unwrap().value
        });
        let rel = gradcheck::rel_error(
            r.grad_zs.as_ref().unwrap().as_slice().unwrap(),
            numeric.as_slice().unwrap(),
        );
        assert!(rel < 1e-4, "cw2_g trial {trial}: rel {rel}");
    }

    // classical KD and cross-entropy logit gradients
    for trial in 0..trials {
        let s = cloud(6, 3, &mut rng);
        let t = cloud(6, 3, &mut rng);
        let (_, analytic) = classical_kd_loss(&s, &t, 2.5).unwrap();
        let numeric = gradcheck::finite_diff_matrix(&s, 1e-4, |m| {
            classical_kd_loss(m, &t, 2.5).unwrap().0
        });
        let rel = gradcheck::rel_error(analytic.as_slice().unwrap(), numeric.as_slice().unwrap());
        assert!(rel < 1e-4, "classical_kd trial {trial}: rel {rel}");

        let logits = cloud(6, 3, &mut rng);
        let y = vec![0, 1, 2, 0, 1, 2];
        let (_, analytic) = softmax_cross_entropy(&logits, &y).unwrap();
        let numeric = gradcheck::finite_diff_matrix(&logits, 1e-4, |m| {
            softmax_cross_entropy(m, &y).unwrap().0
        });
        let rel = gradcheck::rel_error(analytic.as_slice().unwrap(), numeric.as_slice().unwrap());
        assert!(rel < 1e-4, "cross_entropy trial {trial}: rel {rel}");
    }

    println!("ACCEPTANCE 2a (per-metric gradients, 20 trials each): PASS");
}

#[test]
fn acceptance_2b_composite_training_gradients() {
    // full composite objective on nets of <= 3 layers, width <= 8
    let enc_spec = MlpSpec::new(vec![3, 6, 4], Activation::Tanh, Role::Encoder).unwrap();
    let head_spec = MlpSpec::new(vec![4, 2], Activation::Tanh, Role::Head).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2003);
    let metrics = [
        MetricKind::W2E,
        MetricKind::Cw2E,
        MetricKind::Jw2E,
        MetricKind::W2G,
        MetricKind::Cw2G,
        MetricKind::KlG,
        MetricKind::ClassicalKd,
    ];
    for metric in metrics {
        let mut done = 0;
        while done < 20 {
            let seed: u64 = rng.gen();
            let teacher = MlpModel::new(
                init_mlp(&enc_spec, seed),
                init_mlp(&head_spec, seed.wrapping_add(1)),
                seed,
                TrainingMeta::default(),
            )
            .unwrap();
            let student = MlpModel::new(
                init_mlp(&enc_spec, seed.wrapping_add(2)),
                init_mlp(&head_spec, seed.wrapping_add(3)),
                seed,
                TrainingMeta::default(),
            )
            .unwrap();
            let x = cloud(8, 3, &mut rng);
            let y = labels_8();
            let config = DistillConfig {
                metric,
                lambda: 0.5,
                solver: SolverConfig::Exact,
                ..DistillConfig::default()
            };

            // skip instances with non-unique plans for the OT metrics
            if matches!(metric, MetricKind::W2E | MetricKind::Cw2E | MetricKind::Jw2E) {
                let zs = forward(&student.encoder, &x).unwrap().output().clone();
                let zt = forward(&teacher.encoder, &x).unwrap().output().clone();
                let ok = match metric {
                    MetricKind::W2E => unique_plan(&cost_matrix(&zs, &zt).unwrap(), 8, 8),
                    MetricKind::Cw2E => [0usize, 1].iter().all(|&cl| {
                        let rows: Vec<usize> = (0..8).filter(|&i| y[i] == cl).collect();
                        let pick = |z: &Array2<f64>| {
                            let mut out = Array2::zeros((rows.len(), z.ncols()));
                            for (r, &i) in rows.iter().enumerate() {
                                out.row_mut(r).assign(&z.row(i));
                            }
                            out
                        };
                        unique_plan(&cost_matrix(&pick(&zs), &pick(&zt)).unwrap(), rows.len(), rows.len())
                    }),
                    MetricKind::Jw2E => {
                        let ls = forward(&student.head, &zs).unwrap().output().clone();
                        let lt = forward(&teacher.head, &zt).unwrap().output().clone();
                        let ps = kd2m::nn::softmax_rows(&ls);
                        let pt = kd2m::nn::softmax_rows(&lt);
                        let joint = ot::CostMatrix::new(
                            cost_matrix(&zs, &zt).unwrap().entries()
                                + &(cost_matrix(&ps, &pt).unwrap().entries() * config.beta),
                        )
                        .unwrap();
                        unique_plan(&joint, 8, 8)
                    }
                    _ => unreachable!(),
                };
                if !ok {
                    continue;
                }
            }

            // the joint metric detaches its label cost, so the finite
            // difference loss freezes the student logits at the base point
            let frozen = if metric == MetricKind::Jw2E {
                let zs = forward(&student.encoder, &x).unwrap().output().clone();
                Some(forward(&student.head, &zs).unwrap().output().clone())
            } else {
                None
            };

            let (_, enc_grads, head_grads) =
                composite_gradients(&student, Some(&teacher), &x, &y, &config, None).unwrap();
            let loss_of = |m: &MlpModel| {
                let (out, _, _) =
                    composite_gradients(m, Some(&teacher), &x, &y, &config, frozen.as_ref()).unwrap();
                out.loss_c + config.lambda * out.loss_d
            };

            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            let mut probe = student.clone();
            for k in 0..student.encoder.n_params() {
                analytic.push(enc_grads.get(k));
                let orig = student.encoder.get_param(k);
                numeric.push(gradcheck::central_diff(orig, 1e-5, |v| {
                    probe.encoder.set_param(k, v);
                    let l = loss_of(&probe);
                    probe.encoder.set_param(k, orig);
                    l
                }));
            }
            for k in 0..student.head.n_params() {
                analytic.push(head_grads.get(k));
                let orig = student.head.get_param(k);
                numeric.push(gradcheck::central_diff(orig, 1e-5, |v| {
                    probe.head.set_param(k, v);
                    let l = loss_of(&probe);
                    probe.head.set_param(k, orig);
                    l
                }));
            }
            let rel = gradcheck::rel_error(&analytic, &numeric);
            assert!(rel < 1e-3, "{} composite trial {done}: rel {rel}", metric.name());
            done += 1;
        }
    }
    println!("ACCEPTANCE 2b (composite training gradients, 7 metrics x 20 trials): PASS");
}

#[test]
fn acceptance_3_closed_form_spot_values() {
    // Gaussian W2 under a pure (3, 4) mean shift
    let gs = GaussianParams {
        mean: array![0.0, 0.0],
        cov: GaussianCov::Full(SymMatrix::identity(2)),
        ridge: 1e-4,
    };
    let gt = GaussianParams {
        mean: array![3.0, 4.0],
        cov: GaussianCov::Full(SymMatrix::identity(2)),
        ridge: 1e-4,
    };
    assert!((w2_gaussian(&gs, &gt).unwrap().value - 25.0).abs() <= 1e-9);

    // diagonal Bures term
    let gs = GaussianParams {
        mean: array![0.0, 0.0],
        cov: GaussianCov::Diagonal(array![1.0, 2.0]),
        ridge: 1e-4,
    };
    let gt = GaussianParams {
        mean: array![0.0, 0.0],
        cov: GaussianCov::Diagonal(array![3.0, 5.0]),
        ridge: 1e-4,
    };
    assert!((w2_gaussian(&gs, &gt).unwrap().value - 13.0).abs() <= 1e-9);

    // 1-D KL, sigma 1 vs 2, equal means
    let gs = GaussianParams {
        mean: array![0.0],
        cov: GaussianCov::Diagonal(array![1.0]),
        ridge: 1e-4,
    };
    let gt = GaussianParams {
        mean: array![0.0],
        cov: GaussianCov::Diagonal(array![2.0]),
        ridge: 1e-4,
    };
    let closed = kl_gaussian(&gs, &gt).unwrap().value;
    let expect = 0.5 * (0.25 - 1.0 + 4.0f64.ln());
    assert!((closed - expect).abs() <= 1e-9);

    // Monte-Carlo cross-check of E_S[log(p_S / p_T)] with 1e6 samples
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let n = 1_000_000usize;
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        // log N(z; 0, 1) - log N(z; 0, 4): variances 1 and 4
        let log_ratio = -0.5 * z * z + 0.5 * z * z / 4.0 + 0.5 * 4.0f64.ln();
        sum += log_ratio;
        sum_sq += log_ratio * log_ratio;
    }
    let mc = sum / n as f64;
    let var = (sum_sq / n as f64 - mc * mc).max(0.0);
    let se = (var / n as f64).sqrt();
    assert!(
        (mc - closed).abs() <= 3.0 * se,
        "MC {mc} vs closed {closed} (3 SE = {})",
        3.0 * se
    );
    println!("ACCEPTANCE 3 (closed-form spot values + 1e6-sample MC cross-check): PASS");
}

#[test]
fn acceptance_4_theorem1_property_suite() {
    let started = Instant::now();
    let enc_spec = MlpSpec::new(vec![4, 6, 4], Activation::Tanh, Role::Encoder).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4004);
    for trial in 0..100 {
        let gs = init_mlp(&enc_spec, rng.gen());
        let gt = init_mlp(&enc_spec, rng.gen());
        let x = cloud(64, 4, &mut rng);
        let report = check_theorem1(&gs, &gt, &x).unwrap();
        assert!(
            report.w2 <= report.l2_encoders + 1e-7,
            "trial {trial}: w2 {} > l2 {}",
            report.w2,
            report.l2_encoders
        );
        let l2_sq = report.l2_encoders * report.l2_encoders;
        assert!(
            (report.diagonal_coupling_cost - l2_sq).abs() <= 1e-9 * l2_sq.max(1.0),
            "trial {trial}: diagonal coupling {} vs l2^2 {}",
            report.diagonal_coupling_cost,
            l2_sq
        );
    }
    // translation tightness
    let gs = init_mlp(&enc_spec, 77);
    let mut gt = gs.clone();
    let shift = [0.15, -0.2, 0.1, 0.05];
    for (k, s) in shift.iter().enumerate() {
        gt.biases[1][k] += s;
    }
    let x = cloud(64, 4, &mut rng);
    let report = check_theorem1(&gs, &gt, &x).unwrap();
    let norm: f64 = shift.iter().map(|s| s * s).sum::<f64>().sqrt();
    assert!((report.w2 - norm).abs() <= 1e-6);
    assert!((report.w2 - report.l2_encoders).abs() <= 1e-6);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("ACCEPTANCE 4 (theorem inequality, 100 trials + translation tightness in {elapsed:?}): PASS");
}

#[test]
fn acceptance_5_metric_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5005);

    // exact zero on identical inputs
    let z = cloud(8, 3, &mut rng);
    let logits = cloud(8, 2, &mut rng);
    let y = labels_8();
    let s = LabeledBatch::new(z.clone(), y.clone(), Some(logits.clone())).unwrap();
    assert_eq!(w2_empirical(&s, &s, SolverConfig::Exact).unwrap().value, 0.0);
    assert_eq!(cw2_empirical(&s, &s, SolverConfig::Exact).unwrap().value, 0.0);
    assert_eq!(jw2_empirical(&s, &s, 1.0, SolverConfig::Exact).unwrap().value, 0.0);
    let g = fit_gaussian(&z, CovMode::Diagonal, 1e-4).unwrap();
    assert_eq!(w2_gaussian(&g, &g).unwrap().value, 0.0);
    assert_eq!(kl_gaussian(&g, &g).unwrap().value, 0.0);
    assert_eq!(classical_kd_loss(&logits, &logits, 2.0).unwrap().0, 0.0);

    // symmetry for the symmetric metrics
    for trial in 0..10 {
        let a = LabeledBatch::new(cloud(6, 3, &mut rng), vec![0, 0, 0, 1, 1, 1], None).unwrap();
        let b = LabeledBatch::new(cloud(6, 3, &mut rng), vec![0, 0, 0, 1, 1, 1], None).unwrap();
        let w_ab = w2_empirical(&a, &b, SolverConfig::Exact).unwrap().value;
        let w_ba = w2_empirical(&b, &a, SolverConfig::Exact).unwrap().value;
        assert!((w_ab - w_ba).abs() <= 1e-8, "trial {trial}");
        let c_ab = cw2_empirical(&a, &b, SolverConfig::Exact).unwrap().value;
        let c_ba = cw2_empirical(&b, &a, SolverConfig::Exact).unwrap().value;
        assert!((c_ab - c_ba).abs() <= 1e-8, "trial {trial}");
        let ga = fit_gaussian(&a.z, CovMode::Diagonal, 1e-4).unwrap();
        let gb = fit_gaussian(&b.z, CovMode::Diagonal, 1e-4).unwrap();
        let g_ab = w2_gaussian(&ga, &gb).unwrap().value;
        let g_ba = w2_gaussian(&gb, &ga).unwrap().value;
        assert!((g_ab - g_ba).abs() <= 1e-8, "trial {trial}");
    }

    // KL is asymmetric on a generic pair
    let ga = GaussianParams {
        mean: array![0.3, -0.1],
        cov: GaussianCov::Diagonal(array![0.8, 1.4]),
        ridge: 1e-4,
    };
    let gb = GaussianParams {
        mean: array![-0.2, 0.5],
        cov: GaussianCov::Diagonal(array![1.9, 0.6]),
        ridge: 1e-4,
    };
    let ab = kl_gaussian(&ga, &gb).unwrap().value;
    let ba = kl_gaussian(&gb, &ga).unwrap().value;
    assert!((ab - ba).abs() > 1e-6);

    // triangle inequality for sqrt(W2^2) on 50 random triples
    for trial in 0..50 {
        let a = LabeledBatch::new(cloud(6, 2, &mut rng), vec![0; 6], None).unwrap();
        let b = LabeledBatch::new(cloud(6, 2, &mut rng), vec![0; 6], None).unwrap();
        let c = LabeledBatch::new(cloud(6, 2, &mut rng), vec![0; 6], None).unwrap();
        let ab = w2_empirical(&a, &b, SolverConfig::Exact).unwrap().value.sqrt();
        let bc = w2_empirical(&b, &c, SolverConfig::Exact).unwrap().value.sqrt();
        let ac = w2_empirical(&a, &c, SolverConfig::Exact).unwrap().value.sqrt();
        assert!(ac <= ab + bc + 1e-7, "trial {trial}: {ac} > {ab} + {bc}");
    }

    // JW2 with beta = 0 equals W2 bitwise
    let a = LabeledBatch::new(cloud(7, 3, &mut rng), vec![0; 7], Some(cloud(7, 2, &mut rng))).unwrap();
    let b = LabeledBatch::new(cloud(7, 3, &mut rng), vec![0; 7], Some(cloud(7, 2, &mut rng))).unwrap();
    let j = jw2_empirical(&a, &b, 0.0, SolverConfig::Exact).unwrap().value;
    let w = w2_empirical(&a, &b, SolverConfig::Exact).unwrap().value;
    assert_eq!(j.to_bits(), w.to_bits());

    println!("ACCEPTANCE 5 (metric axioms): PASS");
}

// ---------------------------------------------------------------------------
// shared moons fixture for criteria 6-8: converged teacher (hidden 64),
// students distilled for the pinned 15 epochs (hidden 16, shared latent 8)
// ---------------------------------------------------------------------------

struct MoonsTask {
    train: Dataset,
    test: Dataset,
    teacher: MlpModel,
    teacher_accuracy: f64,
    student_encoder: MlpSpec,
    student_head: MlpSpec,
    student_config: DistillConfig,
}

fn moons_task() -> &'static MoonsTask {
    static TASK: OnceLock<MoonsTask> = OnceLock::new();
    TASK.get_or_init(|| {
        let full = gen_moons(2000, 0.05, 7).unwrap();
        let (train, test) = split(&full, 0.5, 1).unwrap();
        let teacher_encoder = MlpSpec::new(vec![2, 64, 8], Activation::Relu, Role::Encoder).unwrap();
        let teacher_head = MlpSpec::new(vec![8, 2], Activation::Relu, Role::Head).unwrap();
        let teacher_config = DistillConfig {
            epochs: 60,
            batch_size: 16,
            seed: 100,
            ..DistillConfig::default()
        };
        let (teacher, log) =
            train_teacher(&teacher_encoder, &teacher_head, &train, &test, &teacher_config).unwrap();
        let teacher_accuracy = log.final_test_accuracy();
        assert!(teacher_accuracy >= 0.97, "teacher accuracy {teacher_accuracy}");
        MoonsTask {
            train,
            test,
            teacher,
            teacher_accuracy,
            student_encoder: MlpSpec::new(vec![2, 16, 8], Activation::Relu, Role::Encoder).unwrap(),
            student_head: MlpSpec::new(vec![8, 2], Activation::Relu, Role::Head).unwrap(),
            student_config: DistillConfig { epochs: 15, batch_size: 64, ..DistillConfig::default() },
        }
    })
}

const BENCH_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const LAMBDA_GRID: [f64; 3] = [0.01, 0.1, 1.0];

#[test]
fn acceptance_6_table_direction_on_moons() {
    let started = Instant::now();
    let task = moons_task();

    let mut best_mean: std::collections::BTreeMap<String, f64> = Default::default();
    let mut baseline_mean = 0.0;
    for &lambda in &LAMBDA_GRID {
        let setup = BenchSetup {
            teacher: &task.teacher,
            student_encoder: &task.student_encoder,
            student_head: &task.student_head,
            train: &task.train,
            test: &task.test,
            base_config: &task.student_config,
            seeds: &BENCH_SEEDS,
            lambda,
        };
        let rows = run_bench(&setup).unwrap();
        for kind in MetricKind::REGISTRY {
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| r.metric == kind.name())
                .map(|r| r.accuracy)
                .collect();
            assert_eq!(accs.len(), BENCH_SEEDS.len());
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let entry = best_mean.entry(kind.name().to_string()).or_insert(f64::NEG_INFINITY);
            *entry = entry.max(mean);
        }
        let base: Vec<f64> = rows
            .iter()
            .filter(|r| r.metric == "baseline")
            .map(|r| r.accuracy)
            .collect();
        baseline_mean = base.iter().sum::<f64>() / base.len() as f64;
    }

    println!("  baseline student mean accuracy: {baseline_mean:.4}");
    println!("  teacher accuracy:               {:.4}", task.teacher_accuracy);
    for (metric, mean) in &best_mean {
        println!("  {metric:<14} best-lambda mean: {mean:.4}");
        assert!(
            *mean >= baseline_mean,
            "{metric}: best mean {mean} < baseline {baseline_mean}"
        );
        assert!(
            *mean <= task.teacher_accuracy + 0.01,
            "{metric}: best mean {mean} exceeds teacher {} + 1pt",
            task.teacher_accuracy
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}");
    println!("ACCEPTANCE 6 (moons benchmark direction, best lambda per metric, in {elapsed:?}): PASS");
}

/// Exact W2 between the two encoders' features on a probe batch.
fn probe_w2(student_encoder: &kd2m::nn::Mlp, teacher: &MlpModel, probe: &Array2<f64>) -> f64 {
    let zs = forward(student_encoder, probe).unwrap().output().clone();
    let zt = forward(&teacher.encoder, probe).unwrap().output().clone();
    let c = cost_matrix(&zs, &zt).unwrap();
    let uniform = DiscreteMeasure::uniform(probe.nrows());
    solve_exact(&uniform, &uniform, &c).unwrap().cost.max(0.0).sqrt()
}

#[test]
fn acceptance_7_alignment_reduces_probe_w2() {
    let task = moons_task();
    let probe_rows: Vec<usize> = (0..200).collect();
    let (probe, _) = task.test.gather(&probe_rows);

    let feature_metrics = [
        MetricKind::W2E,
        MetricKind::Cw2E,
        MetricKind::Jw2E,
        MetricKind::W2G,
        MetricKind::Cw2G,
        MetricKind::KlG,
    ];
    for metric in feature_metrics {
        let mut before = Vec::new();
        let mut after = Vec::new();
        for &seed in &BENCH_SEEDS {
            let config = DistillConfig {
                metric,
                lambda: 0.1,
                seed,
                ..task.student_config.clone()
            };
            let initial = init_mlp(&task.student_encoder, seed);
            before.push(probe_w2(&initial, &task.teacher, &probe));
            let (student, _) = distill(
                &task.student_encoder,
                &task.student_head,
                &task.teacher,
                &task.train,
                &task.test,
                &config,
            )
            .unwrap();
            after.push(probe_w2(&student.encoder, &task.teacher, &probe));
        }
        let median = |xs: &mut Vec<f64>| {
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs[xs.len() / 2]
        };
        let med_before = median(&mut before);
        let med_after = median(&mut after);
        println!(
            "  {:<7} median probe W2: epoch 0 = {med_before:.4}, final = {med_after:.4}",
            metric.name()
        );
        assert!(
            med_after < med_before,
            "{}: median W2 did not decrease ({med_after} >= {med_before})",
            metric.name()
        );
    }
    println!("ACCEPTANCE 7 (feature alignment: final-epoch probe W2 below epoch 0): PASS");
}

#[test]
fn acceptance_8_lambda_sensitivity() {
    let task = moons_task();
    let run = |lambda: f64| {
        let config = DistillConfig {
            metric: MetricKind::Cw2E,
            lambda,
            seed: 0,
            ..task.student_config.clone()
        };
        let (student, _) = distill(
            &task.student_encoder,
            &task.student_head,
            &task.teacher,
            &task.train,
            &task.test,
            &config,
        )
        .unwrap();
        kd2m::distill::evaluate(&student, &task.test).unwrap()
    };
    let best = LAMBDA_GRID.iter().map(|&l| run(l)).fold(f64::NEG_INFINITY, f64::max);
    let huge = run(1e6);
    println!("  best-lambda accuracy {best:.4} vs lambda=1e6 accuracy {huge:.4}");
    assert!(huge < best, "over-regularized run ({huge}) not below best ({best})");
    println!("ACCEPTANCE 8 (lambda sensitivity: 1e6 degrades vs best lambda): PASS");
}

#[test]
fn acceptance_9_pipeline_determinism() {
    let bin = env!("CARGO_BIN_EXE_kd2m");
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    std::fs::write(
        &config_path,
        r#"{
  "dataset": {"source": {"kind": "moons", "n": 400, "noise": 0.05, "seed": 5}, "test_fraction": 0.5, "split_seed": 2},
  "teacher": {"hidden": [32], "latent": 6, "activation": "relu"},
  "student": {"hidden": [8], "latent": 6, "activation": "relu"},
  "train": {"epochs": 3, "batch_size": 32, "seed": 1}
}"#,
    )
    .unwrap();

    let run_pipeline = |tag: &str| -> (Vec<u8>, Vec<u8>, Vec<u8>, String, String) {
        let data = dir.path().join(format!("moons-{tag}.csv"));
        let teacher = dir.path().join(format!("teacher-{tag}.json"));
        let teacher_log = dir.path().join(format!("teacher-log-{tag}.csv"));
        let student = dir.path().join(format!("student-{tag}.json"));
        let student_log = dir.path().join(format!("student-log-{tag}.csv"));
        for args in [
            vec![
                "gen-data", "--dataset", "moons", "--n", "400", "--seed", "5", "--noise", "0.05",
                "--out", data.to_str().unwrap(),
            ],
            vec![
                "train-teacher", "--config", config_path.to_str().unwrap(),
                "--out", teacher.to_str().unwrap(), "--log", teacher_log.to_str().unwrap(),
            ],
            vec![
                "distill", "--config", config_path.to_str().unwrap(),
                "--teacher", teacher.to_str().unwrap(), "--metric", "cw2_e", "--lambda", "0.1",
                "--out", student.to_str().unwrap(), "--log", student_log.to_str().unwrap(),
            ],
        ] {
            let output = std::process::Command::new(bin).args(&args).output().unwrap();
            assert!(
                output.status.success(),
                "command {args:?} failed: {}",
                String::from_utf8_lossy(&output.stderr)
            );
        }
        // wall-time column is timing noise, everything else must be bitwise
        let strip_wall = |path: &std::path::Path| -> String {
            let text = std::fs::read_to_string(path).unwrap();
            text.lines()
                .map(|line| {
                    let cols: Vec<&str> = line.split(',').collect();
                    let mut kept: Vec<&str> = cols[..6.min(cols.len())].to_vec();
                    if cols.len() > 7 {
                        kept.push(cols[7]);
                    }
                    kept.join(",")
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        (
            std::fs::read(&data).unwrap(),
            std::fs::read(&teacher).unwrap(),
            std::fs::read(&student).unwrap(),
            strip_wall(&teacher_log),
            strip_wall(&student_log),
        )
    };

    let first = run_pipeline("a");
    let second = run_pipeline("b");
    assert_eq!(first.0, second.0, "dataset CSV differs");
    assert_eq!(first.1, second.1, "teacher model differs");
    assert_eq!(first.2, second.2, "student model differs");
    assert_eq!(first.3, second.3, "teacher log differs");
    assert_eq!(first.4, second.4, "student log differs");
    println!("ACCEPTANCE 9 (pipeline rerun is bitwise identical; wall-time column excluded): PASS");
}
