use super::*;
use crate::synthetic::{make_synthetic_classification, LabelRule};

fn toy() -> Dataset {
    let rows = vec![vec![0.2, 0.1], vec![0.8, 0.5], vec![0.3, 0.9], vec![0.6, 0.4]];
    Dataset::from_rows(&rows, vec![1, 0, 0, 1], vec![0, 0, 1, 1], "toy").unwrap()
}

fn small_synthetic(seed: u64) -> Dataset {
    let rule = LabelRule {
        group_effect: 0.8,
        ..LabelRule::aligned(3, 2.0)
    };
    make_synthetic_classification(400, 3, 1.5, &rule, seed).unwrap()
}

fn quick(method: Method, lambda: f64) -> TrainConfig {
    TrainConfig {
        method,
        lambda,
        epochs: 3,
        batch_size: 64,
        match_batch_size: 32,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_lambda_is_plain_erm() {
    let data = small_synthetic(1);
    let (a, la) = train(&data, &quick(Method::Ftm, 0.0)).unwrap();
    let (b, lb) = train(&data, &quick(Method::Unfair, 0.0)).unwrap();
    let (c, _) = train(&data, &quick(Method::Reg, 0.0)).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(a.params(), c.params());
    assert_eq!(la.epochs[2].loss, lb.epochs[2].loss);
}

#[test]
fn runs_are_reproducible() {
    let data = small_synthetic(2);
    let cfg = quick(Method::Ftm, 1.0);
    let (a, la) = train(&data, &cfg).unwrap();
    let (b, lb) = train(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(la.to_jsonl().unwrap(), lb.to_jsonl().unwrap());
    let (c, _) = train(&data, &TrainConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn log_records_one_line_per_epoch() {
    let data = small_synthetic(3);
    let (_, log) = train(&data, &quick(Method::Ftm, 1.0)).unwrap();
    let text = log.to_jsonl().unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(log.epochs.iter().all(|e| e.batch_mdp.is_some()));
    // Learning rate decays by the configured factor each epoch.
    assert!((log.epochs[1].lr - 0.001 * 0.95).abs() < 1e-15);
}

#[test]
fn invalid_configs_are_rejected() {
    let data = toy();
    for cfg in [
        TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            match_batch_size: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            lambda: -1.0,
            ..TrainConfig::default()
        },
    ] {
        assert!(matches!(train(&data, &cfg), Err(Error::InvalidArgument(_))));
    }
    let one_group = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0, 1], vec![0, 0], "g").unwrap();
    assert!(matches!(
        train(&one_group, &quick(Method::Ftm, 1.0)),
        Err(Error::Empty(_))
    ));
}

#[test]
fn method_parses_from_text() {
    assert_eq!("FTM".parse::<Method>().unwrap(), Method::Ftm);
    assert_eq!("reg".parse::<Method>().unwrap(), Method::Reg);
    assert!("adv".parse::<Method>().is_err());
    assert_eq!(Method::Unfair.to_string(), "unfair");
}

/// Objective of one full-batch FTM step with the matching fixed.
fn ftm_objective(model: &Mlp, data: &Dataset, perm: &[usize], lambda: f64) -> f64 {
    let ce: f64 = (0..data.len())
        .map(|i| cross_entropy(model.score(data.row(i), data.sensitive()[i]), data.labels()[i]).0)
        .sum::<f64>()
        / data.len() as f64;
    let g0 = data.group_indices(0);
    let g1 = data.group_indices(1);
    let gap: f64 = g0
        .iter()
        .zip(perm)
        .map(|(&i, &j)| (model.score(data.row(i), 0) - model.score(data.row(g1[j]), 1)).abs())
        .sum::<f64>()
        / g0.len() as f64;
    ce + lambda * gap
}

fn finite_difference(model: &Mlp, f: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let eps = 1e-6;
    (0..model.num_params())
        .map(|k| {
            let mut plus = model.clone();
            plus.params_mut()[k] += eps;
            let mut minus = model.clone();
            minus.params_mut()[k] -= eps;
            (f(&plus) - f(&minus)) / (2.0 * eps)
        })
        .collect()
}

#[test]
fn ftm_step_matches_finite_difference_adam_update() {
    let data = toy();
    let cfg = TrainConfig {
        lambda: 0.7,
        batch_size: 4,
        match_batch_size: 2,
        source_direction: SourceDirection::Group0,
        epochs: 1,
        seed: 11,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&data, &cfg).unwrap();
    let before = trainer.model.clone();

    let g0: Vec<&[f64]> = data.group_indices(0).iter().map(|&i| data.row(i)).collect();
    let g1: Vec<&[f64]> = data.group_indices(1).iter().map(|&i| data.row(i)).collect();
    let plan = solve_assignment(&build_cost_matrix(&g0, &g1, None, 0.0).unwrap()).unwrap();
    let perm = plan.assignment().unwrap().to_vec();
    let grad = finite_difference(&before, |m| ftm_objective(m, &data, &perm, cfg.lambda));

    trainer.ftm_epoch(0).unwrap();
    for (k, (&p0, &p1)) in before.params().iter().zip(trainer.model.params()).enumerate() {
        // First Adam step: m_hat = g and v_hat = g^2.
        let expected = p0 - cfg.lr * grad[k] / (grad[k].abs() + 1e-8);
        assert!((p1 - expected).abs() < 1e-6, "param {k}: {p1} vs {expected}");
    }
}

#[test]
fn reg_penalty_gradient_matches_finite_difference() {
    let data = small_synthetic(4);
    let cfg = TrainConfig {
        method: Method::Reg,
        lambda: 3.0,
        hidden: Some(vec![4, 3]),
        ..quick(Method::Reg, 3.0)
    };
    // Zero initial biases put dead-unit rows exactly on a ReLU kink, where
    // central differences and the 0 subgradient disagree; use random biases.
    let mut rng = seed::stream(1, "reg-test", 0);
    let mut model = Trainer::new(&data, &cfg).unwrap().model;
    for p in model.params_mut() {
        *p = rand::Rng::random_range(&mut rng, -1.0..1.0);
    }
    let trainer = Trainer::with_model(&data, &cfg, model).unwrap();
    let batch: Vec<usize> = (0..40).collect();
    let objective = |m: &Mlp| {
        let mut sum = [0.0; 2];
        let mut cnt = [0.0; 2];
        for &i in &batch {
            let s = data.sensitive()[i] as usize;
            sum[s] += m.score(data.row(i), s as u8);
            cnt[s] += 1.0;
        }
        let gap = sum[0] / cnt[0] - sum[1] / cnt[1];
        cfg.lambda * gap * gap
    };
    let fd = finite_difference(&trainer.model, objective);
    let scores: Vec<f64> = batch
        .iter()
        .map(|&i| trainer.model.score(data.row(i), data.sensitive()[i]))
        .collect();
    let mut grads = vec![0.0; trainer.model.num_params()];
    let value = trainer.reg_penalty(&batch, &scores, &mut grads).unwrap();
    assert!((cfg.lambda * value - objective(&trainer.model)).abs() < 1e-12);
    for (a, b) in grads.iter().zip(&fd) {
        assert!((a - b).abs() <= 1e-4 * b.abs().max(1e-3), "{a} vs {b}");
    }
}

#[test]
fn separable_data_is_learned() {
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let t = i as f64 / 199.0;
            vec![t, ((i * 37) % 200) as f64 / 199.0]
        })
        .collect();
    let labels = rows
        .iter()
        .map(|r| u8::from(r[0] + 0.3 * r[1] > 0.65))
        .collect::<Vec<_>>();
    let sensitive = (0..200).map(|i| (i % 2) as u8).collect();
    let data = Dataset::from_rows(&rows, labels, sensitive, "separable").unwrap();
    let cfg = TrainConfig {
        method: Method::Unfair,
        lambda: 0.0,
        batch_size: 8,
        hidden: Some(vec![8, 8]),
        lr: 0.01,
        seed: 3,
        ..TrainConfig::default()
    };
    let (_, log) = train(&data, &cfg).unwrap();
    assert!(log.last().unwrap().train_accuracy >= 0.99, "{:?}", log.last());
}

#[test]
fn joint_cost_pairs_more_equal_labels() {
    let data = small_synthetic(7);
    let base = TrainConfig {
        epochs: 1,
        ..quick(Method::Ftm, 1.0)
    };
    let (_, marginal) = train(&data, &base).unwrap();
    let (_, joint) = train(&data, &TrainConfig { alpha: 100.0, ..base }).unwrap();
    let a = marginal.epochs[0].match_label_agreement.unwrap();
    let b = joint.epochs[0].match_label_agreement.unwrap();
    assert!(b >= a, "{b} < {a}");
}

#[test]
fn sweep_is_sorted_and_independent_of_jobs() {
    let data = small_synthetic(8);
    let (train_data, test_data) = crate::data::split(&data, 0.8, 1).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        ..quick(Method::Ftm, 0.0)
    };
    let eval = EvalOptions::default();
    let one = sweep(&train_data, &test_data, &cfg, &[1.0, 0.0, 0.5], &eval, 1).unwrap();
    let two = sweep(&train_data, &test_data, &cfg, &[0.5, 1.0, 0.0], &eval, 2).unwrap();
    let lambdas: Vec<f64> = one.iter().map(|p| p.lambda).collect();
    assert_eq!(lambdas, vec![0.0, 0.5, 1.0]);
    for (a, b) in one.iter().zip(&two) {
        assert_eq!(a.report, b.report);
    }
    assert_eq!(sweep(&train_data, &test_data, &cfg, &[0.0], &eval, 1).unwrap().len(), 1);
}

#[test]
fn preset_batch_sizes() {
    assert_eq!(TrainConfig::batch_size_for("adult"), Some(1024));
    assert_eq!(TrainConfig::batch_size_for("german"), Some(200));
    assert_eq!(TrainConfig::batch_size_for("dutch"), Some(1024));
    assert_eq!(TrainConfig::batch_size_for("bank"), Some(512));
    let c = TrainConfig::for_preset("german");
    assert_eq!((c.batch_size, c.match_batch_size, c.epochs), (200, 200, 200));
}
