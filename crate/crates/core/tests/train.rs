use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use sha2::{Digest, Sha256};

use spotslab::episode::{FrictionLayout, SequenceSample};
use spotslab::models::*;
use spotslab::pushsim::{generate_dataset, generate_episode, DatasetSpec, EpisodeConfig};
use spotslab::train::*;

fn dims() -> Dims {
    Dims {
        nf: 4,
        g_dim: 16,
        m_dim: 8,
        z_dim: 4,
        hidden: 24,
        actp_hidden: 12,
        scene_hidden: None,
    }
}

fn model_config(kind: ModelKind, beta: f64) -> ModelConfig {
    ModelConfig {
        dims: dims(),
        beta,
        ..ModelConfig::new(kind)
    }
}

fn train_config(beta: f64) -> TrainConfig {
    TrainConfig {
        epochs: 1,
        batch_size: 4,
        beta,
        window_stride: 6,
        val_fraction: 0.25,
        ..TrainConfig::default()
    }
}

fn data(cfg: &TrainConfig) -> TrainData {
    let eps: Vec<_> = [FrictionLayout::CornerTl, FrictionLayout::CornerBr, FrictionLayout::Center, FrictionLayout::EdgeN]
        .iter()
        .enumerate()
        .map(|(i, &l)| generate_episode(&EpisodeConfig::canonical(l), i as u64).unwrap())
        .collect();
    TrainData::from_episodes(&eps, 2, 6, cfg).unwrap()
}

fn batch(s: &[SequenceSample]) -> Batch {
    Batch::from_samples(s, DType::F32, &Device::Cpu).unwrap()
}

fn hash_tree(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let h = hex::encode(Sha256::digest(fs::read(&p).unwrap()));
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), h);
            }
        }
    }
    out
}

#[test]
fn overfits_a_single_sample() {
    let cfg = TrainConfig {
        beta: 0.0,
        batch_size: 1,
        ..train_config(0.0)
    };
    let d = data(&cfg);
    let one = batch(&d.train[3..4]);
    let model = build_model(&model_config(ModelKind::Svg, 0.0), 1).unwrap();
    let mut trainer = Trainer::new(model, cfg).unwrap();
    let curve: Vec<f64> = (0..500).map(|_| trainer.training_step(&one).unwrap().scene_recon).collect();
    let smooth: Vec<f64> = curve.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    let rises = smooth.windows(2).filter(|w| w[1] > w[0]).count();
    assert_eq!(rises, 0, "smoothed curve rose {rises} times; first {:.5} last {:.5}", smooth[0], smooth[smooth.len() - 1]);
    assert!(curve[499] < 0.1 * curve[0], "{} -> {}", curve[0], curve[499]);
}

#[test]
fn breakdown_identity_and_kind_specific_terms() {
    let beta = 0.37;
    let cfg = TrainConfig {
        tactile_loss_weight: 0.6,
        ..train_config(beta)
    };
    let d = data(&cfg);
    let b = batch(&d.train[..3]);
    for kind in ModelKind::ALL {
        let mc = ModelConfig {
            tactile_loss_weight: 0.6,
            ..model_config(kind, beta)
        };
        let mut trainer = Trainer::new(build_model(&mc, 2).unwrap(), cfg.clone()).unwrap();
        for _ in 0..3 {
            let l = trainer.training_step(&b).unwrap();
            assert_eq!(l.total, l.scene_recon + 0.6 * l.tactile_recon + beta * l.kl, "{kind}");
            assert!(l.kl >= 0.0 && l.is_finite());
            if kind.predicts_tactile() {
                assert!(l.tactile_recon > 0.0, "{kind}");
            } else {
                assert_eq!(l.tactile_recon, 0.0, "{kind}");
            }
        }
    }
}

#[test]
fn every_spots_subnetwork_receives_gradient() {
    let cfg = train_config(1e-2);
    let d = data(&cfg);
    let b = batch(&d.train[..3]);
    let model = build_model(&model_config(ModelKind::Spots, 1e-2), 3).unwrap();
    let (tensors, _) =
        compute_loss(&model, &b, RolloutMode::TrainPosterior, &mut NoiseStream::seeded(0), 1e-2, 1.0).unwrap();
    let grads = tensors.total.backward().unwrap();
    for group in PARAM_GROUPS {
        let mut total = 0.0f64;
        for (name, var) in model.store().params() {
            if name.starts_with(&format!("{group}.")) {
                if let Some(g) = grads.get(var.as_tensor()) {
                    total += g.abs().unwrap().sum_all().unwrap().to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap();
                }
            }
        }
        assert!(total > 0.0, "{group} received no gradient");
    }
}

#[test]
fn zero_epochs_saves_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("init.ckpt");
    let cfg = TrainConfig {
        epochs: 0,
        ..train_config(1e-4)
    };
    let d = data(&cfg);
    let model = build_model(&model_config(ModelKind::SvgTe, 1e-4), 4).unwrap();
    let before = model.store().params()["predictor.out.weight"].as_tensor().flatten_all().unwrap().to_vec1::<f32>().unwrap();
    let outcome = train(model, &d, &cfg, &out).unwrap();
    assert!(outcome.curves.is_empty());
    let (back, info) = load_checkpoint(&out).unwrap();
    assert_eq!(info.step, 0);
    let after = back.store().params()["predictor.out.weight"].as_tensor().flatten_all().unwrap().to_vec1::<f32>().unwrap();
    assert_eq!(before, after);
    assert!(read_curves(&curves_path(&out)).unwrap().is_empty());
}

#[test]
fn seeded_rerun_reproduces_epoch_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = train_config(1e-4);
    let d = data(&cfg);
    let run = |name: &str| {
        let model = build_model(&model_config(ModelKind::SpotsSmall, 1e-4), 5).unwrap();
        train(model, &d, &cfg, &dir.path().join(name)).unwrap().curves
    };
    let a = run("a.ckpt");
    let b = run("b.ckpt");
    assert_eq!(a.len(), 1);
    assert_eq!(a, b);
    assert_eq!(read_curves(&dir.path().join("a.ckpt.curves.csv")).unwrap(), a);
}

#[test]
fn non_finite_loss_aborts_with_diagnostics() {
    let cfg = train_config(1e-4);
    let d = data(&cfg);
    let model = build_model(&model_config(ModelKind::Svg, 1e-4), 6).unwrap();
    let var = model.store().params()["decoder.u3.bias"].clone();
    var.set(&Tensor::full(f32::NAN, var.dims(), &Device::Cpu).unwrap()).unwrap();
    let mut trainer = Trainer::new(model, cfg).unwrap();
    match trainer.training_step(&batch(&d.train[..2])) {
        Err(spotslab::Error::NonFiniteLoss { step, component }) => {
            assert_eq!(step, 0);
            assert_eq!(component, "scene_recon");
        }
        other => panic!("expected non-finite loss error, got {other:?}"),
    }
}

#[test]
fn mismatched_loss_weights_are_rejected() {
    let model = build_model(&model_config(ModelKind::Svg, 1e-4), 7).unwrap();
    assert!(matches!(Trainer::new(model, train_config(0.5)), Err(spotslab::Error::Config(_))));
}

#[test]
fn training_leaves_the_dataset_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let spec = DatasetSpec {
        train_layouts: vec![FrictionLayout::CornerTl, FrictionLayout::Center],
        test_layouts: vec![FrictionLayout::EdgeS],
        train_per_layout: 2,
        test_per_layout: 1,
        seed: 3,
        disjoint: true,
    };
    generate_dataset(&spec, &root).unwrap();
    let before = hash_tree(&root);
    let cfg = train_config(1e-4);
    let d = TrainData::from_split(&root, 2, 6, &cfg).unwrap();
    assert!(!d.val.is_empty() && !d.train.is_empty());
    let model = build_model(&model_config(ModelKind::Spots, 1e-4), 8).unwrap();
    train(model, &d, &cfg, &dir.path().join("m.ckpt")).unwrap();
    assert_eq!(hash_tree(&root), before);
}
