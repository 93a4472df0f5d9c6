use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::recipe::RunRecipe;
use crate::episode::{load_split, read_manifest, Episode, Manifest, TactileFrame, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::eval::{
    central_normal_taxels, compare, edge_case_analysis, evaluate_models, load_models, tactile_eval, write_bundle,
    write_traces, EdgeOptions, EvalOptions, LoadedModel, Metric, MetricReport,
};
use crate::models::{build_model, ModelConfig, ModelKind};
use crate::pushsim::{edge_case_suite_with_trajectories, generate_dataset, write_edge_cases, DatasetSpec};
use crate::train::{train, TrainConfig, TrainData};

/// Paths of everything `reproduce` writes, relative to the output root.
#[derive(Clone, Debug)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn edge_data(&self) -> PathBuf {
        self.root.join("edge")
    }

    pub fn checkpoint(&self, kind: ModelKind, seed: u64) -> PathBuf {
        self.root.join("checkpoints").join(format!("{}_seed{seed}.ckpt", kind.name()))
    }

    /// `variant` is empty for plain reports, e.g. `anaesthetised` otherwise.
    pub fn report(&self, split: &str, kind: ModelKind, variant: &str) -> PathBuf {
        let name = if variant.is_empty() {
            format!("{}.json", kind.name())
        } else {
            format!("{}_{variant}.json", kind.name())
        };
        self.root.join("reports").join(split).join(name)
    }

    pub fn comparison(&self, name: &str) -> PathBuf {
        self.root.join("comparison").join(name)
    }

    pub fn edge_cases(&self) -> PathBuf {
        self.root.join("edge_cases")
    }

    pub fn tactile(&self) -> PathBuf {
        self.root.join("tactile")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.csv")
    }
}

fn sha256_json(value: &impl Serialize) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

fn key_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".key");
    PathBuf::from(s)
}

/// Generates the dataset unless `root` already holds one built from `spec`.
pub fn ensure_dataset(spec: &DatasetSpec, root: &Path) -> Result<Manifest> {
    let stamp = root.join("spec.sha256");
    let key = sha256_json(spec)?;
    if root.join(MANIFEST_FILE).exists() && fs::read_to_string(&stamp).ok().as_deref() == Some(key.as_str()) {
        log::info!("reusing dataset at {}", root.display());
        return read_manifest(root);
    }
    let manifest = generate_dataset(spec, root)?;
    fs::write(&stamp, key).map_err(|e| Error::io(&stamp, e))?;
    Ok(manifest)
}

#[derive(Serialize)]
struct RunKey<'a> {
    dataset: &'a DatasetSpec,
    model: &'a ModelConfig,
    train: &'a TrainConfig,
}

/// Trains one (kind, seed) run unless a checkpoint from identical inputs
/// exists. Returns the checkpoint path.
pub fn ensure_trained(
    recipe: &RunRecipe,
    layout: &RunLayout,
    data: &TrainData,
    kind: ModelKind,
    seed: u64,
) -> Result<PathBuf> {
    let config = recipe.model_config(kind)?;
    let tc = recipe.train_config(seed);
    let out = layout.checkpoint(kind, seed);
    let key = sha256_json(&RunKey {
        dataset: &recipe.dataset,
        model: &config,
        train: &tc,
    })?;
    let kp = key_path(&out);
    if out.exists() && fs::read_to_string(&kp).ok().as_deref() == Some(key.as_str()) {
        log::info!("reusing {}", out.display());
        return Ok(out);
    }
    log::info!("training {kind} seed {seed} -> {}", out.display());
    let model = build_model(&config, seed)?;
    train(model, data, &tc, &out)?;
    fs::write(&kp, key).map_err(|e| Error::io(&kp, e))?;
    Ok(out)
}

#[derive(Serialize)]
struct SummaryRow {
    model: String,
    quantity: String,
    value: f64,
}

/// Everything `reproduce` produced.
pub struct RunOutputs {
    pub layout: RunLayout,
    pub checkpoints: Vec<(ModelKind, Vec<PathBuf>)>,
    pub edge: Vec<MetricReport>,
    pub edge_anaesthetised: Vec<MetricReport>,
    pub test: Vec<MetricReport>,
}

fn evaluate_split(
    models: &[LoadedModel],
    episodes: &[Episode],
    rest: &TactileFrame,
    split: &str,
    recipe: &RunRecipe,
    anaesthetise: bool,
) -> Result<MetricReport> {
    let opts = EvalOptions {
        horizon: recipe.eval.horizon,
        anaesthetise,
        window_stride: recipe.eval.window_stride,
        batch_size: recipe.eval.batch_size,
        noise_seed: recipe.eval.noise_seed,
        label: None,
    };
    evaluate_models(models, episodes, rest, split, &opts)
}

/// Runs the whole experiment: data, training, evaluation, edge-case and
/// tactile analyses, and comparison tables and plots under `root`.
pub fn reproduce(recipe: &RunRecipe, root: &Path) -> Result<RunOutputs> {
    recipe.validate()?;
    let layout = RunLayout::new(root);
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    fs::write(root.join("recipe.json"), serde_json::to_vec_pretty(recipe)?).map_err(|e| Error::io(root, e))?;

    ensure_dataset(&recipe.dataset, &layout.data())?;
    write_edge_cases(&layout.edge_data())?;

    let last = recipe.context + recipe.train_horizon - 1;
    let (_, train_eps) = load_split(&layout.data(), "train")?;
    let mut checkpoints: Vec<(ModelKind, Vec<PathBuf>)> = recipe.models.iter().map(|&k| (k, Vec::new())).collect();
    for &seed in &recipe.seeds {
        let data = TrainData::from_episodes(&train_eps, recipe.context, last, &recipe.train_config(seed))?;
        for (kind, paths) in checkpoints.iter_mut() {
            paths.push(ensure_trained(recipe, &layout, &data, *kind, seed)?);
        }
    }

    let (edge_manifest, edge_eps) = load_split(&layout.edge_data(), "edge")?;
    let (test_manifest, test_eps) = load_split(&layout.data(), "test")?;
    let suite = edge_case_suite_with_trajectories()?;
    let mut outputs = RunOutputs {
        layout: layout.clone(),
        checkpoints: checkpoints.clone(),
        edge: Vec::new(),
        edge_anaesthetised: Vec::new(),
        test: Vec::new(),
    };
    let mut edge_models = Vec::new();
    let mut summary = Vec::new();
    for (kind, paths) in &checkpoints {
        log::info!("evaluating {kind}");
        let models = load_models(paths)?;
        let edge_rest = edge_manifest.rest_frame();
        let edge = evaluate_split(&models, &edge_eps, &edge_rest, "edge", recipe, false)?;
        let numb = evaluate_split(&models, &edge_eps, &edge_rest, "edge", recipe, true)?;
        let test = evaluate_split(&models, &test_eps, &test_manifest.rest_frame(), "test", recipe, false)?;
        edge.save(&layout.report("edge", *kind, ""))?;
        numb.save(&layout.report("edge", *kind, "anaesthetised"))?;
        test.save(&layout.report("test", *kind, ""))?;

        if kind.predicts_tactile() {
            let opts = EvalOptions {
                horizon: recipe.eval.horizon,
                window_stride: recipe.eval.window_stride,
                batch_size: recipe.eval.batch_size,
                noise_seed: recipe.eval.noise_seed,
                ..EvalOptions::default()
            };
            let tac = tactile_eval(
                &models,
                &edge_eps,
                &edge_rest,
                edge_manifest.rest_noise_sigma,
                "edge",
                &opts,
                &central_normal_taxels(),
            )?;
            write_traces(&tac.traces, &layout.tactile().join(format!("{}_traces.csv", kind.name())))?;
            for (k, v) in tac.rest_baseline.iter().enumerate() {
                summary.push(SummaryRow {
                    model: "rest_baseline".into(),
                    quantity: format!("tactile_MAE_t+{}", k + 1),
                    value: *v,
                });
            }
        }

        for (report, tag) in [(&edge, "edge"), (&numb, "edge_anaesthetised"), (&test, "test")] {
            for m in report.metrics() {
                for step in [recipe.eval.edge_step.min(report.horizon), report.horizon] {
                    if let Some(row) = report.row(m, step) {
                        summary.push(SummaryRow {
                            model: kind.name().into(),
                            quantity: format!("{tag}_{m}_t+{step}"),
                            value: row.mean,
                        });
                    }
                }
            }
        }
        outputs.edge.push(edge);
        outputs.edge_anaesthetised.push(numb);
        outputs.test.push(test);
        edge_models.push((kind.name().to_string(), models));
    }

    let bundle = edge_case_analysis(
        &edge_models,
        &suite,
        &edge_manifest.rest_frame(),
        &EdgeOptions {
            step: recipe.eval.edge_step,
            window_stride: recipe.eval.window_stride,
            batch_size: recipe.eval.batch_size,
            noise_seed: recipe.eval.noise_seed,
        },
    )?;
    write_bundle(&bundle, &layout.edge_cases())?;
    for model in bundle.models() {
        summary.push(SummaryRow {
            model: model.clone(),
            quantity: format!("edge_centroid_error_t+{}", bundle.step),
            value: bundle.mean_centroid_error(&model).expect("model present"),
        });
    }

    compare(&outputs.edge, &layout.comparison("edge"))?;
    compare(&outputs.edge_anaesthetised, &layout.comparison("edge_anaesthetised"))?;
    compare(&outputs.test, &layout.comparison("test"))?;

    let mut w = csv::Writer::from_path(layout.summary())?;
    for row in &summary {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(layout.summary(), e))?;
    log::info!("wrote {}", root.display());
    Ok(outputs)
}

/// Mean of `metric` at `step` for `kind` in `reports`.
pub fn report_value(reports: &[MetricReport], kind: ModelKind, metric: Metric, step: usize) -> Option<f64> {
    reports
        .iter()
        .find(|r| r.kind == kind)
        .and_then(|r| r.row(metric, step))
        .map(|r| r.mean)
}
