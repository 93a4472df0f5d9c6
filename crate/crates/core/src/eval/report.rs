use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{mae_frame, psnr, ssim, tactile_mae};
use super::stats::{summarize, Summary};
use crate::episode::{SceneFrame, TactileFrame};
use crate::error::{Error, Result};
use crate::models::ModelKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "PSNR")]
    Psnr,
    #[serde(rename = "SSIM")]
    Ssim,
    #[serde(rename = "tactile_MAE")]
    TactileMae,
}

impl Metric {
    pub const SCENE: [Metric; 3] = [Metric::Mae, Metric::Psnr, Metric::Ssim];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mae => "MAE",
            Metric::Psnr => "PSNR",
            Metric::Ssim => "SSIM",
            Metric::TactileMae => "tactile_MAE",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Psnr | Metric::Ssim)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-step means of one checkpoint, averaged over every evaluated window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedScores {
    pub seed: u64,
    pub windows: usize,
    /// Indexed by prediction step, `values[k]` is step `k + 1`.
    pub values: BTreeMap<Metric, Vec<f64>>,
}

impl SeedScores {
    /// Mean over all steps.
    pub fn aggregate(&self, metric: Metric) -> Option<f64> {
        self.values.get(&metric).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: Metric,
    /// Steps ahead of the last context frame, from 1.
    pub step: usize,
    pub mean: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl MetricRow {
    fn new(metric: Metric, step: usize, s: Summary) -> Self {
        Self {
            metric,
            step,
            mean: s.mean,
            ci_low: s.ci_low(),
            ci_high: s.ci_high(),
        }
    }

    pub fn half_width(&self) -> Option<f64> {
        self.ci_high.map(|h| h - self.mean)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub model: String,
    pub kind: ModelKind,
    pub split: String,
    pub context: usize,
    pub horizon: usize,
    pub anaesthetised: bool,
    pub seeds: Vec<u64>,
    /// False with fewer than two seeds; interval fields are then empty.
    pub ci_available: bool,
    pub rows: Vec<MetricRow>,
    /// Mean over steps, interval over seeds.
    pub aggregates: Vec<MetricRow>,
    pub per_seed: Vec<SeedScores>,
}

pub struct ReportMeta {
    pub model: String,
    pub kind: ModelKind,
    pub split: String,
    pub context: usize,
    pub horizon: usize,
    pub anaesthetised: bool,
}

impl MetricReport {
    pub fn from_seeds(meta: ReportMeta, per_seed: Vec<SeedScores>) -> Result<Self> {
        let first = per_seed
            .first()
            .ok_or_else(|| Error::Contract("report needs at least one seed".into()))?;
        let metrics: Vec<Metric> = first.values.keys().copied().collect();
        for s in &per_seed {
            let same = s.values.keys().copied().eq(metrics.iter().copied())
                && s.values.values().all(|v| v.len() == meta.horizon);
            if !same {
                return Err(Error::Contract(format!(
                    "seed {} scores do not cover the same metrics over {} steps",
                    s.seed, meta.horizon
                )));
            }
        }
        let mut rows = Vec::new();
        let mut aggregates = Vec::new();
        for &m in &metrics {
            for k in 0..meta.horizon {
                let vals: Vec<f64> = per_seed.iter().map(|s| s.values[&m][k]).collect();
                rows.push(MetricRow::new(m, k + 1, summarize(&vals)));
            }
            let aggs: Vec<f64> = per_seed.iter().map(|s| s.aggregate(m).expect("metric present")).collect();
            aggregates.push(MetricRow::new(m, 0, summarize(&aggs)));
        }
        let report = Self {
            model: meta.model,
            kind: meta.kind,
            split: meta.split,
            context: meta.context,
            horizon: meta.horizon,
            anaesthetised: meta.anaesthetised,
            seeds: per_seed.iter().map(|s| s.seed).collect(),
            ci_available: per_seed.len() >= 2,
            rows,
            aggregates,
            per_seed,
        };
        report.validate()?;
        Ok(report)
    }

    pub fn metrics(&self) -> Vec<Metric> {
        self.aggregates.iter().map(|r| r.metric).collect()
    }

    /// Rows of `metric` in step order.
    pub fn series(&self, metric: Metric) -> Vec<MetricRow> {
        self.rows.iter().filter(|r| r.metric == metric).copied().collect()
    }

    pub fn row(&self, metric: Metric, step: usize) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.metric == metric && r.step == step)
    }

    pub fn aggregate(&self, metric: Metric) -> Option<&MetricRow> {
        self.aggregates.iter().find(|r| r.metric == metric)
    }

    /// Seed means of `metric` at `step`.
    pub fn seed_values(&self, metric: Metric, step: usize) -> Vec<f64> {
        self.per_seed
            .iter()
            .filter_map(|s| s.values.get(&metric).map(|v| v[step - 1]))
            .collect()
    }

    /// Same scores, ignoring labels and flags.
    pub fn same_scores(&self, other: &Self) -> bool {
        self.rows == other.rows && self.aggregates == other.aggregates && self.per_seed == other.per_seed
    }

    pub fn validate(&self) -> Result<()> {
        for m in self.metrics() {
            let steps: Vec<usize> = self.series(m).iter().map(|r| r.step).collect();
            if steps != (1..=self.horizon).collect::<Vec<_>>() {
                return Err(Error::Contract(format!("{m} rows are not contiguous over 1..={}", self.horizon)));
            }
        }
        for r in self.rows.iter().chain(&self.aggregates) {
            if r.ci_low.is_some() != self.ci_available {
                return Err(Error::Contract("interval presence disagrees with ci_available".into()));
            }
            if matches!(r.half_width(), Some(h) if h < 0.0 || h.is_nan()) {
                return Err(Error::Contract(format!("negative interval for {} step {}", r.metric, r.step)));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, serde_json::to_vec_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let report: Self = serde_json::from_slice(&bytes)?;
        report.validate()?;
        Ok(report)
    }
}

/// Running per-step sums for one checkpoint.
pub struct SeedAccumulator {
    horizon: usize,
    tactile: bool,
    windows: usize,
    sums: BTreeMap<Metric, Vec<f64>>,
}

impl SeedAccumulator {
    pub fn new(horizon: usize, tactile: bool) -> Self {
        let mut sums: BTreeMap<Metric, Vec<f64>> = Metric::SCENE.iter().map(|&m| (m, vec![0.0; horizon])).collect();
        if tactile {
            sums.insert(Metric::TactileMae, vec![0.0; horizon]);
        }
        Self {
            horizon,
            tactile,
            windows: 0,
            sums,
        }
    }

    /// Adds one window's predicted frames. `tactile` is `(predicted, truth)`
    /// and is required exactly when the accumulator tracks tactile error.
    pub fn add_window(
        &mut self,
        pred: &[SceneFrame],
        truth: &[SceneFrame],
        tactile: Option<(&[TactileFrame], &[TactileFrame])>,
    ) -> Result<()> {
        if pred.len() != self.horizon || truth.len() != self.horizon {
            return Err(Error::Contract(format!(
                "expected {} frames, got {} predicted and {} true",
                self.horizon,
                pred.len(),
                truth.len()
            )));
        }
        if tactile.is_some() != self.tactile {
            return Err(Error::Contract("tactile frames supplied inconsistently".into()));
        }
        for k in 0..self.horizon {
            let (p, g) = (&pred[k], &truth[k]);
            self.sums.get_mut(&Metric::Mae).expect("scene")[k] += mae_frame(p, g)?;
            self.sums.get_mut(&Metric::Psnr).expect("scene")[k] += psnr(p, g)?;
            self.sums.get_mut(&Metric::Ssim).expect("scene")[k] += ssim(p, g)?;
        }
        if let Some((tp, tg)) = tactile {
            if tp.len() != self.horizon || tg.len() != self.horizon {
                return Err(Error::Contract("tactile sequence length mismatch".into()));
            }
            let sums = self.sums.get_mut(&Metric::TactileMae).expect("tactile");
            for k in 0..self.horizon {
                sums[k] += tactile_mae(&tp[k], &tg[k]);
            }
        }
        self.windows += 1;
        Ok(())
    }

    pub fn finish(self, seed: u64) -> Result<SeedScores> {
        if self.windows == 0 {
            return Err(Error::Contract("no windows were evaluated".into()));
        }
        let n = self.windows as f64;
        Ok(SeedScores {
            seed,
            windows: self.windows,
            values: self
                .sums
                .into_iter()
                .map(|(m, v)| (m, v.into_iter().map(|s| s / n).collect()))
                .collect(),
        })
    }
}
