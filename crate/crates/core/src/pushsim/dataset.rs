use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::episode::{edge_case_suite, generate_random_episode};
use super::taxels::{REST_NOISE_SIGMA, REST_VALUE};
use crate::episode::{save_episode, write_manifest, Episode, FrictionLayout, Manifest};
use crate::error::{Error, Result};
use crate::seed::mix_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub train_layouts: Vec<FrictionLayout>,
    pub test_layouts: Vec<FrictionLayout>,
    pub train_per_layout: usize,
    pub test_per_layout: usize,
    pub seed: u64,
    /// Reject specs whose train and test layouts overlap.
    #[serde(default)]
    pub disjoint: bool,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.disjoint {
            let train: BTreeSet<_> = self.train_layouts.iter().collect();
            let shared: Vec<String> = self
                .test_layouts
                .iter()
                .filter(|l| train.contains(l))
                .map(|l| l.to_string())
                .collect();
            if !shared.is_empty() {
                return Err(Error::Config(format!(
                    "layouts assigned to both train and test: {}",
                    shared.join(",")
                )));
            }
        }
        Ok(())
    }
}

fn split_id(split: &str) -> u64 {
    match split {
        "train" => 1,
        "test" => 2,
        _ => 3,
    }
}

/// Generates every episode of one split in a fixed order.
pub fn generate_split(layouts: &[FrictionLayout], per_layout: usize, split: &str, seed: u64) -> Result<Vec<Episode>> {
    let mut out = Vec::with_capacity(layouts.len() * per_layout);
    let base = mix_seed(seed, split_id(split));
    for (li, &layout) in layouts.iter().enumerate() {
        for k in 0..per_layout {
            let ep_seed = mix_seed(base, (li * 1_000_000 + k) as u64);
            let (_, mut ep) = generate_random_episode(layout, ep_seed)?;
            ep.meta.split_tag = split.to_string();
            out.push(ep);
        }
    }
    Ok(out)
}

fn base_manifest(seed: u64) -> Manifest {
    Manifest {
        splits: BTreeMap::new(),
        rest_value: REST_VALUE,
        rest_noise_sigma: REST_NOISE_SIGMA,
        seed,
        layouts: BTreeMap::new(),
    }
}

fn write_split(root: &Path, split: &str, episodes: &[Episode], manifest: &mut Manifest) -> Result<()> {
    let mut dirs = Vec::with_capacity(episodes.len());
    let split_dir = root.join(split);
    std::fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
    for (i, ep) in episodes.iter().enumerate() {
        let rel = format!("{split}/{i:05}");
        save_episode(ep, &root.join(&rel))?;
        dirs.push(rel);
    }
    manifest.splits.insert(split.to_string(), dirs);
    Ok(())
}

/// Writes the train and test splits under `root` and returns the manifest.
pub fn generate_dataset(spec: &DatasetSpec, root: &Path) -> Result<Manifest> {
    spec.validate()?;
    log::info!(
        "generating {} train + {} test episodes into {}",
        spec.train_layouts.len() * spec.train_per_layout,
        spec.test_layouts.len() * spec.test_per_layout,
        root.display()
    );
    let mut manifest = base_manifest(spec.seed);
    let train = generate_split(&spec.train_layouts, spec.train_per_layout, "train", spec.seed)?;
    write_split(root, "train", &train, &mut manifest)?;
    let test = generate_split(&spec.test_layouts, spec.test_per_layout, "test", spec.seed)?;
    write_split(root, "test", &test, &mut manifest)?;
    manifest.layouts.insert("train".into(), spec.train_layouts.clone());
    manifest.layouts.insert("test".into(), spec.test_layouts.clone());
    write_manifest(root, &manifest)?;
    Ok(manifest)
}

/// Writes the four edge-case trials as split `edge`.
pub fn write_edge_cases(root: &Path) -> Result<Manifest> {
    let mut manifest = base_manifest(super::episode::EDGE_CASE_SEED);
    let suite = edge_case_suite()?;
    write_split(root, "edge", &suite, &mut manifest)?;
    manifest.layouts.insert("edge".into(), FrictionLayout::CORNERS.to_vec());
    write_manifest(root, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use FrictionLayout::*;

    #[test]
    fn overlapping_layouts_rejected_when_disjoint() {
        let spec = DatasetSpec {
            train_layouts: vec![Center, CornerTl],
            test_layouts: vec![CornerTl],
            train_per_layout: 1,
            test_per_layout: 1,
            seed: 0,
            disjoint: true,
        };
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains("corner_tl"), "{msg}");
    }

    #[test]
    fn split_counts() {
        let train = generate_split(&[Center, EdgeN, EdgeS, EdgeE], 3, "train", 5).unwrap();
        let test = generate_split(&[CornerTl, CornerTr, CornerBl, CornerBr], 2, "test", 5).unwrap();
        assert_eq!(train.len(), 12);
        assert_eq!(test.len(), 8);
        assert!(train.iter().all(|e| e.meta.split_tag == "train"));
        let seeds: BTreeSet<u64> = train.iter().chain(&test).map(|e| e.meta.seed).collect();
        assert_eq!(seeds.len(), 20);
    }
}
