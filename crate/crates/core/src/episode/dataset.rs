use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::load_episode;
use super::types::{Episode, FrictionLayout, TactileFrame};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Dataset index: episode directories (relative to the dataset root) per split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub splits: BTreeMap<String, Vec<String>>,
    /// Raw no-contact sensor reading and its noise level.
    pub rest_value: f32,
    pub rest_noise_sigma: f32,
    pub seed: u64,
    #[serde(default)]
    pub layouts: BTreeMap<String, Vec<FrictionLayout>>,
}

impl Manifest {
    pub fn split(&self, name: &str) -> Result<&[String]> {
        self.splits
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::schema(MANIFEST_FILE, format!("splits.{name}"), "no such split"))
    }

    /// Raw frame the sensor reports with nothing touching it.
    pub fn rest_frame(&self) -> TactileFrame {
        TactileFrame::filled(self.rest_value)
    }
}

pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let path = root.join(MANIFEST_FILE);
    let tmp = root.join(format!(".{MANIFEST_FILE}.tmp"));
    fs::write(&tmp, serde_json::to_vec_pretty(manifest)?).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::schema(MANIFEST_FILE, MANIFEST_FILE, format!("cannot read: {e}")))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::schema(MANIFEST_FILE, "manifest", e.to_string()))
}

pub fn episode_dirs(root: &Path, manifest: &Manifest, split: &str) -> Result<Vec<PathBuf>> {
    Ok(manifest.split(split)?.iter().map(|d| root.join(d)).collect())
}

pub fn load_split(root: &Path, split: &str) -> Result<(Manifest, Vec<Episode>)> {
    let manifest = read_manifest(root)?;
    let episodes = episode_dirs(root, &manifest, split)?
        .iter()
        .map(|p| load_episode(p))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, episodes))
}
