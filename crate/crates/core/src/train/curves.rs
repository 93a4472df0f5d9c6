use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::LossBreakdown;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_total: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    epoch: usize,
    scene_recon: f64,
    tactile_recon: f64,
    kl: f64,
    total: f64,
    val_total: Option<f64>,
}

/// CSV with columns `epoch, scene_recon, tactile_recon, kl, total, val_total`.
pub fn write_curves(path: &Path, curves: &[EpochRecord]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if curves.is_empty() {
        w.write_record(["epoch", "scene_recon", "tactile_recon", "kl", "total", "val_total"])?;
    }
    for r in curves {
        w.serialize(Row {
            epoch: r.epoch,
            scene_recon: r.loss.scene_recon,
            tactile_recon: r.loss.tactile_recon,
            kl: r.loss.kl,
            total: r.loss.total,
            val_total: r.val_total,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_curves(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(EpochRecord {
                epoch: row.epoch,
                loss: LossBreakdown {
                    scene_recon: row.scene_recon,
                    tactile_recon: row.tactile_recon,
                    kl: row.kl,
                    total: row.total,
                },
                val_total: row.val_total,
            })
        })
        .collect()
}
