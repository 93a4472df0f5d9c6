//! On-disk episode layout:
//!
//! ```text
//! <episode>/
//!   meta.json        sample_rate_hz, friction_layout, seed, split_tag, length
//!   scene/00000.png  8-bit RGB, one file per frame
//!   tactile.csv      length rows × 48 columns (row, column, channel order)
//!   robot.csv        length rows × 7 columns
//! ```
//!
//! Writes go to a sibling temporary directory that is renamed into place, so
//! a reader never observes a partial episode.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb};

use super::types::{
    Episode, EpisodeMeta, RobotState, SceneFrame, TactileFrame, ROBOT_DIM, TACTILE_DIM,
};
use crate::error::{Error, Result};

const META_FILE: &str = "meta.json";
const SCENE_DIR: &str = "scene";
const TACTILE_FILE: &str = "tactile.csv";
const ROBOT_FILE: &str = "robot.csv";

pub fn save_episode(episode: &Episode, path: &Path) -> Result<()> {
    episode.validate()?;
    let tmp = temp_sibling(path)?;
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    let result = write_into(episode, &tmp).and_then(|_| {
        if path.exists() {
            fs::remove_dir_all(path).map_err(|e| Error::io(path, e))?;
        }
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    });
    if result.is_err() && tmp.exists() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

fn temp_sibling(path: &Path) -> Result<PathBuf> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("episode path {} has no final component", path.display())))?
        .to_string_lossy()
        .into_owned();
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(parent.join(format!(".{name}.tmp-{}", std::process::id())))
}

fn write_into(episode: &Episode, dir: &Path) -> Result<()> {
    let scene_dir = dir.join(SCENE_DIR);
    fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;

    let meta_path = dir.join(META_FILE);
    let meta = serde_json::to_vec_pretty(&episode.meta)?;
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

    for (i, frame) in episode.scene.iter().enumerate() {
        let file = scene_dir.join(format!("{i:05}.png"));
        frame_to_image(frame).save(&file)?;
    }

    write_table(
        &dir.join(TACTILE_FILE),
        episode.tactile.iter().map(|f| f.taxels.as_slice()),
    )?;
    write_table(
        &dir.join(ROBOT_FILE),
        episode.robot.iter().map(|r| r.pose.as_slice()),
    )?;
    Ok(())
}

fn frame_to_image(frame: &SceneFrame) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
    let raw: Vec<u8> = frame
        .pixels()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    ImageBuffer::from_raw(frame.width() as u32, frame.height() as u32, raw)
        .expect("frame buffer matches its own dimensions")
}

/// Writes one frame as an 8-bit PNG.
pub fn save_frame_png(frame: &SceneFrame, path: &Path) -> Result<()> {
    Ok(frame_to_image(frame).save(path)?)
}

fn write_table<'a>(path: &Path, rows: impl Iterator<Item = &'a [f32]>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for row in rows {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_episode(path: &Path) -> Result<Episode> {
    let meta_path = path.join(META_FILE);
    let meta_bytes = fs::read(&meta_path)
        .map_err(|e| Error::schema(META_FILE, META_FILE, format!("cannot read: {e}")))?;
    let meta: EpisodeMeta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| Error::schema(META_FILE, "meta", e.to_string()))?;

    let tactile_rows = read_table(&path.join(TACTILE_FILE), TACTILE_FILE, TACTILE_DIM)?;
    let robot_rows = read_table(&path.join(ROBOT_FILE), ROBOT_FILE, ROBOT_DIM)?;

    let n = meta.length;
    if tactile_rows.len() != n {
        return Err(Error::LengthMismatch {
            field: "tactile".into(),
            expected: n,
            found: tactile_rows.len(),
        });
    }
    if robot_rows.len() != n {
        return Err(Error::LengthMismatch {
            field: "robot".into(),
            expected: n,
            found: robot_rows.len(),
        });
    }

    let scene_dir = path.join(SCENE_DIR);
    let mut scene = Vec::with_capacity(n);
    for i in 0..n {
        let file = scene_dir.join(format!("{i:05}.png"));
        if !file.exists() {
            return Err(Error::LengthMismatch {
                field: "scene".into(),
                expected: n,
                found: i,
            });
        }
        let img = image::open(&file)
            .map_err(|e| Error::schema(format!("scene/{i:05}.png"), "scene", e.to_string()))?
            .to_rgb8();
        let pixels = img.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
        scene.push(SceneFrame::new(img.height() as usize, img.width() as usize, pixels)?);
    }
    if scene_dir.join(format!("{n:05}.png")).exists() {
        return Err(Error::LengthMismatch {
            field: "scene".into(),
            expected: n,
            found: n + 1,
        });
    }

    let tactile = tactile_rows
        .iter()
        .map(|r| TactileFrame::from_slice(r))
        .collect::<Result<Vec<_>>>()?;
    let robot = robot_rows
        .iter()
        .map(|r| {
            let pose: [f32; ROBOT_DIM] = r.as_slice().try_into().expect("width checked on read");
            RobotState::new(pose)
        })
        .collect();
    Episode::new(scene, tactile, robot, meta)
}

fn read_table(path: &Path, name: &str, width: usize) -> Result<Vec<Vec<f32>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::schema(name, name, format!("cannot read: {e}")))?;
    let field = name.trim_end_matches(".csv");
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::schema(name, format!("{field}[{r}]"), e.to_string()))?;
        if record.len() != width {
            return Err(Error::schema(
                name,
                format!("{field}[{r}]"),
                format!("expected {width} columns, found {}", record.len()),
            ));
        }
        let mut row = Vec::with_capacity(width);
        for (c, cell) in record.iter().enumerate() {
            let v: f32 = cell.trim().parse().map_err(|_| {
                Error::schema(name, format!("{field}[{r}][{c}]"), format!("not a number: `{cell}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::schema(name, format!("{field}[{r}][{c}]"), "non-finite value"));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::types::{FrictionLayout, SAMPLE_RATE_HZ};

    fn toy_episode(len: usize) -> Episode {
        let scene = (0..len)
            .map(|i| SceneFrame::filled(8, 8, [i as f32 / 255.0, 128.0 / 255.0, 1.0]))
            .collect();
        let tactile = (0..len)
            .map(|i| {
                let mut t = [0.0f32; TACTILE_DIM];
                for (k, v) in t.iter_mut().enumerate() {
                    *v = (i * 48 + k) as f32 * 0.013_7 - 0.3;
                }
                TactileFrame::new(t)
            })
            .collect();
        let robot = (0..len)
            .map(|i| RobotState::new([i as f32 * 0.1, 0.25, 0.1, 0.0, 0.0, 0.0, 1.0]))
            .collect();
        let meta = EpisodeMeta {
            sample_rate_hz: SAMPLE_RATE_HZ,
            friction_layout: FrictionLayout::CornerTl,
            seed: 7,
            split_tag: "train".into(),
            length: len,
            no_contact: false,
        };
        Episode::new(scene, tactile, robot, meta).unwrap()
    }

    #[test]
    fn save_writes_one_file_per_frame() {
        let dir = tempfile::tempdir().unwrap();
        let ep_dir = dir.path().join("ep");
        save_episode(&toy_episode(40), &ep_dir).unwrap();
        let pngs = fs::read_dir(ep_dir.join("scene")).unwrap().count();
        assert_eq!(pngs, 40);
        let tactile = fs::read_to_string(ep_dir.join("tactile.csv")).unwrap();
        assert_eq!(tactile.lines().count(), 40);
        assert!(tactile.lines().all(|l| l.split(',').count() == 48));
        let robot = fs::read_to_string(ep_dir.join("robot.csv")).unwrap();
        assert_eq!(robot.lines().count(), 40);
        assert!(ep_dir.join("meta.json").exists());
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ep = toy_episode(12);
        save_episode(&ep, &dir.path().join("ep")).unwrap();
        let back = load_episode(&dir.path().join("ep")).unwrap();
        assert_eq!(back, ep);
    }

    #[test]
    fn short_tactile_table_is_a_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let ep_dir = dir.path().join("ep");
        save_episode(&toy_episode(40), &ep_dir).unwrap();
        let text = fs::read_to_string(ep_dir.join("tactile.csv")).unwrap();
        let truncated: Vec<&str> = text.lines().take(39).collect();
        fs::write(ep_dir.join("tactile.csv"), truncated.join("\n") + "\n").unwrap();
        match load_episode(&ep_dir) {
            Err(Error::LengthMismatch { field, expected, found }) => {
                assert_eq!(field, "tactile");
                assert_eq!((expected, found), (40, 39));
            }
            other => panic!("expected length mismatch, got {other:?}"),
        }
    }

    #[test]
    fn nan_in_robot_table_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ep_dir = dir.path().join("ep");
        save_episode(&toy_episode(5), &ep_dir).unwrap();
        let text = fs::read_to_string(ep_dir.join("robot.csv")).unwrap();
        let broken = text.replacen("0.25", "NaN", 1);
        fs::write(ep_dir.join("robot.csv"), broken).unwrap();
        let err = load_episode(&ep_dir).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("robot"), "{msg}");
        assert!(msg.contains("non-finite"), "{msg}");
    }

    #[test]
    fn missing_file_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let ep_dir = dir.path().join("ep");
        save_episode(&toy_episode(3), &ep_dir).unwrap();
        fs::remove_file(ep_dir.join("robot.csv")).unwrap();
        let msg = load_episode(&ep_dir).unwrap_err().to_string();
        assert!(msg.contains("robot.csv"), "{msg}");
    }

    #[cfg(unix)]
    #[test]
    fn read_only_destination_fails_without_leaving_files() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let locked = dir.path().join("locked");
        fs::create_dir(&locked).unwrap();
        fs::set_permissions(&locked, fs::Permissions::from_mode(0o555)).unwrap();
        // root ignores permission bits; nothing meaningful to check there
        if fs::write(locked.join("probe"), b"x").is_ok() {
            return;
        }
        let result = save_episode(&toy_episode(3), &locked.join("ep"));
        assert!(result.is_err());
        assert_eq!(fs::read_dir(&locked).unwrap().count(), 0);
        fs::set_permissions(&locked, fs::Permissions::from_mode(0o755)).unwrap();
    }

    #[test]
    fn unwritable_parent_fails_without_leaving_files() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("not_a_dir");
        fs::write(&blocker, b"x").unwrap();
        assert!(save_episode(&toy_episode(3), &blocker.join("ep")).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn resave_overwrites_in_place() {
        let dir = tempfile::tempdir().unwrap();
        let ep_dir = dir.path().join("ep");
        save_episode(&toy_episode(6), &ep_dir).unwrap();
        save_episode(&toy_episode(4), &ep_dir).unwrap();
        assert_eq!(load_episode(&ep_dir).unwrap().len(), 4);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
