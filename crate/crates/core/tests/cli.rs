use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spotslab::cli::{load_recipe, parse_recipe};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spotslab"));
    c.env_remove("SPOTSLAB_DATA_ROOT").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn desk_recipe() -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes/desk.json")).unwrap()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["generate", "edgecases", "train", "evaluate", "compare", "reproduce"] {
        assert!(text.contains(sub), "{sub} missing from usage");
    }
}

#[test]
fn unknown_subcommand_and_flag_exit_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let out = run(&["edgecases", "--out", "x", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("Usage"));
}

#[test]
fn downstream_failure_is_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ckpt");
    let out = run(&[
        "evaluate",
        "--ckpts",
        missing.to_str().unwrap(),
        "--data",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let last = stderr.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(last).unwrap();
    assert!(v["error"].is_string() && v["message"].as_str().unwrap().contains("nope.ckpt"), "{last}");
}

#[test]
fn desk_recipe_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes/desk.json");
    let r = load_recipe(&path).unwrap();
    assert_eq!(r.seeds.len(), 3);
    assert_eq!(r.context, 2);
    assert_eq!(r.train_horizon, 5);
    assert_eq!(r.eval.horizon, 15);
}

#[test]
fn minimal_recipe_parses() {
    let text = r#"{
        "name": "m",
        "dataset": {"train_layouts": ["center"], "test_layouts": ["edge_e"], "train_per_layout": 1, "test_per_layout": 1, "seed": 0},
        "models": ["SVG"],
        "seeds": [0],
        "train": {"epochs": 1, "batch_size": 2, "learning_rate": 0.001, "beta": 0.0001, "tactile_loss_weight": 1.0, "seed": 0}
    }"#;
    let r = parse_recipe(text, "minimal").unwrap();
    assert_eq!(r.eval.horizon, 15);
}

#[test]
fn unknown_recipe_key_is_named() {
    let mut v: serde_json::Value = serde_json::from_str(&desk_recipe()).unwrap();
    v["foo"] = serde_json::json!(1);
    let err = parse_recipe(&v.to_string(), "r").unwrap_err().to_string();
    assert!(err.contains("foo"), "{err}");

    let mut v: serde_json::Value = serde_json::from_str(&desk_recipe()).unwrap();
    v["train"]["foo"] = serde_json::json!(1);
    assert!(parse_recipe(&v.to_string(), "r").unwrap_err().to_string().contains("foo"));
}

#[test]
fn undefined_model_kind_is_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&desk_recipe()).unwrap();
    v["models"] = serde_json::json!(["SVG", "SPOTS_XL"]);
    let err = parse_recipe(&v.to_string(), "r").unwrap_err().to_string();
    assert!(err.contains("SPOTS_XL"), "{err}");
}

#[test]
fn recipe_train_seed_must_be_zero() {
    let mut v: serde_json::Value = serde_json::from_str(&desk_recipe()).unwrap();
    v["train"]["seed"] = serde_json::json!(4);
    assert!(parse_recipe(&v.to_string(), "r").is_err());
}

#[test]
fn generate_is_idempotent_and_reads_data_root_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let args = [
        "generate",
        "--train-layouts",
        "corner_tl,center",
        "--test-layouts",
        "edge_w",
        "--episodes-per-layout",
        "2",
        "--seed",
        "5",
    ];
    let out = bin().args(args).env("SPOTSLAB_DATA_ROOT", &a).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first = tree(&a);
    assert!(first.contains_key("manifest.json"));
    assert_eq!(first.keys().filter(|k| k.ends_with("tactile.csv")).count(), 6);
    let out = bin().args(args).env("SPOTSLAB_DATA_ROOT", &a).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(tree(&a), first);
}

#[test]
fn train_evaluate_compare_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).display().to_string();
    let data = p("data");
    let ok = |o: Output| assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    ok(run(&["generate", "--out", &data, "--train-layouts", "corner_tl,corner_br", "--test-layouts", "edge_e", "--episodes-per-layout", "2"]));
    fs::write(
        p("dims.json"),
        r#"{"nf": 4, "g_dim": 16, "m_dim": 8, "z_dim": 4, "hidden": 24, "actp_hidden": 12, "scene_hidden": null}"#,
    )
    .unwrap();
    for (kind, seed) in [("SVG", "0"), ("SVG", "1"), ("SPOTS", "0")] {
        ok(run(&[
            "train", "--model", kind, "--data", &data, "--epochs", "1", "--seed", seed, "--window-stride", "10",
            "--batch-size", "4", "--dims", &p("dims.json"), "--out", &p(&format!("{kind}_{seed}.ckpt")),
        ]));
    }
    assert!(Path::new(&p("SVG_0.ckpt.curves.csv")).exists());
    ok(run(&[
        "evaluate", "--ckpts", &format!("{},{}", p("SVG_0.ckpt"), p("SVG_1.ckpt")), "--data", &data, "--horizon", "15",
        "--window-stride", "8", "--out", &p("svg.json"),
    ]));
    ok(run(&["evaluate", "--ckpts", &p("SPOTS_0.ckpt"), "--data", &data, "--window-stride", "8", "--anaesthetise", "--out", &p("spots.json")]));
    ok(run(&["compare", "--reports", &format!("{},{}", p("svg.json"), p("spots.json")), "--out", &p("cmp")]));
    let table = fs::read_to_string(p("cmp/comparison.csv")).unwrap();
    assert!(table.starts_with("model,metric,timestep,mean,ci_low,ci_high"));
    assert!(table.contains("SPOTS,tactile_MAE,15,"));

    // A report with a different horizon is refused and named.
    ok(run(&["evaluate", "--ckpts", &p("SPOTS_0.ckpt"), "--data", &data, "--horizon", "5", "--label", "short", "--out", &p("short.json")]));
    let out = run(&["compare", "--reports", &format!("{},{}", p("svg.json"), p("short.json")), "--out", &p("cmp2")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("short"));
}

#[test]
fn edgecases_writes_four_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["edgecases", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let (manifest, eps) = spotslab::episode::load_split(dir.path(), "edge").unwrap();
    assert_eq!(eps.len(), 4);
    assert_eq!(manifest.split("edge").unwrap().len(), 4);
}
