use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cellpeel(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellpeel")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

fn phantom(dir: &Path) {
    let o = cellpeel(&["phantom", "cylinder", "--r-out", "20.5", "--r-in", "10", "--height", "12", "--frames", "2", "--out-dir", "ph"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_flags_and_subcommands_fail_with_json() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["peel", "--bogus"][..], &["frobnicate"][..], &["mask"][..]] {
        let o = cellpeel(args, dir.path());
        assert!(!o.status.success());
        assert_eq!(stderr_json(&o)["error"]["module"], "pipeline-cli", "{args:?}");
    }
    let o = cellpeel(&["--help"], dir.path());
    assert!(o.status.success());
}

#[test]
fn module_errors_name_the_module() {
    let dir = tempfile::tempdir().unwrap();
    phantom(dir.path());
    let o = cellpeel(&["peel", "--mask", "missing.tif", "--raw", "ph/stack_000.tif", "--out", "p.tif"], dir.path());
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"]["module"], "volume-io");

    // a band deeper than the wall leaves nothing to split into two shells
    let o = cellpeel(&["peel", "--mask", "ph/mask.tif", "--raw", "ph/stack_000.tif", "--t", "30", "--out", "p.tif"], dir.path());
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error"]["module"], "shells");

    let o = cellpeel(&["peel", "--mask", "ph/mask.tif", "--raw", "ph/stack_000.tif", "--t", "1", "--tol", "2", "--out", "p.tif"], dir.path());
    assert_eq!(stderr_json(&o)["error"]["module"], "shells");
}

#[test]
fn config_values_apply_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    phantom(d);
    std::fs::write(d.join("c.toml"), "[shell]\nt = 3.0\ntol = 0.5\n[seg]\nh = 20.0\n").unwrap();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["--config", "c.toml", "peel", "--mask", "ph/mask.tif", "--raw", "ph/stack_000.tif", "--out", out];
        args.extend_from_slice(extra);
        let o = cellpeel(&args, d);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice::<Value>(&o.stdout).unwrap()
    };
    let from_cfg = run(&[], "a.tif");
    let explicit = cellpeel(&["peel", "--mask", "ph/mask.tif", "--raw", "ph/stack_000.tif", "--t", "3", "--out", "b.tif"], d);
    assert!(explicit.status.success());
    assert_eq!(std::fs::read(d.join("a.tif")).unwrap(), std::fs::read(d.join("b.tif")).unwrap());
    let flagged = run(&["--t", "4"], "c.tif");
    assert_ne!(from_cfg["width"], flagged["width"]);

    std::fs::write(d.join("bad.toml"), "[shell]\ndepth = 3\n").unwrap();
    let o = cellpeel(&["--config", "bad.toml", "peel", "--mask", "m", "--raw", "r", "--out", "o"], d);
    assert_eq!(stderr_json(&o)["error"]["module"], "pipeline-cli");
}

#[test]
fn headless_segmentation_reuses_saved_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    phantom(d);
    let ok = |args: &[&str]| {
        let o = cellpeel(args, d);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice::<Value>(&o.stdout).unwrap()
    };
    ok(&["mask", "--input", "ph/stack_000.tif", "--annotations", "ph/annotations.json", "--out", "m.tif"]);
    ok(&["peel", "--mask", "m.tif", "--raw", "ph/stack_000.tif", "--t", "3", "--out", "p.tif", "--separate"]);
    assert!(d.join("p_intensity.tif").exists());
    let a = ok(&["segment2d", "--image", "p.tif", "--h", "20", "--out", "l1.tif", "--seeds-out", "s.json"]);
    let b = ok(&["segment2d", "--image", "p.tif", "--h", "99", "--seeds", "s.json", "--out", "l2.tif"]);
    assert_eq!(a["label_count"], b["label_count"]);
    assert_eq!(std::fs::read(d.join("l1.tif")).unwrap(), std::fs::read(d.join("l2.tif")).unwrap());

    std::fs::write(d.join("f.json"), r#"{"points": [[0, 10], [11, 20]]}"#).unwrap();
    ok(&["rectify", "--peel", "p.tif", "--furrow", "f.json", "--out", "r.tif"]);
    assert!(d.join("r.peel.json").exists());
}

#[test]
fn tracking_and_quantification_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cellpeel(&["phantom", "cells", "--dims", "40,20,20", "--frames", "4", "--out-dir", "cells"], d);
    assert!(o.status.success());
    let truth: Value = serde_json::from_slice(&o.stdout).unwrap();
    let o = cellpeel(&["track3d", "--labels", "cells/labels_%03d.tif", "--frames", "4", "--out", "t.csv"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["kept"], truth["interior_labels"].as_array().unwrap().len());

    let o = cellpeel(&["quantify", "--labels", "cells/labels_%03d.tif", "--frames", "4", "--tracks", "t.csv", "--features", "volume", "--out", "f.csv"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("f.csv")).unwrap();
    assert!(csv.starts_with("track_id,frame,feature,value,unit\n"));
    // 4^3 voxels at the default 1 µm spacing
    assert!(csv.lines().skip(1).all(|l| l.contains(",volume,64.0,")), "{csv}");

    let o = cellpeel(&["quantify", "--labels", "cells/labels_%03d.tif", "--frames", "4", "--tracks", "t.csv", "--features", "volume,area", "--out", "g.csv"], d);
    assert!(!o.status.success());
    let o = cellpeel(&["quantify", "--labels", "cells/labels_%03d.tif", "--frames", "4", "--tracks", "t.csv", "--features", "mass", "--out", "g.csv"], d);
    assert_eq!(stderr_json(&o)["error"]["module"], "quantify");
}

#[test]
fn list_flags_check_their_length() {
    let dir = tempfile::tempdir().unwrap();
    let o = cellpeel(&["--spacing", "0.19,0.5", "phantom", "sphere", "--r", "3", "--out-dir", "s"], dir.path());
    assert!(!o.status.success());
    assert!(stderr_json(&o)["error"]["message"].as_str().unwrap().contains("3 values"));
    let o = cellpeel(&["phantom", "cells", "--dims", "10,10", "--out-dir", "c"], dir.path());
    assert!(!o.status.success());
    let o = cellpeel(&["--spacing", "0.19,0.19,0.5", "phantom", "sphere", "--r", "3", "--out-dir", "s"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
