use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mstree"));
    c.env_remove("MSTREE_SEED");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    out
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Small scene through every preparation stage; returns the split cloud.
fn prepared(dir: &Path) -> PathBuf {
    ok(dir, &["synth", "-o", "scene.mst", "--extent", "40,40", "--trees", "8", "--buildings", "2", "--las-dir", "las"]);
    ok(dir, &["ingest", "--green", "las/green.las", "--nir", "las/nir.las", "-o", "raw.mst"]);
    ok(dir, &["denoise", "-i", "raw.mst", "-o", "d.mst"]);
    ok(dir, &["merge", "-i", "d.mst", "-o", "m.mst"]);
    ok(dir, &["ground", "-i", "m.mst", "-o", "g.mst"]);
    ok(dir, &["normalize-height", "-i", "g.mst", "-o", "h.mst", "--dtm-out", "dtm.asc"]);
    ok(dir, &["features", "-i", "h.mst", "-o", "f.mst"]);
    ok(dir, &["subsample", "-i", "f.mst", "-o", "s.mst"]);
    ok(dir, &["split", "-i", "s.mst", "-o", "sp.mst", "--tile-size", "10"]);
    dir.join("sp.mst")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_chain_writes_outputs_and_manifests() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    prepared(dir);
    ok(dir, &["train", "-i", "sp.mst", "-m", "model.bin", "--epochs", "20"]);
    ok(dir, &["predict", "-i", "sp.mst", "-m", "model.bin", "-o", "pred.txt", "--probabilities", "probs.csv"]);
    let table = ok(dir, &["evaluate", "-i", "sp.mst", "-p", "pred.txt", "-o", "report.json"]);
    assert!(table.contains("mIoU"));
    ok(dir, &["export", "-i", "sp.mst", "-p", "pred.txt", "-o", "out.las"]);
    for f in [
        "raw.mst", "d.mst", "m.mst", "g.mst", "h.mst", "f.mst", "s.mst", "sp.mst", "model.bin", "model.bin.norm.json",
        "model.bin.loss.csv", "pred.txt", "probs.csv", "report.json", "report.csv", "out.las", "dtm.asc",
    ] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    for f in ["raw.mst", "sp.mst", "model.bin", "pred.txt", "report.json", "out.las", "scene.mst"] {
        let m = json(&dir.join(format!("{f}.manifest.json")));
        assert_eq!(m["tool"], "mstree");
        assert!(m["config_sha256"].as_str().unwrap().len() == 64);
        assert!(m["outputs"][0]["sha256"].is_string());
        assert!(m["config"]["seed"].is_u64(), "manifest of {f} must pin the seed");
    }
    let report = json(&dir.join("report.json"));
    assert!(report["miou"].as_f64().unwrap() > 50.0);
    let loss = std::fs::read_to_string(dir.join("model.bin.loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 21);
}

#[test]
fn evaluate_without_predictions_is_prerequisite_error() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "-o", "s.mst", "--extent", "20,20", "--trees", "2", "--buildings", "1"]);
    let out = run(d.path(), &["evaluate", "-i", "s.mst", "-o", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("category=config kind=prerequisite"), "{err}");
    let out = run(d.path(), &["evaluate", "-i", "s.mst", "-p", "nope.txt", "-o", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_by_category() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    ok(dir, &["synth", "-o", "s.mst", "--extent", "20,20", "--trees", "2", "--buildings", "1"]);
    // unknown config key
    std::fs::write(dir.join("bad.toml"), "[sor]\nkk = 3\n").unwrap();
    assert_eq!(run(dir, &["--config", "bad.toml", "denoise", "-i", "s.mst", "-o", "x.mst"]).status.code(), Some(2));
    // the raw scene lacks h_norm
    let out = run(dir, &["train", "-i", "s.mst", "-m", "m.bin"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind=missing_column"));
    // unreadable input
    assert_eq!(run(dir, &["denoise", "-i", "missing.mst", "-o", "x.mst"]).status.code(), Some(3));
    // clap usage error
    assert_eq!(run(dir, &["denoise"]).status.code(), Some(2));
    assert_eq!(run(dir, &["--threads", "0", "features", "-i", "s.mst", "-o", "x.mst"]).status.code(), Some(2));
}

#[test]
fn divergent_training_is_numeric_error() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    prepared(dir);
    let out = run(dir, &["train", "-i", "sp.mst", "-m", "m.bin", "--epochs", "5", "--learning-rate", "1e300"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("category=numeric"));
}

#[test]
fn config_file_and_flag_precedence() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    ok(dir, &["synth", "-o", "s.mst", "--extent", "20,20", "--trees", "2", "--buildings", "1"]);
    std::fs::write(dir.join("c.toml"), "seed = 5\n[sor]\nk = 4\nn_sigma = 2.0\n").unwrap();
    ok(dir, &["--config", "c.toml", "denoise", "-i", "s.mst", "-o", "a.mst"]);
    let m = json(&dir.join("a.mst.manifest.json"));
    assert_eq!(m["config"]["sor"]["k"], 4);
    assert_eq!(m["seed"], 5);
    ok(dir, &["--config", "c.toml", "--seed", "9", "denoise", "-i", "s.mst", "-o", "b.mst", "--sor-k", "8"]);
    let m = json(&dir.join("b.mst.manifest.json"));
    assert_eq!(m["config"]["sor"]["k"], 8);
    assert_eq!(m["config"]["sor"]["n_sigma"], 2.0);
    assert_eq!(m["seed"], 9);
    let out = bin().current_dir(dir).env("MSTREE_SEED", "123").args(["features", "-i", "s.mst", "-o", "x.mst"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3)); // raw scene has no merged reflectance
    let out = bin().current_dir(dir).env("MSTREE_SEED", "123").args(["subsample", "-i", "s.mst", "-o", "x.mst"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(json(&dir.join("x.mst.manifest.json"))["seed"], 123);
}

#[test]
fn stages_are_deterministic_across_thread_counts() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    prepared(dir);
    for (threads, tag) in [("1", "a"), ("3", "b")] {
        std::fs::create_dir(dir.join(tag)).unwrap();
        let p = |f: &str| format!("{tag}/{f}");
        ok(dir, &["--threads", threads, "denoise", "-i", "raw.mst", "-o", &p("d.mst")]);
        ok(dir, &["--threads", threads, "ground", "-i", "m.mst", "-o", &p("g.mst")]);
        ok(dir, &["--threads", threads, "train", "-i", "sp.mst", "-m", &p("model.bin"), "--epochs", "5", "--batch-size", "1500"]);
        ok(dir, &["--threads", threads, "predict", "-i", "sp.mst", "-m", &p("model.bin"), "-o", &p("p.txt")]);
    }
    for f in ["d.mst", "g.mst", "model.bin", "model.bin.loss.csv", "model.bin.norm.json", "p.txt"] {
        let a = std::fs::read(dir.join("a").join(f)).unwrap();
        assert!(a == std::fs::read(dir.join("b").join(f)).unwrap(), "{f} differs between thread counts");
    }
    for f in ["d.mst", "g.mst"] {
        assert!(std::fs::read(dir.join(f)).unwrap() == std::fs::read(dir.join("a").join(f)).unwrap(), "{f} rerun differs");
    }
}

#[test]
fn ablate_matches_scripted_stages() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    prepared(dir);
    ok(dir, &["ablate", "-i", "sp.mst", "-o", "abl", "--configs", "xyz,xyz+pndvi", "--epochs", "8"]);
    let ab = json(&dir.join("abl/ablation.json"));
    assert_eq!(ab["reports"].as_array().unwrap().len(), 2);
    for (i, cfg) in ["xyz", "xyz+pndvi"].iter().enumerate() {
        let model = format!("{i}.bin");
        let pred = format!("{i}.txt");
        let rep = format!("{i}.json");
        ok(dir, &["train", "-i", "sp.mst", "-m", &model, "--epochs", "8", "--feature-config", cfg]);
        ok(dir, &["predict", "-i", "sp.mst", "-m", &model, "-o", &pred]);
        ok(dir, &["evaluate", "-i", "sp.mst", "-p", &pred, "-o", &rep]);
        let scripted = json(&dir.join(&rep));
        let ablated = &ab["reports"][i];
        assert_eq!(ablated["config"], *cfg);
        for key in ["counts", "iou_tree", "iou_nontree", "miou", "macc", "oa", "error_rate_above"] {
            assert_eq!(scripted[key], ablated[key], "{cfg}: {key}");
        }
    }
    assert!(dir.join("abl/ablation.csv").exists() && dir.join("abl/ablation.txt").exists());
}

#[test]
fn imported_ground_truth_scores_perfectly() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    prepared(dir);
    let cloud = mstree_core::io::read_columnar(dir.join("sp.mst")).unwrap();
    mstree_core::io::write_labels(&cloud.label, dir.join("truth.txt")).unwrap();
    ok(dir, &["import-pred", "-i", "sp.mst", "-l", "truth.txt", "-o", "imp.txt"]);
    ok(dir, &["evaluate", "-i", "sp.mst", "-p", "imp.txt", "-o", "r.json", "--split", "all"]);
    let r = json(&dir.join("r.json"));
    for k in ["miou", "oa", "macc", "iou_tree", "iou_nontree"] {
        assert_eq!(r[k], 100.0, "{k}");
    }
    std::fs::write(dir.join("short.txt"), "1\n").unwrap();
    assert_eq!(run(dir, &["import-pred", "-i", "sp.mst", "-l", "short.txt", "-o", "x.txt"]).status.code(), Some(3));
}
