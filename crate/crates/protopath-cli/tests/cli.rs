//! End-to-end pipeline through the compiled binary: train, generate,
//! profile, evaluate, sweep, probe, report.

use std::path::Path;
use std::process::{Command, Output};

fn protopath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protopath"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = protopath(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn full_pipeline_on_toy_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let cache = dir.path().join("cache");
    let cache_s = cache.to_str().unwrap();

    // train twice with the same seed: identical checkpoints
    let stdout = ok(&[
        "train-toy", "--synthesize", "--per-class", "4", "--epochs", "2", "--seed", "7", "--out",
        out_s,
    ]);
    assert!(stdout.contains("holdout accuracy"));
    let model_base = out.join("toy-cnn");
    let model_s = model_base.to_str().unwrap();
    assert!(out.join("toy-cnn.ppwt").is_file());

    let out2 = dir.path().join("out2");
    ok(&[
        "train-toy", "--synthesize", "--per-class", "4", "--epochs", "2", "--seed", "7", "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read(out.join("toy-cnn.ppwt")).unwrap(),
        std::fs::read(out2.join("toy-cnn.ppwt")).unwrap(),
        "same seed must give an identical checkpoint"
    );

    // generate: bad class fails, good class writes the three artifacts
    let bad = protopath(&["generate", "--model", model_s, "--class", "99", "--out", out_s]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("out of range"));

    ok(&[
        "generate", "--model", model_s, "--class", "2", "--steps", "4", "--pv-steps", "2",
        "--seed", "5", "--out", out_s,
    ]);
    for ext in ["png", "ppaf", "json"] {
        assert!(out.join(format!("prototype_002.{ext}")).is_file());
    }

    // profiles for every class
    let data = out.join("toy-data");
    let data_s = data.to_str().unwrap();
    ok(&[
        "profile", "--model", model_s, "--data", data_s, "--out", out_s, "--cache-dir", cache_s,
    ]);
    assert!(out.join("profiles/class_000.ppaf").is_file());
    assert!(out.join("profiles/class_009.json").is_file());

    // evaluate: raw + full artifact sets
    let proto = out.join("prototype_002");
    let proto_s = proto.to_str().unwrap();
    let stdout = ok(&[
        "evaluate", "--model", model_s, "--data", data_s, "--prototype", proto_s, "--seed", "5",
        "--out", out_s, "--cache-dir", cache_s,
    ]);
    assert!(stdout.contains("Average spearman similarity"));
    assert!(stdout.contains("Prototype"));
    for name in [
        "spearman_prototype_raw.csv",
        "spearman_same_normalized.csv",
        "spearman_diff_smoothed.csv",
        "l1_prototype_raw.csv",
        "spearman_curves.png",
        "l1_curves.png",
        "evaluate_summary.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("evaluate_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 5);
    assert!(summary["model_weight_hash"].as_str().unwrap().len() == 64);
    assert!(summary["prototype_config_hash"].as_str().unwrap().len() == 64);

    // --raw emits only raw curves
    let rawdir = dir.path().join("raw");
    ok(&[
        "evaluate", "--model", model_s, "--data", data_s, "--prototype", proto_s, "--raw",
        "--out", rawdir.to_str().unwrap(),
    ]);
    assert!(rawdir.join("spearman_prototype_raw.csv").is_file());
    assert!(!rawdir.join("spearman_prototype_normalized.csv").exists());

    // reduced sweep: 27 rows + header
    ok(&[
        "sweep", "--model", model_s, "--class", "2", "--data", data_s, "--axes", "reduced",
        "--steps", "2", "--pv-steps", "1", "--out", out_s, "--cache-dir", cache_s,
    ]);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 28);

    // probe with manifests built from the synthesized dataset
    write_probe_manifest(&data, "circle", &out.join("set_a.json"));
    write_probe_manifest(&data, "square", &out.join("set_b.json"));
    let stdout = ok(&[
        "probe", "--model", model_s, "--manifest", out.join("set_a.json").to_str().unwrap(),
        "--against", out.join("set_b.json").to_str().unwrap(), "--target", "0", "--watch",
        "0,1", "--out", out_s,
    ]);
    assert!(stdout.contains("accuracy"));
    assert!(out.join("probe_circle-set.json").is_file());
    let md = std::fs::read_to_string(out.join("probe_contrast.md")).unwrap();
    assert!(md.starts_with("| image set | accuracy |"));

    // report re-renders from CSVs alone, deterministically
    ok(&["report", "--from", out_s, "--out", out_s]);
    let plot = out.join("report_spearman_curves.png");
    assert!(plot.is_file());
    let first = std::fs::read(&plot).unwrap();
    ok(&["report", "--from", out_s, "--out", out_s]);
    assert_eq!(first, std::fs::read(&plot).unwrap());
}

fn write_probe_manifest(data: &Path, class: &str, path: &Path) {
    let entries: Vec<serde_json::Value> = (0..4)
        .map(|i| {
            serde_json::json!({
                "path": data.join(format!("{class}/{i:04}.png")).to_str().unwrap(),
                "label": null,
            })
        })
        .collect();
    let manifest = serde_json::json!({
        "set_id": format!("{class}-set"),
        "class_id": null,
        "entries": entries,
        "source_note": "synthesized shapes",
    });
    std::fs::write(path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
}
