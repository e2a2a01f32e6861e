//! End-to-end checks of the file-driven workflow: train, oracle, infer,
//! compare, plot, and the byte-level reproducibility contract.

use std::path::{Path, PathBuf};

use qpinn::cli::commands::{InferArgs, TrainOverrides};
use qpinn::cli::grid_io::read_grid_csv;
use qpinn::cli::{cmd_compare, cmd_infer, cmd_oracle, cmd_plot, cmd_train};

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn tiny_train_config(out_dir: &Path, seed: u64, epochs: usize) -> String {
    format!(
        r#"{{
  "problem": {{ "dim": 1, "kappa": "0.01/pi" }},
  "model": {{ "kind": "fnn-te-qpinn", "n_qubits": 2, "n_layers": 1, "fnn_hidden": [3] }},
  "collocation": {{ "nx": 5, "nt": 3 }},
  "training": {{ "optimizer": "lbfgs", "epochs": {epochs}, "seed": {seed}, "reduction": "mean" }},
  "output": {{ "dir": "{}", "eval_nx": 9, "eval_times": [0.5, 1.0] }}
}}"#,
        out_dir.display()
    )
}

#[test]
fn train_writes_a_self_describing_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "cfg.json", &tiny_train_config(&run_dir, 3, 4));
    let dir = cmd_train(&cfg, &TrainOverrides::default()).unwrap();
    assert_eq!(dir, run_dir);
    for file in [
        "resolved_config.json",
        "metrics.jsonl",
        "timings.jsonl",
        "checkpoint.bin",
        "summary.json",
    ] {
        assert!(dir.join(file).exists(), "{file} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["kind"], "fnn-te-qpinn");
    assert!(summary["final_loss"].as_f64().unwrap().is_finite());
    assert!(summary["l2_rel"].as_f64().unwrap() >= 0.0);
    assert!(summary["param_count"].as_u64().unwrap() > 0);
    assert_eq!(
        summary["config_sha256"].as_str().unwrap().len(),
        64,
        "sha256 hex digest"
    );
    // metrics: iteration 0 plus `epochs` records
    let metrics = std::fs::read_to_string(dir.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    // the resolved config re-resolves to the same experiment
    let echo = std::fs::read_to_string(dir.join("resolved_config.json")).unwrap();
    let parsed = qpinn::cli::ExperimentConfig::from_json(&echo).unwrap();
    assert!(parsed.resolve().is_ok());
}

#[test]
fn zero_epoch_training_checkpoints_the_seeded_init() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "cfg.json", &tiny_train_config(&run_dir, 9, 0));
    let dir = cmd_train(&cfg, &TrainOverrides::default()).unwrap();
    let metrics = std::fs::read_to_string(dir.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 1, "loss logged exactly once");
    let ck = qpinn::cli::checkpoint::read_checkpoint(&dir.join("checkpoint.bin")).unwrap();
    let (model, _) = qpinn::cli::checkpoint::restore_model(&ck).unwrap();
    assert_eq!(ck.params, model.init_values());
}

#[test]
fn identical_seeds_give_byte_identical_outputs_across_thread_counts() {
    // one config, one run directory; rerun under different pool sizes and
    // snapshot the artifacts in between
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "cfg.json", &tiny_train_config(&run_dir, 42, 3));
    let mut artifacts: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for threads in [1usize, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| cmd_train(&cfg, &TrainOverrides::default()))
            .unwrap();
        artifacts.push((
            std::fs::read(run_dir.join("metrics.jsonl")).unwrap(),
            std::fs::read(run_dir.join("checkpoint.bin")).unwrap(),
        ));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "metrics differ (1 vs 2 threads)");
    assert_eq!(artifacts[1].0, artifacts[2].0, "metrics differ (2 vs 4 threads)");
    assert_eq!(artifacts[0].1, artifacts[1].1, "checkpoints differ");
    assert_eq!(artifacts[1].1, artifacts[2].1, "checkpoints differ");
}

#[test]
fn seed_override_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let run_a = tmp.path().join("a");
    let run_b = tmp.path().join("b");
    let cfg = write_config(tmp.path(), "cfg.json", &tiny_train_config(&run_a, 1, 2));
    cmd_train(&cfg, &TrainOverrides::default()).unwrap();
    cmd_train(
        &cfg,
        &TrainOverrides {
            out_dir: Some(run_b.clone()),
            seed: Some(2),
            dump_graph: false,
        },
    )
    .unwrap();
    let a = std::fs::read(run_a.join("checkpoint.bin")).unwrap();
    let b = std::fs::read(run_b.join("checkpoint.bin")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn training_abort_leaves_partial_outputs_and_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    // an Adam step of ~1e300 overflows the first multiply
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "problem": {{ "dim": 1 }},
  "model": {{ "kind": "pinn", "mlp_hidden": [4] }},
  "collocation": {{ "nx": 4, "nt": 2 }},
  "training": {{ "optimizer": "adam", "epochs": 3, "seed": 1, "lr": 1e300 }},
  "output": {{ "dir": "{}" }}
}}"#,
            run_dir.display()
        ),
    );
    let err = cmd_train(&cfg, &TrainOverrides::default()).unwrap_err();
    assert_eq!(err.exit_code(), 3, "numerical abort maps to exit code 3");
    assert!(run_dir.join("metrics.jsonl").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["status"], "aborted");
    assert!(summary["error"].as_str().unwrap().contains("non-finite"));
}

#[test]
fn oracle_grids_have_the_documented_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg1 = write_config(
        tmp.path(),
        "c1.json",
        &format!(
            r#"{{
  "problem": {{ "dim": 1 }},
  "model": {{ "kind": "pinn" }},
  "output": {{ "dir": "{}" }}
}}"#,
            tmp.path().join("o1").display()
        ),
    );
    let dir = cmd_oracle(&cfg1, None).unwrap();
    let grid = read_grid_csv(&dir.join("oracle.csv")).unwrap();
    assert_eq!(grid.shape(), vec![201, 3], "201 spatial points, default times");
    assert_eq!(grid.values().len(), 603);

    let cfg2 = write_config(
        tmp.path(),
        "c2.json",
        &format!(
            r#"{{
  "problem": {{ "dim": 2 }},
  "model": {{ "kind": "pinn" }},
  "output": {{ "dir": "{}", "oracle_nx": 20 }}
}}"#,
            tmp.path().join("o2").display()
        ),
    );
    let dir2 = cmd_oracle(&cfg2, None).unwrap();
    let grid2 = read_grid_csv(&dir2.join("oracle.csv")).unwrap();
    assert_eq!(
        grid2.axes()[2],
        vec![0.0, 0.039, 0.058, 0.097],
        "four default snapshot times"
    );
    assert_eq!(grid2.shape(), vec![20, 20, 4]);
}

#[test]
fn oracle_of_zero_initial_field_is_identically_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(
            r#"{{
  "problem": {{ "dim": 1, "ic": {{ "kind": "zero" }} }},
  "model": {{ "kind": "pinn" }},
  "output": {{ "dir": "{}", "oracle_nx": 31, "reference": "rk45" }}
}}"#,
            tmp.path().join("oz").display()
        ),
    );
    let dir = cmd_oracle(&cfg, None).unwrap();
    let grid = read_grid_csv(&dir.join("oracle.csv")).unwrap();
    assert!(grid.values().iter().all(|&v| v == 0.0));
}

#[test]
fn inference_is_bounded_and_exact_against_its_own_prediction() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "cfg.json", &tiny_train_config(&run_dir, 5, 2));
    cmd_train(&cfg, &TrainOverrides::default()).unwrap();
    let checkpoint = run_dir.join("checkpoint.bin");

    let out1 = tmp.path().join("infer1");
    cmd_infer(&InferArgs {
        checkpoint: checkpoint.clone(),
        reference: None,
        out_dir: Some(out1.clone()),
        nx: Some(11),
        times: Some(vec![0.0, 0.5, 1.0]),
    })
    .unwrap();
    let prediction = read_grid_csv(&out1.join("prediction.csv")).unwrap();
    assert_eq!(prediction.shape(), vec![11, 3]);
    for &v in prediction.values() {
        assert!(v.abs() <= 1.0 + 1e-12, "quantum output bound violated: {v}");
    }

    // feeding the prediction back as the reference gives a zero error map
    let out2 = tmp.path().join("infer2");
    cmd_infer(&InferArgs {
        checkpoint,
        reference: Some(out1.join("prediction.csv")),
        out_dir: Some(out2.clone()),
        nx: None,
        times: None,
    })
    .unwrap();
    let err_grid = read_grid_csv(&out2.join("abs_error.csv")).unwrap();
    assert!(err_grid.values().iter().all(|&v| v == 0.0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("infer_summary.json")).unwrap())
            .unwrap();
    assert!(summary["l2_rel"].as_f64().unwrap() < 1e-12);
}

#[test]
fn compare_tabulates_and_flags_incomplete_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for (label, seed) in [("r1", 1u64), ("r2", 1), ("r3", 2)] {
        let run_dir = tmp.path().join(label);
        let cfg = write_config(
            tmp.path(),
            &format!("{label}.json"),
            &tiny_train_config(&run_dir, seed, 2),
        );
        cmd_train(&cfg, &TrainOverrides::default()).unwrap();
        dirs.push(run_dir);
    }
    let out_csv = tmp.path().join("cmp.csv");
    let table = cmd_compare(&dirs, Some(out_csv.clone())).unwrap();
    assert_eq!(table.lines().count(), 4, "header + 3 rows");
    // identical runs produce identical rows apart from the run path and timing
    let csv = std::fs::read_to_string(&out_csv).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let strip = |row: &Vec<&str>| {
        let mut r: Vec<String> = row.iter().map(|s| s.to_string()).collect();
        r.remove(6); // wall_time_s
        r.remove(0); // run path
        r
    };
    let r1 = rows.iter().find(|r| r[0].ends_with("r1")).unwrap();
    let r2 = rows.iter().find(|r| r[0].ends_with("r2")).unwrap();
    assert_eq!(strip(r1), strip(r2));

    // a run directory without a summary is listed as incomplete
    let empty = tmp.path().join("broken");
    std::fs::create_dir_all(&empty).unwrap();
    let mut with_broken = dirs.clone();
    with_broken.push(empty);
    let table2 = cmd_compare(&with_broken, Some(tmp.path().join("cmp2.csv"))).unwrap();
    assert!(table2.lines().any(|l| l.contains("incomplete")));

    // fewer than two complete runs is an error
    assert!(cmd_compare(&[tmp.path().join("broken")], Some(tmp.path().join("cmp3.csv"))).is_err());
}

#[test]
fn plot_renders_prediction_heatmaps() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "cfg.json", &tiny_train_config(&run_dir, 2, 1));
    cmd_train(&cfg, &TrainOverrides::default()).unwrap();
    let out = tmp.path().join("infer");
    cmd_infer(&InferArgs {
        checkpoint: run_dir.join("checkpoint.bin"),
        reference: None,
        out_dir: Some(out.clone()),
        nx: Some(7),
        times: Some(vec![0.0, 0.5, 1.0]),
    })
    .unwrap();
    let ppm = tmp.path().join("u.ppm");
    cmd_plot(&out.join("prediction.csv"), &ppm, None, None).unwrap();
    let bytes = std::fs::read(&ppm).unwrap();
    assert!(bytes.starts_with(b"P6\n7 3\n255\n"));
    assert_eq!(bytes.len(), b"P6\n7 3\n255\n".len() + 3 * 7 * 3);
}

#[test]
fn dump_graph_writes_dot_files() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "cfg.json", &tiny_train_config(&run_dir, 1, 1));
    cmd_train(
        &cfg,
        &TrainOverrides {
            out_dir: None,
            seed: None,
            dump_graph: true,
        },
    )
    .unwrap();
    let dot = std::fs::read_to_string(run_dir.join("u.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    assert!(run_dir.join("residual_pde.dot").exists());
}
