//! The five file-driven entry points: train, oracle, infer, compare, plot.
//!
//! Every run directory is self-describing: it holds the fully-resolved
//! config, a SHA-256 of that config, the per-iteration metrics stream, and
//! the checkpoint. Re-running the resolved config with the same seed
//! reproduces metrics.jsonl and checkpoint.bin byte for byte.

use std::cell::RefCell;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::oracle::{rk45_solve, Rk45Config};
use crate::pde::{linspace, sample_collocation, SolutionGrid};
use crate::train::{
    adam_minimize, build_model, evaluate, lbfgs_minimize, AdamOptions, CollocationObjective,
    IterationRecord, LbfgsOptions, LossPrep, TrainError, TrainState,
};

use super::checkpoint::{read_checkpoint, restore_model, write_checkpoint};
use super::config::{ExperimentConfig, OptimizerKind, ReferenceKind, Resolved};
use super::grid_io::{read_grid_csv, write_grid_csv};
use super::ppm::plot_grid;
use super::CliError;

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct TrainOverrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dump_graph: bool,
}

#[derive(serde::Serialize, serde::Deserialize, Clone, Debug)]
pub struct RunSummary {
    pub status: String,
    pub kind: String,
    pub final_loss: f64,
    pub loss_pde: f64,
    pub loss_bc: f64,
    pub loss_ic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linf_rel: Option<f64>,
    pub param_count: usize,
    pub wall_time_s: f64,
    pub epochs_run: usize,
    pub stop_reason: String,
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_records(path: &Path, records: &[IterationRecord]) -> Result<(), CliError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_resolved(dir: &Path, resolved: &Resolved) -> Result<String, CliError> {
    let echo = resolved.echo();
    let mut bytes = serde_json::to_vec_pretty(&echo)?;
    bytes.push(b'\n');
    std::fs::write(dir.join("resolved_config.json"), &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Reference field on the evaluation axes, from the closed form or RK45.
fn reference_grid(resolved: &Resolved) -> Result<SolutionGrid, CliError> {
    let problem = &resolved.problem;
    let mut axes: Vec<Vec<f64>> = problem
        .space_bounds
        .iter()
        .map(|&(lo, hi)| linspace(lo, hi, resolved.eval_nx))
        .collect();
    axes.push(resolved.eval_times.clone());
    match resolved.reference {
        ReferenceKind::Analytic => {
            let template = SolutionGrid::new(
                axes.clone(),
                vec![0.0; axes.iter().map(|a| a.len()).product()],
            )
            .map_err(|e| CliError::Grid(e.to_string()))?;
            let values: Result<Vec<f64>, _> = template
                .points()
                .map(|p| crate::oracle::analytic_solution(problem, &p))
                .collect();
            Ok(SolutionGrid::new(axes, values?).map_err(|e| CliError::Grid(e.to_string()))?)
        }
        ReferenceKind::Rk45 => {
            let sol = rk45_solve(
                problem,
                resolved.eval_nx,
                &resolved.eval_times,
                &Rk45Config::default(),
            )?;
            Ok(sol.grid)
        }
    }
}

/// Trains per the config and writes the run directory; returns its path.
pub fn cmd_train(config_path: &Path, overrides: &TrainOverrides) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(config_path)?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = overrides.seed {
        config.training.seed = Some(seed);
    }
    let resolved = config.resolve()?;
    let run_dir = overrides
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&resolved.out_dir));
    std::fs::create_dir_all(&run_dir)?;
    let config_sha256 = write_resolved(&run_dir, &resolved)?;

    let started = Instant::now();
    let mut model = build_model(&resolved.problem, &resolved.model, resolved.seed)?;
    let collocation = sample_collocation(&resolved.problem, resolved.nx, resolved.nt)?;
    let prep = LossPrep::build(&mut model, &collocation, resolved.weights, resolved.reduction)?;

    if overrides.dump_graph {
        std::fs::write(run_dir.join("u.dot"), model.graph.to_dot(&[model.output]))?;
        let roots = prep.residual_roots();
        std::fs::write(run_dir.join("residual_pde.dot"), model.graph.to_dot(&[roots[0]]))?;
    }

    let objective = CollocationObjective {
        graph: &model.graph,
        prep: &prep,
    };
    let records: RefCell<Vec<IterationRecord>> = RefCell::new(Vec::new());
    let on_iter = |rec: &IterationRecord| {
        records.borrow_mut().push(*rec);
    };
    let init = model.init_values();
    let outcome: Result<TrainState, TrainError> = match resolved.optimizer {
        OptimizerKind::Lbfgs => {
            let opts = LbfgsOptions {
                max_iters: resolved.epochs,
                tolerance: resolved.tolerance,
                ..Default::default()
            };
            lbfgs_minimize(&objective, &init, &opts, on_iter)
        }
        OptimizerKind::Adam => {
            let opts = AdamOptions {
                max_iters: resolved.epochs,
                lr: resolved.lr,
                tolerance: resolved.tolerance,
                ..Default::default()
            };
            adam_minimize(&objective, &init, &opts, on_iter)
        }
    };
    let wall_time_s = started.elapsed().as_secs_f64();

    let state = match outcome {
        Ok(state) => state,
        Err(err) => {
            // partial outputs plus an error record
            let partial = records.into_inner();
            write_records(&run_dir.join("metrics.jsonl"), &partial)?;
            let last = partial.last();
            let summary = RunSummary {
                status: "aborted".into(),
                kind: model.kind.as_str().into(),
                final_loss: last.map(|r| r.loss_total).unwrap_or(f64::MAX),
                loss_pde: last.map(|r| r.loss_pde).unwrap_or(f64::MAX),
                loss_bc: last.map(|r| r.loss_bc).unwrap_or(f64::MAX),
                loss_ic: last.map(|r| r.loss_ic).unwrap_or(f64::MAX),
                l2_rel: None,
                linf_rel: None,
                param_count: model.param_count(),
                wall_time_s,
                epochs_run: partial.len().saturating_sub(1),
                stop_reason: "aborted".into(),
                config_sha256,
                error: Some(err.to_string()),
            };
            write_json(&run_dir.join("summary.json"), &summary)?;
            return Err(err.into());
        }
    };

    write_records(&run_dir.join("metrics.jsonl"), &state.records)?;
    let timings: Vec<serde_json::Value> = state
        .records
        .iter()
        .zip(&state.wall_ms)
        .map(|(r, ms)| serde_json::json!({"iter": r.iter, "wall_ms": ms}))
        .collect();
    let mut tfile = std::fs::File::create(run_dir.join("timings.jsonl"))?;
    for t in &timings {
        writeln!(tfile, "{t}")?;
    }

    write_checkpoint(
        &run_dir.join("checkpoint.bin"),
        &resolved.echo(),
        &model,
        &state.params,
    )?;

    let reference = reference_grid(&resolved)?;
    let metrics = evaluate(&model, &state.params, &reference)?;
    let summary = RunSummary {
        status: "ok".into(),
        kind: model.kind.as_str().into(),
        final_loss: state.final_loss.total,
        loss_pde: state.final_loss.pde,
        loss_bc: state.final_loss.bc,
        loss_ic: state.final_loss.ic,
        l2_rel: Some(metrics.l2_rel),
        linf_rel: Some(metrics.linf_rel),
        param_count: model.param_count(),
        wall_time_s,
        epochs_run: state.iter,
        stop_reason: format!("{:?}", state.stop),
        config_sha256,
        error: None,
    };
    write_json(&run_dir.join("summary.json"), &summary)?;
    Ok(run_dir)
}

/// Runs the RK45 oracle at the configured resolution and writes the grid.
pub fn cmd_oracle(config_path: &Path, out_dir: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(config_path)?;
    let config = ExperimentConfig::from_json(&text)?;
    let resolved = config.resolve()?;
    let run_dir = out_dir.unwrap_or_else(|| PathBuf::from(&resolved.out_dir));
    std::fs::create_dir_all(&run_dir)?;
    let config_sha256 = write_resolved(&run_dir, &resolved)?;

    let sol = rk45_solve(
        &resolved.problem,
        resolved.oracle_nx,
        &resolved.eval_times,
        &Rk45Config::default(),
    )?;
    write_grid_csv(&sol.grid, &run_dir.join("oracle.csv"))?;
    if resolved.formats.iter().any(|f| f == "ppm") {
        emit_ppms(&sol.grid, &run_dir, "oracle")?;
    }
    write_json(
        &run_dir.join("oracle_meta.json"),
        &serde_json::json!({
            "nx": resolved.oracle_nx,
            "output_times": resolved.eval_times,
            "accepted_steps": sol.accepted_steps,
            "rejected_steps": sol.rejected_steps,
            "max_accepted_err_norm": sol.max_accepted_err_norm,
            "config_sha256": config_sha256,
        }),
    )?;
    Ok(run_dir)
}

fn emit_ppms(grid: &SolutionGrid, dir: &Path, stem: &str) -> Result<(), CliError> {
    if grid.axes().len() == 2 {
        plot_grid(grid, None, None, &dir.join(format!("{stem}.ppm")))?;
    } else {
        for (i, &t) in grid.axes()[2].clone().iter().enumerate() {
            plot_grid(grid, Some(t), None, &dir.join(format!("{stem}_t{i}.ppm")))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct InferArgs {
    pub checkpoint: PathBuf,
    pub reference: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub nx: Option<usize>,
    pub times: Option<Vec<f64>>,
}

/// Evaluates a trained checkpoint on a grid; with a reference, also writes
/// the absolute-error field and norm summary.
pub fn cmd_infer(args: &InferArgs) -> Result<PathBuf, CliError> {
    let ck = read_checkpoint(&args.checkpoint)?;
    let (model, resolved) = restore_model(&ck)?;
    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&resolved.out_dir).join("infer"));
    std::fs::create_dir_all(&out_dir)?;

    let reference = match &args.reference {
        Some(path) => Some(read_grid_csv(path)?),
        None => None,
    };
    let axes: Vec<Vec<f64>> = match &reference {
        Some(r) => r.axes().to_vec(),
        None => {
            let nx = args.nx.unwrap_or(resolved.eval_nx);
            let times = args.times.clone().unwrap_or(resolved.eval_times.clone());
            let mut axes: Vec<Vec<f64>> = model
                .problem
                .space_bounds
                .iter()
                .map(|&(lo, hi)| linspace(lo, hi, nx))
                .collect();
            axes.push(times);
            axes
        }
    };

    let prediction = model.eval_grid(&ck.params, &axes)?;
    write_grid_csv(&prediction, &out_dir.join("prediction.csv"))?;
    let want_ppm = resolved.formats.iter().any(|f| f == "ppm");
    if want_ppm {
        emit_ppms(&prediction, &out_dir, "prediction")?;
    }

    if let Some(reference) = reference {
        let metrics = evaluate(&model, &ck.params, &reference)?;
        write_grid_csv(&metrics.abs_error_grid, &out_dir.join("abs_error.csv"))?;
        if want_ppm {
            emit_ppms(&metrics.abs_error_grid, &out_dir, "abs_error")?;
        }
        write_json(
            &out_dir.join("infer_summary.json"),
            &serde_json::json!({
                "l2_rel": metrics.l2_rel,
                "linf_rel": metrics.linf_rel,
                "param_count": model.param_count(),
                "checkpoint": args.checkpoint.display().to_string(),
            }),
        )?;
    }
    Ok(out_dir)
}

struct CompareRow {
    run: String,
    summary: Option<RunSummary>,
    problem: Option<serde_json::Value>,
}

/// Aligns completed runs into a table sorted by relative L2 error; returns
/// the text table and writes it as CSV.
pub fn cmd_compare(run_dirs: &[PathBuf], out_csv: Option<PathBuf>) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for dir in run_dirs {
        let summary = std::fs::read_to_string(dir.join("summary.json"))
            .ok()
            .and_then(|t| serde_json::from_str::<RunSummary>(&t).ok())
            .filter(|s| s.status == "ok");
        let problem = std::fs::read_to_string(dir.join("resolved_config.json"))
            .ok()
            .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
            .map(|v| v["problem"].clone());
        rows.push(CompareRow {
            run: dir.display().to_string(),
            summary,
            problem,
        });
    }
    let complete: Vec<&CompareRow> = rows.iter().filter(|r| r.summary.is_some()).collect();
    if complete.len() < 2 {
        return Err(CliError::Config(format!(
            "compare needs at least 2 completed runs, found {}",
            complete.len()
        )));
    }
    let first_problem = complete[0].problem.clone();
    for row in &complete {
        if row.problem != first_problem {
            return Err(CliError::Config(format!(
                "run `{}` solves a different problem block",
                row.run
            )));
        }
    }

    let mut ordered: Vec<&CompareRow> = complete.clone();
    ordered.sort_by(|a, b| {
        let ka = a.summary.as_ref().and_then(|s| s.l2_rel).unwrap_or(f64::MAX);
        let kb = b.summary.as_ref().and_then(|s| s.l2_rel).unwrap_or(f64::MAX);
        ka.partial_cmp(&kb).unwrap()
    });
    let incomplete: Vec<&CompareRow> = rows.iter().filter(|r| r.summary.is_none()).collect();

    let header = [
        "run",
        "kind",
        "final_loss",
        "l2_rel",
        "linf_rel",
        "param_count",
        "wall_time_s",
        "status",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    let fmt_opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.6e}"),
        None => "-".to_string(),
    };
    for row in ordered.iter() {
        let s = row.summary.as_ref().unwrap();
        table.push(vec![
            row.run.clone(),
            s.kind.clone(),
            format!("{:.6e}", s.final_loss),
            fmt_opt(s.l2_rel),
            fmt_opt(s.linf_rel),
            s.param_count.to_string(),
            format!("{:.2}", s.wall_time_s),
            s.status.clone(),
        ]);
    }
    for row in &incomplete {
        table.push(vec![
            row.run.clone(),
            "-".into(),
            "-".into(),
            "-".into(),
            "-".into(),
            "-".into(),
            "-".into(),
            "incomplete".into(),
        ]);
    }

    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap())
        .collect();
    let mut text = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        text.push_str(line.join("  ").trim_end());
        text.push('\n');
    }
    let csv_path = out_csv.unwrap_or_else(|| PathBuf::from("comparison.csv"));
    let mut csv = String::new();
    for row in &table {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(csv_path, csv)?;
    Ok(text)
}

/// Renders a solution CSV as a PPM heatmap.
pub fn cmd_plot(
    input: &Path,
    output: &Path,
    range: Option<(f64, f64)>,
    slice_time: Option<f64>,
) -> Result<(), CliError> {
    let grid = read_grid_csv(input)?;
    plot_grid(&grid, slice_time, range, output)
}
