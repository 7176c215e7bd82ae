//! Subcommand implementations and their file outputs.
//!
//! All CSV output is deterministic: rows follow configuration order
//! (methods, then seeds, then steps/tasks), floats print in Rust's
//! shortest round-trip form, non-finite values become empty cells, and no
//! wall-clock quantities are recorded. Training output is therefore
//! byte-identical across thread counts and streaming modes.

use crate::config::{config_hash, ExperimentConfig, Method};
use leap::error::{LeapError, Result};
use leap::geometry::PathMetric;
use leap::meta::{
    evaluate_transfer, random_init, read_checkpoint, run_fomaml, run_joint_finetuning, run_leap,
    run_reptile, write_checkpoint, Checkpoint, MetaRun,
};
use leap::rng::{self, SALT_INIT};
use leap::verify::{run_ablation, run_suite, SUITE_NAMES};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Header of `history.csv`.
pub const HISTORY_HEADER: &str = "method,seed,meta_step,mean_dp,meta_grad_norm,mean_loss";
/// Header of `records.csv`.
pub const RECORDS_HEADER: &str = "method,seed,task,step,loss,error,auc";
/// Header of `summary.csv`.
pub const SUMMARY_HEADER: &str = "method,quantity,mean,std";
/// Header of `ablation.csv`.
pub const ABLATION_HEADER: &str = "cell,metric,include_loss,stabilize,meta_step,mean_loss,mean_dp";
/// Header of `ablation_summary.csv`.
pub const ABLATION_SUMMARY_HEADER: &str = "cell,metric,include_loss,stabilize,auc_mean,auc_std";

/// Shortest round-trip decimal form; empty cell for non-finite values.
fn csv_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn create_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn open_csv(path: &Path, header: &str) -> Result<BufWriter<File>> {
    let mut writer = BufWriter::new(File::create(path)?);
    writeln!(writer, "{header}")?;
    Ok(writer)
}

fn checkpoint_path(out: &Path, method: Method, seed: u64) -> PathBuf {
    out.join(format!("{method}_{seed}.ckpt"))
}

fn metric_name(metric: PathMetric) -> &'static str {
    match metric {
        PathMetric::Length => "length",
        PathMetric::Energy => "energy",
    }
}

/// Applies `--seed`: restricts the run to one seed, which must be listed in
/// the configuration (checkpoints and hashes are tied to the config).
fn select_seeds(config: &ExperimentConfig, only: Option<u64>) -> Result<Vec<u64>> {
    match only {
        None => Ok(config.seeds.clone()),
        Some(seed) if config.seeds.contains(&seed) => Ok(vec![seed]),
        Some(seed) => Err(LeapError::Config(format!(
            "seed {seed} is not in the configured seeds list {:?}",
            config.seeds
        ))),
    }
}

fn initial_params(dim: usize, seed: u64) -> Vec<f64> {
    let mut init_rng = rng::stream(&[seed, SALT_INIT]);
    random_init(dim, &mut init_rng)
}

/// Meta-trains every configured method and seed; writes `history.csv` and
/// one checkpoint per (method, seed).
pub fn cmd_train(
    config: &ExperimentConfig,
    out: &Path,
    only_seed: Option<u64>,
    streaming: bool,
) -> Result<()> {
    create_out_dir(out)?;
    let dist = config.build_train_distribution()?;
    let meta_cfg = config.meta_config()?.with_streaming(streaming);
    let hash = config_hash(config)?;
    let seeds = select_seeds(config, only_seed)?;
    let mut history = open_csv(&out.join("history.csv"), HISTORY_HEADER)?;

    for method in config.methods()? {
        if !method.trains() {
            log::info!("method {method} needs no training, skipping");
            continue;
        }
        for &seed in &seeds {
            let theta0 = initial_params(dist.dim(), seed);
            let run: MetaRun = match method {
                Method::Leap => run_leap(&dist, &meta_cfg, theta0, seed)?,
                Method::Reptile => {
                    let epsilon = config.reptile.as_ref().expect("validated").epsilon;
                    run_reptile(&dist, &meta_cfg, epsilon, theta0, seed)?
                }
                Method::Fomaml => {
                    let lr = config.fomaml.as_ref().expect("validated").learning_rate;
                    run_fomaml(&dist, &meta_cfg, lr, theta0, seed)?
                }
                Method::Joint => run_joint_finetuning(&dist, &meta_cfg, theta0, seed)?,
                Method::Random => unreachable!("filtered above"),
            };
            for report in &run.history {
                writeln!(
                    history,
                    "{method},{seed},{},{},{},{}",
                    report.step,
                    csv_f64(report.mean_distance),
                    csv_f64(report.grad_norm),
                    csv_f64(report.mean_loss)
                )?;
            }
            write_checkpoint(
                &checkpoint_path(out, method, seed),
                &Checkpoint {
                    theta0: run.theta0,
                    meta_step: run.history.len() as u64,
                    config_hash: hash,
                },
            )?;
            let last = run.history.last();
            println!(
                "train {method} seed {seed}: {} steps, final mean_dp {}, grad_norm {}",
                run.history.len(),
                last.map_or_else(String::new, |r| csv_f64(r.mean_distance)),
                last.map_or_else(String::new, |r| csv_f64(r.grad_norm))
            );
        }
    }
    history.flush()?;
    Ok(())
}

/// Loads the initialization `evaluate` should adapt for one (method, seed).
fn load_initialization(
    out: &Path,
    method: Method,
    seed: u64,
    dim: usize,
    hash: u64,
) -> Result<Vec<f64>> {
    if !method.trains() {
        return Ok(initial_params(dim, seed));
    }
    let path = checkpoint_path(out, method, seed);
    if !path.exists() {
        return Err(LeapError::Config(format!(
            "no checkpoint for method {method} seed {seed} at {}; run `leap train` first",
            path.display()
        )));
    }
    let checkpoint = read_checkpoint(&path)?;
    if checkpoint.config_hash != hash {
        return Err(LeapError::Checkpoint(format!(
            "{} was produced by a different configuration (hash {:#018x}, expected {:#018x})",
            path.display(),
            checkpoint.config_hash,
            hash
        )));
    }
    if checkpoint.theta0.len() != dim {
        return Err(LeapError::DimensionMismatch {
            context: "evaluate checkpoint",
            expected: dim,
            actual: checkpoint.theta0.len(),
        });
    }
    Ok(checkpoint.theta0)
}

/// Adapts every method's initialization to the held-out tasks; writes
/// per-step `records.csv` and aggregated `summary.csv`.
pub fn cmd_evaluate(config: &ExperimentConfig, out: &Path, only_seed: Option<u64>) -> Result<()> {
    create_out_dir(out)?;
    let heldout = config.build_heldout_distribution()?;
    let eval_steps = config.eval_steps();
    let hash = config_hash(config)?;
    let seeds = select_seeds(config, only_seed)?;
    let mut records = open_csv(&out.join("records.csv"), RECORDS_HEADER)?;
    let mut summary = open_csv(&out.join("summary.csv"), SUMMARY_HEADER)?;

    for method in config.methods()? {
        let mut final_losses = Vec::new();
        let mut final_errors = Vec::new();
        let mut aucs = Vec::new();
        for &seed in &seeds {
            let theta0 = load_initialization(out, method, seed, heldout.dim(), hash)?;
            let outcomes = evaluate_transfer(&theta0, &heldout, eval_steps, seed)?;
            for outcome in &outcomes {
                for (step, (loss, error)) in outcome.losses.iter().zip(&outcome.errors).enumerate()
                {
                    writeln!(
                        records,
                        "{method},{seed},{},{step},{},{},{}",
                        outcome.task_index,
                        csv_f64(*loss),
                        csv_f64(*error),
                        csv_f64(outcome.auc)
                    )?;
                }
                final_losses.push(outcome.final_loss());
                final_errors.push(outcome.final_error());
                aucs.push(outcome.auc);
            }
        }
        for (quantity, values) in [
            ("final_loss", &final_losses),
            ("final_error", &final_errors),
            ("auc", &aucs),
        ] {
            let (mean, std) = mean_std(values);
            writeln!(
                summary,
                "{method},{quantity},{},{}",
                csv_f64(mean),
                csv_f64(std)
            )?;
        }
        let (auc_mean, auc_std) = mean_std(&aucs);
        let (err_mean, err_std) = mean_std(&final_errors);
        println!(
            "evaluate {method}: auc {} ± {}, final_error {} ± {} ({} tasks × {} seeds)",
            csv_f64(auc_mean),
            csv_f64(auc_std),
            csv_f64(err_mean),
            csv_f64(err_std),
            heldout.len(),
            seeds.len()
        );
    }
    records.flush()?;
    summary.flush()?;
    Ok(())
}

/// Runs one named verification suite, or all of them, printing one JSON
/// report per line. Returns whether every suite passed.
pub fn cmd_verify(suite: Option<&str>) -> Result<bool> {
    let names: Vec<&str> = match suite {
        Some(name) => vec![name],
        None => SUITE_NAMES.to_vec(),
    };
    let mut all_passed = true;
    for name in names {
        let report = run_suite(name)?;
        all_passed &= report.passed();
        let json = serde_json::to_string(&report)
            .map_err(|e| LeapError::Config(format!("cannot serialize report: {e}")))?;
        println!("{json}");
    }
    Ok(all_passed)
}

/// Runs the 2×2×2 geometry ablation; writes per-cell training histories to
/// `ablation.csv` and seed-aggregated transfer results to
/// `ablation_summary.csv`.
pub fn cmd_ablate(config: &ExperimentConfig, out: &Path) -> Result<()> {
    create_out_dir(out)?;
    let train = config.build_train_distribution()?;
    let heldout = config.build_heldout_distribution()?;
    let meta_cfg = config.meta_config()?;
    let cells = run_ablation(
        &train,
        &heldout,
        &meta_cfg,
        config.eval_steps(),
        &config.seeds,
    )?;

    let mut table = open_csv(&out.join("ablation.csv"), ABLATION_HEADER)?;
    let mut summary = open_csv(&out.join("ablation_summary.csv"), ABLATION_SUMMARY_HEADER)?;
    for cell in &cells {
        let label = cell.label();
        let metric = metric_name(cell.metric);
        for (step, (loss, dp)) in cell
            .mean_loss_history
            .iter()
            .zip(&cell.mean_distance_history)
            .enumerate()
        {
            writeln!(
                table,
                "{label},{metric},{},{},{step},{},{}",
                cell.include_loss,
                cell.stabilize,
                csv_f64(*loss),
                csv_f64(*dp)
            )?;
        }
        let (auc_mean, auc_std) = mean_std(&cell.auc_per_seed);
        writeln!(
            summary,
            "{label},{metric},{},{},{},{}",
            cell.include_loss,
            cell.stabilize,
            csv_f64(auc_mean),
            csv_f64(auc_std)
        )?;
        println!(
            "ablate {label}: auc {} ± {}",
            csv_f64(auc_mean),
            csv_f64(auc_std)
        );
    }
    table.flush()?;
    summary.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formatting_roundtrips_and_blanks_non_finite() {
        for x in [0.1, -3.25, 1e-12, 123456.789, f64::MIN_POSITIVE] {
            let s = csv_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(csv_f64(f64::NAN), "");
        assert_eq!(csv_f64(f64::INFINITY), "");
    }

    #[test]
    fn mean_std_matches_hand_computation() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let (m1, s1) = mean_std(&[7.0]);
        assert_eq!((m1, s1), (7.0, 0.0));
        assert!(mean_std(&[]).0.is_nan());
    }
}
