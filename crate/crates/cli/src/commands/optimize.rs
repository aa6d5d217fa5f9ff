//! `optimize`: gradient-ascent runs across a seed sweep.
//!
//! Each seed gets its own trace CSV, theta_R checkpoint, and optional
//! periodic theta checkpoints; per-seed summaries (with oracle evaluations
//! of theta_0 and theta_R where available) merge into one summary JSON in
//! seed order.

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use drm_rl::{drm_offp_sf, drm_onp_sf, stationarity_report, Mode, OptRun};

use crate::config::{thread_pool, ExperimentConfig, LoadedExperiment};
use crate::oracle_view::{exact_drm_of, soften};
use crate::output::{fmt_f64, write_csv, write_json};

pub const TRACE_HEADER: &str =
    "iter,grad_est_norm,mean_drm_plus,mean_drm_minus,episodes_cum,truncated_frac";

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    r_index: usize,
    episodes_total: u64,
    truncation_rate: f64,
    exact_drm_theta0: Option<f64>,
    exact_drm_theta_r: Option<f64>,
    grad_norm_sq_theta_r: Option<f64>,
    mean_grad_norm_sq: Option<f64>,
    trace: String,
    theta_r: String,
}

#[derive(Serialize)]
struct OptimizeSummary<'a> {
    config: &'a ExperimentConfig,
    seed_offset: i64,
    runs: Vec<SeedSummary>,
}

fn trace_rows(run: &OptRun) -> Vec<String> {
    run.records
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.iter,
                fmt_f64(r.grad_norm),
                fmt_f64(r.mean_drm_plus),
                fmt_f64(r.mean_drm_minus),
                r.episodes_cum,
                fmt_f64(r.truncated_frac)
            )
        })
        .collect()
}

fn run_seed(exp: &LoadedExperiment, seed: u64) -> Result<SeedSummary> {
    let cfg = &exp.config;
    let d = exp.mdp.num_states() * exp.mdp.num_actions();
    let opt_cfg = cfg.opt_config(seed, d)?;
    let run = match cfg.mode {
        Mode::OnPolicy => drm_onp_sf(&opt_cfg, &exp.mdp, exp.theta0.clone())?,
        Mode::OffPolicy => drm_offp_sf(
            &opt_cfg,
            &exp.mdp,
            exp.behavior.as_ref().expect("checked at load"),
            exp.theta0.clone(),
        )?,
    };

    let trace_name = format!("trace_seed{seed}.csv");
    write_csv(
        &cfg.output_dir.join(&trace_name),
        TRACE_HEADER,
        &trace_rows(&run),
    )?;
    let theta_r_name = format!("theta_r_seed{seed}.json");
    write_json(&cfg.output_dir.join(&theta_r_name), &run.theta_r)?;
    if let Some(every) = cfg.checkpoint_every {
        if every > 0 {
            for (k, theta) in run.iterates.iter().enumerate() {
                if k % every == 0 {
                    write_json(
                        &cfg.output_dir.join(format!("theta_seed{seed}_iter{k}.json")),
                        theta,
                    )?;
                }
            }
        }
    }

    let budget = cfg.path_budget();
    let exact_theta0 = exact_drm_of(&exp.mdp, &exp.theta0, &cfg.distortion, budget)?;
    let exact_theta_r = exact_drm_of(&exp.mdp, &run.theta_r, &cfg.distortion, budget)?;
    let stationarity = soften(stationarity_report(
        &run,
        &exp.mdp,
        &cfg.distortion,
        cfg.fd_step(),
        budget,
    ))?;

    Ok(SeedSummary {
        seed,
        r_index: run.r_index,
        episodes_total: run.episodes_total,
        truncation_rate: run.truncated_total as f64 / run.episodes_total as f64,
        exact_drm_theta0: exact_theta0,
        exact_drm_theta_r: exact_theta_r,
        grad_norm_sq_theta_r: stationarity.as_ref().map(|s| s.grad_norm_sq_at_theta_r),
        mean_grad_norm_sq: stationarity.as_ref().map(|s| s.mean_grad_norm_sq),
        trace: trace_name,
        theta_r: theta_r_name,
    })
}

pub fn run(exp: &LoadedExperiment, seed_offset: i64) -> Result<()> {
    let cfg = &exp.config;
    let seeds = cfg.offset_seeds(seed_offset);
    let pool = thread_pool()?;
    let runs: Vec<SeedSummary> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_seed(exp, seed))
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = OptimizeSummary {
        config: cfg,
        seed_offset,
        runs,
    };
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    println!(
        "optimize: {} seed(s) -> {}",
        seeds.len(),
        cfg.output_dir.join("summary.json").display()
    );
    Ok(())
}
