//! `estimate`: DRM estimation sweep over batch sizes and seeds.
//!
//! For each (m, seed) pair, simulates m episodes — under the target policy
//! on-policy, under the behavior policy off-policy — and reports the
//! order-statistics DRM estimate. When the enumeration oracle applies, each
//! row also carries the exact DRM, the squared error, and the
//! `16 M_r^2 M_g'^2 / m` error bound (times `M_s^2` off-policy).

use anyhow::{anyhow, Result};
use rayon::prelude::*;
use serde::Serialize;

use drm_rl::{
    discounted_return, drm_offpolicy_estimate, drm_onpolicy_estimate, importance_ratio,
    seeding::{substream, TAG_ESTIMATE},
    Mode, PolicyParams, TabularSoftmax,
};

use crate::config::{thread_pool, ExperimentConfig, LoadedExperiment};
use crate::oracle_view::OracleView;
use crate::output::{fmt_f64, write_csv, write_json};

#[derive(Serialize)]
struct EstimateSummary<'a> {
    config: &'a ExperimentConfig,
    seed_offset: i64,
    /// Exact DRM of the evaluated policy, when the oracle applies.
    exact_drm: Option<f64>,
    /// Importance-ratio bound, when off-policy and the oracle applies.
    m_s: Option<f64>,
    episodes_total: u64,
    truncated_episodes: u64,
    truncation_rate: f64,
    rows: usize,
    trace: String,
}

struct Row {
    m: usize,
    seed: u64,
    estimate: f64,
    truncated: u64,
}

fn run_one(
    exp: &LoadedExperiment,
    theta: &PolicyParams,
    shape: &TabularSoftmax,
    m: usize,
    master_seed: u64,
) -> Result<Row> {
    let mdp = &exp.mdp;
    let mut returns = Vec::with_capacity(m);
    let mut ratios = Vec::with_capacity(m);
    let mut truncated = 0u64;
    for ep_index in 0..m {
        let mut rng = substream(master_seed, TAG_ESTIMATE, m as u64, ep_index as u64);
        let episode = match exp.config.mode {
            Mode::OnPolicy => mdp.simulate_episode(
                |s, rng| {
                    shape
                        .sample_action(theta, s, rng)
                        .expect("simulator only queries non-terminal states")
                },
                &mut rng,
            ),
            Mode::OffPolicy => {
                let behavior = exp.behavior.as_ref().expect("validated at load");
                let episode = mdp.simulate_episode(
                    |s, rng| behavior.sample_action(s, rng).expect("validated rows"),
                    &mut rng,
                );
                ratios.push(importance_ratio(&episode, shape, theta, behavior)?);
                episode
            }
        };
        if !episode.terminated {
            truncated += 1;
        }
        returns.push(discounted_return(&episode, mdp.gamma()));
    }
    let estimate = match exp.config.mode {
        Mode::OnPolicy => drm_onpolicy_estimate(&returns, &exp.config.distortion)?,
        Mode::OffPolicy => drm_offpolicy_estimate(&returns, &ratios, &exp.config.distortion)?,
    };
    Ok(Row {
        m,
        seed: master_seed,
        estimate,
        truncated,
    })
}

pub fn run(exp: &LoadedExperiment, seed_offset: i64) -> Result<()> {
    let cfg = &exp.config;
    let m_sweep = cfg
        .m_sweep
        .clone()
        .ok_or_else(|| anyhow!("config field `m_sweep` is required for estimate"))?;
    if m_sweep.contains(&0) {
        return Err(anyhow!("config field `m_sweep` entries must be positive"));
    }
    let shape = TabularSoftmax::for_mdp(&exp.mdp);
    let seeds = cfg.offset_seeds(seed_offset);

    let oracle = OracleView::compute(exp)?;
    let m_r = exp.mdp.m_r();
    let m_gp = cfg.distortion.derivative_bound();

    let tasks: Vec<(usize, u64)> = m_sweep
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = thread_pool()?;
    let rows: Vec<Row> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, seed)| run_one(exp, &exp.theta0, &shape, m, seed))
            .collect::<Result<Vec<_>>>()
    })?;

    let bound_factor = match cfg.mode {
        Mode::OnPolicy => Some(1.0),
        Mode::OffPolicy => oracle.m_s.map(|ms| ms * ms),
    };
    let mut csv_rows = Vec::with_capacity(rows.len());
    for row in &rows {
        let (exact, sq_error, bound) = match (oracle.exact_drm, bound_factor) {
            (Some(exact), Some(factor)) => {
                let err = row.estimate - exact;
                let bound = 16.0 * m_r * m_r * m_gp * m_gp * factor / row.m as f64;
                (fmt_f64(exact), fmt_f64(err * err), fmt_f64(bound))
            }
            _ => (String::new(), String::new(), String::new()),
        };
        csv_rows.push(format!(
            "{},{},{},{},{},{}",
            row.m,
            row.seed,
            fmt_f64(row.estimate),
            exact,
            sq_error,
            bound
        ));
    }
    let trace_path = cfg.output_dir.join("estimates.csv");
    write_csv(
        &trace_path,
        "m,seed,estimate,exact,sq_error,bound",
        &csv_rows,
    )?;

    let episodes_total: u64 = rows.iter().map(|r| r.m as u64).sum();
    let truncated_episodes: u64 = rows.iter().map(|r| r.truncated).sum();
    let summary = EstimateSummary {
        config: cfg,
        seed_offset,
        exact_drm: oracle.exact_drm,
        m_s: oracle.m_s,
        episodes_total,
        truncated_episodes,
        truncation_rate: truncated_episodes as f64 / episodes_total as f64,
        rows: rows.len(),
        trace: "estimates.csv".into(),
    };
    write_json(&cfg.output_dir.join("estimate_summary.json"), &summary)?;
    println!(
        "estimate: {} rows -> {}",
        rows.len(),
        trace_path.display()
    );
    Ok(())
}
