use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CalibrationConfig, ExperimentConfig};
use super::{derive_seed, resolve_output_dir};
use crate::analysis::{
    calibrate_constants, compute_error_metrics, cone_membership, gradient_ratios, long_run_reference, truncated_gaussian_cov,
    verify_dual_bounds, verify_rsc,
};
use crate::contrast::{build_context, LocalizationConfig};
use crate::error::{Error, Result};
use crate::levy::{simulate_path, ObservationSet, PathConfig};
use crate::model::{estimate_incoherence, generate_drift_with, lyapunov_stationary_cov, DriftModel};
use crate::solver::{solve, tune_lambdas, TuningConfig};
use crate::Tolerances;

/// Version of the results CSV layout, written in its `schema` column.
pub const RESULTS_SCHEMA: u32 = 1;

/// One (horizon, replicate) cell. Fields after `error` are empty when the
/// cell failed before producing them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema: u32,
    pub config_name: String,
    pub regime: String,
    pub d: usize,
    pub r: usize,
    pub s: usize,
    pub t: f64,
    pub delta_n: f64,
    pub replicate: usize,
    pub seed: u64,
    pub status: String,
    pub error: String,
    pub n_obs: Option<usize>,
    pub n_active: Option<usize>,
    pub radius_b: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: f64,
    pub c_op: f64,
    pub c_one: f64,
    pub lambda_star: Option<f64>,
    pub lambda_one: Option<f64>,
    pub frob_err_sq: Option<f64>,
    pub rank_l_hat: Option<usize>,
    pub support_precision: Option<f64>,
    pub support_recall: Option<f64>,
    pub lowrank_ratio: Option<f64>,
    pub sparse_ratio: Option<f64>,
    pub in_cone: Option<bool>,
    pub min_eig_cn: Option<f64>,
    pub c_b_proxy: Option<f64>,
    pub rsc_pass: Option<bool>,
    pub grad_op: Option<f64>,
    pub grad_inf: Option<f64>,
    pub dual_op_pass: Option<bool>,
    pub dual_inf_pass: Option<bool>,
    pub dual_pass: Option<bool>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub objective: Option<f64>,
    pub xi_l_est: Option<f64>,
    pub xi_s_est: Option<f64>,
    pub wall_time_ms: f64,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub c_op: f64,
    pub c_one: f64,
    pub horizon: f64,
    pub pilots_ok: usize,
    pub pilots_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub calibration: Option<CalibrationOutcome>,
    pub tuning_used: TuningConfig,
    pub rows_total: usize,
    pub rows_failed: usize,
    pub results_file: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results_path: PathBuf,
    pub manifest_path: PathBuf,
    pub rows: Vec<ResultRow>,
    pub manifest: Manifest,
}

fn error_status(e: &Error) -> &'static str {
    match e {
        Error::UnstableSimulation { .. } => "unstable_simulation",
        Error::DegenerateLocalization => "degenerate_localization",
        Error::Divergence { .. } => "divergence",
        Error::Generation { .. } => "generation_failed",
        _ => "error",
    }
}

/// Model, path and context inputs shared by pilots and cells.
struct Draw {
    model: DriftModel,
    obs: ObservationSet,
    loc: LocalizationConfig,
}

fn draw(cfg: &ExperimentConfig, horizon: f64, seed: u64) -> Result<Draw> {
    let model = generate_drift_with(cfg.d, cfg.r, cfg.s, derive_seed(seed, 1, 0), &cfg.drift)?;
    let mut pc = PathConfig::for_horizon(horizon, cfg.delta_n, cfg.substeps, derive_seed(seed, 2, 0));
    pc.burn_in_time = cfg.burn_in_time;
    let obs = simulate_path(&model, &cfg.regime, &pc)?;
    let loc = cfg.localization.resolve(&obs, &model, &cfg.regime)?;
    Ok(Draw { model, obs, loc })
}

/// Calibrates `(c_op, c_one)` from pilot draws that never coincide with
/// sweep cells.
pub fn calibrate(cfg: &ExperimentConfig, cal: &CalibrationConfig) -> Result<CalibrationOutcome> {
    let horizon = cal
        .horizon
        .unwrap_or_else(|| cfg.t_sweep.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let base = derive_seed(cal.seed, cfg.seed_base, u64::MAX);
    let results: Vec<Result<(f64, f64)>> = (0..cal.pilots)
        .into_par_iter()
        .map(|i| {
            let dr = draw(cfg, horizon, derive_seed(base, horizon.to_bits(), i as u64))?;
            let ctx = build_context(&dr.obs, dr.loc)?;
            gradient_ratios(&ctx, &dr.model, cfg.tuning.gamma_value, dr.obs.horizon())
        })
        .collect();
    let ratios: Vec<(f64, f64)> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let pilots_failed = results.len() - ratios.len();
    let (c_op, c_one) = calibrate_constants(&ratios, cal.quantile)?;
    Ok(CalibrationOutcome {
        c_op,
        c_one,
        horizon,
        pilots_ok: ratios.len(),
        pilots_failed,
    })
}

/// Reference covariance for the RSC check: Monte Carlo from the Gaussian
/// stationary law restricted to `B` without jumps, otherwise a long path.
fn rsc_reference(cfg: &ExperimentConfig, dr: &Draw, horizon: f64, seed: u64) -> Result<crate::Mat> {
    if cfg.regime.has_jumps() {
        let mut pc = PathConfig::for_horizon(
            cfg.rsc_reference.horizon_multiplier * horizon,
            cfg.delta_n,
            cfg.substeps,
            seed,
        );
        pc.burn_in_time = cfg.burn_in_time;
        long_run_reference(&dr.model, &cfg.regime, &dr.loc, &pc)
    } else {
        let c_inf = lyapunov_stationary_cov(&dr.model.a0, &cfg.regime.instantaneous_cov())?;
        truncated_gaussian_cov(&c_inf, dr.loc.radius_b, cfg.rsc_reference.gaussian_samples, seed)
    }
}

fn fill_row(row: &mut ResultRow, cfg: &ExperimentConfig, tuning: &TuningConfig, horizon: f64, seed: u64) -> Result<()> {
    let tol = Tolerances::default();
    let dr = draw(cfg, horizon, seed)?;
    row.n_obs = Some(dr.obs.n());
    row.radius_b = Some(dr.loc.radius_b);
    row.eta = Some(dr.loc.eta);
    let ctx = build_context(&dr.obs, dr.loc)?;
    row.n_active = Some(ctx.n_active());

    let lambdas = tune_lambdas(cfg.d, dr.obs.horizon(), tuning)?;
    row.lambda_star = Some(lambdas.0);
    row.lambda_one = Some(lambdas.1);
    let res = solve(&ctx, lambdas, &cfg.solver)?;
    row.iterations = Some(res.iterations);
    row.converged = Some(res.converged);
    row.objective = Some(res.objective());

    let metrics = compute_error_metrics(&dr.model, &res, tol.support, tol.rank)?;
    row.frob_err_sq = Some(metrics.frob_err_sq);
    row.rank_l_hat = Some(metrics.rank_l_hat);
    row.support_precision = Some(metrics.support_precision);
    row.support_recall = Some(metrics.support_recall);

    let cone = cone_membership(&dr.model.tangent, &(&res.l_hat - &dr.model.l0), &(&res.s_hat - &dr.model.s0))?;
    row.lowrank_ratio = Some(cone.lowrank_ratio);
    row.sparse_ratio = Some(cone.sparse_ratio);
    row.in_cone = Some(cone.in_cone);

    let reference = rsc_reference(cfg, &dr, horizon, derive_seed(seed, 3, 0))?;
    let rsc = verify_rsc(&ctx, Some(&reference))?;
    row.min_eig_cn = Some(rsc.min_eig_cn);
    row.c_b_proxy = Some(rsc.c_b_proxy);
    row.rsc_pass = Some(rsc.passes);

    let dual = verify_dual_bounds(&ctx, &dr.model, lambdas)?;
    row.grad_op = Some(dual.grad_op);
    row.grad_inf = Some(dual.grad_inf);
    row.dual_op_pass = Some(dual.op_passes);
    row.dual_inf_pass = Some(dual.inf_passes);
    row.dual_pass = Some(dual.passes);

    if cfg.incoherence_samples > 0 {
        let inc = estimate_incoherence(&dr.model, cfg.incoherence_samples)?;
        row.xi_l_est = Some(inc.xi_l_est);
        row.xi_s_est = Some(inc.xi_s_est);
    }
    Ok(())
}

/// Runs one cell; failures are recorded in the row, never raised.
pub fn run_cell(cfg: &ExperimentConfig, tuning: &TuningConfig, horizon: f64, replicate: usize) -> ResultRow {
    let start = Instant::now();
    let seed = derive_seed(cfg.seed_base, horizon.to_bits(), replicate as u64);
    let mut row = ResultRow {
        schema: RESULTS_SCHEMA,
        config_name: cfg.name.clone(),
        regime: format!("{:?}", cfg.regime.tag()),
        d: cfg.d,
        r: cfg.r,
        s: cfg.s,
        t: horizon,
        delta_n: cfg.delta_n,
        replicate,
        seed,
        status: "ok".into(),
        error: String::new(),
        n_obs: None,
        n_active: None,
        radius_b: None,
        eta: None,
        gamma: tuning.gamma_value,
        c_op: tuning.c_op,
        c_one: tuning.c_one,
        lambda_star: None,
        lambda_one: None,
        frob_err_sq: None,
        rank_l_hat: None,
        support_precision: None,
        support_recall: None,
        lowrank_ratio: None,
        sparse_ratio: None,
        in_cone: None,
        min_eig_cn: None,
        c_b_proxy: None,
        rsc_pass: None,
        grad_op: None,
        grad_inf: None,
        dual_op_pass: None,
        dual_inf_pass: None,
        dual_pass: None,
        iterations: None,
        converged: None,
        objective: None,
        xi_l_est: None,
        xi_s_est: None,
        wall_time_ms: 0.0,
    };
    if let Err(e) = fill_row(&mut row, cfg, tuning, horizon, seed) {
        row.status = error_status(&e).into();
        row.error = e.to_string();
    }
    row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    row
}

fn run_all(cfg: &ExperimentConfig) -> Result<(Option<CalibrationOutcome>, TuningConfig, Vec<ResultRow>)> {
    let calibration = cfg.calibration.as_ref().map(|c| calibrate(cfg, c)).transpose()?;
    let mut tuning = cfg.tuning.clone();
    if let Some(c) = &calibration {
        tuning.c_op = c.c_op;
        tuning.c_one = c.c_one;
    }
    let cells: Vec<(f64, usize)> = cfg
        .t_sweep
        .iter()
        .flat_map(|&t| (0..cfg.replicates).map(move |r| (t, r)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(t, r)| run_cell(cfg, &tuning, t, r))
        .collect();
    Ok((calibration, tuning, rows))
}

/// Validates the configuration, runs every cell and writes
/// `<name>_results.csv` and `<name>_manifest.json`.
///
/// `parallel` caps the worker count; results are identical for any value.
pub fn run_experiment(cfg: &ExperimentConfig, parallel: Option<usize>, out_dir: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = resolve_output_dir(&cfg.output_dir, out_dir);
    fs::create_dir_all(&dir)?;

    let (calibration, tuning, rows) = match parallel {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_all(cfg))?,
        None => run_all(cfg)?,
    };

    let results_path = dir.join(format!("{}_results.csv", cfg.name));
    let mut wtr = csv::Writer::from_path(&results_path)?;
    for row in &rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;

    let manifest = Manifest {
        schema: RESULTS_SCHEMA,
        config: cfg.clone(),
        calibration,
        tuning_used: tuning,
        rows_total: rows.len(),
        rows_failed: rows.iter().filter(|r| !r.is_ok()).count(),
        results_file: results_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let manifest_path = dir.join(format!("{}_manifest.json", cfg.name));
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;

    Ok(RunOutput {
        results_path,
        manifest_path,
        rows,
        manifest,
    })
}
