//! Nuclear-plus-ℓ1 penalized contrast minimization
//! `min ℓ_n(L + S) + λ_*‖L‖_* + λ₁‖S‖₁` by accelerated proximal gradient.
//!
//! The smooth part depends only on `L + S`, so both blocks share one
//! gradient and each takes its own proximal step.

use serde::{Deserialize, Serialize};

use crate::contrast::{ContrastContext, ContrastStats};
use crate::error::{Error, Result};
use crate::levy::JumpLaw;
use crate::matrix::{self, inner, l1_norm, linf_norm, mat_serde, operator_norm, soft_threshold, Mat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningConfig {
    pub c_op: f64,
    pub c_one: f64,
    /// Regime factor `γ(Δn)`.
    pub gamma_value: f64,
    /// `(λ_*, λ₁)` overriding the rule.
    pub explicit_lambdas: Option<(f64, f64)>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            c_op: 1.0,
            c_one: 1.0,
            gamma_value: 1.0,
            explicit_lambdas: None,
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some((a, b)) = self.explicit_lambdas {
            if !(a > 0.0) || !(b > 0.0) {
                return Err(Error::Config("explicit lambdas must both be positive".into()));
            }
        }
        if !(self.c_op > 0.0) || !(self.c_one > 0.0) || !(self.gamma_value > 0.0) {
            return Err(Error::Config("c_op, c_one and gamma_value must be positive".into()));
        }
        Ok(())
    }
}

/// Default `γ(Δn)`: `1` for continuous and bounded jumps,
/// `(1 + log(1/Δn))^{2/α}` for sub-Weibull, `Δn^{−2/p}` for `p`-th moment
/// jumps.
pub fn gamma_rule(law: &JumpLaw, delta_n: f64) -> f64 {
    match *law {
        JumpLaw::Continuous | JumpLaw::BoundedJumps { .. } => 1.0,
        JumpLaw::SubWeibull { alpha } => (1.0 + (1.0 / delta_n).ln().max(0.0)).powf(2.0 / alpha),
        JumpLaw::PolyMoment { p } => delta_n.powf(-2.0 / p),
    }
}

/// `λ_* = 2c_op√(γ log d / T)`, `λ₁ = 2c_one√(γ log d² / T)`.
pub fn tune_lambdas(d: usize, t_horizon: f64, tuning: &TuningConfig) -> Result<(f64, f64)> {
    tuning.validate()?;
    if let Some(l) = tuning.explicit_lambdas {
        return Ok(l);
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!("tuning rule needs d >= 2, got {d}")));
    }
    if !(t_horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let base = tuning.gamma_value * (d as f64).ln() / t_horizon;
    Ok((2.0 * tuning.c_op * base.sqrt(), 2.0 * tuning.c_one * (2.0 * base).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative objective decrease threshold.
    pub tol: f64,
    /// Relative iterate change threshold; both must hold to stop.
    pub iterate_tol: f64,
    /// Initial step; `None` means the inverse smoothness constant.
    pub step_init: Option<f64>,
    pub backtracking_factor: f64,
    pub acceleration: bool,
    #[serde(with = "mat_serde::option")]
    pub l_init: Option<Mat>,
    #[serde(with = "mat_serde::option")]
    pub s_init: Option<Mat>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-8,
            iterate_tol: 1e-7,
            step_init: None,
            backtracking_factor: 0.5,
            acceleration: true,
            l_init: None,
            s_init: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.tol > 0.0) || !(self.iterate_tol >= 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.step_init.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::Config("step_init must be positive".into()));
        }
        if !(self.backtracking_factor > 0.0 && self.backtracking_factor < 1.0) {
            return Err(Error::Config("backtracking_factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    #[serde(with = "mat_serde")]
    pub l_hat: Mat,
    #[serde(with = "mat_serde")]
    pub s_hat: Mat,
    #[serde(with = "mat_serde")]
    pub a_hat: Mat,
    /// Objective after each accepted iterate, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub lambda_star_used: f64,
    pub lambda_one_used: f64,
    pub final_step: f64,
}

impl EstimateResult {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// `λ_*‖L‖_* + λ₁‖S‖₁ + ℓ(L + S)`.
pub fn objective(stats: &ContrastStats, l: &Mat, s: &Mat, lambdas: (f64, f64)) -> Result<f64> {
    Ok(stats.loss(&(l + s))? + lambdas.0 * matrix::nuclear_norm(l)? + lambdas.1 * l1_norm(s))
}

/// Singular value thresholding that also returns the nuclear norm of the
/// result.
fn svt_with_norm(m: &Mat, lam: f64) -> Result<(Mat, f64)> {
    if lam == 0.0 {
        return Ok((m.clone(), matrix::nuclear_norm(m)?));
    }
    let dec = matrix::svd(m)?;
    let norm = dec.singular_values.iter().map(|s| (s - lam).max(0.0)).sum();
    Ok((dec.reconstruct_with(|s| (s - lam).max(0.0)), norm))
}

struct Step {
    l: Mat,
    s: Mat,
    objective: f64,
    tau: f64,
}

/// One backtracked proximal step from `(yl, ys)`.
fn prox_step(stats: &ContrastStats, yl: &Mat, ys: &Mat, lambdas: (f64, f64), tau0: f64, beta: f64) -> Result<Step> {
    let y = yl + ys;
    let f_y = stats.loss(&y)?;
    let g = stats.gradient(&y)?;
    let mut tau = tau0;
    for _ in 0..200 {
        let (l, nuc) = svt_with_norm(&(yl - &g * tau), tau * lambdas.0)?;
        let s = soft_threshold(&(ys - &g * tau), tau * lambdas.1)?;
        let dl = &l - yl;
        let ds = &s - ys;
        let f_new = stats.loss(&(&l + &s))?;
        let model = f_y + inner(&g, &(&dl + &ds)) + (dl.norm_squared() + ds.norm_squared()) / (2.0 * tau);
        if f_new <= model + 1e-12 * f_y.abs().max(1e-300) {
            let objective = f_new + lambdas.0 * nuc + lambdas.1 * l1_norm(&s);
            return Ok(Step { l, s, objective, tau });
        }
        tau *= beta;
    }
    Err(Error::Numerical("backtracking did not find a sufficient-decrease step".into()))
}

/// Minimizes the penalized contrast from the statistics alone.
pub fn solve_stats(stats: &ContrastStats, lambdas: (f64, f64), cfg: &SolverConfig) -> Result<EstimateResult> {
    cfg.validate()?;
    let (lam_star, lam_one) = lambdas;
    if !(lam_star >= 0.0) || !(lam_one >= 0.0) {
        return Err(Error::InvalidArgument("lambdas must be nonnegative".into()));
    }
    let d = stats.d;
    let init = |m: &Option<Mat>| -> Result<Mat> {
        match m {
            Some(m) if m.shape() != (d, d) => Err(crate::error::dim_err(format!("{d}x{d}"), format!("{:?}", m.shape()))),
            Some(m) => Ok(m.clone()),
            None => Ok(Mat::zeros(d, d)),
        }
    };
    let mut l = init(&cfg.l_init)?;
    let mut s = init(&cfg.s_init)?;
    let mut tau = match cfg.step_init {
        Some(t) => t,
        None => {
            let lip = stats.lipschitz()?;
            if lip > 0.0 {
                1.0 / lip
            } else {
                1.0
            }
        }
    };

    let mut f = objective(stats, &l, &s, lambdas)?;
    let mut trace = vec![f];
    let mut yl = l.clone();
    let mut ys = s.clone();
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    let mut at_restart = true;

    while iterations < cfg.max_iters {
        let step = prox_step(stats, &yl, &ys, lambdas, tau, cfg.backtracking_factor)?;
        if !step.objective.is_finite() {
            return Err(Error::Divergence {
                iteration: iterations,
                objective: step.objective,
            });
        }
        tau = step.tau;
        if step.objective > f && !at_restart {
            // Momentum overshot: restart from the last accepted iterate.
            yl = l.clone();
            ys = s.clone();
            t = 1.0;
            at_restart = true;
            continue;
        }
        iterations += 1;
        // A plain step from an accepted iterate never increases the
        // objective up to rounding; clamp so the trace stays monotone.
        let f_new = step.objective.min(f);
        let change = ((&step.l - &l).norm_squared() + (&step.s - &s).norm_squared()).sqrt();
        let size = (l.norm_squared() + s.norm_squared()).sqrt().max(1.0);
        let rel_decrease = (f - f_new) / f.abs().max(f64::MIN_POSITIVE);

        let (l_prev, s_prev) = (std::mem::replace(&mut l, step.l), std::mem::replace(&mut s, step.s));
        f = f_new;
        trace.push(f);
        if rel_decrease < cfg.tol && change <= cfg.iterate_tol * size {
            converged = true;
            break;
        }
        if cfg.acceleration {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let w = (t - 1.0) / t_next;
            yl = &l + (&l - &l_prev) * w;
            ys = &s + (&s - &s_prev) * w;
            t = t_next;
        } else {
            yl = l.clone();
            ys = s.clone();
        }
        at_restart = !cfg.acceleration;
    }

    Ok(EstimateResult {
        a_hat: &l + &s,
        l_hat: l,
        s_hat: s,
        objective_trace: trace,
        iterations,
        converged,
        lambda_star_used: lam_star,
        lambda_one_used: lam_one,
        final_step: tau,
    })
}

pub fn solve(ctx: &ContrastContext<'_>, lambdas: (f64, f64), cfg: &SolverConfig) -> Result<EstimateResult> {
    solve_stats(&ctx.stats, lambdas, cfg)
}

/// First-order optimality residuals, each in the dual norm and normalized
/// by its penalty level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// Operator-norm distance from `−∇ℓ(Â)/λ_*` to `∂‖L̂‖_*`
    /// (upper bound via the tangent/normal split).
    pub residual_l: f64,
    /// `ℓ∞` distance from `−∇ℓ(Â)/λ₁` to `∂‖Ŝ‖₁` (exact).
    pub residual_s: f64,
    pub rank_l_hat: usize,
    pub passes: bool,
}

pub fn check_optimality(ctx: &ContrastContext<'_>, result: &EstimateResult, lambdas: (f64, f64)) -> Result<OptimalityReport> {
    check_optimality_stats(&ctx.stats, result, lambdas, &crate::Tolerances::default())
}

pub fn check_optimality_stats(
    stats: &ContrastStats,
    result: &EstimateResult,
    lambdas: (f64, f64),
    tol: &crate::Tolerances,
) -> Result<OptimalityReport> {
    let g = stats.gradient(&(&result.l_hat + &result.s_hat))?;

    let dec = matrix::svd(&result.l_hat)?;
    let rank = dec.rank(tol.rank);
    let residual_l = if lambdas.0 == 0.0 {
        operator_norm(&g)?
    } else {
        let m = &g * (-1.0 / lambdas.0);
        let u = dec.u.columns(0, rank).into_owned();
        let v = dec.vt.rows(0, rank).transpose();
        let ts = matrix::TangentSpaces::new(u.clone(), v.clone(), Vec::new(), 1e-6)?;
        let tangent = ts.project_tl(&m)? - &u * v.transpose();
        let normal = ts.project_tl_perp(&m)?;
        operator_norm(&tangent)? + (operator_norm(&normal)? - 1.0).max(0.0)
    };

    let residual_s = if lambdas.1 == 0.0 {
        linf_norm(&g)
    } else {
        let m = &g * (-1.0 / lambdas.1);
        let mut worst: f64 = 0.0;
        for (mij, sij) in m.iter().zip(result.s_hat.iter()) {
            let r = if *sij != 0.0 {
                (mij - sij.signum()).abs()
            } else {
                (mij.abs() - 1.0).max(0.0)
            };
            worst = worst.max(r);
        }
        worst
    };
    Ok(OptimalityReport {
        residual_l,
        residual_s,
        rank_l_hat: rank,
        passes: residual_l <= tol.certificate && residual_s <= tol.certificate,
    })
}
