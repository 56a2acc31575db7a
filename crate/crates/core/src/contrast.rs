//! Localized and truncated least-squares contrast
//! `ℓ_n(A) = (1/n) Σ_k 1{X_{k−1} ∈ B, ‖ΔX_k‖ ≤ η} ‖ΔX_k + A X_{k−1} Δn‖²`.
//!
//! The loss is an exact quadratic in `A`, so it is evaluated through three
//! sufficient statistics accumulated once per context:
//! `q = (1/n)Σ‖ΔX‖²`, `D = (1/n)Σ ΔX Xᵀ` and `C = (1/n)Σ X Xᵀ`, all over
//! active indices. Direct-sum evaluations are kept as cross-checks.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::levy::{JumpLaw, LevyRegime, ObservationSet, PathConfig};
use crate::matrix::{inner, Mat};
use crate::model::{lyapunov_stationary_cov, DriftModel};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationConfig {
    /// Radius of the centered Euclidean ball `B`.
    pub radius_b: f64,
    /// Increment truncation level.
    pub eta: f64,
}

impl LocalizationConfig {
    pub fn new(radius_b: f64, eta: f64) -> Result<Self> {
        let loc = Self { radius_b, eta };
        loc.validate()?;
        Ok(loc)
    }

    /// No localization and no truncation.
    pub fn unrestricted() -> Self {
        Self {
            radius_b: f64::INFINITY,
            eta: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_b > 0.0) || !(self.eta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radius_b and eta must be positive, got {} and {}",
                self.radius_b, self.eta
            )));
        }
        Ok(())
    }
}

/// Data-dependent choice of `(radius_b, eta)`.
///
/// `radius_b = radius_multiplier·√tr(C∞)` with `C∞` the stationary
/// covariance of the model (available in every regime because it depends on
/// `Z` only through its covariance rate), falling back to the empirical
/// second moment of the states. `eta = c_eta·√median‖ΔX‖²·f(Δn)` with the
/// regime factor `f` from [`eta_regime_factor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizationRule {
    pub radius_multiplier: f64,
    pub c_eta: f64,
    pub radius_b: Option<f64>,
    pub eta: Option<f64>,
}

impl Default for LocalizationRule {
    fn default() -> Self {
        Self {
            radius_multiplier: 3.0,
            c_eta: 4.0,
            radius_b: None,
            eta: None,
        }
    }
}

impl LocalizationRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_multiplier > 0.0) || !(self.c_eta > 0.0) {
            return Err(Error::Config("localization multipliers must be positive".into()));
        }
        if self.radius_b.is_some_and(|r| !(r > 0.0)) || self.eta.is_some_and(|e| !(e > 0.0)) {
            return Err(Error::Config("localization overrides must be positive".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, obs: &ObservationSet, model: &DriftModel, regime: &LevyRegime) -> Result<LocalizationConfig> {
        self.validate()?;
        let radius_b = match self.radius_b {
            Some(r) => r,
            None => self.radius_multiplier * stationary_scale(obs, model, regime),
        };
        let eta = match self.eta {
            Some(e) => e,
            None => {
                let sq: Vec<f64> = obs.increments.iter().map(|dx| dx.norm_squared()).collect();
                let scale = stats::median(&sq).sqrt();
                self.c_eta * scale * eta_regime_factor(&regime.law, obs.delta_n)
            }
        };
        if !(eta > 0.0) {
            return Err(Error::DegenerateLocalization);
        }
        LocalizationConfig::new(radius_b, eta)
    }
}

/// `√tr(C∞)`, or the root mean squared state norm when the Lyapunov system
/// cannot be solved.
fn stationary_scale(obs: &ObservationSet, model: &DriftModel, regime: &LevyRegime) -> f64 {
    match lyapunov_stationary_cov(&model.a0, &regime.instantaneous_cov()) {
        Ok(c) if c.trace() > 0.0 => c.trace().sqrt(),
        _ => {
            let m: f64 = obs.states.iter().map(|x| x.norm_squared()).sum::<f64>() / obs.states.len() as f64;
            m.sqrt()
        }
    }
}

/// Multiplier on the increment scale: `1` for continuous and bounded jumps,
/// `(log 1/Δn)^{1/α}` for sub-Weibull, `Δn^{1/p}` for `p`-th moment jumps.
pub fn eta_regime_factor(law: &JumpLaw, delta_n: f64) -> f64 {
    match *law {
        JumpLaw::Continuous | JumpLaw::BoundedJumps { .. } => 1.0,
        JumpLaw::SubWeibull { alpha } => (1.0 / delta_n).ln().max(1.0).powf(1.0 / alpha),
        JumpLaw::PolyMoment { p } => delta_n.powf(1.0 / p),
    }
}

/// Sufficient statistics of the contrast over active indices, each
/// normalized by the total count `n` (not by the active count).
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastStats {
    pub d: usize,
    pub n: usize,
    pub delta_n: f64,
    /// `(1/n) Σ ‖ΔX_k‖²`.
    pub q: f64,
    /// `(1/n) Σ ΔX_k X_{k−1}ᵀ`.
    pub d_n: Mat,
    /// `C_{n,B,η} = (1/n) Σ X_{k−1} X_{k−1}ᵀ`.
    pub c_n: Mat,
    pub n_active: usize,
}

impl ContrastStats {
    /// Accumulates over the given active `(X_{k−1}, ΔX_k)` pairs; `n` is the
    /// total number of increments including inactive ones.
    pub fn from_pairs<'a, I>(d: usize, n: usize, delta_n: f64, pairs: I) -> Self
    where
        I: Iterator<Item = (&'a DVector<f64>, &'a DVector<f64>)>,
    {
        let mut q = 0.0;
        let mut d_n = Mat::zeros(d, d);
        let mut c_n = Mat::zeros(d, d);
        let mut n_active = 0;
        for (x, dx) in pairs {
            q += dx.norm_squared();
            d_n.ger(1.0, dx, x, 1.0);
            c_n.syger(1.0, x, x, 1.0);
            n_active += 1;
        }
        // syger fills the lower triangle only.
        c_n.fill_upper_triangle_with_lower_triangle();
        let scale = 1.0 / n as f64;
        Self {
            d,
            n,
            delta_n,
            q: q * scale,
            d_n: d_n * scale,
            c_n: c_n * scale,
            n_active,
        }
    }

    /// `ℓ(A) = q + 2Δn⟨A, D⟩ + Δn² tr(A C Aᵀ)`.
    pub fn loss(&self, a: &Mat) -> Result<f64> {
        self.check(a)?;
        let dn = self.delta_n;
        let ac = a * &self.c_n;
        Ok((self.q + 2.0 * dn * inner(a, &self.d_n) + dn * dn * inner(&ac, a)).max(0.0))
    }

    /// `∇ℓ(A) = 2Δn D + 2Δn² A C`.
    pub fn gradient(&self, a: &Mat) -> Result<Mat> {
        self.check(a)?;
        let dn = self.delta_n;
        Ok(&self.d_n * (2.0 * dn) + a * &self.c_n * (2.0 * dn * dn))
    }

    /// `‖A‖²_{n,B,η} = tr(A C Aᵀ)`.
    pub fn empirical_norm_sq(&self, a: &Mat) -> Result<f64> {
        self.check(a)?;
        Ok(inner(&(a * &self.c_n), a).max(0.0))
    }

    /// Multiplies the loss by `c > 0`; used to test scaling covariance.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            q: self.q * c,
            d_n: &self.d_n * c,
            c_n: &self.c_n * c,
            ..self.clone()
        }
    }

    /// Smoothness constant of the loss: `2Δn² λ_max(C)`.
    pub fn lipschitz(&self) -> Result<f64> {
        let eig = crate::matrix::symmetric_eigenvalues(&self.c_n)?;
        let lmax = eig.last().copied().unwrap_or(0.0).max(0.0);
        Ok(2.0 * self.delta_n * self.delta_n * lmax)
    }

    fn check(&self, a: &Mat) -> Result<()> {
        if a.shape() != (self.d, self.d) {
            return Err(dim_err(format!("{0}x{0}", self.d), format!("{:?}", a.shape())));
        }
        Ok(())
    }
}

/// Observations together with the localization mask and the statistics.
#[derive(Debug, Clone)]
pub struct ContrastContext<'a> {
    pub obs: &'a ObservationSet,
    pub loc: LocalizationConfig,
    pub active: Vec<bool>,
    pub stats: ContrastStats,
}

pub fn build_context(obs: &ObservationSet, loc: LocalizationConfig) -> Result<ContrastContext<'_>> {
    loc.validate()?;
    if obs.n() == 0 {
        return Err(Error::InvalidArgument("empty observation set".into()));
    }
    let active: Vec<bool> = (0..obs.n())
        .map(|k| obs.states[k].norm() <= loc.radius_b && obs.increments[k].norm() <= loc.eta)
        .collect();
    let pairs = (0..obs.n())
        .filter(|&k| active[k])
        .map(|k| (&obs.states[k], &obs.increments[k]));
    let stats = ContrastStats::from_pairs(obs.d, obs.n(), obs.delta_n, pairs);
    if stats.n_active == 0 {
        return Err(Error::DegenerateLocalization);
    }
    Ok(ContrastContext {
        obs,
        loc,
        active,
        stats,
    })
}

impl ContrastContext<'_> {
    pub fn d(&self) -> usize {
        self.stats.d
    }

    pub fn n_active(&self) -> usize {
        self.stats.n_active
    }

    pub fn c_n(&self) -> &Mat {
        &self.stats.c_n
    }

    pub fn loss(&self, a: &Mat) -> Result<f64> {
        self.stats.loss(a)
    }

    pub fn gradient(&self, a: &Mat) -> Result<Mat> {
        self.stats.gradient(a)
    }

    pub fn empirical_norm_sq(&self, a: &Mat) -> Result<f64> {
        self.stats.empirical_norm_sq(a)
    }

    fn active_pairs(&self) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>)> {
        (0..self.obs.n())
            .filter(|&k| self.active[k])
            .map(|k| (&self.obs.states[k], &self.obs.increments[k]))
    }

    /// The contrast summed term by term.
    pub fn loss_direct(&self, a: &Mat) -> Result<f64> {
        self.stats.check(a)?;
        let dn = self.obs.delta_n;
        let total: f64 = self
            .active_pairs()
            .map(|(x, dx)| (dx + a * x * dn).norm_squared())
            .sum();
        Ok(total / self.obs.n() as f64)
    }

    /// `(2Δn/n) Σ (ΔX_k + A X_{k−1} Δn) X_{k−1}ᵀ` summed term by term.
    pub fn gradient_direct(&self, a: &Mat) -> Result<Mat> {
        self.stats.check(a)?;
        let dn = self.obs.delta_n;
        let mut g = Mat::zeros(self.d(), self.d());
        for (x, dx) in self.active_pairs() {
            let resid = dx + a * x * dn;
            g.ger(1.0, &resid, x, 1.0);
        }
        Ok(g * (2.0 * dn / self.obs.n() as f64))
    }

    /// `(1/n) Σ ‖A X_{k−1}‖²` summed term by term.
    pub fn empirical_norm_sq_direct(&self, a: &Mat) -> Result<f64> {
        self.stats.check(a)?;
        let total: f64 = self.active_pairs().map(|(x, _)| (a * x).norm_squared()).sum();
        Ok(total / self.obs.n() as f64)
    }

    /// Trace form, after confirming it agrees with the direct sum to `tol`
    /// relative to the larger of the two values.
    pub fn empirical_norm_sq_checked(&self, a: &Mat, tol: f64) -> Result<f64> {
        let trace_form = self.empirical_norm_sq(a)?;
        let direct = self.empirical_norm_sq_direct(a)?;
        if (trace_form - direct).abs() > tol * trace_form.max(direct).max(1.0) {
            return Err(Error::Numerical(format!(
                "empirical norm forms disagree: {trace_form} vs {direct}"
            )));
        }
        Ok(trace_form)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscBiasConfig {
    pub replicates: usize,
    pub substeps: usize,
    pub seed: u64,
    /// Burn-in override forwarded to [`PathConfig`].
    pub burn_in_time: Option<f64>,
}

impl Default for DiscBiasConfig {
    fn default() -> Self {
        Self {
            replicates: 20,
            substeps: 10,
            seed: 0,
            burn_in_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscBiasRow {
    pub delta_n: f64,
    /// Mean over replicates of `ℓ_n(A₀)/Δn`.
    pub mean_loss_rate: f64,
    /// Standard error of `mean_loss_rate`.
    pub std_error: f64,
    /// `Δn·|mean_loss_rate − limit|`.
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscBiasTable {
    pub rows: Vec<DiscBiasRow>,
    /// Extrapolated `Δn → 0` value of the loss rate.
    pub limit: f64,
    /// Log-log slope of estimate against `Δn`; `None` with fewer than two
    /// meshes or any zero estimate.
    pub slope: Option<f64>,
}

/// Monte-Carlo discretization bias of the contrast at the truth.
///
/// For each mesh, `ℓ_n(A₀)/Δn` is averaged over independent stationary paths
/// of horizon `t_fixed`. Its `Δn → 0` limit is extrapolated by least squares
/// (quadratic in `Δn` with three or more meshes, linear with two), and the
/// reported estimate is `Δn·|m(Δn) − m₀|`, the bias of `E ℓ_n(A₀)` relative
/// to its continuous-time noise level.
pub fn estimate_disc_bias(
    model: &DriftModel,
    regime: &LevyRegime,
    loc: &LocalizationConfig,
    delta_list: &[f64],
    t_fixed: f64,
    cfg: &DiscBiasConfig,
) -> Result<DiscBiasTable> {
    if delta_list.is_empty() {
        return Err(Error::InvalidArgument("delta_list must be nonempty".into()));
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be positive".into()));
    }
    if !(t_fixed > 0.0) {
        return Err(Error::InvalidArgument("t_fixed must be positive".into()));
    }
    let mut rows = Vec::with_capacity(delta_list.len());
    for (mi, &dn) in delta_list.iter().enumerate() {
        let rates: Result<Vec<f64>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let seed = crate::experiment::derive_seed(cfg.seed, mi as u64, rep as u64);
                let mut pc = PathConfig::for_horizon(t_fixed, dn, cfg.substeps, seed);
                pc.burn_in_time = cfg.burn_in_time;
                let obs = crate::levy::simulate_path(model, regime, &pc)?;
                let ctx = build_context(&obs, *loc)?;
                Ok(ctx.loss(&model.a0)? / dn)
            })
            .collect();
        let rates = rates?;
        let std_error = stats::std_dev(&rates) / (rates.len() as f64).sqrt();
        rows.push(DiscBiasRow {
            delta_n: dn,
            mean_loss_rate: stats::mean(&rates),
            std_error,
            estimate: 0.0,
        });
    }

    let limit = extrapolate_to_zero(&rows);
    for row in &mut rows {
        row.estimate = row.delta_n * (row.mean_loss_rate - limit).abs();
    }
    let slope = if rows.len() >= 2 && rows.iter().all(|r| r.estimate > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| r.delta_n).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
        stats::log_log_slope(&x, &y)
    } else {
        None
    };
    Ok(DiscBiasTable { rows, limit, slope })
}

/// Intercept of a least-squares polynomial in `Δn`; a single mesh is its
/// own limit.
fn extrapolate_to_zero(rows: &[DiscBiasRow]) -> f64 {
    let degree = match rows.len() {
        0 | 1 => return rows.first().map(|r| r.mean_loss_rate).unwrap_or(0.0),
        2 => 1,
        _ => 2,
    };
    let design = Mat::from_fn(rows.len(), degree + 1, |i, j| rows[i].delta_n.powi(j as i32));
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.mean_loss_rate));
    let normal = design.transpose() * &design;
    let rhs = design.transpose() * y;
    match normal.lu().solve(&rhs) {
        Some(beta) => beta[0],
        None => rows[0].mean_loss_rate,
    }
}
