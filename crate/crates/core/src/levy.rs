//! Background driving Lévy processes in four tail regimes and Euler–Maruyama
//! simulation of the OU path `dX = −A₀X dt + dZ`.

use std::io::{BufRead, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::matrix::{mat_serde, Mat};
use crate::model::DriftModel;
use crate::stats;

/// Jump-size law of the compound-Poisson part. All laws use a uniformly
/// random direction, so every jump has mean zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum JumpLaw {
    /// Brownian motion only; jump fields are ignored.
    Continuous,
    /// Radius `min(jump_scale·U, z0)` with `U ~ Uniform(0, 1)`.
    BoundedJumps { z0: f64 },
    /// Radius `jump_scale·W^{1/alpha}` with `W ~ Exp(1)`.
    SubWeibull { alpha: f64 },
    /// Pareto radius with scale `jump_scale` and tail index `p + 1/2`:
    /// the `p`-th moment exists, the `(p + 1/2)`-th does not.
    PolyMoment { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    Continuous,
    BoundedJumps,
    SubWeibull,
    PolyMoment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyRegime {
    #[serde(flatten)]
    pub law: JumpLaw,
    /// Brownian covariance factor; `Z` has Gaussian part `sigma·W`.
    #[serde(with = "mat_serde")]
    pub sigma: Mat,
    /// Compound-Poisson intensity per unit time.
    pub jump_rate: f64,
    pub jump_scale: f64,
}

impl LevyRegime {
    pub fn continuous(sigma: Mat) -> Self {
        Self {
            law: JumpLaw::Continuous,
            sigma,
            jump_rate: 0.0,
            jump_scale: 1.0,
        }
    }

    pub fn with_jumps(law: JumpLaw, sigma: Mat, jump_rate: f64, jump_scale: f64) -> Self {
        Self {
            law,
            sigma,
            jump_rate,
            jump_scale,
        }
    }

    pub fn tag(&self) -> RegimeTag {
        match self.law {
            JumpLaw::Continuous => RegimeTag::Continuous,
            JumpLaw::BoundedJumps { .. } => RegimeTag::BoundedJumps,
            JumpLaw::SubWeibull { .. } => RegimeTag::SubWeibull,
            JumpLaw::PolyMoment { .. } => RegimeTag::PolyMoment,
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn has_jumps(&self) -> bool {
        !matches!(self.law, JumpLaw::Continuous) && self.jump_rate > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.nrows() != self.sigma.ncols() {
            return Err(dim_err("square sigma", format!("{:?}", self.sigma.shape())));
        }
        crate::matrix::check_finite(&self.sigma)?;
        if !(self.jump_rate >= 0.0) || !self.jump_rate.is_finite() {
            return Err(Error::InvalidArgument("jump_rate must be finite and >= 0".into()));
        }
        if !(self.jump_scale > 0.0) {
            return Err(Error::InvalidArgument("jump_scale must be positive".into()));
        }
        match self.law {
            JumpLaw::Continuous => {}
            JumpLaw::BoundedJumps { z0 } if !(z0 > 0.0) => {
                return Err(Error::InvalidArgument("z0 must be positive".into()))
            }
            JumpLaw::SubWeibull { alpha } if !(alpha > 0.0) => {
                return Err(Error::InvalidArgument("alpha must be positive".into()))
            }
            JumpLaw::PolyMoment { p } if !(p > 2.0) => {
                return Err(Error::InvalidArgument("moment order p must exceed 2".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// `E[R²]` for the jump radius.
    pub fn jump_second_moment(&self) -> f64 {
        let c = self.jump_scale;
        match self.law {
            JumpLaw::Continuous => 0.0,
            JumpLaw::BoundedJumps { z0 } => {
                if c <= z0 {
                    c * c / 3.0
                } else {
                    z0 * z0 - 2.0 / 3.0 * z0.powi(3) / c
                }
            }
            JumpLaw::SubWeibull { alpha } => c * c * statrs::function::gamma::gamma(1.0 + 2.0 / alpha),
            JumpLaw::PolyMoment { p } => {
                let index = p + 0.5;
                c * c * index / (index - 2.0)
            }
        }
    }

    /// Covariance rate of `Z`: `Cov(Z_t) = t · instantaneous_cov()`.
    pub fn instantaneous_cov(&self) -> Mat {
        let d = self.dim();
        let mut cov = &self.sigma * self.sigma.transpose();
        if self.has_jumps() {
            let iso = self.jump_rate * self.jump_second_moment() / d as f64;
            for i in 0..d {
                cov[(i, i)] += iso;
            }
        }
        cov
    }

    /// One jump: uniform direction times a radius drawn from the law.
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.add_jump(rng, &mut out);
        out
    }

    fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let c = self.jump_scale;
        match self.law {
            JumpLaw::Continuous => 0.0,
            JumpLaw::BoundedJumps { z0 } => (c * rng.random::<f64>()).min(z0),
            JumpLaw::SubWeibull { alpha } => {
                let w: f64 = Exp1.sample(rng);
                c * w.powf(1.0 / alpha)
            }
            JumpLaw::PolyMoment { p } => {
                // 1 - U lies in (0, 1], so the radius is finite and >= c.
                let u = 1.0 - rng.random::<f64>();
                c * u.powf(-1.0 / (p + 0.5))
            }
        }
    }

    fn add_jump<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut DVector<f64>) {
        let d = out.len();
        let mut dir: DVector<f64> = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
        let mut norm = dir.norm();
        while norm == 0.0 {
            dir = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
            norm = dir.norm();
        }
        let radius = self.sample_radius(rng);
        let mut jump = dir * (radius / norm);
        if let JumpLaw::BoundedJumps { z0 } = self.law {
            // rounding in the direction normalization can overshoot z0 by an ulp
            while jump.norm() > z0 {
                jump *= 1.0 - f64::EPSILON;
            }
        }
        *out += jump;
    }
}

/// Draws increments of `Z` over a fixed step; built once per path so the
/// Poisson law and the scaled Brownian factor are not rebuilt every step.
pub struct IncrementSampler<'a> {
    regime: &'a LevyRegime,
    scaled_sigma: Mat,
    diagonal_sigma: Option<Vec<f64>>,
    poisson: Option<Poisson<f64>>,
    normals: DVector<f64>,
}

impl<'a> IncrementSampler<'a> {
    pub fn new(regime: &'a LevyRegime, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
        }
        regime.validate()?;
        let d = regime.dim();
        let scaled_sigma = &regime.sigma * dt.sqrt();
        let is_diag = (0..d).all(|i| (0..d).all(|j| i == j || scaled_sigma[(i, j)] == 0.0));
        let diagonal_sigma = is_diag.then(|| (0..d).map(|i| scaled_sigma[(i, i)]).collect());
        let poisson = if regime.has_jumps() {
            Some(
                Poisson::new(regime.jump_rate * dt)
                    .map_err(|e| Error::InvalidArgument(format!("jump intensity: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            regime,
            scaled_sigma,
            diagonal_sigma,
            poisson,
            normals: DVector::zeros(d),
        })
    }

    /// Writes one increment into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut DVector<f64>) {
        for g in self.normals.iter_mut() {
            *g = rng.sample(StandardNormal);
        }
        match &self.diagonal_sigma {
            Some(diag) => {
                for ((o, g), s) in out.iter_mut().zip(self.normals.iter()).zip(diag) {
                    *o = s * g;
                }
            }
            None => out.gemv(1.0, &self.scaled_sigma, &self.normals, 0.0),
        }
        if let Some(pois) = &self.poisson {
            let count = pois.sample(rng) as u64;
            for _ in 0..count {
                self.regime.add_jump(rng, out);
            }
        }
    }
}

/// One increment of `Z` over `dt`.
pub fn sample_levy_increment<R: Rng + ?Sized>(regime: &LevyRegime, dt: f64, rng: &mut R) -> Result<DVector<f64>> {
    let mut sampler = IncrementSampler::new(regime, dt)?;
    let mut out = DVector::zeros(regime.dim());
    sampler.sample_into(rng, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    /// Observation mesh Δn.
    pub delta_n: f64,
    pub n_obs: usize,
    /// Euler steps per observation interval.
    pub substeps: usize,
    /// Burn-in duration; `None` means `10 / stability_margin`.
    pub burn_in_time: Option<f64>,
    pub seed: u64,
    /// Starting state for the burn-in (zero when absent).
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_overflow_guard")]
    pub overflow_guard: f64,
}

fn default_overflow_guard() -> f64 {
    crate::tolerances::Tolerances::default().overflow_guard
}

impl PathConfig {
    pub fn new(delta_n: f64, n_obs: usize, substeps: usize, seed: u64) -> Self {
        Self {
            delta_n,
            n_obs,
            substeps,
            burn_in_time: None,
            seed,
            x0: None,
            overflow_guard: default_overflow_guard(),
        }
    }

    /// Smallest `n` with `n·Δn ≥ horizon`.
    pub fn for_horizon(horizon: f64, delta_n: f64, substeps: usize, seed: u64) -> Self {
        let n = (horizon / delta_n - 1e-9).ceil().max(1.0) as usize;
        Self::new(delta_n, n, substeps, seed)
    }

    pub fn horizon(&self) -> f64 {
        self.n_obs as f64 * self.delta_n
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_n > 0.0) || !self.delta_n.is_finite() {
            return Err(Error::InvalidArgument("delta_n must be positive".into()));
        }
        if self.n_obs == 0 {
            return Err(Error::InvalidArgument("n_obs must be positive".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("substeps must be at least 1".into()));
        }
        if let Some(b) = self.burn_in_time {
            if !(b >= 0.0) {
                return Err(Error::InvalidArgument("burn_in_time must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Discrete observations `X_{t_0}, …, X_{t_n}` on an equidistant mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub d: usize,
    pub delta_n: f64,
    pub states: Vec<DVector<f64>>,
    /// `increments[k] = states[k + 1] − states[k]`.
    pub increments: Vec<DVector<f64>>,
}

impl ObservationSet {
    pub fn from_states(delta_n: f64, states: Vec<DVector<f64>>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::InvalidArgument("need at least two states".into()));
        }
        if !(delta_n > 0.0) {
            return Err(Error::InvalidArgument("delta_n must be positive".into()));
        }
        let d = states[0].len();
        for (k, x) in states.iter().enumerate() {
            if x.len() != d {
                return Err(dim_err(format!("state of length {d}"), format!("length {} at {k}", x.len())));
            }
            if let Some(i) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: k, col: i });
            }
        }
        let increments = states.windows(2).map(|w| &w[1] - &w[0]).collect();
        Ok(Self {
            d,
            delta_n,
            states,
            increments,
        })
    }

    /// Number of increments.
    pub fn n(&self) -> usize {
        self.increments.len()
    }

    pub fn horizon(&self) -> f64 {
        self.n() as f64 * self.delta_n
    }

    /// Writes the replay layout: a `d,n,delta_n` header block followed by
    /// one `t_k, x_1, …, x_d` row per state.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        wtr.write_record(["d", "n", "delta_n"])?;
        wtr.write_record([self.d.to_string(), self.n().to_string(), self.delta_n.to_string()])?;
        let mut header = vec!["t".to_string()];
        header.extend((0..self.d).map(|i| format!("x{i}")));
        wtr.write_record(&header)?;
        for (k, x) in self.states.iter().enumerate() {
            let mut row = Vec::with_capacity(self.d + 1);
            row.push((k as f64 * self.delta_n).to_string());
            row.extend(x.iter().map(|v| v.to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(r);
        let mut records = rdr.records();
        let mut next = || -> Result<csv::StringRecord> {
            records
                .next()
                .ok_or_else(|| Error::InvalidArgument("truncated observation file".into()))?
                .map_err(Error::from)
        };
        let _ = next()?;
        let meta = next()?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")))
        };
        if meta.len() != 3 {
            return Err(Error::InvalidArgument("metadata row must have 3 fields".into()));
        }
        let d = parse(&meta[0])? as usize;
        let n = parse(&meta[1])? as usize;
        let delta_n = parse(&meta[2])?;
        let _ = next()?;
        let mut states = Vec::with_capacity(n + 1);
        for rec in records {
            let rec = rec?;
            if rec.len() != d + 1 {
                return Err(dim_err(format!("{} fields", d + 1), format!("{} fields", rec.len())));
            }
            let x: Result<Vec<f64>> = rec.iter().skip(1).map(parse).collect();
            states.push(DVector::from_vec(x?));
        }
        if states.len() != n + 1 {
            return Err(dim_err(format!("{} states", n + 1), format!("{} states", states.len())));
        }
        Self::from_states(delta_n, states)
    }
}

/// Euler–Maruyama on the fine grid `dt = Δn / substeps`, after a burn-in
/// run of the same dynamics; every `substeps`-th fine state is recorded.
pub fn simulate_path(model: &DriftModel, regime: &LevyRegime, cfg: &PathConfig) -> Result<ObservationSet> {
    cfg.validate()?;
    let d = model.d;
    if regime.dim() != d {
        return Err(dim_err(format!("regime of dimension {d}"), format!("{}", regime.dim())));
    }
    let dt = cfg.delta_n / cfg.substeps as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sampler = IncrementSampler::new(regime, dt)?;

    let mut x = match &cfg.x0 {
        Some(v) if v.len() != d => return Err(dim_err(format!("x0 of length {d}"), format!("{}", v.len()))),
        Some(v) => DVector::from_column_slice(v),
        None => DVector::zeros(d),
    };
    // x ← (I − A dt) x + dZ
    let step_matrix = Mat::identity(d, d) - &model.a0 * dt;
    let mut next = DVector::zeros(d);
    let mut dz = DVector::zeros(d);
    let guard = cfg.overflow_guard;
    let blowup = |step| Error::UnstableSimulation {
        step,
        dt,
        stability_margin: model.stability_margin,
    };

    let burn_in = cfg.burn_in_time.unwrap_or(10.0 / model.stability_margin);
    let burn_steps = (burn_in / dt).ceil() as usize;
    let mut advance = |x: &mut DVector<f64>, step: usize| -> Result<()> {
        sampler.sample_into(&mut rng, &mut dz);
        next.gemv(1.0, &step_matrix, x, 0.0);
        next += &dz;
        std::mem::swap(x, &mut next);
        if !x.iter().all(|v| v.is_finite() && v.abs() <= guard) {
            return Err(blowup(step));
        }
        Ok(())
    };
    for step in 0..burn_steps {
        advance(&mut x, step)?;
    }
    let mut states = Vec::with_capacity(cfg.n_obs + 1);
    states.push(x.clone());
    for k in 0..cfg.n_obs {
        for j in 0..cfg.substeps {
            advance(&mut x, burn_steps + k * cfg.substeps + j)?;
        }
        states.push(x.clone());
    }
    ObservationSet::from_states(cfg.delta_n, states)
}

/// `(1/n) Σ_k ‖ΔX_k‖² 1{‖ΔX_k‖ > eta}`.
pub fn empirical_trunc_moment(obs: &ObservationSet, eta: f64) -> f64 {
    let total: f64 = obs
        .increments
        .iter()
        .map(|dx| dx.norm_squared())
        .filter(|&sq| sq.sqrt() > eta)
        .sum();
    total / obs.n() as f64
}

/// Log-survival diagnostic for a sub-Weibull sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    /// Slope of `ln(−ln S(t))` against `ln t` on the sampled grid.
    pub slope: f64,
    pub monotone: bool,
    pub passes: bool,
}

/// Checks that `−ln P(R > t)` grows at least like `t^alpha`: the empirical
/// log-survival must be non-decreasing along a grid between the median and
/// the 99.9% quantile, with log-log slope at least `0.9·alpha`.
pub fn log_survival_check(norms: &[f64], alpha: f64) -> TailCheck {
    let mut sorted = norms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let lo = stats::quantile(&sorted, 0.5);
    let hi = stats::quantile(&sorted, 0.999);
    let points = 20;
    let mut xs = Vec::with_capacity(points);
    let mut ys = Vec::with_capacity(points);
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..points {
        let t = lo * (hi / lo).powf(i as f64 / (points - 1) as f64);
        let above = sorted.len() - sorted.partition_point(|&v| v <= t);
        let surv = above as f64 / n;
        if surv <= 0.0 {
            break;
        }
        let y = -surv.ln();
        if y < prev {
            monotone = false;
        }
        prev = y;
        if y > 0.0 {
            xs.push(t.ln());
            ys.push(y.ln());
        }
    }
    let slope = stats::linear_fit(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN);
    TailCheck {
        slope,
        monotone,
        passes: monotone && slope >= 0.9 * alpha,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub moment_half: f64,
    pub moment_full: f64,
    pub ratio: f64,
    pub passes: bool,
}

/// Empirical `p`-th moment on the first half of the sample versus the whole
/// sample; stable when the ratio lies in `[0.5, 2]`.
pub fn moment_stability(norms: &[f64], p: f64) -> MomentCheck {
    let half = norms.len() / 2;
    let moment = |xs: &[f64]| xs.iter().map(|x| x.powf(p)).sum::<f64>() / xs.len() as f64;
    let moment_half = moment(&norms[..half]);
    let moment_full = moment(norms);
    let ratio = moment_full / moment_half;
    MomentCheck {
        moment_half,
        moment_full,
        ratio,
        passes: moment_half.is_finite() && moment_full.is_finite() && (0.5..=2.0).contains(&ratio),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_drift, lyapunov_stationary_cov};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn all_regimes(d: usize) -> Vec<LevyRegime> {
        let sigma = Mat::identity(d, d) * 0.5;
        vec![
            LevyRegime::continuous(Mat::identity(d, d)),
            LevyRegime::with_jumps(JumpLaw::BoundedJumps { z0: 1.0 }, sigma.clone(), 2.0, 1.5),
            LevyRegime::with_jumps(JumpLaw::SubWeibull { alpha: 1.0 }, sigma.clone(), 2.0, 0.5),
            LevyRegime::with_jumps(JumpLaw::PolyMoment { p: 4.0 }, sigma, 2.0, 0.3),
        ]
    }

    #[test]
    fn zero_sigma_continuous_gives_zero() {
        let reg = LevyRegime::continuous(Mat::zeros(3, 3));
        let mut r = rng(1);
        for _ in 0..100 {
            assert_eq!(sample_levy_increment(&reg, 0.1, &mut r).unwrap(), DVector::zeros(3));
        }
        assert!(sample_levy_increment(&reg, 0.0, &mut r).is_err());
        assert!(sample_levy_increment(&reg, -1.0, &mut r).is_err());
    }

    #[test]
    fn brownian_moments() {
        let d = 3;
        let reg = LevyRegime::continuous(Mat::identity(d, d));
        let mut sampler = IncrementSampler::new(&reg, 1.0).unwrap();
        let mut r = rng(2);
        let n = 100_000;
        let mut mean = DVector::zeros(d);
        let mut cov = Mat::zeros(d, d);
        let mut x = DVector::zeros(d);
        for _ in 0..n {
            sampler.sample_into(&mut r, &mut x);
            mean += &x;
            cov += &x * x.transpose();
        }
        mean /= n as f64;
        cov /= n as f64;
        assert!(mean.iter().all(|m| m.abs() < 0.02));
        let rel = (cov - Mat::identity(d, d)).abs().max();
        assert!(rel < 0.05, "covariance deviation {rel}");
    }

    #[test]
    fn bounded_jumps_respect_z0() {
        let reg = LevyRegime::with_jumps(JumpLaw::BoundedJumps { z0: 1.0 }, Mat::zeros(4, 4), 1.0, 3.0);
        let mut r = rng(3);
        let max = (0..200_000).map(|_| reg.sample_jump(&mut r).norm()).fold(0.0, f64::max);
        assert!(max <= 1.0 + 1e-12);
    }

    #[test]
    fn martingale_mean_and_variance_scaling() {
        for reg in all_regimes(3) {
            let n = 100_000;
            let moments = |dt: f64, seed: u64| {
                let mut sampler = IncrementSampler::new(&reg, dt).unwrap();
                let mut r = rng(seed);
                let mut x = DVector::zeros(3);
                let mut sum = DVector::zeros(3);
                let mut sq = DVector::zeros(3);
                for _ in 0..n {
                    sampler.sample_into(&mut r, &mut x);
                    sum += &x;
                    sq += x.component_mul(&x);
                }
                (sum / n as f64, sq / n as f64)
            };
            let (m1, v1) = moments(0.2, 10);
            let (_, v2) = moments(0.1, 11);
            for i in 0..3 {
                let sd = (v1[i] - m1[i] * m1[i]).sqrt();
                assert!(m1[i].abs() <= 3.0 * sd / (n as f64).sqrt(), "{:?} mean {}", reg.law, m1[i]);
                let ratio = v1[i] / v2[i];
                assert!((ratio - 2.0).abs() < 0.2, "{:?} variance ratio {ratio}", reg.law);
                let want = reg.instantaneous_cov()[(i, i)] * 0.2;
                assert!((v1[i] / want - 1.0).abs() < 0.1, "{:?} variance {} vs {want}", reg.law, v1[i]);
            }
        }
    }

    #[test]
    fn sub_weibull_survival() {
        let reg = LevyRegime::with_jumps(JumpLaw::SubWeibull { alpha: 0.7 }, Mat::zeros(2, 2), 1.0, 1.0);
        let mut r = rng(4);
        let norms: Vec<f64> = (0..200_000).map(|_| reg.sample_jump(&mut r).norm()).collect();
        let check = log_survival_check(&norms, 0.7);
        assert!(check.passes, "{check:?}");
        assert!((check.slope - 0.7).abs() < 0.1);
    }

    #[test]
    fn poly_moment_stability() {
        let reg = LevyRegime::with_jumps(JumpLaw::PolyMoment { p: 3.0 }, Mat::zeros(2, 2), 1.0, 1.0);
        let mut r = rng(5);
        let norms: Vec<f64> = (0..200_000).map(|_| reg.sample_jump(&mut r).norm()).collect();
        let check = moment_stability(&norms, 3.0);
        assert!(check.passes, "{check:?}");
        assert!(norms.iter().all(|&x| x >= 1.0));
    }

    #[test]
    fn regime_validation() {
        let bad = LevyRegime::with_jumps(JumpLaw::PolyMoment { p: 2.0 }, Mat::identity(2, 2), 1.0, 1.0);
        assert!(bad.validate().is_err());
        let bad = LevyRegime::with_jumps(JumpLaw::BoundedJumps { z0: 0.0 }, Mat::identity(2, 2), 1.0, 1.0);
        assert!(bad.validate().is_err());
        let bad = LevyRegime::with_jumps(JumpLaw::SubWeibull { alpha: 1.0 }, Mat::identity(2, 2), -1.0, 1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn regime_json_round_trip() {
        for reg in all_regimes(2) {
            let text = serde_json::to_string(&reg).unwrap();
            let back: LevyRegime = serde_json::from_str(&text).unwrap();
            assert_eq!(back, reg);
        }
    }

    #[test]
    fn noiseless_path_follows_the_euler_recursion() {
        let mut model = generate_drift(2, 0, 0, 1, 0.1).unwrap();
        let a = 0.8;
        model.a0 = Mat::identity(2, 2) * a;
        let reg = LevyRegime::continuous(Mat::zeros(2, 2));
        let mut cfg = PathConfig::new(0.1, 20, 5, 3);
        cfg.burn_in_time = Some(0.0);
        cfg.x0 = Some(vec![1.0, -2.0]);
        let obs = simulate_path(&model, &reg, &cfg).unwrap();
        let factor = (1.0 - a * 0.02f64).powi(5);
        for k in 0..=20 {
            let want = factor.powi(k as i32);
            assert!((obs.states[k][0] - want).abs() < 1e-12);
            assert!((obs.states[k][1] + 2.0 * want).abs() < 1e-12);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let model = generate_drift(3, 1, 2, 4, 0.5).unwrap();
        for reg in all_regimes(3) {
            let cfg = PathConfig::new(0.05, 200, 4, 99);
            let a = simulate_path(&model, &reg, &cfg).unwrap();
            let b = simulate_path(&model, &reg, &cfg).unwrap();
            assert_eq!(a, b);
            for k in 0..a.n() {
                assert_eq!(a.increments[k], &a.states[k + 1] - &a.states[k]);
            }
        }
    }

    #[test]
    fn stiff_drift_blows_up_with_a_typed_error() {
        let mut model = generate_drift(2, 0, 0, 1, 0.1).unwrap();
        model.a0 = Mat::identity(2, 2) * 500.0;
        let reg = LevyRegime::continuous(Mat::identity(2, 2));
        let mut cfg = PathConfig::new(0.1, 100, 1, 1);
        cfg.burn_in_time = Some(0.0);
        assert!(matches!(
            simulate_path(&model, &reg, &cfg),
            Err(Error::UnstableSimulation { .. })
        ));
    }

    #[test]
    fn stationary_covariance_matches_lyapunov() {
        let mut model = generate_drift(2, 0, 0, 1, 0.1).unwrap();
        model.a0 = Mat::identity(2, 2);
        model.stability_margin = 1.0;
        let reg = LevyRegime::continuous(Mat::identity(2, 2));
        let cfg = PathConfig::for_horizon(1000.0, 0.1, 10, 8);
        let obs = simulate_path(&model, &reg, &cfg).unwrap();
        let mut cov = Mat::zeros(2, 2);
        for x in &obs.states {
            cov += x * x.transpose();
        }
        cov /= obs.states.len() as f64;
        let target = lyapunov_stationary_cov(&model.a0, &Mat::identity(2, 2)).unwrap();
        let rel = (cov - &target).norm() / target.norm();
        assert!(rel < 0.1, "relative error {rel}");
    }

    #[test]
    fn trunc_moment_examples() {
        let states = vec![
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![3.0]),
            DVector::from_vec(vec![6.0]),
        ];
        let obs = ObservationSet::from_states(1.0, states).unwrap();
        assert_eq!(empirical_trunc_moment(&obs, 10.0), 0.0);
        assert!((empirical_trunc_moment(&obs, 1.5) - 13.0 / 3.0).abs() < 1e-15);
        assert!((empirical_trunc_moment(&obs, 1e-12) - 14.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let model = generate_drift(3, 1, 2, 4, 0.5).unwrap();
        let reg = LevyRegime::continuous(Mat::identity(3, 3));
        let obs = simulate_path(&model, &reg, &PathConfig::new(0.1, 30, 2, 1)).unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let back = ObservationSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, obs);
        assert!(ObservationSet::read_csv(&b"d,n,delta_n\n3,30,0.1\n"[..]).is_err());
    }
}
