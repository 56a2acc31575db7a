//! Certificates and diagnostics behind the oracle inequality: error-cone
//! membership, dual-norm gradient bounds, restricted strong convexity,
//! error metrics and the empirical rate fit.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::contrast::{build_context, ContrastContext, LocalizationConfig};
use crate::error::{dim_err, Error, Result};
use crate::levy::{simulate_path, LevyRegime, PathConfig};
use crate::matrix::{l1_norm, linf_norm, nuclear_norm, numerical_rank, operator_norm, symmetric_eigenvalues, Mat, TangentSpaces};
use crate::model::DriftModel;
use crate::solver::EstimateResult;
use crate::stats::{self, LinearFit};

/// Off-tangent to tangent ratio bound defining the error cone.
pub const CONE_CONSTANT: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    /// `‖P_{T_L⊥}Δ_L‖_* / ‖P_{T_L}Δ_L‖_*`.
    pub lowrank_ratio: f64,
    /// `‖P_{T_S⊥}Δ_S‖₁ / ‖P_{T_S}Δ_S‖₁`.
    pub sparse_ratio: f64,
    pub in_cone: bool,
}

/// `num/den`, infinite when the denominator is negligible against the
/// total and `num` is not, zero when both vanish. Exactly 0-homogeneous.
fn cone_ratio(num: f64, den: f64, tol: f64) -> f64 {
    let total = num + den;
    if total == 0.0 {
        0.0
    } else if den <= tol * total {
        if num <= tol * total {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

pub fn cone_membership(ts: &TangentSpaces, delta_l: &Mat, delta_s: &Mat) -> Result<ConeReport> {
    let tol = crate::Tolerances::default().cone_denominator;
    let lowrank_ratio = cone_ratio(
        nuclear_norm(&ts.project_tl_perp(delta_l)?)?,
        nuclear_norm(&ts.project_tl(delta_l)?)?,
        tol,
    );
    let sparse_ratio = cone_ratio(l1_norm(&ts.project_ts_perp(delta_s)?), l1_norm(&ts.project_ts(delta_s)?), tol);
    Ok(ConeReport {
        lowrank_ratio,
        sparse_ratio,
        in_cone: lowrank_ratio <= CONE_CONSTANT && sparse_ratio <= CONE_CONSTANT,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBoundReport {
    pub grad_op: f64,
    pub grad_inf: f64,
    pub half_lambda_star: f64,
    pub half_lambda_one: f64,
    pub op_passes: bool,
    pub inf_passes: bool,
    pub passes: bool,
}

/// `‖∇ℓ_n(A₀)‖_op ≤ λ_*/2` and `‖∇ℓ_n(A₀)‖_∞ ≤ λ₁/2`.
pub fn verify_dual_bounds(ctx: &ContrastContext<'_>, model: &DriftModel, lambdas: (f64, f64)) -> Result<DualBoundReport> {
    if model.d != ctx.d() {
        return Err(dim_err(format!("model of dimension {}", ctx.d()), format!("{}", model.d)));
    }
    let g = ctx.gradient(&model.a0)?;
    let grad_op = operator_norm(&g)?;
    let grad_inf = linf_norm(&g);
    let half_lambda_star = lambdas.0 / 2.0;
    let half_lambda_one = lambdas.1 / 2.0;
    let op_passes = grad_op <= half_lambda_star;
    let inf_passes = grad_inf <= half_lambda_one;
    Ok(DualBoundReport {
        grad_op,
        grad_inf,
        half_lambda_star,
        half_lambda_one,
        op_passes,
        inf_passes,
        passes: op_passes && inf_passes,
    })
}

/// Gradient norms at the truth in units of the tuning rule:
/// `‖∇ℓ(A₀)‖_op / √(γ log d / T)` and `‖∇ℓ(A₀)‖_∞ / √(γ log d² / T)`.
/// The dual bounds hold with `c_op, c_one` at least these values.
pub fn gradient_ratios(ctx: &ContrastContext<'_>, model: &DriftModel, gamma: f64, horizon: f64) -> Result<(f64, f64)> {
    let g = ctx.gradient(&model.a0)?;
    let log_d = (model.d as f64).ln();
    let op_scale = (gamma * log_d / horizon).sqrt();
    let inf_scale = (gamma * 2.0 * log_d / horizon).sqrt();
    Ok((operator_norm(&g)? / op_scale, linf_norm(&g) / inf_scale))
}

/// Tuning constants as the `quantile` of pilot gradient ratios.
pub fn calibrate_constants(ratios: &[(f64, f64)], quantile: f64) -> Result<(f64, f64)> {
    if ratios.is_empty() {
        return Err(Error::InvalidArgument("calibration needs at least one pilot".into()));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::InvalidArgument("quantile must lie in [0, 1]".into()));
    }
    let op: Vec<f64> = ratios.iter().map(|r| r.0).collect();
    let inf: Vec<f64> = ratios.iter().map(|r| r.1).collect();
    Ok((stats::quantile(&op, quantile), stats::quantile(&inf, quantile)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscReport {
    pub min_eig_cn: f64,
    /// Smallest eigenvalue of the reference truncated covariance; `NaN`
    /// without a reference.
    pub c_b_proxy: f64,
    /// Curvature constant in `‖A‖²_{n,B,η} ≥ κ‖A‖_F²`, equal to `min_eig_cn`.
    pub kappa_est: f64,
    pub passes: bool,
}

/// Checks the unrestricted bound `C_{n,B,η} ⪰ (c_B/2) I`, which implies the
/// cone-restricted one.
pub fn verify_rsc(ctx: &ContrastContext<'_>, reference_cov: Option<&Mat>) -> Result<RscReport> {
    rsc_from_cov(ctx.c_n(), reference_cov)
}

pub fn rsc_from_cov(c_n: &Mat, reference_cov: Option<&Mat>) -> Result<RscReport> {
    let min_eig_cn = symmetric_eigenvalues(c_n)?[0];
    let c_b_proxy = match reference_cov {
        Some(r) => {
            if r.shape() != c_n.shape() {
                return Err(dim_err(format!("{:?}", c_n.shape()), format!("{:?}", r.shape())));
            }
            symmetric_eigenvalues(r)?[0]
        }
        None => f64::NAN,
    };
    Ok(RscReport {
        min_eig_cn,
        c_b_proxy,
        kappa_est: min_eig_cn,
        passes: c_b_proxy.is_finite() && min_eig_cn >= c_b_proxy / 2.0,
    })
}

/// Monte-Carlo `E[X Xᵀ 1{‖X‖ ≤ radius}]` for `X ~ N(0, cov)`.
pub fn truncated_gaussian_cov(cov: &Mat, radius: f64, samples: usize, seed: u64) -> Result<Mat> {
    let d = cov.nrows();
    let chol = (cov + Mat::identity(d, d) * 1e-14 * cov.trace().max(1.0))
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    let factor = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Mat::zeros(d, d);
    for _ in 0..samples {
        let g: DVector<f64> = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
        let x = &factor * g;
        if x.norm() <= radius {
            acc.syger(1.0, &x, &x, 1.0);
        }
    }
    acc.fill_upper_triangle_with_lower_triangle();
    Ok(acc / samples as f64)
}

/// Truncated empirical covariance of one long path under `loc`.
pub fn long_run_reference(
    model: &DriftModel,
    regime: &LevyRegime,
    loc: &LocalizationConfig,
    path: &PathConfig,
) -> Result<Mat> {
    let obs = simulate_path(model, regime, path)?;
    Ok(build_context(&obs, *loc)?.c_n().clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub frob_err_sq: f64,
    pub rank_l_hat: usize,
    /// Share of estimated support entries that are true; `1` when the
    /// estimate has empty support.
    pub support_precision: f64,
    /// Share of true support entries recovered; `1` when the truth has
    /// empty support.
    pub support_recall: f64,
}

pub fn compute_error_metrics(model: &DriftModel, result: &EstimateResult, supp_tol: f64, rank_tol: f64) -> Result<ErrorMetrics> {
    if result.a_hat.shape() != model.a0.shape() {
        return Err(dim_err(format!("{:?}", model.a0.shape()), format!("{:?}", result.a_hat.shape())));
    }
    let frob_err_sq = (&result.a_hat - &model.a0).norm_squared();
    let rank_l_hat = numerical_rank(&result.l_hat, rank_tol)?;
    let truth = model.tangent.support_mask();
    let mut est = 0usize;
    let mut hit = 0usize;
    for (i, v) in result.s_hat.iter().enumerate() {
        if v.abs() > supp_tol {
            est += 1;
            if truth[i] {
                hit += 1;
            }
        }
    }
    let true_count = model.tangent.support.len();
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(ErrorMetrics {
        frob_err_sq,
        rank_l_hat,
        support_precision: ratio(hit, est),
        support_recall: ratio(hit, true_count),
    })
}

/// Mean squared error at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub d: usize,
    pub r: usize,
    pub s: usize,
    pub t: f64,
    pub gamma: f64,
    pub delta_n: f64,
    pub mean_err_sq: f64,
}

impl OraclePoint {
    /// `γ/T·(r + s)·log d`.
    pub fn stochastic_term(&self) -> f64 {
        self.gamma / self.t * (self.r + self.s) as f64 * (self.d as f64).ln()
    }

    /// `d²Δn²`.
    pub fn bias_term(&self) -> f64 {
        (self.d * self.d) as f64 * self.delta_n * self.delta_n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFit {
    /// Coefficient on `d²Δn²`.
    pub c1: f64,
    /// Coefficient on `γ/T·(r + s)·log d`.
    pub c2: f64,
    pub r_squared: f64,
    /// Log-log slope of mean error against `T`; present when every point
    /// shares `(d, r, s)`.
    pub slope_vs_t: Option<f64>,
}

/// Least squares of mean error on `γ/T·(r+s)log d` and `d²Δn²` without
/// intercept. When the bias regressor is constant it is collinear with
/// nothing and acts as the intercept.
pub fn oracle_bound_compare(points: &[OraclePoint]) -> Result<OracleFit> {
    let mut horizons: Vec<f64> = points.iter().map(|p| p.t).collect();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    if horizons.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 distinct horizons, got {}",
            horizons.len()
        )));
    }
    let x1: Vec<f64> = points.iter().map(OraclePoint::bias_term).collect();
    let x2: Vec<f64> = points.iter().map(OraclePoint::stochastic_term).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean_err_sq).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let (a11, a12, a22) = (dot(&x1, &x1), dot(&x1, &x2), dot(&x2, &x2));
    let (b1, b2) = (dot(&x1, &y), dot(&x2, &y));
    let det = a11 * a22 - a12 * a12;
    let (c1, c2) = if a11 == 0.0 {
        (0.0, b2 / a22)
    } else if det.abs() <= 1e-12 * a11 * a22 {
        return Err(Error::Numerical("oracle regressors are collinear".into()));
    } else {
        ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det)
    };
    let r_squared = stats::r_squared(&y, |i| c1 * x1[i] + c2 * x2[i]);

    let same_shape = points.windows(2).all(|w| (w[0].d, w[0].r, w[0].s) == (w[1].d, w[1].r, w[1].s));
    let slope_vs_t = if same_shape {
        let t: Vec<f64> = points.iter().map(|p| p.t).collect();
        stats::log_log_slope(&t, &y)
    } else {
        None
    };
    Ok(OracleFit {
        c1,
        c2,
        r_squared,
        slope_vs_t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityFit {
    pub fit: LinearFit,
    /// Mean error strictly increases with `(r + s)`.
    pub increasing: bool,
}

/// Linear fit with intercept of mean error against `(r + s)·log d`.
pub fn complexity_fit(points: &[OraclePoint]) -> Result<ComplexityFit> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("need at least two sweep points".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.r + p.s);
    let increasing = sorted.windows(2).all(|w| w[1].mean_err_sq > w[0].mean_err_sq && w[1].r + w[1].s > w[0].r + w[0].s);
    let x: Vec<f64> = sorted.iter().map(|p| (p.r + p.s) as f64 * (p.d as f64).ln()).collect();
    let y: Vec<f64> = sorted.iter().map(|p| p.mean_err_sq).collect();
    let fit = stats::linear_fit(&x, &y).ok_or_else(|| Error::Numerical("degenerate complexity fit".into()))?;
    Ok(ComplexityFit { fit, increasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::ObservationSet;
    use crate::matrix::test_util::{random_mat, random_orthonormal};
    use crate::model::generate_drift;
    use crate::solver::{solve, SolverConfig};

    fn tangent(rng: &mut ChaCha8Rng, d: usize, r: usize, support: Vec<(usize, usize)>) -> TangentSpaces {
        TangentSpaces::new(random_orthonormal(rng, d, r), random_orthonormal(rng, d, r), support, 1e-10).unwrap()
    }

    #[test]
    fn cone_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ts = tangent(&mut rng, 5, 1, vec![(0, 0), (1, 2)]);
        let m = random_mat(&mut rng, 5, 5);
        let in_l = ts.project_tl(&m).unwrap();
        let in_s = ts.project_ts(&m).unwrap();
        let rep = cone_membership(&ts, &in_l, &in_s).unwrap();
        assert!(rep.lowrank_ratio < 1e-12 && rep.sparse_ratio == 0.0 && rep.in_cone);

        let perp = ts.project_tl_perp(&m).unwrap();
        let rep = cone_membership(&ts, &perp, &in_s).unwrap();
        assert!(rep.lowrank_ratio.is_infinite() && !rep.in_cone);

        let zero = cone_membership(&ts, &Mat::zeros(5, 5), &Mat::zeros(5, 5)).unwrap();
        assert!(zero.in_cone);
    }

    #[test]
    fn cone_ratios_are_scale_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ts = tangent(&mut rng, 6, 2, vec![(0, 1), (3, 3), (5, 2)]);
        for _ in 0..20 {
            let dl = random_mat(&mut rng, 6, 6);
            let ds = random_mat(&mut rng, 6, 6);
            let a = cone_membership(&ts, &dl, &ds).unwrap();
            let c = rng.random_range(0.01..100.0);
            let b = cone_membership(&ts, &(&dl * c), &(&ds * c)).unwrap();
            assert!((a.lowrank_ratio - b.lowrank_ratio).abs() <= 1e-10 * a.lowrank_ratio);
            assert!((a.sparse_ratio - b.sparse_ratio).abs() <= 1e-10 * a.sparse_ratio);
        }
    }

    #[test]
    fn compatibility_inequalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let d = rng.random_range(3..20);
            let r = rng.random_range(1..=d / 2);
            let support: Vec<(usize, usize)> = (0..d).map(|i| (i, (i * 7) % d)).collect();
            let s = support.len();
            let ts = tangent(&mut rng, d, r, support);
            let m = random_mat(&mut rng, d, d);
            let pl = ts.project_tl(&m).unwrap();
            assert!(nuclear_norm(&pl).unwrap() <= (2.0 * r as f64).sqrt() * pl.norm() * (1.0 + 1e-10));
            let ps = ts.project_ts(&m).unwrap();
            assert!(l1_norm(&ps) <= (s as f64).sqrt() * ps.norm() * (1.0 + 1e-10));
        }
    }

    fn random_ctx_obs(d: usize, seed: u64) -> (DriftModel, ObservationSet) {
        let model = generate_drift(d, 1, d, seed, 0.5).unwrap();
        let regime = LevyRegime::continuous(Mat::identity(d, d));
        let obs = simulate_path(&model, &regime, &PathConfig::for_horizon(100.0, 0.1, 2, seed)).unwrap();
        (model, obs)
    }

    #[test]
    fn dual_bounds_behave() {
        let (model, obs) = random_ctx_obs(4, 4);
        let ctx = build_context(&obs, LocalizationConfig::unrestricted()).unwrap();
        let zero = verify_dual_bounds(&ctx, &model, (0.0, 0.0)).unwrap();
        assert!(!zero.passes);
        let big = verify_dual_bounds(&ctx, &model, (1e3, 1e3)).unwrap();
        assert!(big.passes);
        let (rop, rinf) = gradient_ratios(&ctx, &model, 1.0, obs.horizon()).unwrap();
        let log_d = 4f64.ln();
        let lam = (2.0 * rop * (log_d / obs.horizon()).sqrt(), 2.0 * rinf * (2.0 * log_d / obs.horizon()).sqrt());
        let edge = verify_dual_bounds(&ctx, &model, (lam.0 * (1.0 + 1e-9), lam.1 * (1.0 + 1e-9))).unwrap();
        assert!(edge.passes);
    }

    #[test]
    fn noiseless_gradient_passes_trivially() {
        let model = generate_drift(3, 1, 2, 5, 0.5).unwrap();
        let mut x = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        let mut states = vec![x.clone()];
        for _ in 0..20 {
            x = &x - &model.a0 * &x * 0.1;
            states.push(x.clone());
        }
        let obs = ObservationSet::from_states(0.1, states).unwrap();
        let ctx = build_context(&obs, LocalizationConfig::unrestricted()).unwrap();
        let rep = verify_dual_bounds(&ctx, &model, (1e-6, 1e-6)).unwrap();
        assert!(rep.passes && rep.grad_op < 1e-12);
    }

    #[test]
    fn rsc_examples() {
        let rep = rsc_from_cov(&Mat::identity(3, 3), Some(&Mat::identity(3, 3))).unwrap();
        assert_eq!(rep.min_eig_cn, 1.0);
        assert!(rep.passes);
        let rep = rsc_from_cov(&(Mat::identity(3, 3) * 0.1), Some(&Mat::identity(3, 3))).unwrap();
        assert!(!rep.passes);
        let rep = rsc_from_cov(&Mat::identity(3, 3), None).unwrap();
        assert!(!rep.passes && rep.c_b_proxy.is_nan());
    }

    #[test]
    fn rsc_bound_controls_the_empirical_norm() {
        let (_, obs) = random_ctx_obs(5, 6);
        let ctx = build_context(&obs, LocalizationConfig::unrestricted()).unwrap();
        let rep = verify_rsc(&ctx, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = random_mat(&mut rng, 5, 5);
            assert!(ctx.empirical_norm_sq(&a).unwrap() >= rep.min_eig_cn * a.norm_squared() * (1.0 - 1e-10));
        }
    }

    #[test]
    fn truncated_gaussian_limits() {
        let cov = Mat::from_diagonal(&DVector::from_vec(vec![1.0, 0.25]));
        let full = truncated_gaussian_cov(&cov, f64::INFINITY, 200_000, 1).unwrap();
        assert!((&full - &cov).norm() < 0.02);
        let none = truncated_gaussian_cov(&cov, 1e-9, 1000, 1).unwrap();
        assert_eq!(none, Mat::zeros(2, 2));
    }

    fn result_from(l: Mat, s: Mat) -> EstimateResult {
        EstimateResult {
            a_hat: &l + &s,
            l_hat: l,
            s_hat: s,
            objective_trace: vec![0.0],
            iterations: 0,
            converged: true,
            lambda_star_used: 0.0,
            lambda_one_used: 0.0,
            final_step: 1.0,
        }
    }

    #[test]
    fn error_metric_examples() {
        let model = generate_drift(5, 1, 3, 7, 0.5).unwrap();
        let exact = compute_error_metrics(&model, &result_from(model.l0.clone(), model.s0.clone()), 1e-6, 1e-8).unwrap();
        assert_eq!(exact.frob_err_sq, 0.0);
        assert_eq!((exact.support_precision, exact.support_recall), (1.0, 1.0));
        assert_eq!(exact.rank_l_hat, 1);

        let empty = compute_error_metrics(&model, &result_from(model.l0.clone(), Mat::zeros(5, 5)), 1e-6, 1e-8).unwrap();
        assert_eq!((empty.support_precision, empty.support_recall), (1.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = random_mat(&mut rng, 5, 5);
        let s = random_mat(&mut rng, 5, 5);
        let rep = compute_error_metrics(&model, &result_from(l.clone(), s.clone()), 1e-6, 1e-8).unwrap();
        let a = &l + &s;
        let mut direct = 0.0;
        for j in (0..5).rev() {
            for i in (0..5).rev() {
                direct += (a[(i, j)] - model.a0[(i, j)]).powi(2);
            }
        }
        assert!((rep.frob_err_sq - direct).abs() < 1e-12 * direct);
    }

    fn point(t: f64, err: f64) -> OraclePoint {
        OraclePoint {
            d: 10,
            r: 2,
            s: 10,
            t,
            gamma: 1.0,
            delta_n: 0.05,
            mean_err_sq: err,
        }
    }

    #[test]
    fn planted_oracle_regression() {
        let points: Vec<OraclePoint> = [250.0, 500.0, 1000.0, 2000.0]
            .iter()
            .map(|&t| {
                let mut p = point(t, 0.0);
                p.mean_err_sq = 2.0 * p.stochastic_term();
                p
            })
            .collect();
        let fit = oracle_bound_compare(&points).unwrap();
        assert!((fit.c2 - 2.0).abs() < 1e-9 && fit.c1.abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.slope_vs_t.unwrap() + 1.0).abs() < 1e-12);
        assert!(oracle_bound_compare(&points[..1]).is_err());
        assert!(oracle_bound_compare(&[point(100.0, 1.0), point(100.0, 2.0), point(200.0, 0.5)]).is_err());
    }

    #[test]
    fn complexity_fit_on_planted_points() {
        let points: Vec<OraclePoint> = [(1, 10), (2, 20), (4, 40)]
            .iter()
            .map(|&(r, s)| OraclePoint {
                d: 30,
                r,
                s,
                t: 2000.0,
                gamma: 1.0,
                delta_n: 0.05,
                mean_err_sq: 0.1 + 0.01 * (r + s) as f64,
            })
            .collect();
        let fit = complexity_fit(&points).unwrap();
        assert!(fit.increasing && (fit.fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_takes_quantiles() {
        let ratios: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, 10.0 * i as f64)).collect();
        assert_eq!(calibrate_constants(&ratios, 1.0).unwrap(), (5.0, 50.0));
        assert_eq!(calibrate_constants(&ratios, 0.5).unwrap(), (3.0, 30.0));
        assert!(calibrate_constants(&[], 0.5).is_err());
    }

    #[test]
    fn solver_error_in_cone_on_easy_instance() {
        let (model, obs) = random_ctx_obs(5, 9);
        let ctx = build_context(&obs, LocalizationConfig::unrestricted()).unwrap();
        let g = ctx.gradient(&model.a0).unwrap();
        let lambdas = (2.0 * operator_norm(&g).unwrap(), 2.0 * linf_norm(&g));
        let res = solve(&ctx, lambdas, &SolverConfig::default()).unwrap();
        let rep = cone_membership(&model.tangent, &(&res.l_hat - &model.l0), &(&res.s_hat - &model.s0)).unwrap();
        assert!(rep.lowrank_ratio >= 0.0 && rep.sparse_ratio >= 0.0);
    }
}
