//! Ground-truth drift matrices `A₀ = L₀ + S₀`, the sampled rank–sparsity
//! incoherence diagnostic and the Gaussian stationary covariance.

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::matrix::{
    self, l1_norm, mat_serde, min_real_eigenvalue, nuclear_norm, Mat, TangentSpaces,
};

/// Knobs of the drift generator. The defaults keep every off-diagonal
/// interaction at magnitude at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftGenConfig {
    /// Required `min Re λ(A₀)`.
    pub spectral_floor: f64,
    /// Overall scale `c_L` of the low-rank part.
    pub lowrank_scale: f64,
    /// Range of the nonzero singular values of `L₀ / c_L`.
    pub lowrank_spectrum: (f64, f64),
    /// Range of off-diagonal `|S₀|` entries; signs are random.
    pub sparse_magnitude: (f64, f64),
    pub max_attempts: usize,
    pub rank_tol: f64,
}

impl Default for DriftGenConfig {
    fn default() -> Self {
        Self {
            spectral_floor: 0.1,
            lowrank_scale: 1.0,
            lowrank_spectrum: (0.5, 1.0),
            sparse_magnitude: (0.3, 1.0),
            max_attempts: 100,
            rank_tol: 1e-8,
        }
    }
}

/// A stable drift matrix split into a low-rank and a sparse part.
///
/// `s` counts the off-diagonal interactions of `S₀`. The diagonal of `S₀`
/// carries the stability shift `diag_shift·I`, so `‖S₀‖₀ ≤ s + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    pub d: usize,
    pub r: usize,
    pub s: usize,
    pub seed: u64,
    #[serde(with = "mat_serde")]
    pub l0: Mat,
    #[serde(with = "mat_serde")]
    pub s0: Mat,
    #[serde(with = "mat_serde")]
    pub a0: Mat,
    pub tangent: TangentSpaces,
    pub stability_margin: f64,
    pub diag_shift: f64,
}

impl DriftModel {
    /// Assembles a model from explicit components.
    pub fn from_components(l0: Mat, s0: Mat, r: usize, s: usize, seed: u64, rank_tol: f64) -> Result<Self> {
        let d = l0.nrows();
        if l0.ncols() != d || s0.shape() != (d, d) {
            return Err(dim_err(format!("{d}x{d}"), format!("{:?}", s0.shape())));
        }
        let a0 = &l0 + &s0;
        let tangent = TangentSpaces::from_components(&l0, &s0, rank_tol, 0.0)?;
        let stability_margin = min_real_eigenvalue(&a0)?;
        let model = Self {
            d,
            r,
            s,
            seed,
            l0,
            s0,
            a0,
            tangent,
            stability_margin,
            diag_shift: 0.0,
        };
        model.validate(rank_tol)?;
        Ok(model)
    }

    /// Checks every structural invariant.
    pub fn validate(&self, rank_tol: f64) -> Result<()> {
        let d = self.d;
        for m in [&self.l0, &self.s0, &self.a0] {
            if m.shape() != (d, d) {
                return Err(dim_err(format!("{d}x{d}"), format!("{:?}", m.shape())));
            }
            matrix::check_finite(m)?;
        }
        let rank = matrix::numerical_rank(&self.l0, rank_tol)?;
        if rank > self.r {
            return Err(Error::InvalidArgument(format!(
                "rank(L0) = {rank} exceeds r = {}",
                self.r
            )));
        }
        let nnz = self.s0.iter().filter(|x| **x != 0.0).count();
        if nnz > self.s + d {
            return Err(Error::InvalidArgument(format!(
                "||S0||_0 = {nnz} exceeds s + d = {}",
                self.s + d
            )));
        }
        if self.a0 != &self.l0 + &self.s0 {
            return Err(Error::InvalidArgument("A0 != L0 + S0".into()));
        }
        if !(self.stability_margin > 0.0) || min_real_eigenvalue(&self.a0)? < self.stability_margin * (1.0 - 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "A0 is not stable with margin {}",
                self.stability_margin
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate(DriftGenConfig::default().rank_tol)?;
        Ok(model)
    }

    /// Simultaneous row/column permutation: entry `(i, j)` moves to
    /// `(perm[i], perm[j])`. The support keeps its listing order.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let d = self.d;
        if perm.len() != d {
            return Err(dim_err(format!("{d}"), format!("{}", perm.len())));
        }
        let apply = |m: &Mat| {
            let mut out = Mat::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    out[(perm[i], perm[j])] = m[(i, j)];
                }
            }
            out
        };
        let l0 = apply(&self.l0);
        let s0 = apply(&self.s0);
        let mut tangent = TangentSpaces::from_components(&l0, &s0, DriftGenConfig::default().rank_tol, 0.0)?;
        tangent.support = self
            .tangent
            .support
            .iter()
            .map(|&(i, j)| (perm[i], perm[j]))
            .collect();
        Ok(Self {
            a0: &l0 + &s0,
            l0,
            s0,
            tangent,
            ..self.clone()
        })
    }
}

/// Generates a model with the default generator settings and the given floor.
pub fn generate_drift(d: usize, r: usize, s: usize, seed: u64, spectral_floor: f64) -> Result<DriftModel> {
    generate_drift_with(
        d,
        r,
        s,
        seed,
        &DriftGenConfig {
            spectral_floor,
            ..DriftGenConfig::default()
        },
    )
}

/// `L₀ = c_L·Q·diag(σ)·Q'ᵀ` with independent random orthonormal `Q, Q'`;
/// `S₀` has `s` random off-diagonal entries and a diagonal shift `μI`
/// chosen so that `min Re λ(A₀) ≥ spectral_floor`.
pub fn generate_drift_with(d: usize, r: usize, s: usize, seed: u64, cfg: &DriftGenConfig) -> Result<DriftModel> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if r > d {
        return Err(Error::InvalidArgument(format!("rank {r} exceeds dimension {d}")));
    }
    if s > d * d {
        return Err(Error::InvalidArgument(format!("sparsity {s} exceeds d^2 = {}", d * d)));
    }
    if !(cfg.spectral_floor > 0.0) {
        return Err(Error::InvalidArgument("spectral floor must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut l0 = Mat::zeros(d, d);
    if r > 0 {
        let q = random_orthonormal(&mut rng, d, r);
        let qp = random_orthonormal(&mut rng, d, r);
        let (lo, hi) = cfg.lowrank_spectrum;
        let mut spectrum: Vec<f64> = (0..r).map(|_| rng.random_range(lo..=hi)).collect();
        spectrum.sort_by(|a, b| b.total_cmp(a));
        let sigma = Mat::from_diagonal(&DVector::from_vec(spectrum));
        l0 = q * sigma * qp.transpose() * cfg.lowrank_scale;
    }

    // Off-diagonal slots in row-major order, then s of them without replacement.
    let off_diag: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let n_off = s.min(off_diag.len());
    let mut s0 = Mat::zeros(d, d);
    let (mlo, mhi) = cfg.sparse_magnitude;
    for idx in sample(&mut rng, off_diag.len(), n_off).into_vec() {
        let (i, j) = off_diag[idx];
        let mag = rng.random_range(mlo..=mhi);
        s0[(i, j)] = if rng.random::<bool>() { mag } else { -mag };
    }

    let base = &l0 + &s0;
    let base_margin = min_real_eigenvalue(&base)?;
    let mut shift = (cfg.spectral_floor - base_margin).max(0.0);
    let bump = 1e-9 + 1e-9 * shift.abs();
    for attempt in 0..cfg.max_attempts {
        let mut s_try = s0.clone();
        for i in 0..d {
            s_try[(i, i)] += shift;
        }
        let a0 = &l0 + &s_try;
        let margin = min_real_eigenvalue(&a0)?;
        if margin >= cfg.spectral_floor {
            let tangent = TangentSpaces::from_components(&l0, &s_try, cfg.rank_tol, 0.0)?;
            let model = DriftModel {
                d,
                r,
                s,
                seed,
                l0,
                s0: s_try,
                a0,
                tangent,
                stability_margin: margin,
                diag_shift: shift,
            };
            model.validate(cfg.rank_tol)?;
            return Ok(model);
        }
        shift += bump * (1u64 << attempt.min(40)) as f64;
    }
    Err(Error::Generation {
        attempts: cfg.max_attempts,
        last_shift: shift,
    })
}

fn random_orthonormal(rng: &mut ChaCha8Rng, d: usize, r: usize) -> Mat {
    let g = Mat::from_fn(d, r, |_, _| rng.sample(StandardNormal));
    g.qr().q().columns(0, r).into_owned()
}

/// Sampled rank–sparsity incoherence constants.
///
/// Both values are maxima over finite sample sets, hence lower bounds on
/// the suprema defining `ξ_L` and `ξ_S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceReport {
    pub xi_l_est: f64,
    pub xi_s_est: f64,
    pub passes: bool,
    pub samples_used: usize,
    /// Set when `r = 0` or the support is empty; `passes` is then `true`
    /// by convention regardless of the ratios.
    pub degenerate: bool,
}

/// Estimates `ξ_L` over the basis matrices of the support plus
/// `n_samples` random members of `T_S`, and `ξ_S` over the `T_L` images of
/// those random members plus the `T_L` images of all `d²` basis matrices.
///
/// Random coefficients are drawn in support-listing order from a generator
/// seeded by the model seed, so nested sample sizes give nested sample sets
/// and relabelling the coordinates leaves the report unchanged.
pub fn estimate_incoherence(model: &DriftModel, n_samples: usize) -> Result<IncoherenceReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let ts = &model.tangent;
    let d = model.d;
    let r = ts.rank();
    let support = &ts.support;
    if r == 0 && support.is_empty() {
        return Ok(IncoherenceReport {
            xi_l_est: 0.0,
            xi_s_est: 0.0,
            passes: true,
            samples_used: 0,
            degenerate: true,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0x1C0E_7E9C_E5A1_u64);
    let mut random_ts = Vec::with_capacity(n_samples);
    if !support.is_empty() {
        for _ in 0..n_samples {
            let mut m = Mat::zeros(d, d);
            for &(i, j) in support {
                m[(i, j)] = rng.sample(StandardNormal);
            }
            random_ts.push(m);
        }
    }

    let mut samples_used = 0usize;
    let mut xi_l: f64 = 0.0;
    let lowrank_ratio = |m: &Mat| -> Result<f64> {
        let denom = nuclear_norm(m)?;
        Ok(if denom > 0.0 {
            nuclear_norm(&ts.project_tl_perp(m)?)? / denom
        } else {
            0.0
        })
    };
    for &(i, j) in support {
        let mut e = Mat::zeros(d, d);
        e[(i, j)] = 1.0;
        xi_l = xi_l.max(lowrank_ratio(&e)?);
        samples_used += 1;
    }
    for m in &random_ts {
        xi_l = xi_l.max(lowrank_ratio(m)?);
        samples_used += 1;
    }

    let mut xi_s: f64 = 0.0;
    if r > 0 {
        let sparse_ratio = |n: &Mat| -> Result<Option<f64>> {
            let denom = l1_norm(n);
            if denom <= 1e-14 {
                return Ok(None);
            }
            Ok(Some(l1_norm(&ts.project_ts_perp(n)?) / denom))
        };
        for m in &random_ts {
            if let Some(v) = sparse_ratio(&ts.project_tl(m)?)? {
                xi_s = xi_s.max(v);
                samples_used += 1;
            }
        }
        for i in 0..d {
            for j in 0..d {
                let mut e = Mat::zeros(d, d);
                e[(i, j)] = 1.0;
                if let Some(v) = sparse_ratio(&ts.project_tl(&e)?)? {
                    xi_s = xi_s.max(v);
                    samples_used += 1;
                }
            }
        }
    }

    let degenerate = r == 0 || support.is_empty();
    Ok(IncoherenceReport {
        xi_l_est: xi_l.clamp(0.0, 1.0),
        xi_s_est: xi_s.clamp(0.0, 1.0),
        passes: degenerate || xi_l + xi_s < 1.0,
        samples_used,
        degenerate,
    })
}

/// Solves `A C + C Aᵀ = Σ` for the stationary covariance of a stable OU
/// process through the Kronecker system `(I⊗A + A⊗I) vec C = vec Σ`.
pub fn lyapunov_stationary_cov(a0: &Mat, sigma_z: &Mat) -> Result<Mat> {
    let d = a0.nrows();
    if a0.ncols() != d || sigma_z.shape() != (d, d) {
        return Err(dim_err(
            format!("{d}x{d}"),
            format!("{:?} and {:?}", a0.shape(), sigma_z.shape()),
        ));
    }
    let margin = min_real_eigenvalue(a0)?;
    if !(margin > 0.0) {
        return Err(Error::Numerical(format!(
            "drift is not stable (min Re eigenvalue {margin}); Lyapunov system is singular or indefinite"
        )));
    }
    let n = d * d;
    let mut k = Mat::zeros(n, n);
    // Column-major vec: vec(AC) = (I⊗A) vec C, vec(CAᵀ) = (A⊗I) vec C.
    for blk in 0..d {
        for i in 0..d {
            for j in 0..d {
                k[(blk * d + i, blk * d + j)] += a0[(i, j)];
            }
        }
    }
    for bi in 0..d {
        for bj in 0..d {
            let a = a0[(bi, bj)];
            if a != 0.0 {
                for i in 0..d {
                    k[(bi * d + i, bj * d + i)] += a;
                }
            }
        }
    }
    let rhs = DVector::from_iterator(n, sigma_z.iter().copied());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Lyapunov system".into()))?;
    let c = Mat::from_column_slice(d, d, sol.as_slice());
    Ok((&c + c.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frobenius_norm, symmetric_eigenvalues};

    #[test]
    fn zero_rank_zero_sparsity_is_a_scaled_identity() {
        let m = generate_drift(2, 0, 0, 1, 0.1).unwrap();
        assert_eq!(m.l0, Mat::zeros(2, 2));
        assert!((m.a0[(0, 0)] - m.diag_shift).abs() < 1e-15);
        assert_eq!(m.a0[(0, 1)], 0.0);
        assert!(m.stability_margin >= 0.1);
        assert_eq!(m.a0, Mat::identity(2, 2) * m.diag_shift);
    }

    #[test]
    fn generated_model_satisfies_its_invariants() {
        let m = generate_drift(5, 1, 3, 7, 0.1).unwrap();
        assert_eq!(matrix::numerical_rank(&m.l0, 1e-8).unwrap(), 1);
        let off = (0..5)
            .flat_map(|i| (0..5).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && m.s0[(i, j)] != 0.0)
            .count();
        assert_eq!(off, 3);
        // eigenvalue oracle: real parts of the Schur spectrum all positive
        let eig = m.a0.clone().try_schur(1e-12, 10_000).unwrap().complex_eigenvalues();
        assert!(eig.iter().all(|z| z.re >= 0.1 - 1e-12));
        assert!(m.stability_margin >= 0.1);
        assert_eq!(m.a0, &m.l0 + &m.s0);
    }

    #[test]
    fn full_rank_full_support_is_accepted() {
        let m = generate_drift(3, 3, 9, 11, 0.1).unwrap();
        assert_eq!(matrix::numerical_rank(&m.l0, 1e-8).unwrap(), 3);
        assert!(m.stability_margin >= 0.1);
    }

    #[test]
    fn generation_is_deterministic_and_validates_input() {
        let a = generate_drift(6, 2, 5, 42, 0.5).unwrap();
        let b = generate_drift(6, 2, 5, 42, 0.5).unwrap();
        assert_eq!(a, b);
        assert!(generate_drift(3, 4, 0, 0, 0.1).is_err());
        assert!(generate_drift(3, 1, 10, 0, 0.1).is_err());
        assert!(generate_drift(3, 1, 1, 0, 0.0).is_err());
    }

    #[test]
    fn too_few_attempts_reports_generation_error() {
        let cfg = DriftGenConfig {
            max_attempts: 0,
            ..DriftGenConfig::default()
        };
        assert!(matches!(
            generate_drift_with(4, 1, 2, 3, &cfg),
            Err(Error::Generation { attempts: 0, .. })
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = generate_drift(4, 1, 3, 9, 0.2).unwrap();
        let back = DriftModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn incoherence_degenerate_cases() {
        let mut m = generate_drift(3, 0, 0, 1, 0.1).unwrap();
        m.tangent.support.clear();
        let rep = estimate_incoherence(&m, 10).unwrap();
        assert_eq!((rep.xi_l_est, rep.xi_s_est, rep.passes), (0.0, 0.0, true));

        // r = 0, nonempty support: passes by convention
        let m = generate_drift(4, 0, 2, 1, 0.1).unwrap();
        let rep = estimate_incoherence(&m, 10).unwrap();
        assert!(rep.passes && rep.degenerate);
        assert_eq!(rep.xi_s_est, 0.0);

        // empty support, r > 0: xi_l = 0
        let mut m = generate_drift(4, 1, 0, 1, 0.1).unwrap();
        m.tangent.support.clear();
        let rep = estimate_incoherence(&m, 10).unwrap();
        assert_eq!(rep.xi_l_est, 0.0);
        assert!(rep.xi_s_est > 0.0 && rep.xi_s_est <= 1.0);
        assert!(estimate_incoherence(&m, 0).is_err());
    }

    #[test]
    fn incoherence_monotone_in_nested_samples() {
        let m = generate_drift(4, 1, 2, 5, 0.1).unwrap();
        let mut prev = (0.0, 0.0);
        for n in [10, 50, 200, 500] {
            let rep = estimate_incoherence(&m, n).unwrap();
            assert!((0.0..=1.0).contains(&rep.xi_l_est));
            assert!((0.0..=1.0).contains(&rep.xi_s_est));
            assert!(rep.xi_l_est >= prev.0 && rep.xi_s_est >= prev.1);
            assert_eq!(rep.passes, rep.xi_l_est + rep.xi_s_est < 1.0);
            prev = (rep.xi_l_est, rep.xi_s_est);
        }
    }

    #[test]
    fn incoherence_is_permutation_invariant() {
        let m = generate_drift(5, 1, 3, 13, 0.1).unwrap();
        let p = m.permuted(&[3, 0, 4, 1, 2]).unwrap();
        let a = estimate_incoherence(&m, 100).unwrap();
        let b = estimate_incoherence(&p, 100).unwrap();
        assert!((a.xi_l_est - b.xi_l_est).abs() < 1e-9);
        assert!((a.xi_s_est - b.xi_s_est).abs() < 1e-9);
    }

    #[test]
    fn lyapunov_examples() {
        let c = lyapunov_stationary_cov(&(Mat::identity(3, 3) * 2.0), &(Mat::identity(3, 3) * 0.5)).unwrap();
        assert!(frobenius_norm(&(c - Mat::identity(3, 3) * (0.5 / 4.0))) < 1e-14);

        let a = Mat::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let c = lyapunov_stationary_cov(&a, &Mat::identity(2, 2)).unwrap();
        let want = Mat::from_diagonal(&DVector::from_vec(vec![0.5, 0.25]));
        assert!(frobenius_norm(&(c - want)) < 1e-14);

        let unstable = Mat::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(lyapunov_stationary_cov(&unstable, &Mat::identity(2, 2)).is_err());
    }

    #[test]
    fn lyapunov_residual_and_psd_on_random_stable_drift() {
        for seed in 0..5 {
            let m = generate_drift(6, 2, 6, seed, 0.2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = Mat::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sigma = &b * b.transpose();
            let c = lyapunov_stationary_cov(&m.a0, &sigma).unwrap();
            let resid = &m.a0 * &c + &c * m.a0.transpose() - &sigma;
            assert!(frobenius_norm(&resid) <= 1e-10, "residual {}", frobenius_norm(&resid));
            assert!(frobenius_norm(&(&c - c.transpose())) < 1e-12);
            assert!(symmetric_eigenvalues(&c).unwrap()[0] >= -1e-10);
        }
    }
}
