//! Dense-matrix primitives: norms, a sorted SVD, tangent-space projections
//! for the low-rank-plus-sparse geometry and the two proximal operators.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// Dense real matrix. Every constructor in this crate checks finiteness.
pub type Mat = DMatrix<f64>;

const SVD_MAX_ITERS: usize = 10_000;
const SVD_EPS: f64 = 5.0 * f64::EPSILON;
const SVD_RECONSTRUCTION_TOL: f64 = 1e-8;
const JACOBI_MAX_SWEEPS: usize = 60;
const JACOBI_TOL: f64 = 1e-15;

/// Builds a matrix from row-major entries, rejecting wrong lengths and
/// non-finite values.
pub fn mat_from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Mat> {
    if entries.len() != rows * cols {
        return Err(dim_err(
            format!("{} entries", rows * cols),
            format!("{} entries", entries.len()),
        ));
    }
    let m = Mat::from_row_slice(rows, cols, entries);
    check_finite(&m)?;
    Ok(m)
}

pub fn to_row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn check_finite(m: &Mat) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn require_square(m: &Mat, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(dim_err(
            format!("{d}x{d}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

/// `trace(aᵀ b)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn frobenius_norm(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l1_norm(m: &Mat) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

pub fn linf_norm(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Thin SVD with singular values sorted non-increasing.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Mat,
    pub singular_values: Vec<f64>,
    pub vt: Mat,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Mat {
        self.reconstruct_with(|s| s)
    }

    /// `u · diag(f(σ)) · vt`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Mat {
        let mut scaled = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            let w = f(s);
            scaled.column_mut(j).scale_mut(w);
        }
        scaled * &self.vt
    }

    /// Number of singular values above `rel_tol · σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        if smax <= 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * smax)
            .count()
    }
}

/// One-sided Jacobi SVD. nalgebra's bidiagonal QR was observed to return
/// inconsistent factors on rank-deficient inputs, so the decomposition is
/// computed here and checked by reconstruction before it is returned.
pub fn svd(m: &Mat) -> Result<SvdResult> {
    check_finite(m)?;
    if m.nrows() < m.ncols() {
        let t = svd(&m.transpose())?;
        return Ok(SvdResult {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
        });
    }
    let (rows, k) = m.shape();
    if k == 0 {
        return Ok(SvdResult {
            u: Mat::zeros(rows, 0),
            singular_values: Vec::new(),
            vt: Mat::zeros(0, 0),
        });
    }
    let mut w = m.clone();
    let mut v = Mat::identity(k, k);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k - 1 {
            for q in p + 1..k {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }

    let norms: Vec<f64> = (0..k).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let smax = norms[order[0]];
    let mut u = Mat::zeros(rows, k);
    let mut vt = Mat::zeros(k, k);
    let mut sv = Vec::with_capacity(k);
    let mut filled = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        vt.set_row(dst, &v.column(src).transpose());
        if sigma > smax * f64::EPSILON * k as f64 && sigma > 0.0 {
            u.set_column(dst, &(w.column(src) / sigma));
            sv.push(sigma);
            filled.push(dst);
        } else {
            sv.push(sigma);
        }
    }
    complete_orthonormal(&mut u, &filled);

    let out = SvdResult {
        u,
        singular_values: sv,
        vt,
    };
    let scale = m.norm().max(f64::MIN_POSITIVE);
    if (out.reconstruct() - m).norm() > SVD_RECONSTRUCTION_TOL * scale {
        return Err(Error::Numerical("SVD reconstruction check failed".into()));
    }
    Ok(out)
}

fn rotate_columns(m: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// Fills the columns of `u` not listed in `filled` with an orthonormal
/// completion by Gram–Schmidt against the standard basis.
fn complete_orthonormal(u: &mut Mat, filled: &[usize]) {
    let (rows, k) = u.shape();
    let mut basis: Vec<nalgebra::DVector<f64>> = filled.iter().map(|&j| u.column(j).into_owned()).collect();
    let mut candidate = 0;
    for j in 0..k {
        if filled.contains(&j) {
            continue;
        }
        loop {
            let mut e = nalgebra::DVector::zeros(rows);
            e[candidate % rows] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dot(&e);
                    e.axpy(-proj, b, 1.0);
                }
            }
            let n = e.norm();
            if n > 1e-8 {
                e /= n;
                u.set_column(j, &e);
                basis.push(e);
                break;
            }
        }
    }
}

pub fn nuclear_norm(m: &Mat) -> Result<f64> {
    Ok(svd(m)?.singular_values.iter().sum())
}

pub fn operator_norm(m: &Mat) -> Result<f64> {
    Ok(svd(m)?.singular_values.first().copied().unwrap_or(0.0))
}

pub fn numerical_rank(m: &Mat, rel_tol: f64) -> Result<usize> {
    Ok(svd(m)?.rank(rel_tol))
}

/// Smallest real part over the (complex) eigenvalues of a square matrix.
pub fn min_real_eigenvalue(m: &Mat) -> Result<f64> {
    require_square(m, m.nrows())?;
    check_finite(m)?;
    if m.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    // Francis QR can stall at machine-precision deflation; relax the
    // tolerance before giving up. 1e-12 still resolves the stability margins
    // used anywhere in the crate.
    let schur = [SVD_EPS, 1e-13, 1e-12]
        .iter()
        .find_map(|&eps| m.clone().try_schur(eps, 10_000))
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, z| acc.min(z.re)))
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn symmetric_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    require_square(m, m.nrows())?;
    check_finite(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, SVD_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Entrywise `sign(x)·max(|x| − lam, 0)`: the proximal map of `lam·‖·‖₁`.
pub fn soft_threshold(m: &Mat, lam: f64) -> Result<Mat> {
    if !(lam >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be nonnegative, got {lam}"
        )));
    }
    Ok(m.map(|x| x.signum() * (x.abs() - lam).max(0.0)))
}

/// Proximal map of `lam·‖·‖_*`: shrink every singular value by `lam`.
pub fn singular_value_threshold(m: &Mat, lam: f64) -> Result<Mat> {
    if !(lam >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be nonnegative, got {lam}"
        )));
    }
    Ok(svd(m)?.reconstruct_with(|s| (s - lam).max(0.0)))
}

/// Tangent spaces of a low-rank-plus-sparse pair `(L₀, S₀)`.
///
/// `u0` and `v0` hold orthonormal bases of the column and row spaces of
/// `L₀`; `support` lists the nonzero positions of `S₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentSpaces {
    #[serde(with = "mat_serde")]
    pub u0: Mat,
    #[serde(with = "mat_serde")]
    pub v0: Mat,
    pub support: Vec<(usize, usize)>,
}

impl TangentSpaces {
    pub fn new(u0: Mat, v0: Mat, support: Vec<(usize, usize)>, tol: f64) -> Result<Self> {
        let d = u0.nrows();
        if v0.nrows() != d || v0.ncols() != u0.ncols() {
            return Err(dim_err(
                format!("{}x{}", d, u0.ncols()),
                format!("{}x{}", v0.nrows(), v0.ncols()),
            ));
        }
        for basis in [&u0, &v0] {
            let gram = basis.transpose() * basis;
            let eye = Mat::identity(gram.nrows(), gram.ncols());
            if linf_norm(&(gram - eye)) > tol {
                return Err(Error::InvalidArgument(
                    "tangent basis is not orthonormal".into(),
                ));
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(support.len());
        for &(i, j) in &support {
            if i >= d || j >= d {
                return Err(Error::InvalidArgument(format!(
                    "support index ({i}, {j}) outside {d}x{d}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate support index ({i}, {j})"
                )));
            }
        }
        Ok(Self { u0, v0, support })
    }

    /// Tangent spaces at `(l0, s0)`: rank and support decided with the
    /// given relative rank tolerance and absolute support tolerance.
    pub fn from_components(l0: &Mat, s0: &Mat, rank_tol: f64, support_tol: f64) -> Result<Self> {
        let d = l0.nrows();
        require_square(l0, d)?;
        require_square(s0, d)?;
        let dec = svd(l0)?;
        let r = dec.rank(rank_tol);
        let u0 = dec.u.columns(0, r).into_owned();
        let v0 = dec.vt.rows(0, r).transpose();
        let mut support = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if s0[(i, j)].abs() > support_tol {
                    support.push((i, j));
                }
            }
        }
        Ok(Self { u0, v0, support })
    }

    pub fn dim(&self) -> usize {
        self.u0.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u0.ncols()
    }

    pub fn support_mask(&self) -> DMatrix<bool> {
        let d = self.dim();
        let mut mask = DMatrix::from_element(d, d, false);
        for &(i, j) in &self.support {
            mask[(i, j)] = true;
        }
        mask
    }

    /// `P_{T_L}(m) = U₀U₀ᵀm + mV₀V₀ᵀ − U₀U₀ᵀmV₀V₀ᵀ`.
    pub fn project_tl(&self, m: &Mat) -> Result<Mat> {
        require_square(m, self.dim())?;
        let pu_m = &self.u0 * (self.u0.transpose() * m);
        let m_pv = (m * &self.v0) * self.v0.transpose();
        let pu_m_pv = (&pu_m * &self.v0) * self.v0.transpose();
        Ok(pu_m + m_pv - pu_m_pv)
    }

    pub fn project_tl_perp(&self, m: &Mat) -> Result<Mat> {
        Ok(m - self.project_tl(m)?)
    }

    /// Zeros every entry outside the support.
    pub fn project_ts(&self, m: &Mat) -> Result<Mat> {
        require_square(m, self.dim())?;
        let mut out = Mat::zeros(m.nrows(), m.ncols());
        for &(i, j) in &self.support {
            out[(i, j)] = m[(i, j)];
        }
        Ok(out)
    }

    pub fn project_ts_perp(&self, m: &Mat) -> Result<Mat> {
        Ok(m - self.project_ts(m)?)
    }
}

/// Free-function forms matching the module's operation list.
pub fn project_tl(ts: &TangentSpaces, m: &Mat) -> Result<Mat> {
    ts.project_tl(m)
}

pub fn project_ts(ts: &TangentSpaces, m: &Mat) -> Result<Mat> {
    ts.project_ts(m)
}

/// Serde adapter writing a matrix as `{rows, cols, entries}` in row-major order.
pub mod mat_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{mat_from_row_major, to_row_major, Mat};

    #[derive(Serialize, Deserialize)]
    struct Dense {
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            entries: to_row_major(m),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let dense = Dense::deserialize(d)?;
        mat_from_row_major(dense.rows, dense.cols, &dense.entries).map_err(D::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref()
                .map(|m| Dense {
                    rows: m.nrows(),
                    cols: m.ncols(),
                    entries: to_row_major(m),
                })
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
            Option::<Dense>::deserialize(d)?
                .map(|dense| {
                    mat_from_row_major(dense.rows, dense.cols, &dense.entries)
                        .map_err(D::Error::custom)
                })
                .transpose()
        }
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::Mat;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn random_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
        Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    /// Random `d×r` matrix with orthonormal columns.
    pub fn random_orthonormal<R: Rng>(rng: &mut R, d: usize, r: usize) -> Mat {
        let g = random_mat(rng, d, r);
        g.qr().q().columns(0, r).into_owned()
    }
}
