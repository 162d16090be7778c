//! Dense vector and small symmetric-matrix kernels.
//!
//! Vectors are plain `[f64]` slices. Every reduction runs in index order so
//! that trajectories are bit-reproducible for a fixed seed.

use crate::error::{Error, Result};

/// Sweeps allowed before the Jacobi iteration is declared stuck.
pub const MAX_JACOBI_SWEEPS: usize = 64;

/// Default eigenvalue floor used by [`inv_sqrt_psd`] callers.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-12;

/// Division with the conventions `x/0 = +inf` for `x > 0` and `0/0 = 0`.
pub fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(num)
        }
    } else {
        num / den
    }
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

pub fn ensure_finite(x: &[f64], what: &'static str) -> Result<()> {
    if all_finite(x) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

pub fn norm1(x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for v in x {
        acc += v.abs();
    }
    acc
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc.sqrt()
}

pub fn scaled(x: &[f64], s: f64) -> Vec<f64> {
    x.iter().map(|v| v * s).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `y += a * x`
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `(1 - t) * a + t * b`, the convex-combination update used by every
/// averaging scheme in the crate.
pub fn mix(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    let s = 1.0 - t;
    a.iter().zip(b).map(|(x, y)| s * x + t * y).collect()
}

/// Euclidean projection onto the centered ball of radius `r`.
pub fn project_ball(x: &[f64], r: f64) -> Result<Vec<f64>> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("ball radius must be finite and >= 0, got {r}")));
    }
    ensure_finite(x, "project_ball input")?;
    Ok(project_ball_unchecked(x, r))
}

pub(crate) fn project_ball_unchecked(x: &[f64], r: f64) -> Vec<f64> {
    let n = norm(x);
    if n <= r {
        x.to_vec()
    } else {
        // v/n first keeps 1-D projections exactly on the boundary
        let mut y: Vec<f64> = x.iter().map(|v| v / n * r).collect();
        // rounding can leave |y| a few ulps above r; pull it inside so the
        // projection is exactly idempotent
        let mut s = 1.0;
        while norm(&y) > r {
            s *= 1.0 - f64::EPSILON;
            y = x.iter().map(|v| v / n * r * s).collect();
        }
        y
    }
}

/// `x * min{1, 1/|x|}` with `0/0 = 0`.
pub fn clip_euclid(x: &[f64]) -> Result<Vec<f64>> {
    ensure_finite(x, "clip_euclid input")?;
    Ok(project_ball_unchecked(x, 1.0))
}

/// Coordinate-wise clamp to `[-1, 1]`.
pub fn clip_coord(x: &[f64]) -> Result<Vec<f64>> {
    ensure_finite(x, "clip_coord input")?;
    Ok(x.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = d[i];
        }
        m
    }

    /// Build from row-major data; the caller is responsible for symmetry,
    /// which is checked by the operations that need it.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self += s * v v^T`
    pub fn add_outer(&mut self, v: &[f64], s: f64) {
        let n = self.n;
        for i in 0..n {
            let a = s * v[i];
            for j in 0..n {
                self.data[i * n + j] += a * v[j];
            }
        }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn plus(&self, other: &SymMat) -> SymMat {
        SymMat { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| dot(&self.data[i * n..(i + 1) * n], x)).collect()
    }

    pub fn mul(&self, other: &SymMat) -> SymMat {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.data[i * n + k] * other.data[k * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        SymMat { n, data: out }
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.data)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    fn off_diag_sq(&self) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += self.data[i * n + j] * self.data[i * n + j];
                }
            }
        }
        acc
    }
}

/// Symmetric eigendecomposition: eigenvalues and eigenvectors (columns of the
/// row-major `n x n` matrix `q`).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub q: Vec<f64>,
}

fn check_symmetric(s: &SymMat) -> Result<()> {
    if !all_finite(&s.data) {
        return Err(Error::NonFinite("symmetric matrix"));
    }
    let asym = s.max_asymmetry();
    if asym > 1e-12 * s.max_abs().max(1.0) {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition.
pub fn sym_eigen(s: &SymMat) -> Result<Eigen> {
    check_symmetric(s)?;
    let n = s.n;
    let mut a = s.clone();
    // symmetrize exactly so rotations act on a truly symmetric matrix
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a.data[i * n + j] + a.data[j * n + i]);
            a.data[i * n + j] = m;
            a.data[j * n + i] = m;
        }
    }
    let mut q = SymMat::identity(n).data;
    let total: f64 = norm_sq(&a.data);
    let tol = f64::EPSILON * f64::EPSILON * total;

    let mut converged = n < 2 || a.off_diag_sq() <= tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::NoConvergence(MAX_JACOBI_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a.data[p * n + r];
                if apr == 0.0 {
                    continue;
                }
                let app = a.data[p * n + p];
                let arr = a.data[r * n + r];
                let theta = (arr - app) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a.data[k * n + p];
                    let akr = a.data[k * n + r];
                    a.data[k * n + p] = c * akp - sn * akr;
                    a.data[k * n + r] = sn * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a.data[p * n + k];
                    let ark = a.data[r * n + k];
                    a.data[p * n + k] = c * apk - sn * ark;
                    a.data[r * n + k] = sn * apk + c * ark;
                }
                a.data[p * n + r] = 0.0;
                a.data[r * n + p] = 0.0;
                for k in 0..n {
                    let qkp = q[k * n + p];
                    let qkr = q[k * n + r];
                    q[k * n + p] = c * qkp - sn * qkr;
                    q[k * n + r] = sn * qkp + c * qkr;
                }
            }
        }
        converged = a.off_diag_sq() <= tol;
    }
    let values = (0..n).map(|i| a.data[i * n + i]).collect();
    Ok(Eigen { values, q })
}

/// `Q diag(max(lambda, floor)^{-1/2}) Q^T` for a positive semidefinite `s`.
pub fn inv_sqrt_psd(s: &SymMat, floor: f64) -> Result<SymMat> {
    if !(floor > 0.0) {
        return Err(Error::invalid(format!("eigenvalue floor must be > 0, got {floor}")));
    }
    let eig = sym_eigen(s)?;
    let n = s.n;
    let lmax = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let slack = -1e-10 * lmax.max(1.0);
    if let Some(&neg) = eig.values.iter().find(|&&l| l < slack) {
        return Err(Error::Indefinite(neg));
    }
    let w: Vec<f64> = eig.values.iter().map(|&l| 1.0 / l.max(floor).sqrt()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += eig.q[i * n + k] * w[k] * eig.q[j * n + k];
            }
            out[i * n + j] = acc;
            out[j * n + i] = acc;
        }
    }
    Ok(SymMat { n, data: out })
}

/// Spectral norm of a row-major `rows x cols` matrix via the eigenvalues of
/// `A^T A`.
pub fn spectral_norm(a: &[f64], rows: usize, cols: usize) -> Result<f64> {
    if a.len() != rows * cols {
        return Err(Error::Dimension { expected: rows * cols, got: a.len() });
    }
    let mut ata = SymMat::zeros(cols);
    for r in 0..rows {
        ata.add_outer(&a[r * cols..(r + 1) * cols], 1.0);
    }
    let eig = sym_eigen(&ata)?;
    Ok(eig.values.iter().fold(0.0_f64, |m, v| m.max(*v)).max(0.0).sqrt())
}
