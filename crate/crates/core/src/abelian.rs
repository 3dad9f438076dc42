//! Period matrices, torus coordinates z = Ωx + y, the flat metric and the
//! Hermitian weight h₀ on X = ℂⁿ/(Ωℤⁿ + ℤⁿ).

use crate::error::{Error, Result};
use crate::numeric::C64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

const SYMMETRY_TOL: f64 = 1e-12;
/// Reduced coordinates this close to an integer are snapped to 0.
const WRAP_TOL: f64 = 1e-15;

/// A validated period matrix Ω = A + iB, B positive definite, together with
/// the real quantities every other module needs.
#[derive(Clone, Debug)]
pub struct RiemannMatrix {
    n: usize,
    omega: DMatrix<C64>,
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    im_chol: DMatrix<f64>,
    im_inv: DMatrix<f64>,
    lambda_min: f64,
    base: DMatrix<f64>,
    total: DMatrix<f64>,
}

/// On-disk form: `{"n": 2, "re": [[..]], "im": [[..]]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RiemannMatrixFile {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl RiemannMatrix {
    pub fn new(omega: DMatrix<C64>) -> Result<Self> {
        let n = omega.nrows();
        if n == 0 || omega.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "period matrix must be square and nonempty, got {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        for r in 0..n {
            for c in r + 1..n {
                let gap = (omega[(r, c)] - omega[(c, r)]).norm();
                if gap > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric {
                        row: r,
                        col: c,
                        gap,
                    });
                }
            }
        }
        // symmetrize away sub-tolerance noise
        let omega = (&omega + omega.transpose()).map(|v| v * 0.5);
        let re = omega.map(|v| v.re);
        let im = omega.map(|v| v.im);
        let chol = im.clone().cholesky().ok_or(Error::NotPositive)?;
        let lambda_min = im.clone().symmetric_eigen().eigenvalues.min();
        if lambda_min <= 0.0 || !lambda_min.is_finite() {
            return Err(Error::NotPositive);
        }
        let im_chol = chol.l();
        let im_inv = chol.inverse();
        let ah = &re * &im_inv;
        let fiber = &im + &ah * &re;
        let mut total = DMatrix::zeros(2 * n, 2 * n);
        total.view_mut((0, 0), (n, n)).copy_from(&fiber);
        total.view_mut((0, n), (n, n)).copy_from(&ah);
        total.view_mut((n, 0), (n, n)).copy_from(&ah.transpose());
        total.view_mut((n, n), (n, n)).copy_from(&im_inv);
        let total = (&total + total.transpose()) * 0.5;
        let base = fiber
            .clone()
            .cholesky()
            .ok_or(Error::NotPositive)?
            .inverse();
        let base = (&base + base.transpose()) * 0.5;
        Ok(RiemannMatrix {
            n,
            omega,
            re,
            im,
            im_chol,
            im_inv,
            lambda_min,
            base,
            total,
        })
    }

    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let n = re.len();
        if im.len() != n || re.iter().chain(im).any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch("re/im must both be n×n".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |r, c| C64::new(re[r][c], im[r][c])))
    }

    /// Diagonal period matrix with the given entries.
    pub fn diagonal(entries: &[C64]) -> Result<Self> {
        let n = entries.len();
        Self::new(DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                entries[r]
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_file(f: &RiemannMatrixFile) -> Result<Self> {
        if f.re.len() != f.n {
            return Err(Error::DimensionMismatch(format!(
                "declared n = {} but {} rows",
                f.n,
                f.re.len()
            )));
        }
        Self::from_parts(&f.re, &f.im)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file(&serde_json::from_str(&text)?)
    }

    pub fn to_file(&self) -> RiemannMatrixFile {
        let rows = |m: &DMatrix<f64>| {
            (0..self.n)
                .map(|r| (0..self.n).map(|c| m[(r, c)]).collect())
                .collect()
        };
        RiemannMatrixFile {
            n: self.n,
            re: rows(&self.re),
            im: rows(&self.im),
        }
    }

    /// Ω scaled by a positive real, e.g. Ω/k for the level-k lattice sums.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if s <= 0.0 {
            return Err(Error::NonPositive("period scale".into()));
        }
        Self::new(self.omega.map(|v| v * s))
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn omega(&self) -> &DMatrix<C64> {
        &self.omega
    }
    pub fn re(&self) -> &DMatrix<f64> {
        &self.re
    }
    pub fn im(&self) -> &DMatrix<f64> {
        &self.im
    }
    /// Lower Cholesky factor L of Im Ω (Im Ω = L Lᵀ).
    pub fn im_chol(&self) -> &DMatrix<f64> {
        &self.im_chol
    }
    /// H = (Im Ω)⁻¹.
    pub fn im_inv(&self) -> &DMatrix<f64> {
        &self.im_inv
    }
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }
    pub fn det_im(&self) -> f64 {
        self.im_chol.diagonal().iter().product::<f64>().powi(2)
    }
    /// Real 2n×2n matrix of ω₀'s metric in (x, y) coordinates.
    pub fn total_metric(&self) -> &DMatrix<f64> {
        &self.total
    }
    pub fn base_metric(&self) -> BaseMetric {
        BaseMetric {
            q: self.base.clone(),
        }
    }
    /// Fiber block Im Ω + Re Ω (Im Ω)⁻¹ Re Ω of the real metric.
    pub fn fiber_metric(&self) -> DMatrix<f64> {
        self.total.view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn coords_to_z(&self, p: &TorusPoint) -> DVector<C64> {
        self.z_of(&p.x, &p.y)
    }

    /// z = Ωx + y for unreduced real vectors.
    pub fn z_of(&self, x: &[f64], y: &[f64]) -> DVector<C64> {
        DVector::from_fn(self.n, |r, _| {
            x.iter()
                .enumerate()
                .fold(C64::new(y[r], 0.0), |acc, (c, xc)| {
                    acc + self.omega[(r, c)] * xc
                })
        })
    }

    /// Unreduced real coordinates (x, y) with z = Ωx + y.
    pub fn z_to_xy(&self, z: &DVector<C64>) -> (Vec<f64>, Vec<f64>) {
        let q = z.map(|v| v.im);
        let x = &self.im_inv * q;
        let y = z.map(|v| v.re) - &self.re * &x;
        (x.iter().copied().collect(), y.iter().copied().collect())
    }

    pub fn z_to_coords(&self, z: &DVector<C64>) -> TorusPoint {
        let (x, y) = self.z_to_xy(z);
        TorusPoint::reduced(x, y)
    }

    /// zᵀ H w̄ with H = (Im Ω)⁻¹, via the Cholesky factor.
    pub fn hermitian_form(&self, z: &DVector<C64>, w: &DVector<C64>) -> C64 {
        let lz = self.chol_solve(z);
        let lw = self.chol_solve(w);
        lz.iter().zip(lw.iter()).map(|(a, b)| a * b.conj()).sum()
    }

    /// zᵀ H z (bilinear, no conjugation).
    pub fn bilinear_form(&self, z: &DVector<C64>, w: &DVector<C64>) -> C64 {
        let lz = self.chol_solve(z);
        let lw = self.chol_solve(w);
        lz.iter().zip(lw.iter()).map(|(a, b)| a * b).sum()
    }

    /// zᵀ H z̄ = |L⁻¹z|², real by construction.
    pub fn hermitian_norm_sq(&self, z: &DVector<C64>) -> f64 {
        self.chol_solve(z).iter().map(|v| v.norm_sqr()).sum()
    }

    /// L⁻¹ z by forward substitution.
    fn chol_solve(&self, z: &DVector<C64>) -> DVector<C64> {
        let n = self.n;
        let mut out = DVector::from_element(n, C64::new(0.0, 0.0));
        for r in 0..n {
            let mut acc = z[r];
            for c in 0..r {
                acc -= out[c] * self.im_chol[(r, c)];
            }
            out[r] = acc / self.im_chol[(r, r)];
        }
        out
    }

    /// log h₀(z) = −π zᵀ H z̄.
    pub fn h0_log_density(&self, z: &DVector<C64>) -> f64 {
        -PI * self.hermitian_norm_sq(z)
    }

    /// Flat geodesic distance on (X, ω₀): minimum over one shell of lattice
    /// shifts. Exact for reduced period matrices.
    pub fn total_distance(&self, p: &TorusPoint, q: &TorusPoint) -> f64 {
        let n = self.n;
        let mut delta: Vec<f64> =
            p.x.iter()
                .zip(&q.x)
                .chain(p.y.iter().zip(&q.y))
                .map(|(a, b)| centered(a - b))
                .collect();
        shell_min(&mut delta, 2 * n, &self.total)
    }

    pub fn base_distance(&self, y1: &[f64], y2: &[f64]) -> f64 {
        self.base_metric().distance(y1, y2)
    }

    /// √det of the fiber block; the volume of each Lagrangian fiber.
    pub fn fiber_volume(&self) -> f64 {
        self.fiber_metric().determinant().sqrt()
    }

    /// Shortest nonzero lattice vector length of Ωℤⁿ+ℤⁿ in the flat metric
    /// (one shell search).
    pub fn systole(&self) -> f64 {
        let dim = 2 * self.n;
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(dim as u32) {
            let v: Vec<f64> = (0..dim)
                .map(|d| ((code / 3usize.pow(d as u32)) % 3) as f64 - 1.0)
                .collect();
            if v.iter().all(|c| *c == 0.0) {
                continue;
            }
            best = best.min(quad(&self.total, &v).sqrt());
        }
        best
    }
}

/// Riemannian-submersion quotient metric on the base torus ℝⁿ/ℤⁿ.
#[derive(Clone, Debug)]
pub struct BaseMetric {
    pub q: DMatrix<f64>,
}

impl BaseMetric {
    pub fn distance(&self, y1: &[f64], y2: &[f64]) -> f64 {
        let mut delta: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| centered(a - b)).collect();
        shell_min(&mut delta, y1.len(), &self.q)
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }
}

/// A point of X in (x, y) coordinates, both reduced to [0,1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TorusPoint {
    pub fn reduced(x: Vec<f64>, y: Vec<f64>) -> Self {
        TorusPoint {
            x: x.into_iter().map(reduce_unit).collect(),
            y: y.into_iter().map(reduce_unit).collect(),
        }
    }

    pub fn origin(n: usize) -> Self {
        TorusPoint {
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// t mod 1 in [0,1). Values within 1e−15 of an integer (from either side)
/// reduce to 0, so lattice points land exactly on the origin.
pub fn reduce_unit(t: f64) -> f64 {
    let r = t - t.floor();
    if !(WRAP_TOL..1.0 - WRAP_TOL).contains(&r) {
        0.0
    } else {
        r
    }
}

/// t mod 1 in [−½, ½).
fn centered(t: f64) -> f64 {
    t - (t + 0.5).floor()
}

fn quad(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let d = v.len();
    let mut acc = 0.0;
    for r in 0..d {
        for c in 0..d {
            acc += v[r] * m[(r, c)] * v[c];
        }
    }
    acc
}

/// min over s ∈ {−1,0,1}^dim of √((δ+s)ᵀ M (δ+s)).
fn shell_min(delta: &mut [f64], dim: usize, m: &DMatrix<f64>) -> f64 {
    let mut best = f64::INFINITY;
    let mut v = vec![0.0; dim];
    for code in 0..3usize.pow(dim as u32) {
        let mut c = code;
        for d in 0..dim {
            v[d] = delta[d] + (c % 3) as f64 - 1.0;
            c /= 3;
        }
        best = best.min(quad(m, &v));
    }
    best.max(0.0).sqrt()
}
