//! L² products by periodic quadrature, the pulled-back metrics ω_k, their
//! C⁰ distance to ω₀, and grid-graph geodesics.

use crate::abelian::{RiemannMatrix, TorusPoint};
use crate::error::{Error, Result};
use crate::graph::dijkstra;
use crate::numeric::{GaugeValue, KahanC, C64};
use crate::par;
use crate::theta::{sum_norm_sq, FkMode, ThetaBasis};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Default finite-difference step for the complex Hessian of log f_k.
pub const DEFAULT_STEP: f64 = 2e-3;

/// Anything that produces section values in the unitary gauge together with
/// its distortion function.
pub trait SectionSystem: Sync {
    fn om(&self) -> &RiemannMatrix;
    fn k(&self) -> u64;
    fn dim(&self) -> usize;
    fn values_at_z(&self, z: &DVector<C64>) -> Result<Vec<GaugeValue>>;
    fn log_distortion_at_z(&self, z: &DVector<C64>) -> Result<f64>;
}

impl SectionSystem for ThetaBasis {
    fn om(&self) -> &RiemannMatrix {
        ThetaBasis::om(self)
    }
    fn k(&self) -> u64 {
        ThetaBasis::k(self)
    }
    fn dim(&self) -> usize {
        ThetaBasis::dim(self)
    }
    fn values_at_z(&self, z: &DVector<C64>) -> Result<Vec<GaugeValue>> {
        ThetaBasis::values_at_z(self, z)
    }
    fn log_distortion_at_z(&self, z: &DVector<C64>) -> Result<f64> {
        Ok(self.distortion_at_z(z, FkMode::Closed)?.ln())
    }
}

/// The theta basis with each element rescaled; used as a non-balanced
/// control.
#[derive(Clone, Debug)]
pub struct ScaledBasis {
    pub basis: ThetaBasis,
    pub scales: Vec<f64>,
}

impl SectionSystem for ScaledBasis {
    fn om(&self) -> &RiemannMatrix {
        self.basis.om()
    }
    fn k(&self) -> u64 {
        self.basis.k()
    }
    fn dim(&self) -> usize {
        self.basis.dim()
    }
    fn values_at_z(&self, z: &DVector<C64>) -> Result<Vec<GaugeValue>> {
        let v = self.basis.values_at_z(z)?;
        Ok(v.iter()
            .zip(&self.scales)
            .map(|(g, s)| GaugeValue {
                log_mag: g.log_mag + s.ln(),
                ..*g
            })
            .collect())
    }
    fn log_distortion_at_z(&self, z: &DVector<C64>) -> Result<f64> {
        Ok(sum_norm_sq(&self.values_at_z(z)?).ln())
    }
}

/// Uniform tensor grid on the 2n-torus, coordinates ordered
/// (x₁..xₙ, y₁..yₙ) with the last one varying fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadratureGrid {
    n: usize,
    m: usize,
}

impl QuadratureGrid {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::NonPositive("grid dimension and resolution".into()));
        }
        Ok(QuadratureGrid { n, m })
    }

    /// m = max(8k, 32) per dimension.
    pub fn for_level(n: usize, k: u64) -> Self {
        QuadratureGrid {
            n,
            m: (8 * k as usize).max(32),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn len(&self) -> usize {
        self.m.pow(2 * self.n as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; 2 * self.n];
        for d in (0..2 * self.n).rev() {
            c[d] = idx % self.m;
            idx /= self.m;
        }
        c
    }

    pub fn index_of(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, c| acc * self.m + c % self.m)
    }

    pub fn node(&self, idx: usize) -> TorusPoint {
        let c = self.coords(idx);
        let f = |v: &usize| *v as f64 / self.m as f64;
        TorusPoint {
            x: c[..self.n].iter().map(f).collect(),
            y: c[self.n..].iter().map(f).collect(),
        }
    }

    /// Nearest node to a torus point.
    pub fn nearest(&self, p: &TorusPoint) -> usize {
        let c: Vec<usize> =
            p.x.iter()
                .chain(&p.y)
                .map(|t| ((t * self.m as f64).round() as usize) % self.m)
                .collect();
        self.index_of(&c)
    }

    fn check_level(&self, k: u64) -> Result<()> {
        if self.m < 8 * k as usize {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {} below 8k = {}",
                self.m,
                8 * k
            )));
        }
        Ok(())
    }
}

/// Complex section values at every grid node, node-major.
pub fn sample_values<S: SectionSystem>(sys: &S, grid: &QuadratureGrid) -> Result<Vec<Vec<C64>>> {
    par::try_map_range(grid.len(), |i| {
        let z = sys.om().coords_to_z(&grid.node(i));
        Ok(sys
            .values_at_z(&z)?
            .iter()
            .map(|g| g.to_complex())
            .collect())
    })
}

fn hermitian_accumulate(
    grid: &QuadratureGrid,
    d: usize,
    entry: impl Fn(usize) -> Result<(Vec<C64>, f64)> + Sync + Send,
) -> Result<DMatrix<C64>> {
    let acc = par::chunked_reduce(
        grid.len(),
        || Ok(vec![KahanC::default(); d * d]),
        |acc: &mut Result<Vec<KahanC>>, i| {
            let Ok(a) = acc else { return };
            match entry(i) {
                Ok((v, w)) => {
                    for r in 0..d {
                        for c in 0..d {
                            a[r * d + c].add(v[r] * v[c].conj() * w);
                        }
                    }
                }
                Err(e) => *acc = Err(e),
            }
        },
        |total, part| match (total.as_mut(), part) {
            (Ok(t), Ok(p)) => t.iter_mut().zip(p).for_each(|(a, b)| a.merge(b)),
            (Ok(_), Err(e)) => *total = Err(e),
            _ => {}
        },
    )?;
    let w = grid.weight();
    let m = DMatrix::from_fn(d, d, |r, c| acc[r * d + c].value() * w);
    Ok((&m + m.adjoint()).map(|v| v * 0.5))
}

/// (s_i, s_j)_{L²} = ∫ (s_i, s_j)_{h₀} dx dy on the tensor trapezoid grid.
pub fn gram_matrix<S: SectionSystem>(sys: &S, grid: &QuadratureGrid) -> Result<DMatrix<C64>> {
    grid.check_level(sys.k())?;
    hermitian_accumulate(grid, sys.dim(), |i| {
        let z = sys.om().coords_to_z(&grid.node(i));
        Ok((
            sys.values_at_z(&z)?
                .iter()
                .map(|g| g.to_complex())
                .collect(),
            1.0,
        ))
    })
}

/// M_ij = ∫ (s_i, s_j)_{h₀} / f_k · (kω_k)ⁿ/n!, with the volume form
/// k^n √det g_k dx dy read off the sampled ω_k. The overall factor √−1 of
/// the defining formula is dropped.
pub fn balanced_matrix<S: SectionSystem>(
    sys: &S,
    grid: &QuadratureGrid,
    h_step: f64,
) -> Result<DMatrix<C64>> {
    grid.check_level(sys.k())?;
    let scale = (sys.k() as f64).powi(sys.om().n() as i32);
    hermitian_accumulate(grid, sys.dim(), |i| {
        let p = grid.node(i);
        let z = sys.om().coords_to_z(&p);
        let vals = sys.values_at_z(&z)?;
        let f = sum_norm_sq(&vals);
        let g = omega_k_metric(sys, &p, h_step)?;
        let vol = g.determinant().max(0.0).sqrt();
        let v = vals.iter().map(|g| g.to_complex() / f.sqrt()).collect();
        Ok((v, scale * vol))
    })
}

/// Relative deviation from c·Id with c = trace/dim.
pub fn identity_deviation(m: &DMatrix<C64>) -> (f64, f64) {
    let d = m.nrows();
    let c = m.trace().re / d as f64;
    let dev = (m - DMatrix::<C64>::identity(d, d) * C64::new(c, 0.0))
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    (c, dev / c.abs())
}

/// A sampled metric tensor in (x, y) coordinates.
#[derive(Clone, Debug)]
pub struct MetricSample {
    pub point: TorusPoint,
    pub g: DMatrix<f64>,
}

/// Real Hessian of φ(p, q) = log f_k(p + iq) by central differences.
fn real_hessian<S: SectionSystem>(sys: &S, z0: &DVector<C64>, h: f64) -> Result<DMatrix<f64>> {
    let n = sys.om().n();
    let dim = 2 * n;
    let shift = |steps: &[(usize, f64)]| -> DVector<C64> {
        let mut z = z0.clone();
        for &(d, s) in steps {
            if d < n {
                z[d] += C64::new(s, 0.0);
            } else {
                z[d - n] += C64::new(0.0, s);
            }
        }
        z
    };
    let phi = |steps: &[(usize, f64)]| sys.log_distortion_at_z(&shift(steps));
    let center = phi(&[])?;
    let mut hess = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        hess[(a, a)] = (phi(&[(a, h)])? - 2.0 * center + phi(&[(a, -h)])?) / (h * h);
        for b in a + 1..dim {
            let v = (phi(&[(a, h), (b, h)])? - phi(&[(a, h), (b, -h)])? - phi(&[(a, -h), (b, h)])?
                + phi(&[(a, -h), (b, -h)])?)
                / (4.0 * h * h);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    Ok(hess)
}

/// Richardson-extrapolated real Hessian from steps h and h/2.
fn hessian_richardson<S: SectionSystem>(
    sys: &S,
    z0: &DVector<C64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    let coarse = real_hessian(sys, z0, h)?;
    let fine = real_hessian(sys, z0, h / 2.0)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-5..=1e-2).contains(&h) {
        return Err(Error::InvalidStep(h));
    }
    Ok(())
}

/// Real (x, y) tensor of ω_k = ω₀ + (√−1/2πk) ∂∂̄ log f_k, i.e. the
/// Hermitian matrix H + (1/πk)·[∂²log f_k/∂z_i∂z̄_j] pulled back along
/// dz = Ω dx + dy. No definiteness check.
pub fn omega_k_metric<S: SectionSystem>(
    sys: &S,
    p: &TorusPoint,
    h_step: f64,
) -> Result<DMatrix<f64>> {
    check_step(h_step)?;
    let om = sys.om();
    let z0 = om.coords_to_z(p);
    let hr = hessian_richardson(sys, &z0, h_step)?;
    Ok(metric_from_hessian(om, &hr, sys.k()))
}

fn metric_from_hessian(om: &RiemannMatrix, hr: &DMatrix<f64>, k: u64) -> DMatrix<f64> {
    let n = om.n();
    // ∂_{z_i}∂_{z̄_j} = ¼(∂p_i∂p_j + ∂q_i∂q_j + i(∂p_i∂q_j − ∂q_i∂p_j))
    let ddbar = DMatrix::from_fn(n, n, |i, j| {
        C64::new(
            hr[(i, j)] + hr[(n + i, n + j)],
            hr[(i, n + j)] - hr[(n + i, j)],
        ) * 0.25
    });
    let herm = om.im_inv().map(|v| C64::new(v, 0.0)) + ddbar / C64::new(PI * k as f64, 0.0);
    // J = [Ω | I]: tangent (dx, dy) ↦ dz
    let mut jac = DMatrix::from_element(n, 2 * n, C64::new(0.0, 0.0));
    jac.view_mut((0, 0), (n, n)).copy_from(om.omega());
    for i in 0..n {
        jac[(i, n + i)] = C64::new(1.0, 0.0);
    }
    let g = (jac.transpose() * herm * jac.map(|v| v.conj())).map(|v| v.re);
    (&g + g.transpose()) * 0.5
}

pub fn omega_k_tensor<S: SectionSystem>(
    sys: &S,
    p: &TorusPoint,
    h_step: f64,
) -> Result<MetricSample> {
    let g = omega_k_metric(sys, p, h_step)?;
    if g.clone().cholesky().is_none() {
        return Err(Error::NonPositive(format!("ω_k tensor at {p:?}")));
    }
    Ok(MetricSample {
        point: p.clone(),
        g,
    })
}

/// Largest entry of |g(h) − g(h/2)| where each side is Richardson-extrapolated.
pub fn richardson_gap<S: SectionSystem>(sys: &S, p: &TorusPoint, h_step: f64) -> Result<f64> {
    let a = omega_k_metric(sys, p, h_step)?;
    let b = omega_k_metric(sys, p, h_step / 2.0)?;
    Ok((a - b).amax())
}

/// ‖g₀^{-1/2}(g₀ − g)g₀^{-1/2}‖₂.
pub fn relative_deviation(g0_chol: &DMatrix<f64>, g0: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let linv = g0_chol
        .clone()
        .try_inverse()
        .expect("cholesky factor is invertible");
    let m = &linv * (g0 - g) * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    m.symmetric_eigenvalues()
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}

/// Metric tensors on every node of a grid.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub grid: QuadratureGrid,
    pub tensors: Vec<DMatrix<f64>>,
}

impl MetricField {
    pub fn flat(om: &RiemannMatrix, m: usize) -> Result<Self> {
        let grid = QuadratureGrid::new(om.n(), m)?;
        let tensors = vec![om.total_metric().clone(); grid.len()];
        Ok(MetricField { grid, tensors })
    }

    pub fn omega_k<S: SectionSystem>(sys: &S, m: usize, h_step: f64) -> Result<Self> {
        let grid = QuadratureGrid::new(sys.om().n(), m)?;
        let tensors =
            par::try_map_range(grid.len(), |i| omega_k_metric(sys, &grid.node(i), h_step))?;
        Ok(MetricField { grid, tensors })
    }

    /// Graph distances from `source` to every node: each node is joined to
    /// its 3^{2n} − 1 neighbors with periodic wrap; an edge costs the length
    /// of the straight segment in the endpoint-averaged metric.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let grid = &self.grid;
        let dim = 2 * grid.n();
        let m = grid.m() as i64;
        let offsets: Vec<Vec<i64>> = (0..3usize.pow(dim as u32))
            .map(|code| {
                (0..dim)
                    .map(|d| ((code / 3usize.pow(d as u32)) % 3) as i64 - 1)
                    .collect::<Vec<_>>()
            })
            .filter(|o| o.iter().any(|v| *v != 0))
            .collect();
        let h = 1.0 / grid.m() as f64;
        dijkstra(grid.len(), &[(source, 0.0)], |u, emit| {
            let cu = grid.coords(u);
            for off in &offsets {
                let cv: Vec<usize> = cu
                    .iter()
                    .zip(off)
                    .map(|(c, o)| (*c as i64 + o).rem_euclid(m) as usize)
                    .collect();
                let v = grid.index_of(&cv);
                let (gu, gv) = (&self.tensors[u], &self.tensors[v]);
                let mut len2 = 0.0;
                for r in 0..dim {
                    for c in 0..dim {
                        len2 += off[r] as f64 * 0.5 * (gu[(r, c)] + gv[(r, c)]) * off[c] as f64;
                    }
                }
                emit(v, h * len2.max(0.0).sqrt());
            }
        })
    }

    pub fn geodesic_distance(&self, p: usize, q: usize) -> f64 {
        self.distances_from(p)[q]
    }
}

pub fn geodesic_distance(field: &MetricField, p: &TorusPoint, q: &TorusPoint) -> f64 {
    field.geodesic_distance(field.grid.nearest(p), field.grid.nearest(q))
}

/// sup over grid nodes of the g₀-relative operator-norm deviation of ω_k.
pub fn c0_metric_deviation<S: SectionSystem>(
    sys: &S,
    grid: &QuadratureGrid,
    h_step: f64,
) -> Result<f64> {
    let g0 = sys.om().total_metric().clone();
    let l0 = g0.clone().cholesky().ok_or(Error::NotPositive)?.l();
    let devs = par::try_map_range(grid.len(), |i| {
        let g = omega_k_metric(sys, &grid.node(i), h_step)?;
        Ok::<_, Error>(relative_deviation(&l0, &g0, &g))
    })?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heisenberg::{rho_matrix, GroupElement};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tau(re: f64, im: f64) -> RiemannMatrix {
        RiemannMatrix::diagonal(&[C64::new(re, im)]).unwrap()
    }

    #[test]
    fn gram_is_identity_and_refines() {
        let om = tau(0.3, 1.2);
        for k in [1u64, 3, 6] {
            let b = ThetaBasis::new(&om, k).unwrap();
            let g = gram_matrix(&b, &QuadratureGrid::new(1, 8 * k as usize).unwrap()).unwrap();
            let g2 = gram_matrix(&b, &QuadratureGrid::new(1, 16 * k as usize).unwrap()).unwrap();
            let id = DMatrix::<C64>::identity(b.dim(), b.dim());
            assert!((&g - &id).camax() < 1e-8);
            assert!((&g - &g2).camax() < 1e-10);
            assert_eq!(g, g.adjoint());
            let ev = g.map(|v| v).symmetric_eigenvalues();
            assert!(ev.iter().all(|e| (e - 1.0).abs() < 1e-6));
        }
        assert!(gram_matrix(
            &ThetaBasis::new(&om, 5).unwrap(),
            &QuadratureGrid::new(1, 32).unwrap()
        )
        .is_err());
    }

    #[test]
    fn gram_commutes_with_heisenberg_action() {
        let om = tau(0.3, 1.2);
        let b = ThetaBasis::new(&om, 4).unwrap();
        let g = gram_matrix(&b, &QuadratureGrid::new(1, 32).unwrap()).unwrap();
        for (a, bb) in [(1, 0), (0, 1), (3, 2)] {
            let r = rho_matrix(&GroupElement::new(4, 0, &[a], &[bb]).unwrap(), &b).unwrap();
            assert!((r.conjugate(&g) - &g).camax() < 1e-12);
        }
        let off = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| g[(i, j)].norm())
            .fold(0.0, f64::max);
        assert!(off < 1e-12);
    }

    #[test]
    fn omega_k_properties() {
        let om = tau(0.0, 1.0);
        let b = ThetaBasis::new(&om, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let p = TorusPoint {
                x: vec![rng.gen()],
                y: vec![rng.gen()],
            };
            let s = omega_k_tensor(&b, &p, DEFAULT_STEP).unwrap();
            let q = TorusPoint::reduced(vec![p.x[0] + 1.0 / 3.0], vec![p.y[0] + 2.0 / 3.0]);
            let t = omega_k_tensor(&b, &q, DEFAULT_STEP).unwrap();
            assert!((&s.g - &t.g).amax() < 1e-8);
            let gap = richardson_gap(&b, &p, DEFAULT_STEP).unwrap();
            assert!(gap < 1e-7, "{gap}");
        }
        assert!(matches!(
            omega_k_tensor(&b, &TorusPoint::origin(1), 0.5),
            Err(Error::InvalidStep(_))
        ));
    }

    #[test]
    fn omega_k_positive_on_grid() {
        for k in [2u64, 3, 4] {
            let b = ThetaBasis::new(&tau(0.0, 1.0), k).unwrap();
            let grid = QuadratureGrid::new(1, 8 * k as usize).unwrap();
            for i in 0..grid.len() {
                omega_k_tensor(&b, &grid.node(i), DEFAULT_STEP).unwrap();
            }
        }
    }

    #[test]
    fn balanced_basis_and_negative_control() {
        let om = tau(0.3, 1.2);
        let b = ThetaBasis::new(&om, 3).unwrap();
        let grid = QuadratureGrid::new(1, 32).unwrap();
        let m = balanced_matrix(&b, &grid, DEFAULT_STEP).unwrap();
        let (c, dev) = identity_deviation(&m);
        assert!(dev < 1e-6, "{dev}");
        assert!((m.trace().re - 3.0).abs() < 1e-6 * 3.0 && (c - 1.0).abs() < 1e-6);
        let mut scales = vec![1.0; 3];
        scales[0] = 2.0;
        let bad = balanced_matrix(&ScaledBasis { basis: b, scales }, &grid, DEFAULT_STEP).unwrap();
        assert!(identity_deviation(&bad).1 > 0.1);
    }

    #[test]
    fn deviation_shrinks_with_level() {
        let om = tau(0.0, 1.0);
        let grid = QuadratureGrid::new(1, 40).unwrap();
        let flat = om.total_metric().clone();
        let l0 = flat.clone().cholesky().unwrap().l();
        assert_eq!(relative_deviation(&l0, &flat, &flat), 0.0);
        let d: Vec<f64> = [2u64, 3, 4, 5]
            .iter()
            .map(|k| {
                c0_metric_deviation(&ThetaBasis::new(&om, *k).unwrap(), &grid, DEFAULT_STEP)
                    .unwrap()
            })
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    }

    #[test]
    fn flat_geodesic_and_symmetry() {
        let om = tau(0.0, 1.0);
        let m = 16;
        let field = MetricField::flat(&om, m).unwrap();
        let d = geodesic_distance(
            &field,
            &TorusPoint::origin(1),
            &TorusPoint {
                x: vec![0.0],
                y: vec![0.5],
            },
        );
        assert!((d - 0.5).abs() <= 2.0 / m as f64);
        let p = TorusPoint {
            x: vec![0.25],
            y: vec![0.125],
        };
        let q = TorusPoint {
            x: vec![0.625],
            y: vec![0.75],
        };
        assert_eq!(
            geodesic_distance(&field, &p, &q),
            geodesic_distance(&field, &q, &p)
        );
    }

    #[test]
    fn level_metric_distances_approach_flat() {
        let om = tau(0.0, 1.0);
        let m = 48;
        let flat = MetricField::flat(&om, m).unwrap();
        let grid = &flat.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pairs: Vec<(usize, usize)> = (0..6)
            .map(|_| (rng.gen_range(0..grid.len()), rng.gen_range(0..grid.len())))
            .collect();
        let worst = |k: u64| {
            let field =
                MetricField::omega_k(&ThetaBasis::new(&om, k).unwrap(), m, DEFAULT_STEP).unwrap();
            pairs
                .iter()
                .map(|&(p, q)| {
                    (field.geodesic_distance(p, q) / flat.geodesic_distance(p, q) - 1.0).abs()
                })
                .fold(0.0, f64::max)
        };
        // fit C at k = 3, then require the 1/k envelope at larger k
        let c = 3.0 * worst(3);
        for k in [4u64, 6] {
            assert!(worst(k) <= c / k as f64);
        }
    }
}
