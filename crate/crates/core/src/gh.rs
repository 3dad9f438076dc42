//! Finite metric spaces, Hausdorff and Gromov–Hausdorff upper bounds, and
//! the level sweep that measures metric and fibration convergence.

use crate::abelian::{RiemannMatrix, TorusPoint};
use crate::amoeba::{amoeba_sample_with, SimplexMetric};
use crate::error::{Error, Result};
use crate::kahler::{relative_deviation, MetricField, QuadratureGrid};
use crate::numeric::{linear_fit, LinearFit};
use crate::par;
use crate::theta::ThetaBasis;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

const TRIANGLE_TOL: f64 = 1e-9;
const FULL_CHECK_LIMIT: usize = 200;

#[derive(Clone, Debug)]
pub struct FiniteMetricSpace {
    pub labels: Vec<usize>,
    pub d: DMatrix<f64>,
}

impl FiniteMetricSpace {
    /// Validates symmetry, zero diagonal and the triangle inequality (all
    /// triples up to 200 points, a seeded sample of triples beyond).
    pub fn new(d: DMatrix<f64>) -> Result<Self> {
        let n = d.nrows();
        if n == 0 {
            return Err(Error::EmptySet);
        }
        if d.ncols() != n {
            return Err(Error::DimensionMismatch(
                "distance matrix must be square".into(),
            ));
        }
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if d[(i, j)].is_nan() || d[(i, j)] < 0.0 || d[(i, j)] != d[(j, i)] {
                    return Err(Error::InvalidArgument(format!(
                        "distance ({i},{j}) not symmetric nonnegative"
                    )));
                }
            }
        }
        let bad =
            |(i, j, l): (usize, usize, usize)| d[(i, j)] > d[(i, l)] + d[(l, j)] + TRIANGLE_TOL;
        let violation = if n <= FULL_CHECK_LIMIT {
            (0..n)
                .flat_map(|i| (0..n).flat_map(move |j| (0..n).map(move |l| (i, j, l))))
                .find(|t| bad(*t))
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            (0..FULL_CHECK_LIMIT.pow(3))
                .map(|_| {
                    (
                        rng.gen_range(0..n),
                        rng.gen_range(0..n),
                        rng.gen_range(0..n),
                    )
                })
                .find(|t| bad(*t))
        };
        if let Some((i, j, l)) = violation {
            return Err(Error::InvalidArgument(format!(
                "triangle inequality fails on ({i},{j},{l})"
            )));
        }
        Ok(FiniteMetricSpace {
            labels: (0..n).collect(),
            d,
        })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else if i < j {
                f(i, j)
            } else {
                f(j, i)
            }
        }))
    }

    pub fn len(&self) -> usize {
        self.d.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn diameter(&self) -> f64 {
        self.d.max()
    }
}

fn directed(space: &FiniteMetricSpace, from: &[usize], to: &[usize]) -> f64 {
    from.iter()
        .map(|&a| {
            to.iter()
                .map(|&b| space.d[(a, b)])
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

pub fn hausdorff_distance(space: &FiniteMetricSpace, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(directed(space, a, b).max(directed(space, b, a)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MapDistortion {
    pub distortion: f64,
    pub covering_radius: f64,
}

impl MapDistortion {
    /// φ is an ε-Hausdorff approximation iff this is < ε.
    pub fn epsilon(&self) -> f64 {
        self.distortion.max(self.covering_radius)
    }
}

pub fn map_distortion(
    src: &FiniteMetricSpace,
    dst: &FiniteMetricSpace,
    phi: &[usize],
) -> Result<MapDistortion> {
    if phi.len() != src.len() {
        return Err(Error::DimensionMismatch(format!(
            "map defined on {} of {} points",
            phi.len(),
            src.len()
        )));
    }
    if let Some(bad) = phi.iter().find(|v| **v >= dst.len()) {
        return Err(Error::InvalidArgument(format!(
            "image index {bad} out of range"
        )));
    }
    let mut distortion = 0.0f64;
    for i in 0..src.len() {
        for j in i + 1..src.len() {
            distortion = distortion.max((src.d[(i, j)] - dst.d[(phi[i], phi[j])]).abs());
        }
    }
    let all: Vec<usize> = (0..dst.len()).collect();
    let covering_radius = directed(dst, &all, phi);
    Ok(MapDistortion {
        distortion,
        covering_radius,
    })
}

/// ½ max over related pairs (a, a'), (b, b') of |d_A(a,b) − d_B(a',b')|.
pub fn gh_upper_bound(
    a: &FiniteMetricSpace,
    b: &FiniteMetricSpace,
    corr: &[(usize, usize)],
) -> Result<f64> {
    let mut left = vec![false; a.len()];
    let mut right = vec![false; b.len()];
    for &(i, j) in corr {
        if i >= a.len() || j >= b.len() {
            return Err(Error::NotACorrespondence(format!(
                "pair ({i},{j}) out of range"
            )));
        }
        left[i] = true;
        right[j] = true;
    }
    if !left.iter().all(|v| *v) || !right.iter().all(|v| *v) {
        return Err(Error::NotACorrespondence(
            "relation must be total and surjective".into(),
        ));
    }
    let mut worst = 0.0f64;
    for &(i, j) in corr {
        for &(p, q) in corr {
            worst = worst.max((a.d[(i, p)] - b.d[(j, q)]).abs());
        }
    }
    Ok(0.5 * worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceOptions {
    pub h_step: f64,
    /// grid nodes used for the metric GH bound
    pub metric_sample: usize,
    /// grid nodes p used for the coupled-space defect
    pub coupled_sample: usize,
    pub seed: u64,
    /// overrides the 1/√(πk) simplex-distance constant when set
    pub simplex_scale: Option<f64>,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            h_step: crate::kahler::DEFAULT_STEP,
            metric_sample: 16,
            coupled_sample: 50,
            seed: 0,
            simplex_scale: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub k: u64,
    pub c0_deviation: f64,
    pub gh_ub_metric: f64,
    pub phi_distortion: f64,
    pub phi_covering_radius: f64,
    pub coupled_defect: f64,
    pub base_diameter: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub ci95: (f64, f64),
    pub r2: f64,
    pub ks: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub grid_resolution: usize,
    pub rows: Vec<ConvergenceRow>,
    pub slopes: BTreeMap<String, SlopeFit>,
}

pub const REPORT_COLUMNS: [&str; 5] = [
    "c0_deviation",
    "gh_ub_metric",
    "phi_distortion",
    "phi_covering_radius",
    "coupled_defect",
];

impl ConvergenceRow {
    pub fn column(&self, name: &str) -> Option<f64> {
        Some(match name {
            "c0_deviation" => self.c0_deviation,
            "gh_ub_metric" => self.gh_ub_metric,
            "phi_distortion" => self.phi_distortion,
            "phi_covering_radius" => self.phi_covering_radius,
            "coupled_defect" => self.coupled_defect,
            "base_diameter" => self.base_diameter,
            _ => return None,
        })
    }
}

/// Least-squares slope of log(value) against log(k). The smallest k is
/// dropped as transient when at least four levels are available.
pub fn log_log_slope(ks: &[u64], values: &[f64]) -> Option<SlopeFit> {
    let skip = usize::from(ks.len() >= 4);
    let ks = &ks[skip..];
    let values = &values[skip..];
    if ks.len() < 3 {
        return None;
    }
    let x: Vec<f64> = ks.iter().map(|k| (*k as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.max(1e-300).ln()).collect();
    let fit: LinearFit = linear_fit(&x, &y);
    Some(SlopeFit {
        slope: fit.slope,
        ci95: fit.slope_ci95(),
        r2: fit.r2,
        ks: ks.to_vec(),
    })
}

/// The level sweep. For every k on one fixed grid of resolution m:
/// C⁰ deviation of ω_k; ½ sup |d₀ − d_k| over a fixed node sample; the
/// distortion and covering radius of φ_k : (base torus, exact metric) →
/// (B_k, intrinsic distance); and the coupled-space defect
/// ε_k + d_{B_k}(φ_k(π(p)), π_k(p)) with ε_k = max(distortion, covering).
pub fn convergence_suite(
    om: &RiemannMatrix,
    k_list: &[u64],
    m: usize,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceReport> {
    if k_list.len() < 3 || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "k_list must be strictly ascending with at least 3 levels".into(),
        ));
    }
    let n = om.n();
    let grid = QuadratureGrid::new(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut nodes: Vec<usize> = (0..grid.len()).collect();
    nodes.shuffle(&mut rng);
    let metric_nodes: Vec<usize> = nodes[..opts.metric_sample.min(grid.len())].to_vec();
    let coupled_nodes: Vec<usize> = nodes[..opts.coupled_sample.min(grid.len())].to_vec();

    let flat = MetricField::flat(om, m)?;
    let d0: Vec<Vec<f64>> = par::map_slice(&metric_nodes, |s| flat.distances_from(*s));

    // base points y on the grid, as nodes with x = 0
    let base_nodes: Vec<usize> = (0..m.pow(n as u32))
        .map(|mut idx| {
            let mut c = vec![0usize; 2 * n];
            for d in (n..2 * n).rev() {
                c[d] = idx % m;
                idx /= m;
            }
            grid.index_of(&c)
        })
        .collect();
    let base_pts: Vec<TorusPoint> = base_nodes.iter().map(|i| grid.node(*i)).collect();
    let bm = om.base_metric();
    let base_space = FiniteMetricSpace::from_fn(base_pts.len(), |i, j| {
        bm.distance(&base_pts[i].y, &base_pts[j].y)
    })?;
    let base_diameter = base_space.diameter();
    let base_index: BTreeMap<Vec<usize>, usize> = base_nodes
        .iter()
        .enumerate()
        .map(|(j, node)| (grid.coords(*node)[n..].to_vec(), j))
        .collect();

    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let basis = ThetaBasis::new(om, k)?;
        let field = MetricField::omega_k(&basis, m, opts.h_step)?;

        let g0 = om.total_metric().clone();
        let l0 = g0.clone().cholesky().ok_or(Error::NotPositive)?.l();
        let c0 = par::map_slice(&field.tensors, |g| relative_deviation(&l0, &g0, g))
            .into_iter()
            .fold(0.0, f64::max);

        let dk: Vec<Vec<f64>> = par::map_slice(&metric_nodes, |s| field.distances_from(*s));
        let mut gh = 0.0f64;
        for (a, _) in metric_nodes.iter().enumerate() {
            for &b in &metric_nodes {
                gh = gh.max((d0[a][b] - dk[a][b]).abs());
            }
        }
        let gh = 0.5 * gh;

        let metric = opts
            .simplex_scale
            .map(|scale| SimplexMetric { scale })
            .unwrap_or_else(|| SimplexMetric::for_level(k));
        let sample = amoeba_sample_with(&basis, &grid, metric)?;
        let images: Vec<usize> = base_nodes
            .iter()
            .map(|node| sample.node_to_point[*node])
            .collect();
        let rows_bk: Vec<Vec<f64>> = par::map_slice(&images, |img| sample.distances_from(&[*img]));
        // indexed by base point; merged images give zero off-diagonal entries
        let image_space = FiniteMetricSpace::from_fn(images.len(), |i, j| {
            rows_bk[i][images[j]].min(rows_bk[j][images[i]])
        })?;
        let identity: Vec<usize> = (0..images.len()).collect();
        let phi_dist = map_distortion(&base_space, &image_space, &identity)?.distortion;
        let covering = sample
            .distances_from(&images)
            .into_iter()
            .fold(0.0, f64::max);
        let eps = phi_dist.max(covering);
        let coupled = coupled_nodes
            .iter()
            .map(|node| {
                let j = base_index[&grid.coords(*node)[n..].to_vec()];
                eps + rows_bk[j][sample.node_to_point[*node]]
            })
            .fold(0.0, f64::max);

        rows.push(ConvergenceRow {
            k,
            c0_deviation: c0,
            gh_ub_metric: gh,
            phi_distortion: phi_dist,
            phi_covering_radius: covering,
            coupled_defect: coupled,
            base_diameter,
        });
    }
    let ks: Vec<u64> = rows.iter().map(|r| r.k).collect();
    let slopes = REPORT_COLUMNS
        .iter()
        .filter_map(|name| {
            let v: Vec<f64> = rows.iter().map(|r| r.column(name).unwrap()).collect();
            log_log_slope(&ks, &v).map(|s| (name.to_string(), s))
        })
        .collect();
    Ok(ConvergenceReport {
        grid_resolution: m,
        rows,
        slopes,
    })
}
