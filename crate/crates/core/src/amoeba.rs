//! Moment-map images ("amoebas") of the theta embedding: points of the
//! simplex Δ_k, the Fubini–Study orthant distance, and sampled B_k with its
//! intrinsic graph distance.

use crate::abelian::TorusPoint;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kahler::{QuadratureGrid, SectionSystem};
use crate::numeric::GaugeValue;
use crate::par;
use serde::Serialize;

/// Points this close (max-abs in ξ) are merged.
const MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexPoint {
    pub xi: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.is_empty() {
            return Err(Error::EmptySet);
        }
        if xi.iter().any(|v| v.is_nan() || *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "moment coordinates must be finite and nonnegative".into(),
            ));
        }
        let s: f64 = xi.iter().sum();
        if s <= 0.0 {
            return Err(Error::NonPositive("moment coordinate total".into()));
        }
        Ok(SimplexPoint {
            xi: xi.into_iter().map(|v| v / s).collect(),
        })
    }

    /// ξ_i = |s_i|² / Σ|s_l|², from log magnitudes.
    pub fn from_gauge(vals: &[GaugeValue]) -> Self {
        let mx = vals
            .iter()
            .map(|g| g.log_mag)
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = vals
            .iter()
            .map(|g| (2.0 * (g.log_mag - mx)).exp())
            .collect();
        let s: f64 = w.iter().sum();
        SimplexPoint {
            xi: w.into_iter().map(|v| v / s).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn argmax(&self) -> usize {
        self.xi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap()
    }

    fn sqrt_coords(&self) -> Vec<f64> {
        self.xi.iter().map(|v| v.sqrt()).collect()
    }
}

pub fn moment_point<S: SectionSystem>(sys: &S, p: &TorusPoint) -> Result<SimplexPoint> {
    Ok(SimplexPoint::from_gauge(
        &sys.values_at_z(&sys.om().coords_to_z(p))?,
    ))
}

/// φ_k(y) = moment point of (x = 0, y).
pub fn phi_k<S: SectionSystem>(sys: &S, y: &[f64]) -> Result<SimplexPoint> {
    moment_point(
        sys,
        &TorusPoint {
            x: vec![0.0; y.len()],
            y: y.to_vec(),
        },
    )
}

/// scale · arccos(Σ √(ξ_i η_i)). The default scale 1/√(πk) is the
/// Fubini–Study orthant metric (ω_FS in the hyperplane class) shrunk by 1/k.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimplexMetric {
    pub scale: f64,
}

impl SimplexMetric {
    pub fn for_level(k: u64) -> Self {
        SimplexMetric {
            scale: 1.0 / (std::f64::consts::PI * k as f64).sqrt(),
        }
    }

    pub fn distance(&self, xi: &SimplexPoint, eta: &SimplexPoint) -> f64 {
        self.scale * orthant_angle(&xi.sqrt_coords(), &eta.sqrt_coords())
    }
}

/// arccos(u·v) for unit vectors, evaluated as 2·asin(‖u − v‖/2), which stays
/// accurate for nearby points.
fn orthant_angle(u: &[f64], v: &[f64]) -> f64 {
    let chord: f64 = u
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    2.0 * (0.5 * chord).min(1.0).asin()
}

pub fn simplex_distance(xi: &SimplexPoint, eta: &SimplexPoint, k: u64) -> f64 {
    SimplexMetric::for_level(k).distance(xi, eta)
}

/// Sampled B_k: images of grid nodes, merged, joined by a neighbor graph.
#[derive(Clone, Debug)]
pub struct AmoebaSample {
    pub k: u64,
    pub points: Vec<SimplexPoint>,
    pub preimages: Vec<Vec<TorusPoint>>,
    /// grid node → index into `points`
    pub node_to_point: Vec<usize>,
    pub graph: Graph,
    pub metric: SimplexMetric,
}

impl AmoebaSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, p: &SimplexPoint) -> Option<usize> {
        self.points
            .iter()
            .position(|q| max_abs_gap(&q.xi, &p.xi) <= MERGE_TOL)
    }

    pub fn distances_from(&self, seeds: &[usize]) -> Vec<f64> {
        let s: Vec<(usize, f64)> = seeds.iter().map(|i| (*i, 0.0)).collect();
        self.graph.distances(&s)
    }

    /// Intrinsic distance: shortest path in the neighbor graph.
    pub fn bk_distance(&self, p: usize, q: usize) -> f64 {
        self.distances_from(&[p])[q]
    }

    pub fn ambient_distance(&self, p: usize, q: usize) -> f64 {
        self.metric.distance(&self.points[p], &self.points[q])
    }
}

fn max_abs_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn amoeba_sample<S: SectionSystem>(sys: &S, grid: &QuadratureGrid) -> Result<AmoebaSample> {
    amoeba_sample_with(sys, grid, SimplexMetric::for_level(sys.k()))
}

/// Images of every grid node, merged within 1e−12, then joined by the
/// union of (i) r-nearest-neighbor edges, r = 2·(2n) + 1, and (ii) edges
/// between images of grid-adjacent nodes, which keeps the graph connected
/// where kNN alone would split thin parts of B_k.
pub fn amoeba_sample_with<S: SectionSystem>(
    sys: &S,
    grid: &QuadratureGrid,
    metric: SimplexMetric,
) -> Result<AmoebaSample> {
    let n = sys.om().n();
    let raw = par::try_map_range(grid.len(), |i| moment_point(sys, &grid.node(i)))?;

    // merge duplicates: sweep in order of ξ₀
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|a, b| raw[*a].xi[0].total_cmp(&raw[*b].xi[0]).then(a.cmp(b)));
    let mut node_to_point = vec![usize::MAX; raw.len()];
    let mut reps: Vec<usize> = Vec::new(); // node index of each representative, in ξ₀ order
    let mut window = 0;
    for &i in &order {
        while window < reps.len() && raw[reps[window]].xi[0] < raw[i].xi[0] - MERGE_TOL {
            window += 1;
        }
        match reps[window..]
            .iter()
            .position(|&r| max_abs_gap(&raw[r].xi, &raw[i].xi) <= MERGE_TOL)
        {
            Some(off) => node_to_point[i] = window + off,
            None => {
                node_to_point[i] = reps.len();
                reps.push(i);
            }
        }
    }
    // renumber representatives in grid order for stable output
    let mut rep_order: Vec<usize> = (0..reps.len()).collect();
    rep_order.sort_by_key(|r| reps[*r]);
    let mut rank = vec![0; reps.len()];
    for (new, old) in rep_order.iter().enumerate() {
        rank[*old] = new;
    }
    let node_to_point: Vec<usize> = node_to_point.iter().map(|p| rank[*p]).collect();
    let points: Vec<SimplexPoint> = rep_order.iter().map(|r| raw[reps[*r]].clone()).collect();
    let mut preimages = vec![Vec::new(); points.len()];
    for (node, p) in node_to_point.iter().enumerate() {
        preimages[*p].push(grid.node(node));
    }

    let np = points.len();
    let roots: Vec<Vec<f64>> = points.iter().map(|p| p.sqrt_coords()).collect();
    let r = (2 * 2 * n + 1).min(np.saturating_sub(1));
    let knn = par::map_range(np, |i| {
        let mut cand: Vec<(f64, usize)> = (0..np)
            .filter(|j| *j != i)
            .map(|j| {
                (
                    roots[i]
                        .iter()
                        .zip(&roots[j])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>(),
                    j,
                )
            })
            .collect();
        if r > 0 && cand.len() > r {
            cand.select_nth_unstable_by(r - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(r);
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.into_iter().map(|(_, j)| j).collect::<Vec<_>>()
    });
    let mut graph = Graph::new(np);
    let edge = |i: usize, j: usize| metric.scale * orthant_angle(&roots[i], &roots[j]);
    for (i, nbrs) in knn.iter().enumerate() {
        for &j in nbrs {
            graph.add_edge(i, j, edge(i, j));
        }
    }
    let dim = 2 * n;
    let m = grid.m() as i64;
    for node in 0..grid.len() {
        let c = grid.coords(node);
        for d in 0..dim {
            let mut c2 = c.clone();
            c2[d] = ((c[d] as i64 + 1).rem_euclid(m)) as usize;
            let (a, b) = (node_to_point[node], node_to_point[grid.index_of(&c2)]);
            if a != b {
                graph.add_edge(a, b, edge(a, b));
            }
        }
    }
    let components = graph.components();
    if components > 1 {
        return Err(Error::DisconnectedSample { components });
    }
    Ok(AmoebaSample {
        k: sys.k(),
        points,
        preimages,
        node_to_point,
        graph,
        metric,
    })
}
