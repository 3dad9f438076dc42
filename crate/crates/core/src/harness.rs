//! Experiment configuration, orchestration and deterministic reporting for
//! the command-line tool.

use crate::abelian::{RiemannMatrix, RiemannMatrixFile, TorusPoint};
use crate::amoeba::amoeba_sample;
use crate::error::{Error, Result};
use crate::gh::{convergence_suite, ConvergenceOptions, REPORT_COLUMNS};
use crate::heisenberg::commutant_dimension;
use crate::kahler::{
    balanced_matrix, gram_matrix, identity_deviation, QuadratureGrid, DEFAULT_STEP,
};
use crate::mirror::{
    addition_formula_residual, intersection_vs_dimension, theta_constant, triangle_coefficient,
    Target,
};
use crate::numeric::C64;
use crate::quantization::{
    bs_fibers_abelian, bs_points_cp1, model_kernel_error, peak_section_suite,
    reconstruct_from_fiber, unit_offsets, PeakParams,
};
use crate::theta::{FkMode, ThetaBasis};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Named thresholds understood in `tolerances`, with their defaults.
pub const TOLERANCE_DEFAULTS: [(&str, f64); 10] = [
    ("gram_identity", 1e-8),
    ("balanced_deviation", 1e-5),
    ("c0_slope", -1.0),
    ("gh_slope", -1.0),
    ("fibration_slope", -0.5),
    ("proportionality", 1e-6),
    ("decay_r2", 0.99),
    ("model_kernel_slope", -0.4),
    ("triangle_residual", 1e-9),
    ("addition_residual", 1e-9),
];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixSource {
    Path(PathBuf),
    Inline(RiemannMatrixFile),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub riemann_matrix: MatrixSource,
    pub k_list: Vec<u64>,
    pub grid_per_dim: usize,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// Ω = i, k = 4, grid 32.
    fn default() -> Self {
        ExperimentConfig {
            riemann_matrix: MatrixSource::Inline(RiemannMatrixFile {
                n: 1,
                re: vec![vec![0.0]],
                im: vec![vec![1.0]],
            }),
            k_list: vec![4],
            grid_per_dim: 32,
            tolerances: BTreeMap::new(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub k: Option<Vec<u64>>,
    pub omega_file: Option<PathBuf>,
    pub grid: Option<usize>,
}

impl ExperimentConfig {
    /// Reads a config; a relative matrix path is resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if let MatrixSource::Path(p) = &mut cfg.riemann_matrix {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Applies overrides. When the level list changes and no grid is given,
    /// a config that came without a file gets the smallest admissible grid.
    pub fn apply(&mut self, ov: &Overrides, from_file: bool) {
        if let Some(out) = &ov.out {
            self.output_dir = out.clone();
        }
        if let Some(seed) = ov.seed {
            self.seed = seed;
        }
        if let Some(p) = &ov.omega_file {
            self.riemann_matrix = MatrixSource::Path(p.clone());
        }
        if let Some(k) = &ov.k {
            self.k_list = k.clone();
            if !from_file && ov.grid.is_none() {
                self.grid_per_dim = k.iter().max().map_or(32, |m| (8 * *m as usize).max(32));
            }
        }
        if let Some(g) = ov.grid {
            self.grid_per_dim = g;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_list.is_empty() {
            return Err(Error::InvalidConfig("k_list is empty".into()));
        }
        if self.k_list[0] == 0 {
            return Err(Error::InvalidConfig("levels must be ≥ 1".into()));
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "k_list must be strictly ascending".into(),
            ));
        }
        let kmax = *self.k_list.last().unwrap() as usize;
        if self.grid_per_dim < 8 * kmax {
            return Err(Error::InvalidConfig(format!(
                "grid_per_dim {} < 8·max(k) = {}",
                self.grid_per_dim,
                8 * kmax
            )));
        }
        if let Some(bad) = self
            .tolerances
            .keys()
            .find(|k| !TOLERANCE_DEFAULTS.iter().any(|(n, _)| n == k))
        {
            return Err(Error::InvalidConfig(format!("unknown tolerance `{bad}`")));
        }
        Ok(())
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            TOLERANCE_DEFAULTS
                .iter()
                .find(|(n, _)| *n == name)
                .expect("known tolerance name")
                .1
        })
    }

    pub fn matrix(&self) -> Result<RiemannMatrix> {
        match &self.riemann_matrix {
            MatrixSource::Path(p) => RiemannMatrix::load(p),
            MatrixSource::Inline(f) => RiemannMatrix::from_file(f),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    ThetaEval,
    Gram,
    BsCount { cp1: bool },
    Amoeba,
    Converge,
    Peak,
    Mirror,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ThetaEval => "theta-eval",
            Command::Gram => "gram",
            Command::BsCount { .. } => "bs-count",
            Command::Amoeba => "amoeba",
            Command::Converge => "converge",
            Command::Peak => "peak",
            Command::Mirror => "mirror",
        }
    }
}

/// Collects output files; everything written goes through here so the
/// manifest can list it.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
    timings: BTreeMap<String, f64>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<Cell>>,
    ) -> Result<()> {
        let mut out = header.join(",");
        out.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        self.write(name, &out)
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write(name, &body)
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.timings
            .insert(stage.to_string(), t.elapsed().as_secs_f64());
        r
    }
}

/// One CSV field; floats use 17 significant digits.
enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.16e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

fn f(v: f64) -> Cell {
    Cell::F(v)
}
fn i(v: impl Into<i64>) -> Cell {
    Cell::I(v.into())
}

fn matrix_rows(m: &DMatrix<C64>) -> Vec<Vec<Cell>> {
    (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| vec![i(r as i64), i(c as i64), f(m[(r, c)].re), f(m[(r, c)].im)])
        .collect()
}

fn check(value: f64, threshold: f64, pass: bool) -> Value {
    json!({ "value": value, "threshold": threshold, "pass": pass })
}

/// What a run produced: the summary written to summary.json plus any lines
/// meant for the terminal.
#[derive(Debug)]
pub struct RunOutput {
    pub summary: Value,
    pub stdout: Vec<String>,
    pub files: Vec<String>,
}

/// Runs one subcommand, writing `<output_dir>/{*.csv, summary.json, manifest.json}`.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let mut art = Artifacts::new(&cfg.output_dir)?;
    let mut stdout = Vec::new();
    let summary = match cmd {
        Command::ThetaEval => theta_eval(cfg, &mut art)?,
        Command::Gram => gram(cfg, &mut art)?,
        Command::BsCount { cp1 } => bs_count(cfg, cp1, &mut art, &mut stdout)?,
        Command::Amoeba => amoeba(cfg, &mut art)?,
        Command::Converge => converge(cfg, &mut art)?,
        Command::Peak => peak(cfg, &mut art)?,
        Command::Mirror => mirror(cfg, &mut art)?,
    };
    let summary = json!({ "command": cmd.name(), "results": summary });
    art.json("summary.json", &summary)?;
    let mut files = art.files.clone();
    files.push("manifest.json".into());
    let manifest = json!({
        "command": cmd.name(),
        "config": cfg,
        "versions": { env!("CARGO_PKG_NAME"): env!("CARGO_PKG_VERSION"), "parallel": cfg!(feature = "parallel") },
        "threads": crate::par::threads(),
        "wall_times_s": art.timings,
        "total_wall_s": started.elapsed().as_secs_f64(),
        "files": files,
    });
    art.json("manifest.json", &manifest)?;
    Ok(RunOutput {
        summary,
        stdout,
        files,
    })
}

fn seeded_points(n: usize, count: usize, seed: u64) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::once(TorusPoint::origin(n))
        .chain((1..count).map(|_| TorusPoint {
            x: (0..n).map(|_| rng.gen()).collect(),
            y: (0..n).map(|_| rng.gen()).collect(),
        }))
        .collect()
}

fn theta_eval(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let om = cfg.matrix()?;
    let n = om.n();
    let points = seeded_points(n, 16, cfg.seed);
    let mut out = BTreeMap::new();
    for &k in &cfg.k_list {
        let basis = ThetaBasis::new(&om, k)?;
        let rows = art.timed(&format!("theta_eval_k{k}"), || {
            let per_point = crate::par::try_map_range(points.len(), |p| {
                let vals = basis.values(&points[p])?;
                Ok::<_, Error>((vals, basis.distortion(&points[p], FkMode::Closed)?))
            })?;
            Ok(per_point)
        })?;
        let mut csv = Vec::new();
        let mut fk_range = (f64::INFINITY, 0.0f64);
        for (p, (vals, fk)) in rows.iter().enumerate() {
            fk_range = (fk_range.0.min(*fk), fk_range.1.max(*fk));
            for (s, g) in vals.iter().enumerate() {
                let c = g.to_complex();
                let mut row = vec![i(p as i64), i(s as i64)];
                row.extend(points[p].x.iter().chain(&points[p].y).map(|v| f(*v)));
                row.extend([f(g.log_mag), f(g.phase), f(c.re), f(c.im), f(*fk)]);
                csv.push(row);
            }
        }
        let mut header = vec!["point".to_string(), "section".to_string()];
        header.extend((0..n).map(|d| format!("x{d}")));
        header.extend((0..n).map(|d| format!("y{d}")));
        header.extend(["log_mag", "phase", "re", "im", "f_k"].map(String::from));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let name = format!("theta_eval_k{k}.csv");
        art.csv(&name, &header, csv)?;
        out.insert(format!("k{k}"), json!({ "sections": basis.dim(), "points": points.len(), "f_k_min": fk_range.0, "f_k_max": fk_range.1, "file": name }));
    }
    Ok(json!(out))
}

fn gram(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let om = cfg.matrix()?;
    let grid = QuadratureGrid::new(om.n(), cfg.grid_per_dim)?;
    let tol_g = cfg.tolerance("gram_identity");
    let tol_b = cfg.tolerance("balanced_deviation");
    let mut out = BTreeMap::new();
    for &k in &cfg.k_list {
        let basis = ThetaBasis::new(&om, k)?;
        let g = art.timed(&format!("gram_k{k}"), || gram_matrix(&basis, &grid))?;
        let d = g.nrows();
        let dev = (&g - DMatrix::<C64>::identity(d, d))
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        let offdiag = (0..d)
            .flat_map(|r| (0..d).map(move |c| (r, c)))
            .filter(|(r, c)| r != c)
            .map(|rc| g[rc].norm())
            .fold(0.0, f64::max);
        art.csv(
            &format!("gram_k{k}.csv"),
            &["row", "col", "re", "im"],
            matrix_rows(&g),
        )?;
        let mut entry = json!({
            "dim": d,
            "max_offdiag": offdiag,
            "gram_identity": check(dev, tol_g, dev < tol_g),
        });
        // ω_1 is degenerate, so the balanced volume form needs k ≥ 2
        if k >= 2 {
            let m = art.timed(&format!("balanced_k{k}"), || {
                balanced_matrix(&basis, &grid, DEFAULT_STEP)
            })?;
            let (c, rel) = identity_deviation(&m);
            art.csv(
                &format!("balanced_k{k}.csv"),
                &["row", "col", "re", "im"],
                matrix_rows(&m),
            )?;
            entry["balanced_trace_over_dim"] = json!(c);
            entry["balanced_deviation"] = check(rel, tol_b, rel < tol_b);
        }
        if k <= 3 {
            entry["commutant_dimension"] = json!(commutant_dimension(&basis)?);
        }
        out.insert(format!("k{k}"), entry);
    }
    Ok(json!(out))
}

fn bs_count(
    cfg: &ExperimentConfig,
    cp1: bool,
    art: &mut Artifacts,
    stdout: &mut Vec<String>,
) -> Result<Value> {
    let mut out = BTreeMap::new();
    if cp1 {
        let mut rows = Vec::new();
        for &k in &cfg.k_list {
            let set = bs_points_cp1(k)?;
            let labels = set.labels();
            stdout.push(format!(
                "k={k} count={} points={{{}}}",
                set.len(),
                labels.join(",")
            ));
            for (idx, (lab, v)) in labels.iter().zip(set.as_f64()).enumerate() {
                rows.push(vec![
                    i(k as i64),
                    i(idx as i64),
                    Cell::S(lab.clone()),
                    f(v[0]),
                ]);
            }
            out.insert(
                format!("k{k}"),
                json!({ "count": set.len(), "expected": k + 1, "points": labels }),
            );
        }
        art.csv("bs_cp1.csv", &["k", "index", "point", "value"], rows)?;
    } else {
        let om = cfg.matrix()?;
        let n = om.n();
        let mut rows = Vec::new();
        for &k in &cfg.k_list {
            let set = bs_fibers_abelian(&om, k)?;
            let labels = set.labels();
            stdout.push(format!("k={k} count={}", set.len()));
            for (idx, lab) in labels.iter().enumerate() {
                rows.push(vec![i(k as i64), i(idx as i64), Cell::S(lab.clone())]);
            }
            out.insert(
                format!("k{k}"),
                json!({ "count": set.len(), "expected": k.pow(n as u32) }),
            );
        }
        art.csv("bs_abelian.csv", &["k", "index", "point"], rows)?;
    }
    Ok(json!(out))
}

fn amoeba(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let om = cfg.matrix()?;
    let grid = QuadratureGrid::new(om.n(), cfg.grid_per_dim)?;
    let mut out = BTreeMap::new();
    for &k in &cfg.k_list {
        let basis = ThetaBasis::new(&om, k)?;
        let s = art.timed(&format!("amoeba_k{k}"), || amoeba_sample(&basis, &grid))?;
        let d = basis.dim();
        let mut header: Vec<String> = vec!["point".into(), "preimages".into()];
        header.extend((0..d).map(|j| format!("xi{j}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = s.points.iter().enumerate().map(|(p, pt)| {
            let mut row = vec![i(p as i64), i(s.preimages[p].len() as i64)];
            row.extend(pt.xi.iter().map(|v| f(*v)));
            row
        });
        art.csv(
            &format!("amoeba_points_k{k}.csv"),
            &header,
            rows.collect::<Vec<_>>(),
        )?;
        let mut edges = Vec::new();
        for (a, nbrs) in s.graph.adj.iter().enumerate() {
            for &(b, w) in nbrs {
                if a < b {
                    edges.push(vec![i(a as i64), i(b as i64), f(w)]);
                }
            }
        }
        let n_edges = edges.len();
        art.csv(
            &format!("amoeba_edges_k{k}.csv"),
            &["from", "to", "length"],
            edges,
        )?;
        out.insert(
            format!("k{k}"),
            json!({ "points": s.len(), "edges": n_edges, "grid_nodes": grid.len() }),
        );
    }
    Ok(json!(out))
}

fn converge(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let om = cfg.matrix()?;
    let opts = ConvergenceOptions {
        seed: cfg.seed,
        ..ConvergenceOptions::default()
    };
    let report = art.timed("convergence_suite", || {
        convergence_suite(&om, &cfg.k_list, cfg.grid_per_dim, &opts)
    })?;
    let mut header = vec!["k"];
    header.extend(REPORT_COLUMNS);
    header.push("base_diameter");
    let rows = report.rows.iter().map(|r| {
        let mut row = vec![i(r.k as i64)];
        row.extend(
            REPORT_COLUMNS
                .iter()
                .chain(&["base_diameter"])
                .map(|c| f(r.column(c).unwrap())),
        );
        row
    });
    art.csv("convergence.csv", &header, rows.collect::<Vec<_>>())?;
    let c0: Vec<f64> = report.rows.iter().map(|r| r.c0_deviation).collect();
    let strictly_decreasing = c0.windows(2).all(|w| w[1] < w[0]);
    let mut checks = BTreeMap::new();
    for (col, tol) in [
        ("c0_deviation", "c0_slope"),
        ("gh_ub_metric", "gh_slope"),
        ("phi_distortion", "fibration_slope"),
        ("phi_covering_radius", "fibration_slope"),
        ("coupled_defect", "fibration_slope"),
    ] {
        if let Some(fit) = report.slopes.get(col) {
            let t = cfg.tolerance(tol);
            checks.insert(col, check(fit.slope, t, fit.slope <= t));
        }
    }
    Ok(json!({ "report": report, "c0_strictly_decreasing": strictly_decreasing, "checks": checks }))
}

fn peak(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let om = cfg.matrix()?;
    let n = om.n();
    let params = PeakParams {
        seed: cfg.seed,
        ..PeakParams::default()
    };
    let mut out = BTreeMap::new();
    let mut kernel_err = Vec::new();
    let z0 = seeded_points(n, 2, cfg.seed)[1].clone();
    let offsets = unit_offsets(n);
    let sample = seeded_points(n, 20, cfg.seed ^ 0xbe);
    for &k in &cfg.k_list {
        let diag = art.timed(&format!("peak_k{k}"), || {
            peak_section_suite(&om, k, &params)
        })?;
        art.csv(
            &format!("peak_decay_k{k}_s{}.csv", diag.decay.section),
            &["neg_k_dist_sq", "log_norm_sq"],
            diag.decay
                .points
                .iter()
                .map(|(x, y)| vec![f(*x), f(*y)])
                .collect::<Vec<_>>(),
        )?;
        let basis = ThetaBasis::new(&om, k)?;
        let recon = art.timed(&format!("reconstruction_k{k}"), || {
            reconstruct_from_fiber(&basis, 0, &sample)
        })?;
        let err = art.timed(&format!("model_kernel_k{k}"), || {
            model_kernel_error(&om, k, &z0, &offsets)
        })?;
        kernel_err.push(err);
        let mut d = serde_json::to_value(&diag)?;
        d.as_object_mut().unwrap().remove("decay");
        d["decay_slope"] = json!(diag.decay.slope);
        d["decay_r2"] = check(
            diag.decay.r2,
            cfg.tolerance("decay_r2"),
            diag.decay.r2 > cfg.tolerance("decay_r2"),
        );
        d["proportionality"] = check(
            diag.proportionality_residual,
            cfg.tolerance("proportionality"),
            diag.proportionality_residual < cfg.tolerance("proportionality"),
        );
        d["density_in_band_0.9_1.1"] = json!(diag.density_in_band(0.9, 1.1));
        d["reconstruction"] = serde_json::to_value(&recon)?;
        d["model_kernel_error"] = json!(err);
        out.insert(format!("k{k}"), d);
    }
    art.csv(
        "model_kernel.csv",
        &["k", "relative_error"],
        cfg.k_list
            .iter()
            .zip(&kernel_err)
            .map(|(k, e)| vec![i(*k as i64), f(*e)])
            .collect::<Vec<_>>(),
    )?;
    let mut result = json!({ "levels": out });
    // slope needs three levels; no transient level is dropped here
    if cfg.k_list.len() >= 3 {
        let x: Vec<f64> = cfg.k_list.iter().map(|k| (*k as f64).ln()).collect();
        let y: Vec<f64> = kernel_err.iter().map(|e| e.max(1e-300).ln()).collect();
        let fit = crate::numeric::linear_fit(&x, &y);
        let t = cfg.tolerance("model_kernel_slope");
        result["model_kernel_slope"] = check(fit.slope, t, fit.slope <= t);
    }
    Ok(result)
}

fn mirror(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tol_t = cfg.tolerance("triangle_residual");
    let tol_a = cfg.tolerance("addition_residual");
    let mut tri_rows = Vec::new();
    let mut worst_tri = 0.0f64;
    for _ in 0..10 {
        let tau = C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(0.5..3.0));
        for t in [Target::B0, Target::B1] {
            let a = triangle_coefficient(tau, t)?;
            let b = theta_constant(tau, t)?;
            let rel = (a - b).norm() / b.norm();
            worst_tri = worst_tri.max(rel);
            let label = if t == Target::B0 { "b0" } else { "b1" };
            tri_rows.push(vec![
                f(tau.re),
                f(tau.im),
                Cell::S(label.into()),
                f(a.re),
                f(a.im),
                f(b.re),
                f(b.im),
                f(rel),
            ]);
        }
    }
    art.csv(
        "mirror_triangles.csv",
        &[
            "tau_re", "tau_im", "target", "coef_re", "coef_im", "theta_re", "theta_im", "residual",
        ],
        tri_rows,
    )?;
    let mut add_rows = Vec::new();
    let mut worst_add = 0.0f64;
    for tau in [C64::new(0.0, 1.0), C64::new(0.5, 1.0), C64::new(0.0, 2.0)] {
        for a in 0..10 {
            for b in 0..10 {
                // cell centres of the fundamental parallelogram; the node grid
                // would hit the zero of ϑ at ½ + τ/2, where a relative residual is undefined
                let z = (a as f64 + 0.5) / 10.0 + tau * ((b as f64 + 0.5) / 10.0);
                let r = addition_formula_residual(tau, z)?;
                worst_add = worst_add.max(r);
                add_rows.push(vec![f(tau.re), f(tau.im), f(z.re), f(z.im), f(r)]);
            }
        }
    }
    art.csv(
        "mirror_addition.csv",
        &["tau_re", "tau_im", "z_re", "z_im", "residual"],
        add_rows,
    )?;
    let counts = (1..=10)
        .map(intersection_vs_dimension)
        .collect::<Result<Vec<_>>>()?;
    art.csv(
        "mirror_intersections.csv",
        &["k", "count", "dim"],
        counts
            .iter()
            .map(|c| vec![i(c.dim as i64), i(c.count as i64), i(c.dim as i64)])
            .collect::<Vec<_>>(),
    )?;
    Ok(json!({
        "triangle_residual": check(worst_tri, tol_t, worst_tri < tol_t),
        "addition_residual": check(worst_add, tol_a, worst_add < tol_a),
        "intersections_equal_dimension": counts.iter().all(|c| c.equal),
    }))
}

/// Error report printed by the CLI on failure.
pub fn error_json(e: &Error) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{}",
        json!({ "error": e.kind(), "message": e.to_string() })
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_in(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            output_dir: dir.to_path_buf(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        c.k_list.clear();
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        c.k_list = vec![2, 2];
        assert!(c.validate().is_err());
        c.k_list = vec![2, 5];
        assert!(c.validate().is_err());
        c.grid_per_dim = 40;
        assert!(c.validate().is_ok());
        c.tolerances.insert("nonsense".into(), 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_roundtrip_and_strictness() {
        let text = r#"{"riemann_matrix": {"n": 1, "re": [[0.3]], "im": [[1.2]]}, "k_list": [1, 2], "grid_per_dim": 16, "output_dir": "o"}"#;
        let c: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.matrix().unwrap().omega()[(0, 0)], C64::new(0.3, 1.2));
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let extra = text.replace("\"output_dir\"", "\"typo\": 1, \"output_dir\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&extra).is_err());
        let path: ExperimentConfig = serde_json::from_str(
            &text.replace(r#"{"n": 1, "re": [[0.3]], "im": [[1.2]]}"#, "\"m.json\""),
        )
        .unwrap();
        assert_eq!(path.riemann_matrix, MatrixSource::Path("m.json".into()));
    }

    #[test]
    fn cell_format_has_17_digits() {
        assert_eq!(Cell::F(0.1).render(), "1.0000000000000001e-1");
        assert_eq!(Cell::F(-2.0).render(), "-2.0000000000000000e0");
    }

    #[test]
    fn gram_run_reports_identity() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg_in(dir.path());
        c.k_list = vec![4];
        let out = run(Command::Gram, &c).unwrap();
        let k4 = &out.summary["results"]["k4"];
        assert!(k4["max_offdiag"].as_f64().unwrap() < 1e-8);
        assert_eq!(k4["gram_identity"]["pass"], json!(true));
        let manifest: Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        let listed: Vec<&str> = manifest["files"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
            .collect();
        let mut on_disk: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        on_disk.sort();
        let mut listed_sorted: Vec<String> = listed.iter().map(|s| s.to_string()).collect();
        listed_sorted.sort();
        assert_eq!(on_disk, listed_sorted);
    }

    #[test]
    fn cp1_points_on_stdout() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg_in(dir.path());
        c.apply(
            &Overrides {
                k: Some(vec![3]),
                ..Overrides::default()
            },
            false,
        );
        let out = run(Command::BsCount { cp1: true }, &c).unwrap();
        assert_eq!(out.stdout, vec!["k=3 count=4 points={-1,-1/3,1/3,1}"]);
    }
}
