//! Bohr–Sommerfeld fibers, covariantly constant fiber sections, the exact
//! Bergman kernel of flat tori, reconstruction of the theta basis from
//! fiber sections, peak sections, and the near-diagonal model kernel.

use crate::abelian::{RiemannMatrix, TorusPoint};
use crate::error::{Error, Result};
use crate::kahler::{sample_values, QuadratureGrid};
use crate::numeric::{linear_fit, GaugeValue, KahanC, C64, TWO_PI};
use crate::par;
use crate::theta::{lex_numerators, ThetaBasis};
use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FiberKind {
    Abelian,
    Cp1,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BSFiberSet {
    pub kind: FiberKind,
    pub k: u64,
    pub points: Vec<Vec<Rational64>>,
}

impl BSFiberSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn as_f64(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|p| {
                p.iter()
                    .map(|r| *r.numer() as f64 / *r.denom() as f64)
                    .collect()
            })
            .collect()
    }
    pub fn labels(&self) -> Vec<String> {
        self.points
            .iter()
            .map(|p| {
                p.iter()
                    .map(|r| r.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }
}

/// Level-k Bohr–Sommerfeld base points of X → X⁻: (1/k)ℤⁿ/ℤⁿ, in the same
/// lexicographic order as the theta characteristics.
pub fn bs_fibers_abelian(om: &RiemannMatrix, k: u64) -> Result<BSFiberSet> {
    if k == 0 {
        return Err(Error::NonPositive("level k".into()));
    }
    let points = lex_numerators(om.n(), k)
        .into_iter()
        .map(|v| {
            v.into_iter()
                .map(|b| Rational64::new(b, k as i64))
                .collect()
        })
        .collect();
    Ok(BSFiberSet {
        kind: FiberKind::Abelian,
        k,
        points,
    })
}

/// Level-k Bohr–Sommerfeld values of the height function on CP¹: (2i − k)/k.
pub fn bs_points_cp1(k: u64) -> Result<BSFiberSet> {
    if k == 0 {
        return Err(Error::NonPositive("level k".into()));
    }
    let k = k as i64;
    let points = (0..=k)
        .map(|i| vec![Rational64::new(2 * i - k, k)])
        .collect();
    Ok(BSFiberSet {
        kind: FiberKind::Cp1,
        k: k as u64,
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// |σ|_h ≡ 1
    Pointwise,
    /// ∫_fiber |σ|²_h = 1 against the flat fiber volume
    Unit,
}

/// log of the holomorphic expression
/// σ_i(x) = exp((kπ/2) zᵀHz − i kπ xᵀΩx), z = Ωx + b_i.
fn sigma_log_hol(om: &RiemannMatrix, k: f64, b: &[f64], x: &[f64]) -> C64 {
    let z = om.z_of(x, b);
    let xc = DVector::from_fn(om.n(), |r, _| C64::new(x[r], 0.0));
    let xox: C64 = (om.omega() * &xc).dot(&xc);
    0.5 * k * PI * om.bilinear_form(&z, &z) - C64::new(0.0, k * PI) * xox
}

/// Covariantly constant section over the fiber above b_i, in the unitary gauge.
pub fn sigma_section(
    om: &RiemannMatrix,
    k: u64,
    i: usize,
    x: &[f64],
    mode: NormMode,
) -> Result<GaugeValue> {
    let fibers = bs_fibers_abelian(om, k)?;
    let b = fibers
        .as_f64()
        .get(i)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("fiber index {i} ≥ {}", fibers.len())))?;
    let kf = k as f64;
    let z = om.z_of(x, &b);
    let mut log = sigma_log_hol(om, kf, &b, x) - 0.5 * kf * PI * om.hermitian_norm_sq(&z);
    if mode == NormMode::Unit {
        log -= 0.5 * om.fiber_volume().ln();
    }
    Ok(GaugeValue::from_log(log))
}

/// Π_k(z, w) = Σ_i s_i(z) s_i(w)* in the unitary gauge.
pub fn bergman_kernel(basis: &ThetaBasis, z: &TorusPoint, w: &TorusPoint) -> Result<C64> {
    let a = basis.values(z)?;
    let b = basis.values(w)?;
    Ok(kernel_from_values(&a, &b))
}

fn kernel_from_values(a: &[GaugeValue], b: &[GaugeValue]) -> C64 {
    let mut acc = KahanC::default();
    for (x, y) in a.iter().zip(b) {
        acc.add(GaugeValue::new(x.log_mag + y.log_mag, x.phase - y.phase).to_complex());
    }
    acc.value()
}

/// Fiber integrals I_j = ∫_{X⁺×{b_i}} (σ_i, s_j)_{h₀} dx for all j, by the
/// trapezoid rule with 16k nodes per fiber dimension (pointwise-normalized σ).
pub fn fiber_pairings(basis: &ThetaBasis, i: usize) -> Result<Vec<C64>> {
    let om = basis.om();
    let n = om.n();
    let k = basis.k();
    let m = 16 * k as usize;
    let b = basis.char_point(i);
    let total = m.pow(n as u32);
    let d = basis.dim();
    let acc = par::chunked_reduce(
        total,
        || Ok(vec![KahanC::default(); d]),
        |acc: &mut Result<Vec<KahanC>>, idx| {
            let Ok(a) = acc else { return };
            let mut rest = idx;
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    let c = rest % m;
                    rest /= m;
                    c as f64 / m as f64
                })
                .collect();
            let eval = || -> Result<(GaugeValue, Vec<GaugeValue>)> {
                Ok((
                    sigma_section(om, k, i, &x, NormMode::Pointwise)?,
                    basis.values(&TorusPoint {
                        x: x.clone(),
                        y: b.clone(),
                    })?,
                ))
            };
            match eval() {
                Ok((sig, vals)) => {
                    for (j, g) in vals.iter().enumerate() {
                        a[j].add(
                            GaugeValue::new(sig.log_mag + g.log_mag, sig.phase - g.phase)
                                .to_complex(),
                        );
                    }
                }
                Err(e) => *acc = Err(e),
            }
        },
        |t, p| match (t.as_mut(), p) {
            (Ok(t), Ok(p)) => t.iter_mut().zip(p).for_each(|(a, b)| a.merge(b)),
            (Ok(_), Err(e)) => *t = Err(e),
            _ => {}
        },
    )?;
    Ok(acc.iter().map(|v| v.value() / total as f64).collect())
}

/// The fiber integral of σ_i against s_i in closed form:
/// C_Ω k^{n/4} det(√−1 Ω̄)^{−1/2}, with the branch fixed by continuity from
/// Re Ω = 0.
pub fn reconstruction_constant(om: &RiemannMatrix, k: u64) -> C64 {
    let n = om.n();
    let c_omega = 2f64.powf(n as f64 / 4.0) * om.det_im().powf(0.25);
    // det(B + iA)^{−1/2} = det(B)^{−1/2} Π (1 + iσ_j)^{−1/2}, σ = eig(L⁻¹ A L⁻ᵀ)
    let linv = om
        .im_chol()
        .clone()
        .try_inverse()
        .expect("cholesky factor is invertible");
    let s = &linv * om.re() * linv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let prod: C64 = s
        .symmetric_eigenvalues()
        .iter()
        .map(|sig| C64::new(1.0, *sig).powf(-0.5))
        .product();
    prod * (c_omega * (k as f64).powf(n as f64 / 4.0) / om.det_im().sqrt())
}

/// Reference closed form 2^{n/4} √−1^{n/2} det(Im Ω)^{n/4} det(Ω̄)^{−n/2} · k^{n/4}
/// (principal branches).
pub fn reference_constant(om: &RiemannMatrix, k: u64) -> C64 {
    let n = om.n() as f64;
    let det_bar = om.omega().map(|v| v.conj()).determinant();
    let i_pow = C64::from_polar(1.0, PI * n / 4.0);
    i_pow * 2f64.powf(n / 4.0) * om.det_im().powf(n / 4.0) * (k as f64).powf(n / 4.0)
        / (det_bar.ln() * (n / 2.0)).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    pub ratio_mean: C64,
    pub ratio_rel_std: f64,
    pub derived_constant: C64,
    pub reference_constant: C64,
    pub magnitude_matches_reference: bool,
    pub phase_matches_reference: bool,
}

/// ∫ Π_k(z, x) σ_i(x) dx / s_i(z) at each sample point.
pub fn reconstruct_from_fiber(
    basis: &ThetaBasis,
    i: usize,
    sample: &[TorusPoint],
) -> Result<Reconstruction> {
    if sample.is_empty() {
        return Err(Error::EmptySet);
    }
    let pair = fiber_pairings(basis, i)?;
    let ratios = sample
        .iter()
        .map(|z| {
            let vals = basis.values(z)?;
            if vals[i].log_mag < (1e-30f64).ln() {
                return Err(Error::DegenerateSample(format!(
                    "|s_{i}| below 1e-30 at {z:?}"
                )));
            }
            let num: C64 = vals
                .iter()
                .zip(&pair)
                .map(|(g, p)| g.to_complex() * p)
                .sum();
            Ok(num / vals[i].to_complex())
        })
        .collect::<Result<Vec<C64>>>()?;
    let mean = ratios.iter().sum::<C64>() / ratios.len() as f64;
    let var = ratios.iter().map(|r| (r - mean).norm_sqr()).sum::<f64>() / ratios.len() as f64;
    let derived = reconstruction_constant(basis.om(), basis.k());
    let reference = reference_constant(basis.om(), basis.k());
    Ok(Reconstruction {
        ratio_mean: mean,
        ratio_rel_std: var.sqrt() / mean.norm(),
        derived_constant: derived,
        reference_constant: reference,
        magnitude_matches_reference: (mean.norm() / reference.norm() - 1.0).abs() < 1e-4,
        phase_matches_reference: (mean - reference).norm() < 1e-4 * reference.norm(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelDecay {
    /// |Π_k(z,w)| ≤ C k^n e^{−c√k d(z,w)} on the sample
    pub big_c: f64,
    pub small_c: f64,
}

/// Tightest (C, c) envelope: C from the largest value of |Π|/k^n, c the
/// largest rate compatible with every sampled pair.
pub fn kernel_decay_fit(
    basis: &ThetaBasis,
    pairs: &[(TorusPoint, TorusPoint)],
) -> Result<KernelDecay> {
    let k = basis.k() as f64;
    let kn = k.powi(basis.n() as i32);
    let data = pairs
        .iter()
        .map(|(z, w)| {
            Ok((
                (bergman_kernel(basis, z, w)?.norm() / kn).ln(),
                k.sqrt() * basis.om().total_distance(z, w),
            ))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let log_c = data
        .iter()
        .map(|(y, _)| *y)
        .fold(f64::NEG_INFINITY, f64::max);
    let small_c = data
        .iter()
        .filter(|(_, x)| *x > 0.0)
        .map(|(y, x)| (log_c - y) / x)
        .fold(f64::INFINITY, f64::min);
    Ok(KernelDecay {
        big_c: log_c.exp(),
        small_c,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PeakParams {
    pub epsilon: f64,
    /// largest base distance used in the decay regression
    pub decay_radius: f64,
    pub near_samples: usize,
    pub seed: u64,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams {
            epsilon: 0.05,
            decay_radius: 0.35,
            near_samples: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRegression {
    pub section: usize,
    pub slope: f64,
    pub r2: f64,
    /// (−k d², log|s̃|²)
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PeakDiagnostics {
    pub k: u64,
    pub n: usize,
    /// (a) max over i of the relative L² residual after the best scalar fit
    pub proportionality_residual: f64,
    pub change_of_basis_condition: f64,
    pub scale_factor: f64,
    /// (b) Gram matrix of s̃ in L²(ω)
    pub gram_offdiag_max: f64,
    pub gram_offdiag_rel: f64,
    pub gram_diag_mean: f64,
    /// (c) sup |(|s̃₀| − √A·e^{−πk d²})| / √A near the fiber, A fitted
    pub near_fiber_residual: f64,
    pub near_fiber_radius: f64,
    /// (d) Σ|s̃_i|²/k^n over the grid
    pub density_min: f64,
    pub density_max: f64,
    pub density_uniformity: f64,
    /// (e) regression of log|s̃_i|² on −k·d²
    pub decay: DecayRegression,
    pub kernel_decay: KernelDecay,
    pub epsilon: f64,
    pub r_from_epsilon: f64,
}

impl PeakDiagnostics {
    pub fn density_in_band(&self, lo: f64, hi: f64) -> bool {
        self.density_min >= lo && self.density_max <= hi
    }
}

/// Peak sections s̃_i = (k/2π)^{−n/4} ∫ Π_k(z, y) σ_i(y) dvol_fiber built
/// with the Kähler form ω = 2π·ω₀ (the normalization in which the diagonal
/// kernel is ≈ (k/2π)ⁿ): lengths scale by √(2π), the fiber volume is
/// (2π)^{n/2}·V₀, and the kernel for dvol_ω is Π₀/(2π)ⁿ. σ_i is unit
/// normalized on its fiber.
pub fn peak_section_suite(
    om: &RiemannMatrix,
    k: u64,
    params: &PeakParams,
) -> Result<PeakDiagnostics> {
    let n = om.n();
    let basis = ThetaBasis::new(om, k)?;
    let d = basis.dim();
    let kf = k as f64;
    let two_pi_n = TWO_PI.powi(n as i32);
    let vol_fiber = TWO_PI.powf(n as f64 / 2.0) * om.fiber_volume();
    let kappa = (kf / TWO_PI).powf(-(n as f64) / 4.0) / two_pi_n * vol_fiber.sqrt();

    // column i: coefficients of s̃_i in the ω₀-orthonormal theta basis
    let cols = par::try_map_range(d, |i| fiber_pairings(&basis, i))?;
    let coef = DMatrix::from_fn(d, d, |j, i| cols[i][j] * kappa);

    let proportionality_residual = (0..d)
        .map(|i| {
            let total: f64 = coef.column(i).iter().map(|c| c.norm_sqr()).sum();
            let off: f64 = coef
                .column(i)
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, c)| c.norm_sqr())
                .sum();
            (off / total).sqrt()
        })
        .fold(0.0, f64::max);
    let sv = coef.clone().singular_values();
    let change_of_basis_condition = sv.max() / sv.min();
    let scale_factor = (0..d).map(|i| coef[(i, i)].norm()).sum::<f64>() / d as f64;

    let grid = QuadratureGrid::for_level(n, k);
    let vals = sample_values(&basis, &grid)?;
    let peak_at = |v: &[C64]| -> Vec<C64> {
        (0..d)
            .map(|i| (0..d).map(|j| coef[(j, i)] * v[j]).sum())
            .collect()
    };
    let peak_vals: Vec<Vec<C64>> = par::map_slice(&vals, |v| peak_at(v));
    let w = grid.weight() * two_pi_n;
    let mut gram = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for r in 0..d {
        for c in 0..d {
            let mut acc = KahanC::default();
            for v in &peak_vals {
                acc.add(v[r] * v[c].conj());
            }
            gram[(r, c)] = acc.value() * w;
        }
    }
    let gram_diag_mean = (0..d).map(|i| gram[(i, i)].re).sum::<f64>() / d as f64;
    let gram_offdiag_max = (0..d)
        .flat_map(|r| (0..d).map(move |c| (r, c)))
        .filter(|(r, c)| r != c)
        .map(|(r, c)| gram[(r, c)].norm())
        .fold(0.0, f64::max);
    let density: Vec<f64> = peak_vals
        .iter()
        .map(|v| v.iter().map(|s| s.norm_sqr()).sum::<f64>() / kf.powi(n as i32))
        .collect();
    let density_min = density.iter().copied().fold(f64::INFINITY, f64::min);
    let density_max = density.iter().copied().fold(0.0, f64::max);
    let density_mean = density.iter().sum::<f64>() / density.len() as f64;

    let bm = om.base_metric();
    let b0 = basis.char_point(0);
    let peak_norm_sq = |p: &TorusPoint| -> Result<f64> {
        let v: Vec<C64> = basis.values(p)?.iter().map(|g| g.to_complex()).collect();
        Ok(peak_at(&v)[0].norm_sqr())
    };

    // kernel decay envelope and the radius R it implies
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let rand_point = |rng: &mut ChaCha8Rng| TorusPoint {
        x: (0..n).map(|_| rng.gen()).collect(),
        y: (0..n).map(|_| rng.gen()).collect(),
    };
    let mut pairs = Vec::with_capacity(68);
    for t in 0..68 {
        let p = rand_point(&mut rng);
        let q = if t < 64 {
            rand_point(&mut rng)
        } else {
            p.clone()
        };
        pairs.push((p, q));
    }
    let kernel_decay = kernel_decay_fit(&basis, &pairs)?;
    let log_inv = (1.0 / params.epsilon).ln();
    let rho = 0.5 * om.systole();
    let r_from_epsilon = (2f64.sqrt() * log_inv / kernel_decay.small_c)
        .min(2.0 * log_inv)
        .min(rho / params.epsilon);

    // (c) near the fiber over b₀: |s̃₀|² against A·exp(−2πk d_base²)
    let near_fiber_radius = (r_from_epsilon / kf.sqrt()).min(rho);
    let box_half = near_fiber_radius / bm.q.clone().symmetric_eigenvalues().min().sqrt();
    let mut near = Vec::new();
    while near.len() < params.near_samples {
        let y: Vec<f64> = b0
            .iter()
            .map(|b| b + rng.gen_range(-box_half..box_half))
            .collect();
        let dist = bm.distance(&y, &b0);
        if dist > near_fiber_radius {
            continue;
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let p = TorusPoint::reduced(x, y);
        near.push((peak_norm_sq(&p)?.ln(), -TWO_PI * kf * dist * dist));
    }
    // amplitude from the core d ≤ 1/√k, then the sup-normalized gap
    // between |s̃₀| and the fitted Gaussian over the whole neighbourhood
    let core: Vec<f64> = near
        .iter()
        .filter(|(_, m)| -m <= TWO_PI)
        .map(|(obs, m)| obs - m)
        .collect();
    let amp = if core.is_empty() {
        near.iter().map(|(o, m)| o - m).sum::<f64>() / near.len() as f64
    } else {
        core.iter().sum::<f64>() / core.len() as f64
    };
    let near_fiber_residual = near
        .iter()
        .map(|(obs, model)| ((0.5 * obs).exp() - (0.5 * (model + amp)).exp()).abs())
        .fold(0.0, f64::max)
        / (0.5 * amp).exp();

    // (e) decay along the zero section
    let m_line = 64 * k as usize;
    let mut points = Vec::new();
    for idx in 0..m_line.pow(n as u32) {
        let mut rest = idx;
        let y: Vec<f64> = (0..n)
            .map(|_| {
                let c = rest % m_line;
                rest /= m_line;
                c as f64 / m_line as f64
            })
            .collect();
        let dist = bm.distance(&y, &b0);
        if dist > params.decay_radius {
            continue;
        }
        let val = peak_norm_sq(&TorusPoint { x: vec![0.0; n], y })?;
        points.push((-kf * dist * dist, val.ln()));
    }
    let fit = linear_fit(
        &points.iter().map(|p| p.0).collect::<Vec<_>>(),
        &points.iter().map(|p| p.1).collect::<Vec<_>>(),
    );

    Ok(PeakDiagnostics {
        k,
        n,
        proportionality_residual,
        change_of_basis_condition,
        scale_factor,
        gram_offdiag_max,
        gram_offdiag_rel: gram_offdiag_max / gram_diag_mean,
        gram_diag_mean,
        near_fiber_residual,
        near_fiber_radius,
        density_min,
        density_max,
        density_uniformity: (density_max - density_min) / density_mean,
        decay: DecayRegression {
            section: 0,
            slope: fit.slope,
            r2: fit.r2,
            points,
        },
        kernel_decay,
        epsilon: params.epsilon,
        r_from_epsilon,
    })
}

/// (k/2π)ⁿ exp(−½uᵀGū − ½vᵀGv̄ + uᵀGv̄).
pub fn model_kernel(g: &DMatrix<C64>, k: u64, u: &DVector<C64>, v: &DVector<C64>) -> Result<C64> {
    let n = g.nrows();
    if g.ncols() != n || u.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch("model kernel operands".into()));
    }
    if (g - g.adjoint()).iter().any(|e| e.norm() > 1e-12)
        || g.clone().symmetric_eigenvalues().min() <= 0.0
    {
        return Err(Error::NonPositive(
            "model metric G must be Hermitian positive definite".into(),
        ));
    }
    let form = |a: &DVector<C64>, b: &DVector<C64>| -> C64 { (g * b.map(|x| x.conj())).dot(a) };
    let expo = -0.5 * form(u, u) - 0.5 * form(v, v) + form(u, v);
    Ok(expo.exp() * (k as f64 / TWO_PI).powi(n as i32))
}

/// Max relative error of the model against the exact kernel near z₀:
/// Π in the normal frame at z₀ (phase e^{iψ(a) − iψ(b)},
/// ψ(c) = πk Im(z₀ᵀHc̄)), taken with respect to dvol_ω, ω = 2πω₀.
pub fn model_kernel_error(
    om: &RiemannMatrix,
    k: u64,
    z0: &TorusPoint,
    offsets: &[(DVector<C64>, DVector<C64>)],
) -> Result<f64> {
    let basis = ThetaBasis::new(om, k)?;
    let n = om.n();
    let kf = k as f64;
    let g = om.im_inv().map(|v| C64::new(PI * v, 0.0));
    let zc = om.coords_to_z(z0);
    let psi = |c: &DVector<C64>| PI * kf * om.hermitian_form(&zc, c).im;
    let mut worst = 0.0f64;
    for (u, v) in offsets {
        let a = u / C64::new(kf.sqrt(), 0.0);
        let b = v / C64::new(kf.sqrt(), 0.0);
        let va = basis.values_at_z(&(&zc + &a))?;
        let vb = basis.values_at_z(&(&zc + &b))?;
        let exact = kernel_from_values(&va, &vb) * C64::from_polar(1.0, psi(&a) - psi(&b))
            / TWO_PI.powi(n as i32);
        let model = model_kernel(&g, k, u, v)?;
        worst = worst.max((exact - model).norm() / model.norm());
    }
    Ok(worst)
}

/// Offset pairs (u, v) with |u|, |v| ≤ 1: a 5×5 grid of the square
/// [−0.7, 0.7]² ⊂ ℂ clipped to the unit disc, placed in every coordinate
/// direction in turn.
pub fn unit_offsets(n: usize) -> Vec<(DVector<C64>, DVector<C64>)> {
    let ticks = [-0.7, -0.35, 0.0, 0.35, 0.7];
    let pts: Vec<C64> = ticks
        .iter()
        .flat_map(|a| ticks.iter().map(move |b| C64::new(*a, *b)))
        .filter(|c| c.norm() <= 1.0)
        .collect();
    let along = |dir: usize, c: C64| {
        DVector::from_fn(n, |r, _| if r == dir { c } else { C64::new(0.0, 0.0) })
    };
    let mut out = Vec::with_capacity(n * pts.len() * pts.len());
    for dir in 0..n {
        for u in &pts {
            for v in &pts {
                out.push((along(dir, *u), along(dir, *v)));
            }
        }
    }
    out
}
