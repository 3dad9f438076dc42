//! Gaussian lattice sums: theta functions with characteristics, the level-k
//! section basis in the unitary gauge, and the distortion function f_k.

use crate::abelian::{RiemannMatrix, TorusPoint};
use crate::error::{Error, Result};
use crate::numeric::{GaugeValue, KahanC, KahanR, C64, TWO_PI};
use nalgebra::DVector;
use std::f64::consts::PI;

/// Default hard cap on the number of ∞-norm shells.
pub const DEFAULT_SHELL_CAP: usize = 200;
/// Stop once the tail is below this fraction of the partial sum ...
const REL_TAIL: f64 = 1e-14;
/// ... or below this fraction of the largest single term (roundoff floor).
const ABS_TAIL: f64 = 1e-17;

/// A lattice sum stored as exp(log_scale) · value.
#[derive(Clone, Copy, Debug)]
pub struct Scaled {
    pub log_scale: f64,
    pub value: C64,
}

impl Scaled {
    pub fn to_complex(self) -> C64 {
        self.value * self.log_scale.exp()
    }
    pub fn log_abs(self) -> f64 {
        self.log_scale + self.value.norm().ln()
    }
}

/// Extra per-term phases e(lᵀc) applied to one shared set of lattice terms.
#[derive(Clone, Copy, Debug)]
pub enum Twists<'a> {
    None,
    Real(&'a [Vec<f64>]),
    /// c = −β/k for integer numerators β; resolved via a root-of-unity table.
    NegRoots {
        k: u64,
        numerators: &'a [Vec<i64>],
    },
}

impl Twists<'_> {
    fn count(&self) -> usize {
        match self {
            Twists::None => 1,
            Twists::Real(c) => c.len(),
            Twists::NegRoots { numerators, .. } => numerators.len(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SumOptions {
    pub shell_cap: usize,
    /// Shells summed beyond the point where the stop rule first fires.
    pub extra_shells: usize,
}

impl Default for SumOptions {
    fn default() -> Self {
        SumOptions {
            shell_cap: DEFAULT_SHELL_CAP,
            extra_shells: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatticeSum {
    pub sums: Vec<Scaled>,
    /// Last shell included.
    pub radius: usize,
    /// Bound on the omitted tail, relative to exp(log_scale).
    pub tail_bound: f64,
}

/// Σ_{l∈ℤⁿ} e(½ uᵀQu + uᵀw) · e(lᵀc_t), u = l + a, for each twist c_t.
///
/// Terms are visited in ∞-norm shells around the lattice point nearest the
/// maximizer of |term|, normalized by the largest term, and accumulated with
/// compensated summation.
pub fn lattice_sum(
    q: &RiemannMatrix,
    a: &[f64],
    w: &DVector<C64>,
    twists: Twists,
    opts: SumOptions,
) -> Result<LatticeSum> {
    let n = q.n();
    if a.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "lattice sum of rank {n} got a:{} w:{}",
            a.len(),
            w.len()
        )));
    }
    let b = q.im();
    let im_w = DVector::from_fn(n, |r, _| w[r].im);
    let ustar = -(q.im_inv() * &im_w);
    let log_max = PI * ustar.dot(&(b * &ustar));
    let center: Vec<i64> = (0..n).map(|d| (ustar[d] - a[d]).round() as i64).collect();
    let lambda = q.lambda_min();
    let omega = q.omega();

    let ntw = twists.count();
    let roots: Vec<C64> = match twists {
        Twists::NegRoots { k, .. } => (0..k)
            .map(|m| C64::from_polar(1.0, -TWO_PI * m as f64 / k as f64))
            .collect(),
        _ => Vec::new(),
    };
    let mut acc = vec![KahanC::default(); ntw];
    let mut l = vec![0i64; n];
    let mut u = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut stop_at: Option<usize> = None;
    let mut r = 0usize;
    loop {
        for_each_shell_point(&center, r, &mut l, |l| {
            for k in 0..n {
                u[k] = l[k] as f64 + a[k];
                d[k] = u[k] - ustar[k];
            }
            let mut gauss = 0.0;
            let mut arg = C64::new(0.0, 0.0);
            for r1 in 0..n {
                let mut row_b = 0.0;
                let mut row_q = C64::new(0.0, 0.0);
                for c1 in 0..n {
                    row_b += b[(r1, c1)] * d[c1];
                    row_q += omega[(r1, c1)] * u[c1];
                }
                gauss += d[r1] * row_b;
                arg += u[r1] * (0.5 * row_q + w[r1]);
            }
            let term = C64::from_polar((-PI * gauss).exp(), TWO_PI * arg.re);
            match twists {
                Twists::None => acc[0].add(term),
                Twists::Real(cs) => {
                    for (t, c) in cs.iter().enumerate() {
                        let ph: f64 = l.iter().zip(c).map(|(li, ci)| *li as f64 * ci).sum();
                        acc[t].add(term * C64::from_polar(1.0, TWO_PI * ph));
                    }
                }
                Twists::NegRoots { k, numerators } => {
                    let km = k as i64;
                    for (t, beta) in numerators.iter().enumerate() {
                        let m: i64 = l.iter().zip(beta).map(|(li, bi)| li * bi).sum();
                        acc[t].add(term * roots[m.rem_euclid(km) as usize]);
                    }
                }
            }
        });
        let tail = shell_tail(lambda, n, r);
        if stop_at.is_none() {
            let smallest = acc
                .iter()
                .map(|s| s.value().norm())
                .fold(f64::INFINITY, f64::min);
            if tail <= REL_TAIL * smallest || tail <= ABS_TAIL {
                stop_at = Some(r);
            }
        }
        if let Some(s) = stop_at {
            if r >= s + opts.extra_shells {
                return Ok(LatticeSum {
                    sums: acc
                        .iter()
                        .map(|s| Scaled {
                            log_scale: log_max,
                            value: s.value(),
                        })
                        .collect(),
                    radius: r,
                    tail_bound: tail,
                });
            }
        }
        r += 1;
        if r > opts.shell_cap {
            return Err(Error::TruncationOverflow {
                shells: opts.shell_cap,
            });
        }
    }
}

/// Visit every l with ‖l − center‖_∞ = r, lexicographically.
fn for_each_shell_point(center: &[i64], r: usize, l: &mut [i64], mut f: impl FnMut(&[i64])) {
    let n = center.len();
    let r = r as i64;
    if r == 0 {
        l.copy_from_slice(center);
        f(l);
        return;
    }
    let side = (2 * r + 1) as usize;
    let total = side.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut on_shell = false;
        for d in (0..n).rev() {
            let off = (c % side) as i64 - r;
            c /= side;
            on_shell |= off.abs() == r;
            l[d] = center[d] + off;
        }
        if on_shell {
            f(l);
        }
    }
}

fn shell_count(n: usize, r: usize) -> f64 {
    if r == 0 {
        1.0
    } else {
        ((2 * r + 1) as f64).powi(n as i32) - ((2 * r - 1) as f64).powi(n as i32)
    }
}

/// Bound on Σ_{shells > r} of normalized |terms|: each term on shell s is at
/// most exp(−πλ(s−½)²) because the shell center is within ½ of the maximizer.
pub fn shell_tail(lambda: f64, n: usize, r: usize) -> f64 {
    let mut total = 0.0;
    let mut s = r + 1;
    loop {
        let t = shell_count(n, s) * (-PI * lambda * (s as f64 - 0.5).powi(2)).exp();
        total += t;
        if t < 1e-30 * total.max(1e-300) || t == 0.0 {
            return total;
        }
        s += 1;
    }
}

/// Smallest radius whose tail bound is at most `tol`.
pub fn tail_radius(lambda: f64, n: usize, tol: f64) -> usize {
    (0..).find(|&r| shell_tail(lambda, n, r) <= tol).unwrap()
}

/// ϑ[a;b](Ω, z) = Σ_l e(½(l+a)ᵀΩ(l+a) + (l+a)ᵀ(z+b)), in scaled form.
pub fn theta_char_scaled(
    a: &[f64],
    b: &[f64],
    om: &RiemannMatrix,
    z: &DVector<C64>,
) -> Result<Scaled> {
    if b.len() != om.n() {
        return Err(Error::DimensionMismatch("characteristic length".into()));
    }
    let w = DVector::from_fn(om.n(), |r, _| z[r] + b[r]);
    Ok(lattice_sum(om, a, &w, Twists::None, SumOptions::default())?.sums[0])
}

pub fn theta_char(a: &[f64], b: &[f64], om: &RiemannMatrix, z: &DVector<C64>) -> Result<C64> {
    Ok(theta_char_scaled(a, b, om, z)?.to_complex())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FkMode {
    Direct,
    Closed,
}

/// Level-k basis s_i = C_Ω k^{−n/4} θ₀^k Θ_k(·; b_i), i over (1/k)ℤⁿ/ℤⁿ.
#[derive(Clone, Debug)]
pub struct ThetaBasis {
    om: RiemannMatrix,
    om_k: RiemannMatrix,
    k: u64,
    chars: Vec<Vec<i64>>,
    c_omega: f64,
    trunc_radius: usize,
    opts: SumOptions,
}

impl ThetaBasis {
    pub fn new(om: &RiemannMatrix, k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::NonPositive("level k".into()));
        }
        let n = om.n();
        let om_k = om.scaled(1.0 / k as f64)?;
        let chars = lex_numerators(n, k);
        let c_omega = 2f64.powf(n as f64 / 4.0) * om.det_im().powf(0.25);
        let trunc_radius = tail_radius(om_k.lambda_min(), n, REL_TAIL);
        Ok(ThetaBasis {
            om: om.clone(),
            om_k,
            k,
            chars,
            c_omega,
            trunc_radius,
            opts: SumOptions::default(),
        })
    }

    pub fn with_options(mut self, opts: SumOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn om(&self) -> &RiemannMatrix {
        &self.om
    }
    pub fn k(&self) -> u64 {
        self.k
    }
    pub fn n(&self) -> usize {
        self.om.n()
    }
    pub fn dim(&self) -> usize {
        self.chars.len()
    }
    /// Characteristic numerators β with b = β/k, lexicographic.
    pub fn char_numerators(&self) -> &[Vec<i64>] {
        &self.chars
    }
    pub fn char_point(&self, i: usize) -> Vec<f64> {
        self.chars[i]
            .iter()
            .map(|b| *b as f64 / self.k as f64)
            .collect()
    }
    pub fn char_index(&self, numerators: &[i64]) -> usize {
        let k = self.k as i64;
        numerators
            .iter()
            .fold(0i64, |acc, b| acc * k + b.rem_euclid(k)) as usize
    }
    pub fn c_omega(&self) -> f64 {
        self.c_omega
    }
    /// Radius at which the worst-case tail drops below 1e−14 of the
    /// leading term; actual sums stop adaptively.
    pub fn trunc_radius(&self) -> usize {
        self.trunc_radius
    }

    fn log_prefactor(&self) -> f64 {
        self.c_omega.ln() - self.n() as f64 / 4.0 * (self.k as f64).ln()
    }

    /// Θ_k(z; b_i) for every i, sharing the lattice terms.
    pub fn level_sums(&self, z: &DVector<C64>) -> Result<LatticeSum> {
        let zero = vec![0.0; self.n()];
        lattice_sum(
            &self.om_k,
            &zero,
            z,
            Twists::NegRoots {
                k: self.k,
                numerators: &self.chars,
            },
            self.opts,
        )
    }

    /// Unitary-gauge values of all sections at an arbitrary (unreduced) z.
    pub fn values_at_z(&self, z: &DVector<C64>) -> Result<Vec<GaugeValue>> {
        let sums = self.level_sums(z)?;
        let re = z.map(|v| C64::new(v.re, 0.0));
        let im = z.map(|v| C64::new(v.im, 0.0));
        let k = self.k as f64;
        // Re(zᵀHz) − zᵀHz̄ = −2 qᵀHq ;  Im(zᵀHz) = 2 pᵀHq
        let qhq = self.om.hermitian_norm_sq(&im);
        let phq = self.om.bilinear_form(&re, &im).re;
        let base_log = self.log_prefactor() - PI * k * qhq;
        let base_phase = PI * k * phq;
        Ok(sums
            .sums
            .iter()
            .map(|s| GaugeValue::new(base_log + s.log_abs(), base_phase + s.value.arg()))
            .collect())
    }

    pub fn values(&self, p: &TorusPoint) -> Result<Vec<GaugeValue>> {
        self.values_at_z(&self.om.coords_to_z(p))
    }

    pub fn section_value(&self, i: usize, p: &TorusPoint) -> Result<GaugeValue> {
        self.check_index(i)?;
        Ok(self.values(p)?[i])
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dim() {
            return Err(Error::InvalidArgument(format!(
                "section index {i} ≥ {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// |s_i|²_{h₀} = C_Ω² k^{−n/2} exp(−2πk xᵀ(ImΩ)x) |Θ_k(Ωx+y; b_i)|², with
    /// the characteristic folded into the linear term.
    pub fn section_norm_sq(&self, i: usize, p: &TorusPoint) -> Result<f64> {
        self.check_index(i)?;
        let n = self.n();
        let b = self.char_point(i);
        let ys: Vec<f64> = p.y.iter().zip(&b).map(|(y, b)| y - b).collect();
        let w = self.om.z_of(&p.x, &ys);
        let theta = lattice_sum(&self.om_k, &vec![0.0; n], &w, Twists::None, self.opts)?.sums[0];
        let xv = DVector::from_column_slice(&p.x);
        let xbx = xv.dot(&(self.om.im() * &xv));
        let k = self.k as f64;
        let log = 2.0 * self.c_omega.ln() - n as f64 / 2.0 * k.ln() - TWO_PI * k * xbx
            + 2.0 * theta.log_abs();
        Ok(log.exp())
    }

    pub fn distortion(&self, p: &TorusPoint, mode: FkMode) -> Result<f64> {
        match mode {
            FkMode::Direct => Ok(sum_norm_sq(&self.values(p)?)),
            FkMode::Closed => {
                let (x, y) = (p.x.clone(), p.y.clone());
                Ok(self.distortion_closed_xy(&x, &y))
            }
        }
    }

    pub fn distortion_at_z(&self, z: &DVector<C64>, mode: FkMode) -> Result<f64> {
        match mode {
            FkMode::Direct => Ok(sum_norm_sq(&self.values_at_z(z)?)),
            FkMode::Closed => {
                let (x, y) = self.om.z_to_xy(z);
                Ok(self.distortion_closed_xy(&x, &y))
            }
        }
    }

    /// f_k = C_Ω² k^{n/2} Σ_{l, m ≡ l (k)} exp(−πk(uᵀBu + vᵀBv))
    ///       · cos 2π[(k/2)(uᵀAu − vᵀAv) + (l−m)ᵀy],  u = x + l/k, v = x + m/k.
    pub fn distortion_closed_xy(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n();
        let k = self.k as f64;
        let lam = self.om.lambda_min();
        let rl = tail_radius(lam / k, n, ABS_TAIL);
        let rj = tail_radius(lam * k, n, ABS_TAIL);
        let a = self.om.re();
        let b = self.om.im();
        let quad = |m: &nalgebra::DMatrix<f64>, v: &[f64]| -> f64 {
            let mut s = 0.0;
            for r in 0..n {
                for c in 0..n {
                    s += v[r] * m[(r, c)] * v[c];
                }
            }
            s
        };
        let l0: Vec<i64> = x.iter().map(|xi| (-k * xi).round() as i64).collect();
        let mut acc = KahanR::default();
        let mut l = vec![0i64; n];
        let mut j = vec![0i64; n];
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        for rr in 0..=rl {
            for_each_shell_point(&l0, rr, &mut l, |l| {
                for d in 0..n {
                    u[d] = x[d] + l[d] as f64 / k;
                }
                let ub = quad(b, &u);
                let ua = quad(a, &u);
                let j0: Vec<i64> = u.iter().map(|t| t.round() as i64).collect();
                for rs in 0..=rj {
                    for_each_shell_point(&j0, rs, &mut j, |j| {
                        let mut jy = 0.0;
                        for d in 0..n {
                            v[d] = u[d] - j[d] as f64;
                            jy += j[d] as f64 * y[d];
                        }
                        let weight = (-PI * k * (ub + quad(b, &v))).exp();
                        let phase = TWO_PI * (0.5 * k * (ua - quad(a, &v)) + k * jy);
                        acc.add(weight * phase.cos());
                    });
                }
            });
        }
        self.c_omega.powi(2) * k.powf(n as f64 / 2.0) * acc.value()
    }
}

/// Σ_i |g_i|² evaluated stably from log magnitudes.
pub fn sum_norm_sq(vals: &[GaugeValue]) -> f64 {
    let mx = vals
        .iter()
        .map(|g| g.log_mag)
        .fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return 0.0;
    }
    let s: f64 = vals.iter().map(|g| (2.0 * (g.log_mag - mx)).exp()).sum();
    s * (2.0 * mx).exp()
}

/// All β ∈ {0..k−1}ⁿ in lexicographic order.
pub fn lex_numerators(n: usize, k: u64) -> Vec<Vec<i64>> {
    let k = k as usize;
    (0..k.pow(n as u32))
        .map(|mut idx| {
            let mut v = vec![0i64; n];
            for d in (0..n).rev() {
                v[d] = (idx % k) as i64;
                idx /= k;
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }
    fn z1(v: C64) -> DVector<C64> {
        DVector::from_element(1, v)
    }
    fn skewed() -> RiemannMatrix {
        RiemannMatrix::from_parts(
            &[vec![0.3, 0.1], vec![0.1, -0.2]],
            &[vec![1.2, 0.3], vec![0.3, 0.9]],
        )
        .unwrap()
    }
    fn rand_point(rng: &mut ChaCha8Rng, n: usize) -> TorusPoint {
        TorusPoint {
            x: (0..n).map(|_| rng.gen()).collect(),
            y: (0..n).map(|_| rng.gen()).collect(),
        }
    }

    /// Plain nested loop over a fixed box, no scaling or shells.
    fn brute_theta(a: f64, b: f64, tau: C64, z: C64, radius: i64) -> C64 {
        (-radius..=radius)
            .map(|l| {
                let u = l as f64 + a;
                crate::numeric::e(0.5 * u * u * tau + u * (z + b))
            })
            .sum()
    }

    #[test]
    fn theta_at_i_matches_brute_force() {
        let om = RiemannMatrix::diagonal(&[c(0.0, 1.0)]).unwrap();
        let v = theta_char(&[0.0], &[0.0], &om, &z1(c(0.0, 0.0))).unwrap();
        let oracle = brute_theta(0.0, 0.0, c(0.0, 1.0), c(0.0, 0.0), 50);
        assert!((v - oracle).norm() < 1e-15);
        assert!((v.re - 1.0864348112).abs() < 1e-10);
        assert!(v.im.abs() < 1e-16);
    }

    #[test]
    fn theta_char_matches_brute_force_off_center() {
        let tau = c(0.3, 1.2);
        let om = RiemannMatrix::diagonal(&[tau]).unwrap();
        for (a, b, z) in [
            (0.5, 0.0, c(0.2, 0.4)),
            (0.25, 0.5, c(-0.7, -1.1)),
            (0.0, 0.5, c(1.3, 1.9)),
        ] {
            let v = theta_char(&[a], &[b], &om, &z1(z)).unwrap();
            let o = brute_theta(a, b, tau, z, 60);
            assert!((v - o).norm() < 1e-13 * o.norm().max(1.0), "{v} vs {o}");
        }
    }

    #[test]
    fn theta_symmetries() {
        let s = skewed();
        let z = DVector::from_vec(vec![c(0.2, -0.3), c(-0.4, 0.5)]);
        let t = theta_char(&[0.0, 0.0], &[0.0, 0.0], &s, &z).unwrap();
        let tm = theta_char(&[0.0, 0.0], &[0.0, 0.0], &s, &(-&z)).unwrap();
        assert!((t - tm).norm() < 1e-13 * t.norm());
        let shifted = z.map(|v| v) + DVector::from_vec(vec![c(1.0, 0.0), c(-2.0, 0.0)]);
        let ts = theta_char(&[0.0, 0.0], &[0.0, 0.0], &s, &shifted).unwrap();
        assert!((t - ts).norm() < 1e-12 * t.norm());
    }

    #[test]
    fn theta_quasi_periodicity() {
        let s = skewed();
        let z = DVector::from_vec(vec![c(0.2, -0.3), c(-0.4, 0.5)]);
        let m = [1.0, -1.0];
        let om_m = s.z_of(&m, &[0.0, 0.0]);
        let t = theta_char(&[0.0, 0.0], &[0.0, 0.0], &s, &z).unwrap();
        let ts = theta_char(&[0.0, 0.0], &[0.0, 0.0], &s, &(&z + &om_m)).unwrap();
        let mom: C64 = (0..2).map(|r| m[r] * om_m[r]).sum();
        let mz: C64 = (0..2).map(|r| m[r] * z[r]).sum();
        let expect = crate::numeric::e(-0.5 * mom - mz) * t;
        assert!((ts - expect).norm() < 1e-10 * expect.norm());
    }

    #[test]
    fn extra_shell_changes_less_than_tail_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = skewed();
        for _ in 0..20 {
            let z = DVector::from_fn(2, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let base =
                lattice_sum(&s, &[0.0, 0.0], &z, Twists::None, SumOptions::default()).unwrap();
            let more = lattice_sum(
                &s,
                &[0.0, 0.0],
                &z,
                Twists::None,
                SumOptions {
                    extra_shells: 1,
                    ..Default::default()
                },
            )
            .unwrap();
            let diff = (more.sums[0].value - base.sums[0].value).norm();
            assert!(
                diff <= base.tail_bound + 1e-16 * base.sums[0].value.norm(),
                "{diff} > {}",
                base.tail_bound
            );
        }
    }

    #[test]
    fn shell_cap_overflows() {
        let om = RiemannMatrix::diagonal(&[c(0.0, 1e-4)]).unwrap();
        let r = lattice_sum(
            &om,
            &[0.0],
            &z1(c(0.1, 0.0)),
            Twists::None,
            SumOptions {
                shell_cap: 5,
                extra_shells: 0,
            },
        );
        assert!(matches!(r, Err(Error::TruncationOverflow { shells: 5 })));
    }

    #[test]
    fn level_one_section_has_unit_l2_norm() {
        let om = RiemannMatrix::diagonal(&[c(0.0, 1.0)]).unwrap();
        let basis = ThetaBasis::new(&om, 1).unwrap();
        let m = 16;
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                let p = TorusPoint {
                    x: vec![a as f64 / m as f64],
                    y: vec![b as f64 / m as f64],
                };
                acc += basis.section_value(0, &p).unwrap().norm_sq();
            }
        }
        assert!((acc / (m * m) as f64 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pointwise_norm_is_lattice_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = skewed();
        let basis = ThetaBasis::new(&s, 2).unwrap();
        for _ in 0..50 {
            let p = rand_point(&mut rng, 2);
            let z = s.coords_to_z(&p);
            let shift = s.z_of(&[1.0, -1.0], &[0.0, 2.0]);
            let a = basis.values_at_z(&z).unwrap();
            let b = basis.values_at_z(&(&z + shift)).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u.log_mag.exp() - v.log_mag.exp()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn phase_is_continuous_along_a_path() {
        let om = RiemannMatrix::diagonal(&[c(0.3, 1.2)]).unwrap();
        let basis = ThetaBasis::new(&om, 3).unwrap();
        let mut prev: Option<Vec<GaugeValue>> = None;
        for s in 0..1000 {
            let t = s as f64 * 1e-3;
            // along the zero section x = 0, where no basis element vanishes
            let v = basis
                .values(&TorusPoint {
                    x: vec![0.0],
                    y: vec![t],
                })
                .unwrap();
            assert!(v.iter().all(|g| g.log_mag > -8.0));
            if let Some(p) = prev {
                for (a, b) in p.iter().zip(&v) {
                    assert!(crate::numeric::wrap_phase(a.phase - b.phase).abs() < 0.1);
                }
            }
            prev = Some(v);
        }
    }

    #[test]
    fn closed_norm_matches_gauge_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (om, k) in [
            (skewed(), 2u64),
            (RiemannMatrix::diagonal(&[c(0.3, 1.2)]).unwrap(), 5),
        ] {
            let basis = ThetaBasis::new(&om, k).unwrap();
            for _ in 0..50 {
                let p = rand_point(&mut rng, om.n());
                let vals = basis.values(&p).unwrap();
                for (i, v) in vals.iter().enumerate() {
                    let closed = basis.section_norm_sq(i, &p).unwrap();
                    assert!(
                        (closed - v.norm_sq()).abs() <= 1e-10 * closed,
                        "{closed} vs {}",
                        v.norm_sq()
                    );
                }
            }
        }
    }

    #[test]
    fn section_peaks_over_its_characteristic() {
        let om = RiemannMatrix::diagonal(&[c(0.0, 1.0)]).unwrap();
        let basis = ThetaBasis::new(&om, 4).unwrap();
        let m = 400;
        for i in 0..4 {
            let best = (0..m)
                .map(|j| j as f64 / m as f64)
                .max_by(|a, b| {
                    let fa = basis
                        .section_norm_sq(
                            i,
                            &TorusPoint {
                                x: vec![0.0],
                                y: vec![*a],
                            },
                        )
                        .unwrap();
                    let fb = basis
                        .section_norm_sq(
                            i,
                            &TorusPoint {
                                x: vec![0.0],
                                y: vec![*b],
                            },
                        )
                        .unwrap();
                    fa.total_cmp(&fb)
                })
                .unwrap();
            let d = (best - basis.char_point(i)[0]).abs();
            assert!(d.min(1.0 - d) <= 1.0 / m as f64);
        }
    }

    #[test]
    fn distortion_direct_matches_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (om, k) in [
            (skewed(), 3u64),
            (RiemannMatrix::diagonal(&[c(0.3, 1.2)]).unwrap(), 7),
        ] {
            let basis = ThetaBasis::new(&om, k).unwrap();
            for _ in 0..100 {
                let p = rand_point(&mut rng, om.n());
                let d = basis.distortion(&p, FkMode::Direct).unwrap();
                let cl = basis.distortion(&p, FkMode::Closed).unwrap();
                assert!((d - cl).abs() < 1e-10 * d, "{d} vs {cl}");
            }
        }
    }

    #[test]
    fn distortion_integrates_to_dimension_and_is_positive() {
        for k in [1u64, 2, 5] {
            let om = RiemannMatrix::diagonal(&[c(0.3, 1.2)]).unwrap();
            let basis = ThetaBasis::new(&om, k).unwrap();
            let m = 64;
            let mut acc = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let f = basis
                        .distortion(
                            &TorusPoint {
                                x: vec![a as f64 / m as f64],
                                y: vec![b as f64 / m as f64],
                            },
                            FkMode::Direct,
                        )
                        .unwrap();
                    assert!(f > 0.0);
                    acc += f;
                }
            }
            assert!((acc / (m * m) as f64 / k as f64 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn negated_characteristics_swap_under_reflection() {
        let s = skewed();
        let basis = ThetaBasis::new(&s, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let z = s.coords_to_z(&rand_point(&mut rng, 2));
            let plus = basis.values_at_z(&z).unwrap();
            let minus = basis.values_at_z(&(-&z)).unwrap();
            for (i, beta) in basis.char_numerators().iter().enumerate() {
                let neg: Vec<i64> = beta.iter().map(|b| -b).collect();
                let j = basis.char_index(&neg);
                assert!((plus[i].log_mag.exp() - minus[j].log_mag.exp()).abs() < 1e-10);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn distortion_invariant_under_torsion_translation(x in 0.0..1.0f64, y in 0.0..1.0f64, a in 0i64..4, b in 0i64..4) {
            let om = RiemannMatrix::diagonal(&[c(0.3, 1.2)]).unwrap();
            let basis = ThetaBasis::new(&om, 4).unwrap();
            let p = TorusPoint { x: vec![x], y: vec![y] };
            let q = TorusPoint::reduced(vec![x + a as f64 / 4.0], vec![y + b as f64 / 4.0]);
            let f0 = basis.distortion(&p, FkMode::Direct).unwrap();
            let f1 = basis.distortion(&q, FkMode::Direct).unwrap();
            prop_assert!((f0 - f1).abs() < 1e-10 * f0);
        }
    }
}
