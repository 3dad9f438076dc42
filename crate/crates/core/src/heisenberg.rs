//! The finite Heisenberg group G_k acting on the level-k theta basis.
//!
//! Elements are (c, a, b) with c = e(c_num/k), a = α/k, b = β/k, all stored
//! as integer numerators mod k so every group identity holds exactly.
//! The representation is ρ(c, a, b) = c · D_a P_b with
//!   P_b s_γ = s_{γ−β},   D_a s_γ = e(α·γ/k) s_γ,
//! i.e. the analytic operator s ↦ e((k/2)aᵀΩa + k aᵀz) s(z + Ωa + b).
//! Since P_b D_a = e(α·β/k) D_a P_b, closure of ρ forces the cocycle
//! e(β₁·α₂/k) in the product below.

use crate::error::{Error, Result};
use crate::numeric::{e, C64, TWO_PI};
use crate::theta::ThetaBasis;
use crate::TorusPoint;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    pub k: u64,
    pub c_num: u64,
    pub a: Vec<u64>,
    pub b: Vec<u64>,
}

impl GroupElement {
    pub fn new(k: u64, c_num: i64, a: &[i64], b: &[i64]) -> Result<Self> {
        if k == 0 {
            return Err(Error::NonPositive("level k".into()));
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(
                "a and b must have equal length".into(),
            ));
        }
        let r = |v: i64| v.rem_euclid(k as i64) as u64;
        Ok(GroupElement {
            k,
            c_num: r(c_num),
            a: a.iter().map(|v| r(*v)).collect(),
            b: b.iter().map(|v| r(*v)).collect(),
        })
    }

    pub fn identity(k: u64, n: usize) -> Self {
        GroupElement {
            k,
            c_num: 0,
            a: vec![0; n],
            b: vec![0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a_point(&self) -> Vec<f64> {
        self.a.iter().map(|v| *v as f64 / self.k as f64).collect()
    }
    pub fn b_point(&self) -> Vec<f64> {
        self.b.iter().map(|v| *v as f64 / self.k as f64).collect()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.k != other.k {
            return Err(Error::MixedLevels {
                left: self.k,
                right: other.k,
            });
        }
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch(
                "group elements of different rank".into(),
            ));
        }
        Ok(())
    }

    /// (c₁,a₁,b₁)(c₂,a₂,b₂) = (c₁c₂·e(β₁·α₂/k), a₁+a₂, b₁+b₂).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let k = self.k;
        let cross = dot_mod(&self.b, &other.a, k);
        Ok(GroupElement {
            k,
            c_num: (self.c_num + other.c_num + cross) % k,
            a: add_mod(&self.a, &other.a, k),
            b: add_mod(&self.b, &other.b, k),
        })
    }

    pub fn inverse(&self) -> Self {
        let k = self.k;
        let neg = |v: &[u64]| v.iter().map(|x| (k - x) % k).collect::<Vec<_>>();
        // c' solves c + c' + β·(−α) ≡ 0
        let c = (2 * k - self.c_num + dot_mod(&self.b, &self.a, k)) % k;
        GroupElement {
            k,
            c_num: c % k,
            a: neg(&self.a),
            b: neg(&self.b),
        }
    }
}

fn dot_mod(u: &[u64], v: &[u64], k: u64) -> u64 {
    u.iter().zip(v).fold(0, |acc, (x, y)| (acc + x * y) % k)
}

fn add_mod(u: &[u64], v: &[u64], k: u64) -> Vec<u64> {
    u.iter().zip(v).map(|(x, y)| (x + y) % k).collect()
}

pub fn group_mul(g1: &GroupElement, g2: &GroupElement) -> Result<GroupElement> {
    g1.mul(g2)
}

/// Column j of the matrix is e(phases[j]/k) at row perm[j].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialMatrix {
    pub k: u64,
    pub perm: Vec<usize>,
    pub phases: Vec<u64>,
}

impl MonomialMatrix {
    pub fn identity(k: u64, dim: usize) -> Self {
        MonomialMatrix {
            k,
            perm: (0..dim).collect(),
            phases: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// self ∘ other, exactly.
    pub fn compose(&self, other: &Self) -> Self {
        let perm = other.perm.iter().map(|&p| self.perm[p]).collect();
        let phases = other
            .phases
            .iter()
            .zip(&other.perm)
            .map(|(ph, &p)| (ph + self.phases[p]) % self.k)
            .collect();
        MonomialMatrix {
            k: self.k,
            perm,
            phases,
        }
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.dim()];
        self.perm
            .iter()
            .all(|&p| p < seen.len() && !std::mem::replace(&mut seen[p], true))
    }

    fn root(&self, num: u64) -> C64 {
        C64::from_polar(1.0, TWO_PI * num as f64 / self.k as f64)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim(), self.dim(), C64::new(0.0, 0.0));
        for (j, (&p, &ph)) in self.perm.iter().zip(&self.phases).enumerate() {
            m[(p, j)] = self.root(ph);
        }
        m
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::from_element(self.dim(), C64::new(0.0, 0.0));
        for j in 0..self.dim() {
            out[self.perm[j]] = self.root(self.phases[j]) * v[j];
        }
        out
    }

    /// ρ X ρ⁻¹ for a monomial unitary ρ.
    pub fn conjugate(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.dim();
        let mut out = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for i in 0..d {
            for j in 0..d {
                let ph = (self.phases[i] + self.k - self.phases[j]) % self.k;
                out[(self.perm[i], self.perm[j])] = self.root(ph) * x[(i, j)];
            }
        }
        out
    }
}

pub fn rho_matrix(g: &GroupElement, basis: &ThetaBasis) -> Result<MonomialMatrix> {
    if g.k != basis.k() {
        return Err(Error::MixedLevels {
            left: g.k,
            right: basis.k(),
        });
    }
    if g.n() != basis.n() {
        return Err(Error::DimensionMismatch(
            "group element rank vs basis rank".into(),
        ));
    }
    let k = g.k as i64;
    let mut perm = Vec::with_capacity(basis.dim());
    let mut phases = Vec::with_capacity(basis.dim());
    for gamma in basis.char_numerators() {
        let shifted: Vec<i64> = gamma
            .iter()
            .zip(&g.b)
            .map(|(c, b)| (c - *b as i64).rem_euclid(k))
            .collect();
        let ph: i64 = g.a.iter().zip(&shifted).map(|(a, s)| *a as i64 * s).sum();
        perm.push(basis.char_index(&shifted));
        phases.push(((g.c_num as i64 + ph).rem_euclid(k)) as u64);
    }
    Ok(MonomialMatrix {
        k: g.k,
        perm,
        phases,
    })
}

/// Max over sample points of |ρ(g)s(z) − c·(analytic translate of s)(z)| /
/// max |ρ(g)s(z)|, both sides in the unitary gauge.
pub fn verify_equivariance(
    g: &GroupElement,
    basis: &ThetaBasis,
    points: &[TorusPoint],
) -> Result<f64> {
    let rho = rho_matrix(g, basis)?;
    let om = basis.om();
    let n = om.n();
    let k = basis.k() as f64;
    let a = g.a_point();
    let shift = om.z_of(&a, &g.b_point());
    let a_c = DVector::from_fn(n, |r, _| C64::new(a[r], 0.0));
    let a_om_a: C64 = (om.omega() * &a_c).dot(&a_c);
    let central = e(C64::new(g.c_num as f64 / k, 0.0));
    let mut worst = 0.0f64;
    for p in points {
        let z = om.coords_to_z(p);
        let zw = &z + &shift;
        let here: Vec<C64> = basis
            .values_at_z(&z)?
            .iter()
            .map(|v| v.to_complex())
            .collect();
        let there: Vec<C64> = basis
            .values_at_z(&zw)?
            .iter()
            .map(|v| v.to_complex())
            .collect();
        let az: C64 = a_c.iter().zip(z.iter()).map(|(x, y)| x * y).sum();
        let log_mult = C64::new(0.0, TWO_PI) * (0.5 * k * a_om_a + k * az)
            + 0.5 * PI * k * (om.bilinear_form(&z, &z) - om.bilinear_form(&zw, &zw))
            - 0.5 * PI * k * (om.hermitian_norm_sq(&z) - om.hermitian_norm_sq(&zw));
        let mult = central * log_mult.exp();
        // ρ(g)s_i = e(phase_i/k) s_{perm(i)}
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..basis.dim() {
            let left = rho.root(rho.phases[i]) * here[rho.perm[i]];
            let right = mult * there[i];
            num = num.max((left - right).norm());
            den = den.max(left.norm());
        }
        worst = worst.max(num / den);
    }
    Ok(worst)
}

/// Rank of the span of G_k-averages of random Hermitian matrices; 1 means
/// the commutant is the scalars, i.e. the representation is irreducible.
pub fn commutant_dimension(basis: &ThetaBasis) -> Result<usize> {
    const SAMPLES: usize = 20;
    let k = basis.k();
    let n = basis.n();
    let d = basis.dim();
    let reps: Vec<MonomialMatrix> = crate::theta::lex_numerators(2 * n, k)
        .iter()
        .map(|ab| rho_matrix(&GroupElement::new(k, 0, &ab[..n], &ab[n..])?, basis))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut span = DMatrix::from_element(d * d, SAMPLES, C64::new(0.0, 0.0));
    for s in 0..SAMPLES {
        let mut x = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for i in 0..d {
            x[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..d {
                let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                x[(i, j)] = v;
                x[(j, i)] = v.conj();
            }
        }
        let mut avg = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for r in &reps {
            avg += r.conjugate(&x);
        }
        avg /= C64::new(reps.len() as f64, 0.0);
        for (idx, v) in avg.iter().enumerate() {
            span[(idx, s)] = *v;
        }
    }
    Ok(span
        .singular_values()
        .iter()
        .filter(|sv| **sv > 1e-8)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RiemannMatrix;
    use proptest::{prop_assert_eq, proptest, strategy::Strategy};

    fn basis(tau: C64, k: u64) -> ThetaBasis {
        ThetaBasis::new(&RiemannMatrix::diagonal(&[tau]).unwrap(), k).unwrap()
    }

    fn points(n: usize) -> Vec<TorusPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        (0..n)
            .map(|_| TorusPoint {
                x: vec![rng.gen()],
                y: vec![rng.gen()],
            })
            .collect()
    }

    /// Brute-force product of (1,a,0)(1,0,b)(1,a,0)⁻¹(1,0,b)⁻¹ via dense
    /// matrices; the central phase must be −1 at k = 2.
    #[test]
    fn commutator_at_level_two_is_minus_one() {
        let g1 = GroupElement::new(2, 0, &[1], &[0]).unwrap();
        let g2 = GroupElement::new(2, 0, &[0], &[1]).unwrap();
        let comm = g1
            .mul(&g2)
            .unwrap()
            .mul(&g1.inverse())
            .unwrap()
            .mul(&g2.inverse())
            .unwrap();
        assert_eq!((comm.a.clone(), comm.b.clone()), (vec![0], vec![0]));
        let b = basis(C64::new(0.0, 1.0), 2);
        let dense = |g: &GroupElement| rho_matrix(g, &b).unwrap().to_dense();
        let prod = dense(&g1)
            * dense(&g2)
            * dense(&g1).try_inverse().unwrap()
            * dense(&g2).try_inverse().unwrap();
        let minus = DMatrix::from_diagonal_element(2, 2, C64::new(-1.0, 0.0));
        assert!((prod - &minus).norm() < 1e-14);
        assert!((dense(&comm) - minus).norm() < 1e-14);
    }

    #[test]
    fn identity_and_mixed_levels() {
        let g = GroupElement::new(3, 1, &[2], &[1]).unwrap();
        assert_eq!(GroupElement::identity(3, 1).mul(&g).unwrap(), g);
        let h = GroupElement::new(2, 0, &[1], &[0]).unwrap();
        assert!(matches!(
            g.mul(&h),
            Err(Error::MixedLevels { left: 3, right: 2 })
        ));
        let b = basis(C64::new(0.0, 1.0), 3);
        assert_eq!(
            rho_matrix(&GroupElement::identity(3, 1), &b).unwrap(),
            MonomialMatrix::identity(3, 3)
        );
    }

    #[test]
    fn fiber_shift_at_level_two_is_diagonal_sign() {
        let b = basis(C64::new(0.0, 1.0), 2);
        let rho = rho_matrix(&GroupElement::new(2, 0, &[1], &[0]).unwrap(), &b).unwrap();
        assert_eq!(rho.perm, vec![0, 1]);
        assert_eq!(rho.phases, vec![0, 1]);
        let d = rho.to_dense();
        assert_eq!(d[(0, 0)], C64::new(1.0, 0.0));
        assert!((d[(1, 1)] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn center_acts_by_scalars_and_rho_is_unitary() {
        let om = RiemannMatrix::diagonal(&[C64::new(0.0, 1.0), C64::new(0.0, 2.0)]).unwrap();
        let b = ThetaBasis::new(&om, 3).unwrap();
        let c = rho_matrix(&GroupElement::new(3, 2, &[0, 0], &[0, 0]).unwrap(), &b).unwrap();
        assert!(
            c.perm.iter().enumerate().all(|(i, p)| i == *p) && c.phases.iter().all(|p| *p == 2)
        );
        let r = rho_matrix(&GroupElement::new(3, 1, &[1, 2], &[2, 1]).unwrap(), &b).unwrap();
        assert!(r.is_permutation());
        let d = r.to_dense();
        assert!((d.adjoint() * &d - DMatrix::identity(9, 9)).norm() < 1e-14);
        assert!((d.determinant().norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn equivariance_examples() {
        let pts = points(20);
        let b2 = basis(C64::new(0.0, 1.0), 2);
        assert!(verify_equivariance(&GroupElement::identity(2, 1), &b2, &pts).unwrap() < 1e-14);
        let r =
            verify_equivariance(&GroupElement::new(2, 0, &[0], &[1]).unwrap(), &b2, &pts).unwrap();
        assert!(r < 1e-9, "{r}");
        let b3 = basis(C64::new(0.3, 1.2), 3);
        let r =
            verify_equivariance(&GroupElement::new(3, 1, &[1], &[1]).unwrap(), &b3, &pts).unwrap();
        assert!(r < 1e-9, "{r}");
        // every element at level 3, n = 2
        let om = RiemannMatrix::from_parts(
            &[vec![0.3, 0.1], vec![0.1, -0.2]],
            &[vec![1.2, 0.3], vec![0.3, 0.9]],
        )
        .unwrap();
        let b = ThetaBasis::new(&om, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts2: Vec<TorusPoint> = (0..5)
            .map(|_| TorusPoint {
                x: vec![rng.gen(), rng.gen()],
                y: vec![rng.gen(), rng.gen()],
            })
            .collect();
        for ab in crate::theta::lex_numerators(4, 2) {
            let g = GroupElement::new(2, 1, &ab[..2], &ab[2..]).unwrap();
            assert!(verify_equivariance(&g, &b, &pts2).unwrap() < 1e-9);
        }
    }

    #[test]
    fn the_transposed_cocycle_breaks_equivariance() {
        // negative control: swapping the roles of a and b in the cocycle
        // yields ρ(g₁)ρ(g₂) ≠ ρ(g₁g₂) for some pair
        let b = basis(C64::new(0.0, 1.0), 3);
        let g1 = GroupElement::new(3, 0, &[1], &[0]).unwrap();
        let g2 = GroupElement::new(3, 0, &[0], &[1]).unwrap();
        let wrong = GroupElement {
            c_num: dot_mod(&g1.a, &g2.b, 3),
            ..g1.mul(&g2).unwrap()
        };
        let lhs = rho_matrix(&g1, &b)
            .unwrap()
            .compose(&rho_matrix(&g2, &b).unwrap());
        assert_ne!(lhs, rho_matrix(&wrong, &b).unwrap());
        assert_eq!(lhs, rho_matrix(&g1.mul(&g2).unwrap(), &b).unwrap());
    }

    #[test]
    fn commutant_is_scalar() {
        for (tau, k) in [
            (C64::new(0.0, 1.0), 1u64),
            (C64::new(0.0, 1.0), 2),
            (C64::new(0.3, 1.2), 3),
        ] {
            assert_eq!(commutant_dimension(&basis(tau, k)).unwrap(), 1);
        }
    }

    fn element(k: u64) -> impl Strategy<Value = GroupElement> {
        let k_i = k as i64;
        (0..k_i, 0..k_i, 0..k_i, 0..k_i, 0..k_i).prop_map(move |(c, a0, a1, b0, b1)| {
            GroupElement::new(k, c, &[a0, a1], &[b0, b1]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn associativity(g1 in element(5), g2 in element(5), g3 in element(5)) {
            prop_assert_eq!(g1.mul(&g2).unwrap().mul(&g3).unwrap(), g1.mul(&g2.mul(&g3).unwrap()).unwrap());
            prop_assert_eq!(g1.mul(&g1.inverse()).unwrap(), GroupElement::identity(5, 2));
        }

        #[test]
        fn representation_property(g1 in element(4), g2 in element(4)) {
            let om = RiemannMatrix::diagonal(&[C64::new(0.0, 1.0), C64::new(0.2, 1.5)]).unwrap();
            let b = ThetaBasis::new(&om, 4).unwrap();
            let lhs = rho_matrix(&g1, &b).unwrap().compose(&rho_matrix(&g2, &b).unwrap());
            prop_assert_eq!(lhs, rho_matrix(&g1.mul(&g2).unwrap(), &b).unwrap());
        }
    }
}
