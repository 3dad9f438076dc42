//! The elliptic-curve mirror example: lines y = m·x + c on T² = ℝ²/ℤ²,
//! their intersections, triangle-counting product coefficients, and the
//! theta-constant identities they reproduce.

use crate::abelian::RiemannMatrix;
use crate::error::{Error, Result};
use crate::numeric::{e, KahanC, C64, TWO_PI};
use crate::theta::theta_char;
use nalgebra::DVector;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AffineLagrangian {
    pub slope: u32,
    pub offset: f64,
}

impl AffineLagrangian {
    pub fn new(slope: u32, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::InvalidArgument("offset must be finite".into()));
        }
        Ok(AffineLagrangian {
            slope,
            offset: offset.rem_euclid(1.0),
        })
    }
}

/// The |m₁ − m₂| points (x, y) ∈ [0,1)² with m₁x + c₁ ≡ m₂x + c₂ (mod 1), sorted by x.
pub fn intersections(s1: &AffineLagrangian, s2: &AffineLagrangian) -> Result<Vec<(f64, f64)>> {
    let dm = s1.slope as i64 - s2.slope as i64;
    if dm == 0 {
        return Err(if s1.offset == s2.offset {
            Error::SameLagrangian
        } else {
            Error::ParallelLagrangians
        });
    }
    let mut pts: Vec<(f64, f64)> = (0..dm.abs())
        .map(|j| {
            let x = snap(((s2.offset - s1.offset + j as f64) / dm as f64).rem_euclid(1.0));
            (x, snap((s1.slope as f64 * x + s1.offset).rem_euclid(1.0)))
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts)
}

fn snap(v: f64) -> f64 {
    if v > 1.0 - 1e-15 {
        0.0
    } else {
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    B0,
    B1,
}

impl Target {
    pub fn shift(self) -> f64 {
        match self {
            Target::B0 => 0.0,
            Target::B1 => 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TriangleSeries {
    pub tau: C64,
    pub shift: f64,
    /// partial sums over |m| ≤ M for M = shift, shift + 1, …
    pub terms: Vec<C64>,
    pub tail_bound: f64,
}

impl TriangleSeries {
    pub fn value(&self) -> C64 {
        *self
            .terms
            .last()
            .expect("series has at least one partial sum")
    }
}

/// Σ_{|m|>M} |e(τm²)| over m ∈ ℤ + δ.
pub fn triangle_tail(tau_im: f64, radius: f64) -> f64 {
    2.0 * (-TWO_PI * tau_im * radius * radius).exp() / (1.0 - (-TWO_PI * tau_im).exp())
}

/// Holomorphic triangles with corners on the lines of slope 0, 1, 2 through
/// the origin: lifting to ℝ², the triangle with vertices (0,0), (m,0),
/// (−m,−2m) has edges on y = 0, y = x − m and y = 2x, and symplectic area
/// ½|m·(−2m)| = m². Translating the slope-2 vertex to the second
/// intersection point b₁ = (½, 0) shifts m ∈ ℤ to m ∈ ℤ + ½. The coefficient
/// of b_δ in the product is therefore Σ_{m∈ℤ+δ} e(τ m²) with the
/// complexified area weight e(τ·area).
pub fn triangle_series(tau: C64, target: Target) -> Result<TriangleSeries> {
    if tau.im.is_nan() || tau.im <= 0.0 {
        return Err(Error::NotPositive);
    }
    let delta = target.shift();
    let mut acc = KahanC::default();
    let mut terms = Vec::new();
    let mut m = delta;
    let tail = loop {
        acc.add(e(tau * m * m));
        if m > 0.0 {
            acc.add(e(tau * m * m));
        }
        terms.push(acc.value());
        let tail = triangle_tail(tau.im, m + 1.0);
        if tail <= 1e-14 * acc.value().norm() {
            break tail;
        }
        if terms.len() >= 10_000 {
            return Err(Error::TruncationOverflow {
                shells: terms.len(),
            });
        }
        m += 1.0;
    };
    Ok(TriangleSeries {
        tau,
        shift: delta,
        terms,
        tail_bound: tail,
    })
}

pub fn triangle_coefficient(tau: C64, target: Target) -> Result<C64> {
    Ok(triangle_series(tau, target)?.value())
}

fn theta_1d(a: f64, tau: C64, z: C64) -> Result<C64> {
    let om = RiemannMatrix::diagonal(&[tau])?;
    theta_char(&[a], &[0.0], &om, &DVector::from_element(1, z))
}

/// ϑ[δ;0](2τ, 0), the theta constant the triangle count should reproduce.
pub fn theta_constant(tau: C64, target: Target) -> Result<C64> {
    theta_1d(target.shift(), 2.0 * tau, C64::new(0.0, 0.0))
}

/// |ϑ(τ,z)² − Σ_δ ϑ[δ;0](2τ,0)ϑ[δ;0](2τ,2z)| / |ϑ(τ,z)²|.
pub fn addition_formula_residual(tau: C64, z: C64) -> Result<f64> {
    if tau.im.is_nan() || tau.im <= 0.0 {
        return Err(Error::NotPositive);
    }
    let lhs = theta_1d(0.0, tau, z)?.powi(2);
    let mut rhs = C64::new(0.0, 0.0);
    for t in [Target::B0, Target::B1] {
        rhs += triangle_coefficient(tau, t)? * theta_1d(t.shift(), 2.0 * tau, 2.0 * z)?;
    }
    Ok((lhs - rhs).norm() / (lhs.norm() + 1e-300))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CountCheck {
    pub count: usize,
    pub dim: usize,
    pub equal: bool,
}

/// #(S₀ ∩ S_k) against dim H⁰(E^k) = k.
pub fn intersection_vs_dimension(k: u32) -> Result<CountCheck> {
    let count = intersections(
        &AffineLagrangian::new(0, 0.0)?,
        &AffineLagrangian::new(k, 0.0)?,
    )?
    .len();
    let dim = k as usize;
    Ok(CountCheck {
        count,
        dim,
        equal: count == dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(m: u32, c: f64) -> AffineLagrangian {
        AffineLagrangian::new(m, c).unwrap()
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(
            intersections(&line(0, 0.0), &line(1, 0.0)).unwrap(),
            vec![(0.0, 0.0)]
        );
        assert_eq!(
            intersections(&line(0, 0.0), &line(2, 0.0)).unwrap(),
            vec![(0.0, 0.0), (0.5, 0.0)]
        );
        assert_eq!(
            intersections(&line(0, 0.0), &line(7, 0.0)).unwrap().len(),
            7
        );
        assert!(matches!(
            intersections(&line(1, 0.2), &line(1, 0.3)),
            Err(Error::ParallelLagrangians)
        ));
        assert!(matches!(
            intersections(&line(1, 0.2), &line(1, 0.2)),
            Err(Error::SameLagrangian)
        ));
    }

    #[test]
    fn counts_match_dimension() {
        let c1 = intersection_vs_dimension(1).unwrap();
        assert_eq!((c1.count, c1.dim, c1.equal), (1, 1, true));
        let c3 = intersection_vs_dimension(3).unwrap();
        assert_eq!((c3.count, c3.dim, c3.equal), (3, 3, true));
        assert!(matches!(
            intersection_vs_dimension(0),
            Err(Error::SameLagrangian)
        ));
    }

    #[test]
    fn triangle_coefficients_at_i() {
        let i = C64::new(0.0, 1.0);
        // Σ_{|m|≤20} e^{−2πm²} and Σ e^{−2π(m+½)²}, computed independently in double precision
        let b0 = triangle_coefficient(i, Target::B0).unwrap();
        let b1 = triangle_coefficient(i, Target::B1).unwrap();
        assert!((b0.re - 1.0037348854877393).abs() < 1e-14 && b0.im.abs() < 1e-15);
        assert!((b1.re - 0.4157606025960271).abs() < 1e-14 && b1.im.abs() < 1e-15);
        for t in [Target::B0, Target::B1] {
            let s = triangle_series(i, t).unwrap();
            assert!(s.tail_bound <= 1e-14 * s.value().norm());
            assert!((s.value() - theta_constant(i, t).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn addition_formula_examples() {
        let i = C64::new(0.0, 1.0);
        assert!(addition_formula_residual(i, C64::new(0.3, 0.1)).unwrap() < 1e-10);
        assert!(addition_formula_residual(i, C64::new(0.0, 0.0)).unwrap() < 1e-12);
        let a = addition_formula_residual(i, C64::new(0.3, 0.1)).unwrap();
        let b = addition_formula_residual(i, C64::new(-0.3, -0.1)).unwrap();
        assert!((a - b).abs() < 1e-15);
        // a wrong pairing of characteristics is far off
        let z = C64::new(0.3, 0.1);
        let lhs = theta_1d(0.0, i, z).unwrap().powi(2);
        let swapped = triangle_coefficient(i, Target::B1).unwrap()
            * theta_1d(0.0, 2.0 * i, 2.0 * z).unwrap()
            + triangle_coefficient(i, Target::B0).unwrap()
                * theta_1d(0.5, 2.0 * i, 2.0 * z).unwrap();
        assert!((lhs - swapped).norm() > 0.1 * lhs.norm());
        assert!(addition_formula_residual(C64::new(0.0, -1.0), z).is_err());
    }

    #[test]
    fn addition_formula_on_cell_centres() {
        for tau in [C64::new(0.0, 1.0), C64::new(0.5, 1.0), C64::new(0.0, 2.0)] {
            for a in 0..10 {
                for b in 0..10 {
                    let z = (a as f64 + 0.5) / 10.0 + tau * ((b as f64 + 0.5) / 10.0);
                    assert!(addition_formula_residual(tau, z).unwrap() < 1e-9);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn triangles_are_theta_constants(re in -0.5f64..0.5, im in 0.5f64..3.0) {
            let tau = C64::new(re, im);
            for t in [Target::B0, Target::B1] {
                let a = triangle_coefficient(tau, t).unwrap();
                let b = theta_constant(tau, t).unwrap();
                prop_assert!((a - b).norm() <= 1e-9 * b.norm());
            }
        }

        #[test]
        fn counts_are_translation_invariant(m1 in 0u32..8, m2 in 0u32..8, c1 in 0.0f64..1.0, c2 in 0.0f64..1.0, t in -2.0f64..2.0) {
            prop_assume!(m1 != m2);
            let a = intersections(&line(m1, c1), &line(m2, c2)).unwrap().len();
            let b = intersections(&line(m1, c1 + t), &line(m2, c2 + t)).unwrap().len();
            prop_assert_eq!(a, b);
            prop_assert_eq!(a as i64, (m1 as i64 - m2 as i64).abs());
        }

        #[test]
        fn intersection_points_lie_on_both_lines(m1 in 0u32..8, m2 in 0u32..8, c1 in 0.0f64..1.0, c2 in 0.0f64..1.0) {
            prop_assume!(m1 != m2);
            for (x, y) in intersections(&line(m1, c1), &line(m2, c2)).unwrap() {
                for l in [line(m1, c1), line(m2, c2)] {
                    let gap = (l.slope as f64 * x + l.offset - y).rem_euclid(1.0);
                    prop_assert!(gap.min(1.0 - gap) < 1e-12);
                }
            }
        }
    }
}
