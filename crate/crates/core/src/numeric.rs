use std::f64::consts::PI;

pub use num_complex::Complex64 as C64;

pub const TWO_PI: f64 = 2.0 * PI;

/// e(t) = exp(2πi t).
#[inline]
pub fn e(t: C64) -> C64 {
    (C64::new(0.0, TWO_PI) * t).exp()
}

/// Reduce an angle into (-π, π].
pub fn wrap_phase(t: f64) -> f64 {
    let r = t - TWO_PI * (t / TWO_PI).round();
    if r <= -PI {
        r + TWO_PI
    } else if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

/// Compensated (Kahan–Babuška) complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanC {
    sum: C64,
    comp: C64,
}

impl KahanC {
    pub fn add(&mut self, v: C64) {
        self.sum = C64::new(
            neumaier(self.sum.re, v.re, &mut self.comp.re),
            neumaier(self.sum.im, v.im, &mut self.comp.im),
        );
    }
    pub fn merge(&mut self, other: KahanC) {
        self.add(other.sum);
        self.add(other.comp);
    }
    pub fn value(&self) -> C64 {
        self.sum + self.comp
    }
}

/// Compensated real accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanR {
    sum: f64,
    comp: f64,
}

impl KahanR {
    pub fn add(&mut self, v: f64) {
        self.sum = neumaier(self.sum, v, &mut self.comp);
    }
    pub fn merge(&mut self, other: KahanR) {
        self.add(other.sum);
        self.add(other.comp);
    }
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[inline]
fn neumaier(sum: f64, v: f64, comp: &mut f64) -> f64 {
    let t = sum + v;
    if sum.abs() >= v.abs() {
        *comp += (sum - t) + v;
    } else {
        *comp += (v - t) + sum;
    }
    t
}

/// A complex number stored as (log|w|, arg w). Section values in the
/// unitary gauge are kept in this form so that large lattice sums and
/// Gaussian factors never overflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeValue {
    pub log_mag: f64,
    pub phase: f64,
}

impl GaugeValue {
    pub const ZERO: GaugeValue = GaugeValue {
        log_mag: f64::NEG_INFINITY,
        phase: 0.0,
    };

    pub fn new(log_mag: f64, phase: f64) -> Self {
        GaugeValue {
            log_mag,
            phase: wrap_phase(phase),
        }
    }

    pub fn from_complex(w: C64) -> Self {
        if w == C64::new(0.0, 0.0) {
            return Self::ZERO;
        }
        GaugeValue {
            log_mag: w.norm().ln(),
            phase: w.arg(),
        }
    }

    /// exp(log) for a complex logarithm.
    pub fn from_log(log: C64) -> Self {
        Self::new(log.re, log.im)
    }

    pub fn to_complex(self) -> C64 {
        if self.log_mag == f64::NEG_INFINITY {
            return C64::new(0.0, 0.0);
        }
        C64::from_polar(self.log_mag.exp(), self.phase)
    }

    pub fn norm_sq(self) -> f64 {
        (2.0 * self.log_mag).exp()
    }
}

impl std::ops::Mul for GaugeValue {
    type Output = GaugeValue;
    fn mul(self, other: GaugeValue) -> GaugeValue {
        GaugeValue::new(self.log_mag + other.log_mag, self.phase + other.phase)
    }
}

/// Least-squares fit y ≈ a + b x; returns (slope, intercept, stderr of slope, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        stderr,
        r2,
        points: x.len(),
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    pub points: usize,
}

impl LinearFit {
    /// Two-sided 95% confidence interval for the slope (Student t).
    pub fn slope_ci95(&self) -> (f64, f64) {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        if self.points <= 2 {
            return (self.slope, self.slope);
        }
        let t = StudentsT::new(0.0, 1.0, (self.points - 2) as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(1.96);
        (self.slope - t * self.stderr, self.slope + t * self.stderr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_cancelled_mass() {
        let mut k = KahanR::default();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }

    #[test]
    fn phase_wraps_into_half_open_interval() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(7.0 * PI / 2.0) + PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauge_roundtrip() {
        let w = C64::new(-3.0, 4.0);
        let g = GaugeValue::from_complex(w);
        assert!((g.to_complex() - w).norm() < 1e-14);
        assert!((g.norm_sq() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn fit_exact_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.r2 - 1.0).abs() < 1e-14);
    }
}
