//! Numerical toolkit for theta-function embeddings of principally polarized
//! abelian varieties X = ℂⁿ/(Ωℤⁿ + ℤⁿ).

pub mod abelian;
pub mod amoeba;
pub mod error;
pub mod gh;
pub mod graph;
pub mod harness;
pub mod heisenberg;
pub mod kahler;
pub mod mirror;
pub mod numeric;
pub mod par;
pub mod quantization;
pub mod theta;

pub use abelian::{BaseMetric, RiemannMatrix, TorusPoint};
pub use error::{Error, Result};
pub use numeric::{GaugeValue, C64};
pub use theta::{FkMode, ThetaBasis};
