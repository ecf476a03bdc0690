//! Particle Wasserstein gradient flows: exact optimal transport between
//! uniform empirical measures, generalized geodesics, certified proximal
//! (JKO) steps, discrete and reference flows, and an inequality harness.
//!
//! Numerical modules are generic over [`scalar::Scalar`] (f32, f64). The
//! aliases below fix the scalar for the common cases.

pub mod error;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod measures;
pub mod proximal;
pub mod scalar;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Measure = measures::ParticleMeasure<f64>;
pub type Measure32 = measures::ParticleMeasure<f32>;
pub type Functional = functionals::Functional<f64>;
pub type Functional32 = functionals::Functional<f32>;
pub type Field = functionals::SubdifferentialField<f64>;
pub type Map = transport::TransportMap<f64>;
pub type Plan = geometry::BasedPlan<f64>;
pub type Prox = proximal::ProxResult<f64>;
pub type Trace = flow::FlowTrace<f64>;
pub type Trace32 = flow::FlowTrace<f32>;
