//! Quadrature, ODE stepping and root finding shared by the geometry modules.

pub mod ode;
pub mod quadrature;
pub mod roots;

pub use quadrature::integrate;
