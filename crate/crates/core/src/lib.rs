//! Numerical laboratory for isoperimetric profiles of rotationally symmetric
//! closed 3-manifolds: candidate profiles from coordinate spheres, the
//! adapted Hawking mass and its monotonicity, the rigidity ODE, small-ball
//! volume expansions, constant-mean-curvature competitors, and the pointwise
//! checks that characterise the round `S^3` among metrics with `R >= 6`.

pub mod ball_expansion;
pub mod cli;
pub mod cmc_shooting;
pub mod config;
pub mod error;
pub mod format;
pub mod geodesic_balls;
pub mod hawking;
pub mod numerics;
pub mod tolerances;
pub mod warp_metric;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
