//! Numerical workbench for energy minimization problems: equilibrium
//! measures under external fields, minimal energies on spheres, zonal kernel
//! expansions, snake polynomials, interpolatory quadrature weights, and
//! conditioning of +-1 circulant matrices.

pub mod chromatic;
pub mod circulant;
pub mod equilibrium;
pub mod error;
pub mod frame_torus;
pub mod gegenbauer;
pub mod lp;
pub mod model;
pub mod optim;
pub mod quad_weights;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod snake;
pub mod sphere_asymptotics;

pub use error::{Error, Result};
pub use model::{
    discrete_energy, discrete_gradient, field_eval, kernel_eval, pairwise_distance, Configuration, Domain,
    EnergyMode, FieldSpec, KernelSpec, Metric,
};
