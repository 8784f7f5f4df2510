//! Numerical toolkit for weighted nonlinear flags in standard symplectic `R^{2n}`.
//!
//! A weighted flag is a nested sequence of discretized submanifolds (points on
//! a loop, or meridian loops on a torus), each carrying a nowhere-vanishing
//! density. The crate transports flags under Hamiltonian flows, evaluates the
//! moment map `⟨J(flag), f⟩ = Σ ∫ f ν` and the leafwise symplectic form on
//! isodrastic tangents, and classifies the mass and action invariants that
//! label coadjoint orbits of the Hamiltonian group.
//!
//! Conventions used throughout:
//! - coordinates are ordered `(x_1, y_1, ..., x_n, y_n)` and
//!   `ω = Σ dx_i ∧ dy_i`;
//! - Hamiltonian fields satisfy `i_{X_f} ω = df`, i.e. `X_f = (∂f/∂y, -∂f/∂x)`
//!   in each plane;
//! - action integrals use the primitive `θ = ½ Σ (x dy - y dx)`.

pub mod error;
pub mod flag;
pub mod flow;
pub mod homology;
pub mod isodrast;
pub mod moment;
pub mod moser;
pub mod quadrature;
pub mod random;
pub mod scenario;
pub mod suite;
pub mod symplectic;

pub mod cli;

pub use error::{FlagError, Result};
pub use flag::{
    build_flag, component_masses, nesting_residual, resample_loop, DiscreteLoop, DiscreteTorusGrid, FlagDoc,
    FlagLevels, MassSignature, WeightedFlag, WeightedPointSet,
};
pub use flow::{flow_flag, FlowDiagnostics, Scheme};
pub use symplectic::{action_integral, hamiltonian_vf, omega_eval, TestFunction};
