//! Numerical toolkit for the thermodynamic formalism of rational maps on
//! the Riemann sphere: weighted transfer operators, scaling ratios and
//! eigenfunctions, conformal and equilibrium measures, pressure and its
//! derivative, entropy/Lyapunov/dimension estimates, mixing diagnostics,
//! and weighted periodic-point measures — with independent oracles for
//! everything analytically checkable.

pub mod config;
pub mod dictionary;
pub mod error;
pub mod measures;
pub mod oracles;
pub mod periodic;
pub mod pipeline;
pub mod rational;
pub mod roots;
pub mod sphere;
pub mod thermo;
pub mod transfer;
pub mod weights;

pub use error::{Error, Result};
pub use rational::{PreimageSet, RationalMap};
pub use sphere::{EvaluationSet, GridKind, SpherePoint};
pub use weights::Weight;
