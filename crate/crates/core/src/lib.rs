//! Minimal positive solutions of sublinear potential equations
//! `u = Σ_i G(u^{q_i} dσ_i) + G ω` and numerical checks of the inequalities
//! that govern them.

pub mod conditions;
pub mod energy;
pub mod error;
pub mod estimates;
mod fft;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod lorentz;
pub mod measure;
pub mod oracle;
pub mod potentials;
pub mod problem;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{BoxGrid, GridFunction};
pub use kernels::{KernelSpec, KernelVariant, Normalization};
pub use lorentz::{LorentzPair, StepRearrangement};
pub use measure::{Atom, Measure};
pub use potentials::{PotentialField, Targets};
pub use problem::{ProblemSpec, Term};
