//! Quantum dynamical semigroup generators in generalized standard form.
//!
//! A generator is stored as a [`SuperOperator`] acting on column-major
//! vectorized `d × d` matrices, or as a [`StandardForm`] `(M, {L_j})` with
//! `𝓛(ρ) = Σ_j L_j ρ L_j† − Mρ − ρM†`. The [`decompose`] module recovers a
//! standard form from a generator; [`evolve`] integrates `dρ/dt = 𝓛(ρ)`;
//! [`models`] builds lattice models with an absorbing sink state.

pub mod decompose;
pub mod error;
pub mod evolve;
pub mod linalg;
pub mod models;
pub mod random;
pub mod stdform;
pub mod superop;

pub use decompose::{decompose_generator, decompose_generator_at, KrausSet};
pub use error::{QdsError, Result};
pub use evolve::{trajectory, trajectory_with, FormPropagator, SuperPropagator, Trajectory};
pub use linalg::{CMatrix, Tolerances, C64};
pub use stdform::StandardForm;
pub use superop::{ChoiMatrix, SuperOperator};
