//! Fragment-level rigid-body diffusion on SE(3)^m for ligand docking.
//!
//! The crate is organised bottom-up:
//!
//! - [`liegroup`]: SO(3)/SE(3) primitives.
//! - [`igso3`]: isotropic Gaussian on SO(3), cached density/CDF/score tables.
//! - [`molio`]: V2000 parsing, ring and torsion perception, JSON envelopes.
//! - [`fragment`]: rigid fragmentation with merge enumeration and the pose map.
//! - [`diffusion`]: forward kernels, conditional scores, the weighted loss.
//! - [`scorehead`]: force-to-score head, score-model trait, oracle and toy models.
//! - [`sampler`]: reverse-time integration on a power-law time grid.
//! - [`align`]: Kabsch, RMSD, dihedrals, joint rigid+torsional registration.
//! - [`audit`]: Jacobian/Gram diagnostics, pose checks and ranking.
//! - [`fixtures`]: synthetic molecules used by tests and `verify`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod audit;
pub mod diffusion;
pub mod error;
pub mod fixtures;
pub mod fragment;
pub mod igso3;
pub mod liegroup;
pub mod molio;
pub mod sampler;
pub mod scorehead;

pub use error::{Error, LieError, Result};
pub use liegroup::{Mat3, Rotation, RigidTransform, Vec3};
