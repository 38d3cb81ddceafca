//! Floquet operators of rank-1 kicked quantum maps, their quasienergy
//! spectral flow, and the level permutation produced by a closed cycle of
//! the kick strength.

pub mod adiabatic;
pub mod error;
pub mod floquet;
pub mod flow;
pub mod numeric;
pub mod structure;

pub use error::{Error, Result};
pub use floquet::{FloquetFamily, KickedModel, Perturbation, Rank1Perturbation};
pub use flow::{SpectralFlow, SweepOptions};
pub use numeric::{HermitianOperator, UnitaryOperator};
