//! Flat unitary connections on closed surfaces: representation varieties of
//! surface groups, lattice Yang-Mills flow and holonomy, Harder-Narasimhan
//! strata of the Yang-Mills functional, and the deformation K-theory tables
//! these feed into.

pub mod error;
pub mod flow;
pub mod hn_strata;
pub mod kcalc;
pub mod lattice;
pub mod presentation;
pub mod rep_variety;
pub mod unitary;

pub use error::{Error, Result};
pub use flow::{FlowOptions, FlowReport};
pub use hn_strata::HnType;
pub use kcalc::FgAbelianGroup;
pub use lattice::{GaugeTransform, LatticeConnection, SurfaceComplex};
pub use presentation::{Letter, SurfaceKind, SurfacePresentation, Word};
pub use rep_variety::{RepPath, Representation};
pub use unitary::{Unitary, C64, CMatrix};
