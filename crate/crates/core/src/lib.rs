//! Coherent intertwiner states for the non-compact group SO*(2N).
//!
//! An SU(2) intertwiner with N legs is the quantum state of an N-faced
//! polyhedron. This crate realizes the full observable algebra so*(2N) on
//! that space and provides
//!
//! * validation and canonical decomposition of the antisymmetric matrices
//!   that label the coherent states ([`antisym`]),
//! * a block-matrix realization of SO*(2N) with Möbius action, UDL
//!   factorization and the Sp(4N,R) embedding ([`group`]),
//! * closed forms for normalizations, overlaps, generator matrix elements
//!   and area statistics ([`analytics`]),
//! * the U(N) fixed-total-area layer ([`un`]),
//! * semiclassical spinor families, face normals, symmetry sampling and the
//!   coarse-graining no-go defect ([`semiclassical`]),
//! * an independent truncated Fock-space oracle used to cross-check every
//!   closed form ([`fock`]).
//!
//! All public values are plain data; every operation is a pure function of
//! its inputs and safe to call from multiple threads.

pub mod analytics;
pub mod antisym;
pub mod error;
pub mod fock;
pub mod group;
pub mod io;
pub mod linalg;
pub mod semiclassical;
pub mod un;

pub use error::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
