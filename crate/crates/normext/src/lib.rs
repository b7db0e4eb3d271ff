//! Spectral analysis of block-diagonal first-order differential operators
//! `u ↦ u' + Au` on disjoint intervals, with the endpoint coupling
//! `u(b) = W u(a)` for a unitary `W` commuting with the Hermitian
//! coefficient `A`.
//!
//! The library evaluates the closed-form point spectrum of each block and
//! of the assembled direct sum, tests Schatten-class membership of the
//! inverse through singular-value series with certified tail bounds, and
//! verifies everything against independent numerical oracles:
//! characteristic-equation residuals, finite-difference discretizations,
//! and quadrature checks of the normality identities.
//!
//! Module map:
//!
//! * [`hilbert`] — dense complex linear algebra, blocks, instances;
//! * [`extension`] — hypothesis validation and the joint eigenbasis;
//! * [`spectrum`] — the closed-form eigenvalue enumeration;
//! * [`schatten`] — singular values, membership verdicts, resolvent checks;
//! * [`oracle`] — the independent verification routes;
//! * [`instance`] — the versioned instance-file format;
//! * [`report`] — deterministic report payloads and emitters;
//! * [`tol`] — the one table of numeric tolerances.

pub mod extension;
pub mod hilbert;
pub mod instance;
pub mod oracle;
pub mod report;
pub mod schatten;
pub mod spectrum;
pub mod tol;

pub use hilbert::{Block, ComplexMatrix, Instance, Interval};
pub use tol::Tolerances;
