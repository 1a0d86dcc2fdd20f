//! Approximate and exact support counting for multilinear homogeneous (+,*) programs.
//!
//! The library provides:
//! - a program representation with validation, support enumeration and
//!   derivation-tree machinery (`program`, `support`, `dtree`),
//! - frontends translating context-free grammar slices and smooth DNNF
//!   circuits into programs with invertible decoders (`grammar`, `nnf`),
//! - a depth-reduction pass (`depth`),
//! - the randomized counting engine built on exact symbolic probability
//!   values (`pvalue`, `engine`),
//! - exponential-time oracles and a statistical validation harness
//!   (`oracle`, `stats`, `gen`).

pub mod numeric;
pub mod monomial;
pub mod program;
pub mod support;
pub mod dtree;
pub mod grammar;
pub mod nnf;
pub mod pvalue;
pub mod rng;
pub mod depth;
pub mod engine;
pub mod oracle;
pub mod stats;
pub mod gen;

pub use monomial::{Monomial, VarId};
pub use program::{Node, Program, ValidationReport};
pub use support::{NodeSupport, SupportInfo};
pub use engine::{counter, CountReport, CountRequest, EngineError, Mode, Overrides, Params};
