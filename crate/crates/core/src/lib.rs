//! Pareto optimality certification for vector quadratic fractional programs.
//!
//! An instance minimizes the ratios `f_i(x)/g_i(x)` of quadratics over a
//! convex set `S = {x : h_j(x) <= 0}`. The crate recovers KKT multipliers,
//! checks sufficient conditions for Pareto optimality, searches for Pareto
//! points through weighted scalarization, verifies Mond–Weir duality
//! statements at given points, and cross-checks everything against a
//! brute-force dominance oracle.
//!
//! ```
//! use vqfp::{io, Vector, Tolerances};
//!
//! let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/paper_example.json")).unwrap();
//! let p = io::parse_instance(&text, &Tolerances::default()).unwrap();
//! let r = p.evaluate_ratios(&Vector::from_element(1, 0.0)).unwrap();
//! assert_eq!(r.as_slice(), &[-1.0, -1.0, -5.0]);
//! ```

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments,
    clippy::needless_range_loop,
    clippy::large_enum_variant,
    clippy::field_reassign_with_default
)]

pub mod certify;
pub mod config;
pub mod duality;
pub mod error;
pub mod io;
pub mod kkt;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod quadmin;
pub mod scalarize;
mod ser;
pub mod spectral;

pub use config::{Route, RunConfig, Tolerances};
pub use error::{Error, Invariant, Location, Result};
pub use model::{Constraint, Matrix, ProblemInstance, QuadraticFunction, RatioObjective, Vector};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/multipliers.md")]
    mod multipliers {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/scalarization.md")]
    mod scalarization {}
    #[doc = include_str!("../../../book/src/duality.md")]
    mod duality {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/tolerances.md")]
    mod tolerances {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
