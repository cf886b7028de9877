//! Independent reference implementations used by the test suites.
//!
//! Nothing here shares code with the `predmult` solver path: the LP oracle is
//! a textbook two-phase tableau simplex, the classification oracle enumerates
//! linear dichotomies of the binary cube, and the MPS reader is a strict
//! fixed-column parser.

pub mod arrangement;
pub mod mps;
pub mod tableau;
