//! Test support for the SpaceRace crates: proptest generators over the whole
//! domain, answer oracles written independently of the grader, a randomized
//! engine driver with invariant checks, and the answer-hiding key scanner.

pub mod driver;
pub mod gen;
pub mod oracle;
pub mod scan;
pub mod suites;
