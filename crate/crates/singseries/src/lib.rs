//! Singular series of prime offset tuples, with rigorous error intervals.
//!
//! The library evaluates the Euler product
//!
//! ```text
//! S(H) = prod_p (1 - nu_p/p) * (1 - 1/p)^(-k)
//! ```
//!
//! attached to a set H of k distinct offsets, where nu_p counts the residue
//! classes occupied by H mod p. Around that evaluator it builds:
//!
//! - a three-way decomposition of the ratio S(H + {h}) / S(H) by prime size
//!   and divisibility of the difference product,
//! - neighbor averages of that ratio over h in [1, H], with exact
//!   period-average verification in rational arithmetic,
//! - normalized means of S over all k-subsets of an interval,
//! - a CSV schema for convergence scans.
//!
//! Every truncated product carries an explicit multiplicative tail bound, so
//! results are intervals guaranteed to trap the true value, not bare floats.

pub mod averaging;
pub mod decomposition;
pub mod error;
mod kahan;
pub mod primes;
pub mod report;
pub mod singular;
pub mod tuples;

pub use error::{Error, Result};
pub use primes::PrimeTable;
pub use singular::SeriesValue;
pub use tuples::{generate_admissible, GenerateStrategy, HTuple};
