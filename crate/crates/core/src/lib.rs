//! Exact arithmetic for Gross lattices of supersingular points: ternary
//! forms and their genera, class numbers of imaginary quadratic orders,
//! Heegner measures, and the effective-surjectivity search.

pub mod arith;
pub mod binary_qf;
pub mod exec;
pub mod genus;
pub mod measures;
pub mod rational;
pub mod surjectivity;
pub mod ternary_qf;

pub use exec::Execution;
pub use rational::Rational;
