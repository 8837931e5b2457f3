//! Numerical realization of the adiabatic-groupoid pseudodifferential
//! calculus on the pair groupoid of ℝ.

pub mod algebra;
pub mod corpus;
pub mod dnc;
pub mod error;
pub mod family;
pub mod grid;
pub mod io;
pub mod module;
pub mod numeric;
pub mod operator;
pub mod profile;
pub mod quantization;
pub mod realize;
pub mod scenario;
pub mod schwartz;

pub use num_complex::Complex64 as C64;
