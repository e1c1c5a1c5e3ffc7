//! Numerical toolkit for the critical semilinear problem
//! `-Delta u = lambda u + |u|^{4/(N-2)} u` on the unit ball, with emphasis on
//! `N = 6`: radial solutions, linearised problems, bubbles and the reduced
//! energy of single-bubble constructions.

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bubble;
pub mod continuation;
pub mod error;
pub mod fit;
pub mod linear_aux;
pub mod nonlinear_radial;
pub mod radial_core;
pub mod reduction;
pub mod roots;

pub use error::{Error, Result};
pub use radial_core::{Grading, OperatorSpec, Potential, RadialFn, RadialGrid};
