//! Implicit Euler discretization and optimality certificates for Bolza
//! problems over differential inclusions with relaxed one-sided Lipschitz
//! right-hand sides.

pub mod bolza;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod expr;
pub mod gendiff;
pub mod implicit;
pub mod linalg;
pub mod par;
pub mod problem;
pub mod reference;
pub mod sets;
pub mod setmap;
pub mod solver;
pub mod kkt;

pub use error::{Error, Result};
