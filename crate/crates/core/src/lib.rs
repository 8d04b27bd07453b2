//! Construction and certification of zero-energy, negative-virial initial data
//! for the attractive relativistic Vlasov–Poisson system.

// Range checks are written as `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod functionals;
pub mod mollifier;
pub mod profiles;
pub mod quadrature;
pub mod scans;
pub mod solvers;

mod poly;
