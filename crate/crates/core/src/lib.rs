//! Privacy-preserving coordination of a gas-aware unit commitment (leader)
//! with sequential electricity and gas market clearings (followers).
//!
//! The sensitive input is the nodal gas demand vector. It is obfuscated with
//! the Laplace mechanism, and the noisy release is then projected onto demands
//! whose gas-market objective and prices stay within fidelity bands of
//! forecasts, by solving a bilevel program reformulated with KKT conditions
//! and big-M complementarity as a mixed-binary convex QP.

pub mod experiments;
pub mod fidelity;
pub mod lp;
pub mod markets;
pub mod mechanism;
pub mod predictors;
pub mod privacy;
pub mod rng;
pub mod textio;
