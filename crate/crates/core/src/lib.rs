//! Stabilized nonlocal (peridynamic correspondence) simulator for dynamic
//! analysis of saturated porous media.

pub mod balance;
pub mod cli_io;
pub mod constitutive;
pub mod discretization;
pub mod error;
pub mod model;
pub mod nonlocal_states;
pub mod scenarios;
pub mod solver;
pub mod tensor;
pub mod verify_oracles;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/discretization.md")]
    mod discretization {}
    #[doc = include_str!("../../../book/src/nonlocal-states.md")]
    mod nonlocal_states {}
    #[doc = include_str!("../../../book/src/constitutive.md")]
    mod constitutive {}
    #[doc = include_str!("../../../book/src/balance.md")]
    mod balance {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
