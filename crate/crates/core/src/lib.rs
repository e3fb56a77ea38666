//! Preventive-maintenance planning for a farm of single-component units.

pub mod costs;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod planner;
pub mod survival;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/survival.md")]
    mod survival {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/costs.md")]
    mod costs {}
    #[doc = include_str!("../../../book/src/planner.md")]
    mod planner {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
