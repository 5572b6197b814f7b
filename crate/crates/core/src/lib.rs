//! Recovery of a discontinuous heat source on the unit disc from sparse,
//! noisy boundary flux measured by two relocatable sensors.
//!
//! The pipeline is:
//!
//! * [`geometry`] maps unconstrained sample vectors to a circle or a
//!   star-shaped source and rasterizes its indicator onto the polar grid.
//! * [`heat`] integrates the heat equation in polar coordinates with
//!   backward Euler and extracts the outward boundary flux.
//! * [`bayes`] samples the source parameters with pCN / adaptive pCN.
//! * [`sensors`] chooses the next sensor pair from a posterior ensemble.
//! * [`assimilation`] runs the observe / sample / restart / relocate loop.
//! * [`config`] and [`output`] hold experiment presets and file formats.

pub mod assimilation;
pub mod bayes;
pub mod config;
pub mod error;
pub mod geometry;
pub mod heat;
pub mod output;
pub mod par;
pub mod rng;
pub mod sensors;

pub use error::{Error, Result};
