//! First-passage percolation on finite boxes of the integer lattice, with the
//! annulus coupling used to study fluctuation lower bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antichain;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod paths;
pub mod percolation;
pub mod rng;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
