//! Asymmetric lemon billiards.

// Negated float comparisons are how NaN inputs are rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod billiard_map;
pub mod cfrac;
pub mod cli;
pub mod exec;
pub mod geometry;
pub mod hyperbolicity;
pub mod induced_maps;
pub mod output;
pub mod sampling;
