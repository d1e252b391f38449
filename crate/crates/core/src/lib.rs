//! Desk-scale laboratory for stable 2-colorings of pairs.
//!
//! Every object lives below an explicit finite horizon and every
//! predicate is decided exactly by enumeration.

pub mod coding;
pub mod coloring;
pub mod forcing;
pub mod functional;
pub mod reduction;
pub mod runner;
pub mod tree;
