#![allow(clippy::needless_range_loop)]

pub mod algebroid;
pub mod catalog;
pub mod cli;
pub mod dynamics;
pub mod cochain;
pub mod expr;
pub mod homotopy;
pub mod lagrangian;
pub mod linalg;
pub mod model;
pub mod report;
pub mod poisson;
pub mod prolongation;
pub mod twoform;
