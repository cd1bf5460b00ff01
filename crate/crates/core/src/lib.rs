//! Fractional integral operators with composite kernels, commutators with
//! BMO symbols, Orlicz norms, Muckenhoupt weights, and a verification harness
//! for weighted inequalities on uniform grids over R^1 and R^2.

pub mod cli;
pub mod config;
pub mod error;
pub mod young;
pub mod grid;
pub mod kernels;
pub mod matrix;
pub mod maximal;
pub mod operators;
pub mod orlicz;
pub mod rng;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{Annulus, Ball, GridFunction, GridSpec, Point};
pub use matrix::SquareMatrix;
