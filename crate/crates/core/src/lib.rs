//! Mixed-path Hamilton's-principle laboratory: lattice paths, discrete
//! actions, the stationary path-weight game, amplitudes and propagators,
//! reference kernels, and a small Grassmann algebra.

pub mod action;
pub mod amplitude;
pub mod cli;
pub mod game;
pub mod grassmann;
pub mod lattice;
pub mod reference;
pub mod summation;
