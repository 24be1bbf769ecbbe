//! Exact discrete-state generative diffusion.
//!
//! The forward corruption is a continuous-time Markov chain acting
//! independently on every component of a state vector in `{0..=M}^N`. The
//! flagship process is the pure-death ("blackout") chain `m -> m-1` at rate
//! `m`, whose forward law, reverse-time rates and finite-time bridge are all
//! binomial. Arbitrary generators are supported through [`ctmc`], which
//! provides uniformization, exact simulation, reverse rates and discrete
//! scores for any rate matrix.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the
//! validation suites and the command-line tool live in the `blackout` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;
pub mod math;
pub mod matrix;
pub mod rng;
pub mod sampling;
pub mod space;

pub mod ctmc;
pub mod eval;
pub mod loss;
pub mod oracle;
pub mod pipeline;
pub mod predictor;
pub mod pure_death;
pub mod reverse;
pub mod schedule;

pub use error::{Error, Result};
pub use space::StateSpace;
