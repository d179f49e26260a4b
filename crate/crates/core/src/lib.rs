//! Algebra of planar anisotropic elasticity: symmetric 2x2 matrices, fully
//! symmetric fourth-order tensors in Mandel form, elastic moment tensors for
//! thin strip-like inclusions, and the curve geometry that supports them.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std` feature
//! switches scalar math to the standard library. All types are immutable
//! values and every operation is pure, so everything here is safe to use from
//! concurrent contexts.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod curve;
pub mod domain;
pub mod moment;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod vec2;

mod error;

pub use error::Error;
pub use vec2::Vec2;
