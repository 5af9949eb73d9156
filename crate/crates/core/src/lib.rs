//! Image schemas as small spatio-temporal theories over exact geometry.
//!
//! Scenarios are sequences of states, each assigning exact rational
//! parameters to shaped entities. Theories are sets of finite-trace temporal
//! formulas over geometric relations. The crate evaluates theories on
//! traces, simulates rule-driven dynamics, classifies traces against a
//! library of schemas and enumerates grid models of a theory.

pub mod dsl;
pub mod dynamics;
pub mod enumerate;
pub mod exec;
pub mod geometry;
pub mod library;
pub mod logic;
pub mod model;
pub mod rational;
pub mod span;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use exec::Execution;
pub use geometry::Tolerances;
pub use rational::{Num, Rational};
