//! Steady-state analysis of single-server loss systems coupled to a finite
//! random environment.
//!
//! The environment blocks service and rejects arrivals while it sits in a
//! designated subset of its states; departures kick it through a stochastic
//! jump matrix, and it also moves autonomously through a generator. The
//! crate decides when the joint queue/environment law factorizes into a
//! level term and an environment term, both in continuous time and for the
//! chain embedded at departures, evaluates the closed-form application
//! models, optimizes a maintenance threshold, and cross-checks everything
//! against a truncated direct solver and an event-driven simulator.

// index arithmetic carries the meaning in the matrix and level recursions
#![allow(clippy::needless_range_loop)]

pub mod ct;
pub mod embedded;
pub mod env;
pub mod mg1;
pub mod models;
pub mod numerics;
pub mod sim;

pub use env::{Capacity, EnvironmentSpec, ModelSpec, QueueSpec};
