//! Stochastic ordering, attractiveness and order-preserving couplings for
//! interacting particle systems with arrivals, departures and
//! non-conservative migrations.
//!
//! The decision procedure reduces the site-wise comparability conditions to
//! exact-rational network-flow feasibility; the same flows constructively
//! yield a coupled generator whose marginals are the two processes and
//! which keeps ordered pairs ordered. Validators, a model zoo, and a
//! continuous-time simulator round out the toolkit.

pub mod change;
pub mod changesets;
pub mod comparability;
pub mod config;
pub mod coupling;
pub mod fixtures;
pub mod lattice;
pub mod model;
pub mod models;
pub mod netflow;
pub mod rat;
pub mod sim;
