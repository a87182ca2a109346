//! A desk-scale laboratory for multi-intersection traffic signal control:
//! a deterministic grid microsimulator, hybrid-pressure heuristics, pruned
//! PPO agents trained with a blended imitation + reinforcement loss under an
//! expert controller, and a federated server aggregating masked gradients
//! across intersections.

pub mod netmodel;
pub mod simcore;
pub mod pressure;
pub mod tensorlite;
pub mod agent;
pub mod fedserver;
pub mod harness;
