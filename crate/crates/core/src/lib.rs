//! Simulation, graph learning, and judging for the four-player "Find The Spy"
//! game.

pub mod agents;
pub mod digest;
pub mod eval;
pub mod game;
pub mod gnn;
pub mod graph;
pub mod judge;
pub mod pipeline;
pub mod rng;
pub mod sim;
