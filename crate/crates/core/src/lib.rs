//! Islandable two-machine microgrid simulator with a pluggable secondary
//! control layer: an emotional-learning (BELBIC) controller, PID and online
//! neural-network baselines, and a null controller. The harness runs
//! scenarios, computes tracking metrics, sweeps plant parameters and tunes
//! controller gains.

pub mod belbic;
pub mod cli;
pub mod config;
pub mod controllers;
pub mod harness;
pub mod plant;
pub mod signals;
