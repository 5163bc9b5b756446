//! Test-vector generation and fault simulation for fully programmable valve
//! arrays (FPVAs).
//!
//! An FPVA is a grid of fluid cells whose shared walls hold micro-valves.
//! Testing such a chip means driving fluid from source ports to sink ports
//! through chosen valve configurations and watching which sinks see pressure.
//! This crate generates two complementary families of test vectors:
//!
//! * **flow paths** — configurations that open exactly the valves along a
//!   simple source→sink path; a stuck-closed valve on the path kills the
//!   expected pressure signal;
//! * **cut sets** — configurations that close exactly the valves of a
//!   source/sink separator; a stuck-open valve in the cut leaks pressure to
//!   the sink that should have stayed dry.
//!
//! Both families are produced by exact integer programming over an
//! edge-based chip model, with greedy warm starts so that realistic array
//! sizes solve quickly and deterministically. A fault simulator replays the
//! vectors against injected stuck-at faults, and a hierarchical planner
//! scales path generation to large arrays by solving block subproblems and
//! stitching them along pinned boundary crossings.

pub mod chip;
pub mod cli;
pub mod cuts;
pub mod faultsim;
pub mod flow;
pub mod hierarchy;
pub mod ilp;
pub mod render;
pub mod vectors;
