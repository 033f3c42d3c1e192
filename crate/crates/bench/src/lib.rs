//! Deterministic inputs for the benchmarks.

use capweave_core::gen::{random_graph, random_project, GraphShape};
use capweave_core::{FdGraph, Project};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape(max_internal: usize) -> GraphShape {
    GraphShape {
        max_internal,
        max_fanout: 4,
        refinement_rate: 0.2,
        intersections: max_internal / 3,
    }
}

/// Random graph with at most `max_internal` functional nodes.
pub fn sized_graph(seed: u64, max_internal: usize) -> FdGraph {
    random_graph(&mut ChaCha8Rng::seed_from_u64(seed), &shape(max_internal))
}

pub fn sized_project(seed: u64, max_internal: usize) -> Project {
    random_project(&mut ChaCha8Rng::seed_from_u64(seed), &shape(max_internal))
}
