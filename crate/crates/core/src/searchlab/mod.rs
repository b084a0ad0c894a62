//! Ground-truth oracles for graph-search exercises.
//!
//! An exercise gives a directed graph with edge costs and node heuristics,
//! a start node that counts as already expanded, and asks for the next few
//! expanded nodes under DFS, BFS, uniform-cost, greedy best-first or A*
//! search with alphabetical tie-breaking. [`run_search`] computes the model
//! answer, [`run_variant`] reproduces typical misapplications of the
//! algorithms, and [`classify_answer`] maps a student's node sequence onto
//! answer classes.

mod classify;
mod graph;
mod search;

pub use classify::{
    classify_answer, default_bindings, parse_answer, Detector, DetectorBinding, DetectorParseError,
};
pub use graph::{Edge, Graph, GraphDoc, GraphError, NodeDoc, NodeId};
pub use search::{
    run_search, run_variant, Algorithm, SearchError, SearchRun, SearchTask, TieBreak, Variant,
};
