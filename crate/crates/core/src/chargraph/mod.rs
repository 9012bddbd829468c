//! Characteristic graphs and their entropies.

mod coloring;
mod entropy;
pub(crate) mod graph;
mod mis;

pub use coloring::{
    chromatic_entropy, encoder_coloring, greedy_coloring, min_entropy_coloring, Coloring,
    MAX_EXACT_COLORING,
};
pub use entropy::{conditional_graph_entropy, graph_entropy, GraphEntropyResult, SolverOptions};
pub use graph::{
    build_char_graph, or_power, quotient_graph, union_graph, CharGraph, MAX_POWER_EDGES,
    MAX_POWER_VERTICES,
};
pub use mis::{enumerate_mis, MisFamily, MAX_MIS_COUNT, MAX_MIS_VERTICES};
