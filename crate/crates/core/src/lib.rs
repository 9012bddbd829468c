//! Distributed computing of functions of structured correlated random
//! variables: characteristic-graph sum rates, closed-form bounds, and an
//! end-to-end coloring simulator.

pub mod chargraph;
pub mod error;
pub mod functions;
pub mod probability;
pub mod rates;
pub mod simulator;
pub mod topology;

pub use chargraph::{
    build_char_graph, chromatic_entropy, conditional_graph_entropy, graph_entropy, or_power,
    union_graph, CharGraph, Coloring, GraphEntropyResult, SolverOptions,
};
pub use error::{Error, Result};
pub use functions::{restrict_to_server, DemandSpec, FieldSpec, ServerView};
pub use probability::{binary_entropy, entropy, DinizModel, JointPmf, Pmf};
pub use rates::{
    chain_rate, gains, prop1_rate, prop2_rate, prop3_rate, slepian_wolf_rate, theorem1_sum_rate,
    GainReport, Method, RateReport, SideInfo,
};
pub use simulator::{
    build_decode_table, build_encoders, run_simulation, DecodeTable, Encoder, SimResult,
};
pub use topology::{
    coverage_check, cyclic_placement, derived_params, DerivedParams, Placement, Topology,
};
