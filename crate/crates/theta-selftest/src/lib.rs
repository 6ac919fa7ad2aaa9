//! Weighted Lovász theta numbers, their SDP certificates, and constructive
//! self-testing of Bell realizations through exclusivity graphs.

pub mod bell;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod sdp;
pub mod selftest;
pub mod theta;

pub use bell::{
    evaluate_witness, exclusivity_graph, reference_realization, BellScenario, BellWitness, Event, Realization,
    ScenarioName,
};
pub use error::{Error, Result};
pub use graph::{CliqueCover, WeightedGraph};
pub use linalg::SymMatrix;
pub use sdp::{solve_sdp, SdpProblem, SdpSolution, SolverOptions};
pub use selftest::{self_test, verify_selftest_claim, SelfTestReport};
pub use theta::{lovasz_theta, ThetaDualCertificate, UniquenessVerdict};
