//! Shared fixtures for the criterion benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tvadmm_core::graph::{arc_matrices, generate_random_graph, laplacian_spectrum};
use tvadmm_core::{AdmmState, ArcMatrices, GammaConvention, GraphSpectrum, ParameterProcess, ParameterState, SimConfig};
use tvadmm_core::{Ar1Process, Oracle};

/// Network, spectrum, two consecutive parameter draws and a zero iterate.
pub struct Fixture {
    pub arcs: ArcMatrices,
    pub spectrum: GraphSpectrum,
    pub oracle: Oracle,
    pub theta: ParameterState,
    pub theta_next: ParameterState,
    pub state: AdmmState,
    pub rho: f64,
}

pub fn fixture(n_nodes: usize, p: usize) -> Fixture {
    let cfg = SimConfig {
        n_nodes,
        dim_p: p,
        rows_per_node: p,
        ..SimConfig::default()
    };
    let graph = generate_random_graph(n_nodes, cfg.edge_prob, cfg.seed).expect("graph");
    let spectrum = laplacian_spectrum(&graph, GammaConvention::SecondLargest).expect("spectrum");
    let arcs = arc_matrices(&graph, p).expect("arcs");
    let oracle = Oracle::new(&arcs, &spectrum);
    let process = Ar1Process::new(cfg.process_config()).expect("process");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let theta = process.initial(&mut rng);
    let theta_next = process.advance(&theta, &mut rng);
    let state = AdmmState::zeros(&arcs, cfg.rho).expect("state");
    Fixture {
        arcs,
        spectrum,
        oracle,
        theta,
        theta_next,
        state,
        rho: cfg.rho,
    }
}
