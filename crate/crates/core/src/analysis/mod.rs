//! Monte Carlo tracking experiments and the mean-square bound.
//!
//! An [`Experiment`] fixes one random network and one parameter process.
//! Each track draws `Theta_0` from the stationary law, warm starts the agents
//! on it and then performs exactly one ADMM round per parameter change while
//! the oracle records the deviation from the moving optimum.

mod bounds;
mod decay;
pub mod report;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::engine::{warm_start_against, Engine, LocalSolvers};
use crate::error::{Error, Result};
use crate::graph::{arc_matrices, generate_random_graph, laplacian_spectrum, ArcMatrices, Graph, GraphSpectrum};
use crate::linalg::dist_sq;
use crate::oracle::{check_lemma1, g_deviation_sq, u_deviation_sq, ContractionParams, ContractionQuantities, Lemma1Check, Oracle};
use crate::process::{Ar1Process, ParameterProcess};

pub use bounds::{bound_b1, bound_b2, plateau_check, theorem1_rhs, BoundParams, BoundReport, PlateauCheck};
pub use decay::{estimate_decay, estimate_decay_with, fit_decay, DecayFit, ProcessQSource, QSource, WindowStat};

/// SplitMix64 finaliser; derives the seed of track `index` from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-step record of one track, steps `k = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub seed: u64,
    pub warm_start_iters: u64,
    pub warm_start_distance: f64,
    /// `|u(k) - u*(Theta_k)|_G^2`.
    pub mse_u_g: Vec<f64>,
    /// `|u(k) - u*(Theta_k)|^2`.
    pub mse_u: Vec<f64>,
    /// `|x(k) - x*(Theta_k)|^2`.
    pub mse_primal: Vec<f64>,
    /// `|alpha(k) - alpha*(Theta_k)|^2`.
    pub mse_dual: Vec<f64>,
    pub q: Vec<f64>,
    pub g: Vec<f64>,
    pub delta: Vec<f64>,
    pub dx_star: Vec<f64>,
    pub dgrad_star: Vec<f64>,
    /// `|x*(Theta_k) - x*(Theta_{k-1})|^4`.
    pub dx4: Vec<f64>,
    /// `|lambda*(Theta_k) - lambda*(Theta_{k-1})|^4`.
    pub dl4: Vec<f64>,
    pub lemma1: Vec<Lemma1Check>,
}

impl TrackRecord {
    fn with_capacity(seed: u64, t: usize) -> Self {
        let v = || Vec::with_capacity(t);
        Self {
            seed,
            warm_start_iters: 0,
            warm_start_distance: 0.0,
            mse_u_g: v(),
            mse_u: v(),
            mse_primal: v(),
            mse_dual: v(),
            q: v(),
            g: v(),
            delta: v(),
            dx_star: v(),
            dgrad_star: v(),
            dx4: v(),
            dl4: v(),
            lemma1: Vec::with_capacity(t),
        }
    }

    pub fn len(&self) -> usize {
        self.mse_u_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mse_u_g.is_empty()
    }

    pub fn lemma1_violations(&self) -> usize {
        self.lemma1.iter().filter(|c| !c.passed).count()
    }

    fn push(&mut self, cq: &ContractionQuantities, dl: f64, errs: [f64; 4], chk: Lemma1Check) {
        let [ug, u, x, a] = errs;
        self.mse_u_g.push(ug);
        self.mse_u.push(u);
        self.mse_primal.push(x);
        self.mse_dual.push(a);
        self.q.push(cq.q);
        self.g.push(cq.g);
        self.delta.push(cq.delta);
        self.dx_star.push(cq.dx_star);
        self.dgrad_star.push(cq.dgrad_star);
        self.dx4.push(cq.dx_star.powi(4));
        self.dl4.push(dl.powi(4));
        self.lemma1.push(chk);
    }
}

/// One network plus one parameter process, shared by all tracks.
#[derive(Debug, Clone)]
pub struct Experiment {
    cfg: SimConfig,
    graph: Graph,
    spectrum: GraphSpectrum,
    arcs: ArcMatrices,
    oracle: Oracle,
    params: ContractionParams,
    process: Ar1Process,
}

impl Experiment {
    /// Draws the network from `cfg.seed` and prepares the oracle.
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let graph = generate_random_graph(cfg.n_nodes, cfg.edge_prob, cfg.seed)?;
        Self::with_graph(cfg, graph)
    }

    /// As [`Experiment::new`] on a given network.
    pub fn with_graph(cfg: &SimConfig, graph: Graph) -> Result<Self> {
        cfg.validate()?;
        if graph.n_nodes() != cfg.n_nodes {
            return Err(Error::InvalidArgument(format!(
                "graph has {} nodes, configuration asks for {}",
                graph.n_nodes(),
                cfg.n_nodes
            )));
        }
        let spectrum = laplacian_spectrum(&graph, cfg.gamma_l_convention)?;
        let arcs = arc_matrices(&graph, cfg.dim_p)?;
        let oracle = Oracle::new(&arcs, &spectrum).with_mu_tol(cfg.mu_tol);
        let params = ContractionParams::new(cfg.rho, cfg.phi, &spectrum)?;
        let process = Ar1Process::new(cfg.process_config())?;
        Ok(Self {
            cfg: cfg.clone(),
            graph,
            spectrum,
            arcs,
            oracle,
            params,
            process,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn spectrum(&self) -> &GraphSpectrum {
        &self.spectrum
    }

    pub fn arcs(&self) -> &ArcMatrices {
        &self.arcs
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    pub fn contraction_params(&self) -> &ContractionParams {
        &self.params
    }

    pub fn process(&self) -> &Ar1Process {
        &self.process
    }

    /// Constants entering the bound polynomials.
    pub fn bound_params(&self) -> BoundParams {
        BoundParams {
            rho: self.cfg.rho,
            m: self.arcs.m_arcs() as f64,
            n: self.cfg.n_nodes as f64,
            gamma_l: self.spectrum.gamma_l,
        }
    }

    /// Seed of track `index`.
    pub fn track_seed(&self, index: usize) -> u64 {
        derive_seed(self.cfg.seed, index as u64)
    }

    /// Runs one track of `cfg.track_len` steps. Deterministic in `seed`.
    pub fn run_track(&self, seed: u64) -> Result<TrackRecord> {
        self.run_track_inner(seed, |_| {}).map_err(|e| Error::Track {
            seed,
            source: Box::new(e),
        })
    }

    /// As [`Experiment::run_track`], handing each post-round state to `visit`
    /// (the warm-started state first).
    pub fn run_track_visiting(&self, seed: u64, visit: impl FnMut(&crate::engine::AdmmState)) -> Result<TrackRecord> {
        self.run_track_inner(seed, visit).map_err(|e| Error::Track {
            seed,
            source: Box::new(e),
        })
    }

    fn run_track_inner(&self, seed: u64, mut visit: impl FnMut(&crate::engine::AdmmState)) -> Result<TrackRecord> {
        let cfg = &self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = self.process.initial(&mut rng);
        let mut opt = self.oracle.solve(&theta)?;
        let ws = warm_start_against(
            &theta,
            &opt,
            &self.arcs,
            cfg.rho,
            cfg.warm_start_eps,
            cfg.warm_start_max_iters,
        )?;
        let mut rec = TrackRecord::with_capacity(seed, cfg.track_len);
        rec.warm_start_iters = ws.iterations;
        rec.warm_start_distance = ws.distance;
        let mut state = ws.state;
        visit(&state);
        let mut engine = Engine::new(&self.arcs);
        for _ in 0..cfg.track_len {
            let next_theta = self.process.advance(&theta, &mut rng);
            let solvers = LocalSolvers::new(&next_theta, &self.arcs, cfg.rho)?;
            let next = engine.round(&state, &solvers);
            if !next.is_finite() {
                return Err(Error::LinearSolve(format!("non-finite iterate at k = {}", next.k)));
            }
            let next_opt = self.oracle.solve(&next_theta)?;
            let cq = self.oracle.contraction(&next_opt, &opt, &self.params)?;
            let chk = check_lemma1(&state, &next, &opt, &next_opt, &cq);
            let dl = (2.0 * dist_sq(next_opt.alpha_star.as_slice(), opt.alpha_star.as_slice())).sqrt();
            let errs = [
                g_deviation_sq(&next, &next_opt),
                u_deviation_sq(&next, &next_opt),
                dist_sq(next.x.as_slice(), next_opt.x_star.as_slice()),
                dist_sq(next.alpha.as_slice(), next_opt.alpha_star.as_slice()),
            ];
            rec.push(&cq, dl, errs, chk);
            visit(&next);
            state = next;
            theta = next_theta;
            opt = next_opt;
        }
        Ok(rec)
    }

    /// Runs `num_tracks` tracks in parallel; results keep track order.
    pub fn run_tracks(&self, num_tracks: usize) -> Result<Vec<TrackRecord>> {
        (0..num_tracks)
            .into_par_iter()
            .map(|t| self.run_track(self.track_seed(t)))
            .collect()
    }

    /// Full Monte Carlo study with `cfg.num_tracks` tracks.
    pub fn monte_carlo(&self) -> Result<MonteCarlo> {
        MonteCarlo::from_records(self.run_tracks(self.cfg.num_tracks)?)
    }
}

/// One track under `cfg`; see [`Experiment::run_track`].
pub fn run_track(cfg: &SimConfig, seed: u64) -> Result<TrackRecord> {
    Experiment::new(cfg)?.run_track(seed)
}

/// Monte Carlo study under `cfg`; see [`Experiment::monte_carlo`].
pub fn monte_carlo(cfg: &SimConfig) -> Result<MonteCarlo> {
    Experiment::new(cfg)?.monte_carlo()
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSem {
    pub mean: f64,
    pub sem: f64,
}

impl MeanSem {
    /// Sample mean and `s / sqrt(N)`; summation runs in index order.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        if v.is_empty() {
            return Self { mean: f64::NAN, sem: f64::NAN };
        }
        let mean = v.iter().sum::<f64>() / n;
        if v.len() < 2 {
            return Self { mean, sem: f64::NAN };
        }
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            sem: (var / n).sqrt(),
        }
    }
}

/// Across-track mean curves, indexed by step `k = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurves {
    pub primal: Vec<MeanSem>,
    pub dual: Vec<MeanSem>,
    pub u_g: Vec<MeanSem>,
    pub u: Vec<MeanSem>,
}

impl MeanCurves {
    fn from_records(records: &[TrackRecord]) -> Self {
        let t = records[0].len();
        let curve = |f: fn(&TrackRecord) -> &Vec<f64>| -> Vec<MeanSem> {
            (0..t).map(|k| MeanSem::of(records.iter().map(|r| f(r)[k]))).collect()
        };
        Self {
            primal: curve(|r| &r.mse_primal),
            dual: curve(|r| &r.mse_dual),
            u_g: curve(|r| &r.mse_u_g),
            u: curve(|r| &r.mse_u),
        }
    }

    pub fn len(&self) -> usize {
        self.u_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_g.is_empty()
    }

    pub fn u_g_means(&self) -> Vec<f64> {
        self.u_g.iter().map(|m| m.mean).collect()
    }
}

/// Empirical fourth moments of the optimum increments, pooled over every
/// step of every track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimates {
    pub b_x4_hat: f64,
    pub b_lambda4_hat: f64,
    /// Standard error from the spread of per-track means.
    pub b_x4_sem: f64,
    pub b_lambda4_sem: f64,
    /// `b_x4_hat^(1/4)`.
    pub b_x: f64,
    pub b_lambda: f64,
    pub samples: usize,
    pub tracks: usize,
}

impl MomentEstimates {
    pub fn from_records(records: &[TrackRecord]) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::InvalidArgument("moment estimates need at least 2 tracks".into()));
        }
        let per_track = |f: fn(&TrackRecord) -> &Vec<f64>| {
            MeanSem::of(records.iter().map(|r| {
                let v = f(r);
                v.iter().sum::<f64>() / v.len() as f64
            }))
        };
        let x = per_track(|r| &r.dx4);
        let l = per_track(|r| &r.dl4);
        Ok(Self {
            b_x4_hat: x.mean,
            b_lambda4_hat: l.mean,
            b_x4_sem: x.sem,
            b_lambda4_sem: l.sem,
            b_x: x.mean.powf(0.25),
            b_lambda: l.mean.powf(0.25),
            samples: records.iter().map(TrackRecord::len).sum(),
            tracks: records.len(),
        })
    }

    /// Largest of the two relative standard errors.
    pub fn max_relative_sem(&self) -> f64 {
        (self.b_x4_sem / self.b_x4_hat).max(self.b_lambda4_sem / self.b_lambda4_hat)
    }
}

/// Result of [`monte_carlo`].
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    pub curves: MeanCurves,
    pub moments: MomentEstimates,
    pub records: Vec<TrackRecord>,
}

impl MonteCarlo {
    pub fn from_records(records: Vec<TrackRecord>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::InvalidArgument("Monte Carlo needs at least 2 tracks".into()));
        }
        let t = records[0].len();
        if t == 0 || records.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidArgument("tracks must share a positive length".into()));
        }
        Ok(Self {
            curves: MeanCurves::from_records(&records),
            moments: MomentEstimates::from_records(&records)?,
            records,
        })
    }

    pub fn lemma1_violations(&self) -> usize {
        self.records.iter().map(TrackRecord::lemma1_violations).sum()
    }

    /// Smallest relative slack `(rhs - lhs) / (1 + rhs)` over all steps.
    pub fn min_lemma1_relative_slack(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| r.lemma1.iter())
            .map(|c| c.slack / (1.0 + c.rhs))
            .fold(f64::INFINITY, f64::min)
    }
}
