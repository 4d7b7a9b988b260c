//! Edge-based consensus ADMM as message-passing agents.
//!
//! A round at time `k` runs in barrier-separated phases:
//!
//! 1. every node observes `f_i(., theta_k)` and solves its x-subproblem from
//!    local data (its own `H_i`, `y_i` and the `z`/`alpha` blocks of its
//!    incident arcs);
//! 2. nodes exchange `x_i` with their neighbours ([`NodeInbox`]);
//! 3. each arc owner sets `z` to the midpoint of its endpoints and takes the
//!    dual ascent step on `alpha`.
//!
//! Only `alpha` is stored; the full multiplier is `lambda = [alpha; -alpha]`.
//! [`FullLambdaState`] carries the full `lambda` through the generic
//! matrix-form updates so that symmetry can be checked instead of assumed.

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::ArcMatrices;
use crate::oracle::{g_deviation, OptimalPoint, Oracle};
use crate::process::ParameterState;

/// ADMM iterate `(x, z, alpha)` at round `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    /// Stacked node variables, length `n * p`.
    pub x: DVector<f64>,
    /// Stacked arc variables, length `m * p`.
    pub z: DVector<f64>,
    /// Compact multiplier, length `m * p`.
    pub alpha: DVector<f64>,
    pub k: u64,
    pub rho: f64,
}

impl AdmmState {
    /// All-zero iterate, the starting point of the warm start.
    pub fn zeros(arcs: &ArcMatrices, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let (n, m, p) = (arcs.n_nodes(), arcs.m_arcs(), arcs.p());
        Ok(Self {
            x: DVector::zeros(n * p),
            z: DVector::zeros(m * p),
            alpha: DVector::zeros(m * p),
            k: 0,
            rho,
        })
    }

    /// Full multiplier `[alpha; -alpha]`.
    pub fn lambda(&self) -> DVector<f64> {
        let mp = self.alpha.len();
        DVector::from_fn(2 * mp, |r, _| {
            if r < mp {
                self.alpha[r]
            } else {
                -self.alpha[r - mp]
            }
        })
    }

    /// `u = [z; alpha]`.
    pub fn u(&self) -> DVector<f64> {
        let mp = self.z.len();
        DVector::from_fn(2 * mp, |r, _| {
            if r < mp {
                self.z[r]
            } else {
                self.alpha[r - mp]
            }
        })
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.z.iter())
            .chain(self.alpha.iter())
            .all(|v| v.is_finite())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")))
    }
}

/// Neighbour messages held by one node after the exchange phase.
///
/// Slot `s` carries `x_j` from the destination `j` of the node's `s`-th
/// outgoing arc, so every neighbour appears exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInbox {
    pub node: usize,
    pub from: Vec<usize>,
    payload: Vec<f64>,
    p: usize,
}

impl NodeInbox {
    fn empty(node: usize, arcs: &ArcMatrices) -> Self {
        let from: Vec<usize> = arcs.out_arcs(node).iter().map(|&a| arcs.arcs()[a].dst).collect();
        Self {
            node,
            payload: vec![0.0; from.len() * arcs.p()],
            from,
            p: arcs.p(),
        }
    }

    /// Message in slot `s`.
    pub fn slot(&self, s: usize) -> &[f64] {
        &self.payload[s * self.p..(s + 1) * self.p]
    }

    /// Message received from neighbour `j`, if any.
    pub fn from_neighbor(&self, j: usize) -> Option<&[f64]> {
        self.from.iter().position(|&f| f == j).map(|s| self.slot(s))
    }
}

/// Intra-round scheduling of per-node and per-arc work. Results are
/// bit-identical across variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

/// Per-node x-subproblem data for a fixed `theta` and `rho`:
/// `(H_i^T H_i + 2 rho d_i I)^{-1}` and `H_i^T y_i`.
#[derive(Debug, Clone)]
pub struct LocalSolvers {
    inv: Vec<DMatrix<f64>>,
    hty: Vec<DVector<f64>>,
    rho: f64,
}

impl LocalSolvers {
    pub fn new(theta: &ParameterState, arcs: &ArcMatrices, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        check_shapes(theta, arcs)?;
        let p = arcs.p();
        let mut inv = Vec::with_capacity(arcs.n_nodes());
        let mut hty = Vec::with_capacity(arcs.n_nodes());
        for i in 0..arcs.n_nodes() {
            let mut m = theta.gram(i);
            let shift = 2.0 * rho * arcs.degree(i) as f64;
            for r in 0..p {
                m[(r, r)] += shift;
            }
            let chol = Cholesky::new(m)
                .ok_or_else(|| Error::LinearSolve(format!("x-subproblem of node {i} is not positive definite")))?;
            inv.push(chol.inverse());
            hty.push(theta.hty(i));
        }
        Ok(Self { inv, hty, rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

fn check_shapes(theta: &ParameterState, arcs: &ArcMatrices) -> Result<()> {
    if theta.n_nodes() != arcs.n_nodes() || theta.p() != arcs.p() {
        return Err(Error::InvalidArgument(format!(
            "parameter state has {} nodes of dimension {}, network has {} nodes of dimension {}",
            theta.n_nodes(),
            theta.p(),
            arcs.n_nodes(),
            arcs.p()
        )));
    }
    Ok(())
}

fn check_state(state: &AdmmState, arcs: &ArcMatrices) -> Result<()> {
    let (n, m, p) = (arcs.n_nodes(), arcs.m_arcs(), arcs.p());
    if state.x.len() != n * p || state.z.len() != m * p || state.alpha.len() != m * p {
        return Err(Error::InvalidArgument("ADMM state does not match the network".into()));
    }
    check_rho(state.rho)
}

/// Reusable round executor. Holds the inboxes so repeated rounds do not
/// reallocate them.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    arcs: &'a ArcMatrices,
    execution: Execution,
    inboxes: Vec<NodeInbox>,
}

impl<'a> Engine<'a> {
    pub fn new(arcs: &'a ArcMatrices) -> Self {
        let inboxes = (0..arcs.n_nodes()).map(|i| NodeInbox::empty(i, arcs)).collect();
        Self {
            arcs,
            execution: Execution::Sequential,
            inboxes,
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn inboxes(&self) -> &[NodeInbox] {
        &self.inboxes
    }

    fn node_x(&self, i: usize, state: &AdmmState, solvers: &LocalSolvers, out: &mut [f64]) {
        let p = self.arcs.p();
        let rho = state.rho;
        let mut rhs = [0.0f64; 16];
        let mut rhs_heap;
        let rhs: &mut [f64] = if p <= rhs.len() {
            &mut rhs[..p]
        } else {
            rhs_heap = vec![0.0; p];
            &mut rhs_heap
        };
        rhs.copy_from_slice(solvers.hty[i].as_slice());
        let (z, alpha) = (state.z.as_slice(), state.alpha.as_slice());
        for &a in self.arcs.out_arcs(i) {
            for r in 0..p {
                rhs[r] += rho * z[a * p + r] - alpha[a * p + r];
            }
        }
        for &a in self.arcs.in_arcs(i) {
            for r in 0..p {
                rhs[r] += rho * z[a * p + r] + alpha[a * p + r];
            }
        }
        let inv = &solvers.inv[i];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..p).map(|c| inv[(r, c)] * rhs[c]).sum();
        }
    }

    /// Phase 1: exact per-node minimisation of the augmented Lagrangian in x.
    pub fn x_update(&self, state: &AdmmState, solvers: &LocalSolvers) -> DVector<f64> {
        let p = self.arcs.p();
        let mut x = DVector::zeros(self.arcs.n_nodes() * p);
        match self.execution {
            Execution::Sequential => {
                for (i, out) in x.as_mut_slice().chunks_mut(p).enumerate() {
                    self.node_x(i, state, solvers, out);
                }
            }
            Execution::Parallel => {
                x.as_mut_slice()
                    .par_chunks_mut(p)
                    .enumerate()
                    .for_each(|(i, out)| self.node_x(i, state, solvers, out));
            }
        }
        x
    }

    /// Phase 2: every node receives `x_j` from each neighbour `j`.
    pub fn exchange(&mut self, x: &DVector<f64>) {
        let p = self.arcs.p();
        for inbox in &mut self.inboxes {
            for (s, &j) in inbox.from.iter().enumerate() {
                inbox.payload[s * p..(s + 1) * p].copy_from_slice(&x.as_slice()[j * p..(j + 1) * p]);
            }
        }
    }

    fn node_z(&self, i: usize, x: &[f64], z: &mut [f64]) {
        let p = self.arcs.p();
        let inbox = &self.inboxes[i];
        let xi = &x[i * p..(i + 1) * p];
        for (s, &a) in self.arcs.out_arcs(i).iter().enumerate() {
            let xj = inbox.slot(s);
            for r in 0..p {
                z[a * p + r] = 0.5 * (xi[r] + xj[r]);
            }
        }
    }

    /// Phase 3a: each node sets the `z` blocks of its outgoing arcs from its
    /// own `x_i` and the received `x_j`. Requires a prior [`Engine::exchange`].
    pub fn z_update(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = self.arcs.p();
        let mut z = DVector::zeros(self.arcs.m_arcs() * p);
        // Arc blocks are disjoint across owners; the result does not depend on
        // scheduling, so the sequential loop serves both variants.
        for i in 0..self.arcs.n_nodes() {
            self.node_z(i, x.as_slice(), z.as_mut_slice());
        }
        z
    }

    /// Phase 3b: `alpha += rho (A_s x - z)`, arc by arc.
    pub fn lambda_update(&self, state: &AdmmState) -> DVector<f64> {
        let p = self.arcs.p();
        let rho = state.rho;
        let mut alpha = state.alpha.clone();
        let arcs = self.arcs.arcs();
        let update = |(a, blk): (usize, &mut [f64])| {
            let src = arcs[a].src;
            for r in 0..p {
                blk[r] += rho * (state.x[src * p + r] - state.z[a * p + r]);
            }
        };
        match self.execution {
            Execution::Sequential => alpha.as_mut_slice().chunks_mut(p).enumerate().for_each(update),
            Execution::Parallel => alpha.as_mut_slice().par_chunks_mut(p).enumerate().for_each(update),
        }
        alpha
    }

    /// One full round against the parameter encoded in `solvers`.
    pub fn round(&mut self, state: &AdmmState, solvers: &LocalSolvers) -> AdmmState {
        let x = self.x_update(state, solvers);
        self.exchange(&x);
        let z = self.z_update(&x);
        let mid = AdmmState {
            x,
            z,
            alpha: state.alpha.clone(),
            k: state.k,
            rho: state.rho,
        };
        let alpha = self.lambda_update(&mid);
        AdmmState {
            alpha,
            k: state.k + 1,
            ..mid
        }
    }

    /// Observes `theta` and runs one round.
    pub fn step(&mut self, state: &AdmmState, theta: &ParameterState) -> Result<AdmmState> {
        check_state(state, self.arcs)?;
        let solvers = LocalSolvers::new(theta, self.arcs, state.rho)?;
        Ok(self.round(state, &solvers))
    }
}

/// New `x` from the closed form `(H_i^T H_i + 2 rho d_i I) x_i = ...`.
pub fn x_update(state: &AdmmState, theta: &ParameterState, arcs: &ArcMatrices) -> Result<DVector<f64>> {
    check_state(state, arcs)?;
    let solvers = LocalSolvers::new(theta, arcs, state.rho)?;
    Ok(Engine::new(arcs).x_update(state, &solvers))
}

/// Exchange phase as a standalone operation.
pub fn exchange(x: &DVector<f64>, arcs: &ArcMatrices) -> Vec<NodeInbox> {
    let mut engine = Engine::new(arcs);
    engine.exchange(x);
    engine.inboxes
}

/// New `z`: `z_{i->j} = (x_i + x_j) / 2`.
pub fn z_update(state: &AdmmState, arcs: &ArcMatrices) -> Result<DVector<f64>> {
    check_state(state, arcs)?;
    let mut engine = Engine::new(arcs);
    engine.exchange(&state.x);
    Ok(engine.z_update(&state.x))
}

/// New `alpha`: `alpha + rho (A_s x - z)`.
pub fn lambda_update(state: &AdmmState, arcs: &ArcMatrices) -> Result<DVector<f64>> {
    check_state(state, arcs)?;
    Ok(Engine::new(arcs).lambda_update(state))
}

/// One full ADMM round: observe `theta`, x-update, exchange, z-update,
/// dual ascent, `k <- k + 1`.
pub fn step(state: &AdmmState, theta: &ParameterState, arcs: &ArcMatrices) -> Result<AdmmState> {
    Engine::new(arcs).step(state, theta)
}

/// Outcome of [`warm_start`].
#[derive(Debug, Clone)]
pub struct WarmStart {
    /// Certified iterate, relabelled `k = 0`.
    pub state: AdmmState,
    pub iterations: u64,
    /// Final `|u - u*(theta_0)|_G`.
    pub distance: f64,
}

/// Runs ADMM on the frozen problem `theta0` from `z = 0`, `alpha = 0` until
/// the oracle certifies `|u - u*(theta0)|_G <= eps0`.
pub fn warm_start(
    theta0: &ParameterState,
    arcs: &ArcMatrices,
    rho: f64,
    eps0: f64,
    max_iters: u64,
) -> Result<WarmStart> {
    let oracle = Oracle::from_arcs(arcs)?;
    let opt0 = oracle.solve(theta0)?;
    warm_start_against(theta0, &opt0, arcs, rho, eps0, max_iters)
}

/// As [`warm_start`] with a precomputed optimum of `theta0`.
pub fn warm_start_against(
    theta0: &ParameterState,
    opt0: &OptimalPoint,
    arcs: &ArcMatrices,
    rho: f64,
    eps0: f64,
    max_iters: u64,
) -> Result<WarmStart> {
    if !(eps0 > 0.0) {
        return Err(Error::InvalidArgument(format!("eps0 must be positive, got {eps0}")));
    }
    let solvers = LocalSolvers::new(theta0, arcs, rho)?;
    let mut engine = Engine::new(arcs);
    let mut state = AdmmState::zeros(arcs, rho)?;
    let mut distance = g_deviation(&state, opt0);
    let mut iterations = 0;
    while distance > eps0 {
        if iterations >= max_iters {
            return Err(Error::WarmStartNotConverged {
                iters: iterations,
                distance,
                eps0,
            });
        }
        state = engine.round(&state, &solvers);
        iterations += 1;
        distance = g_deviation(&state, opt0);
    }
    state.k = 0;
    Ok(WarmStart {
        state,
        iterations,
        distance,
    })
}

/// Iterate carrying the full multiplier `lambda` (length `2 m p`).
#[derive(Debug, Clone, PartialEq)]
pub struct FullLambdaState {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub k: u64,
    pub rho: f64,
}

impl FullLambdaState {
    pub fn zeros(arcs: &ArcMatrices, rho: f64) -> Result<Self> {
        let s = AdmmState::zeros(arcs, rho)?;
        Ok(Self {
            x: s.x,
            z: s.z,
            lambda: DVector::zeros(2 * s.alpha.len()),
            k: 0,
            rho,
        })
    }

    /// `max |lambda_top + lambda_bottom|`; zero when `lambda = [a; -a]`.
    pub fn symmetry_defect(&self) -> f64 {
        let mp = self.lambda.len() / 2;
        (0..mp)
            .map(|r| (self.lambda[r] + self.lambda[mp + r]).abs())
            .fold(0.0, f64::max)
    }

    pub fn alpha(&self) -> DVector<f64> {
        self.lambda.rows(0, self.lambda.len() / 2).into_owned()
    }
}

/// Debug round using the generic matrix-form updates with the full `lambda`:
/// x and z minimise the augmented Lagrangian exactly, then
/// `lambda += rho (A x + B z)`. No symmetry of `lambda` is assumed.
pub fn full_lambda_step(
    state: &FullLambdaState,
    theta: &ParameterState,
    arcs: &ArcMatrices,
) -> Result<FullLambdaState> {
    check_shapes(theta, arcs)?;
    let rho = state.rho;
    let (n, p) = (arcs.n_nodes(), arcs.p());
    let a = arcs.a_stacked();
    let b = arcs.b();

    // (blockdiag(H^T H) + rho A^T A) x = H^T y - A^T lambda - rho A^T B z
    let mut hess = rho * a.tr_mul(&a);
    let mut rhs = -a.tr_mul(&state.lambda) - rho * a.tr_mul(&(&b * &state.z));
    for i in 0..n {
        let g = theta.gram(i);
        let hty = theta.hty(i);
        for r in 0..p {
            rhs[i * p + r] += hty[r];
            for c in 0..p {
                hess[(i * p + r, i * p + c)] += g[(r, c)];
            }
        }
    }
    let x = Cholesky::new(hess)
        .ok_or_else(|| Error::LinearSolve("augmented x-Hessian not positive definite".into()))?
        .solve(&rhs);

    // B^T B z = -B^T (A x + lambda / rho)
    let ax = &a * &x;
    let btb = b.tr_mul(&b);
    let z_rhs = -b.tr_mul(&(&ax + &state.lambda / rho));
    let z = Cholesky::new(btb)
        .ok_or_else(|| Error::LinearSolve("B^T B not positive definite".into()))?
        .solve(&z_rhs);

    let lambda = &state.lambda + rho * (&ax + &b * &z);
    Ok(FullLambdaState {
        x,
        z,
        lambda,
        k: state.k + 1,
        rho,
    })
}

/// Header of the per-round trace CSV.
pub fn trace_header(p: usize) -> String {
    let mut out = String::from("k,node");
    for r in 0..p {
        let _ = write!(out, ",x{r}");
    }
    out.push('\n');
    out
}

/// Trace rows of one state: `k,node,x_i...` per node.
pub fn trace_rows(state: &AdmmState, p: usize) -> String {
    let mut out = String::new();
    for (i, blk) in state.x.as_slice().chunks(p).enumerate() {
        let _ = write!(out, "{},{}", state.k, i);
        for v in blk {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
