//! Centralized ground truth for the tracking experiments.
//!
//! The oracle knows every node's data and the whole graph. It computes the
//! consensus optimum of each parameter draw, the matching minimum-norm dual
//! multiplier, and the one-step contraction quantities `delta`, `q` and `g`.
//! None of this ever flows into the agents, except through the warm start.

use nalgebra::{DMatrix, DVector};

use crate::engine::AdmmState;
use crate::error::{Error, Result};
use crate::graph::{Arc, ArcMatrices, GraphSpectrum};
use crate::linalg::{dist_sq, pinv_psd, psd_extremes};
use crate::process::{curvature_constants, ParameterState};

/// Curvature below which `delta` is forced to zero.
pub const DEFAULT_MU_TOL: f64 = 1e-12;

/// Relative singular-value cutoff of the minimum-norm primal selection.
pub const PINV_REL_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPoint {
    /// Common consensus value, length `p`.
    pub x_bar: DVector<f64>,
    /// `x_bar` replicated on every node, length `n * p`.
    pub x_star: DVector<f64>,
    /// `x_bar` replicated on every arc, length `m * p`.
    pub z_star: DVector<f64>,
    /// Minimum-norm solution of `E_o^T alpha = -grad f(x*)`.
    pub alpha_star: DVector<f64>,
    /// Stacked `grad_x f(x*, theta)`, length `n * p`.
    pub grad_star: DVector<f64>,
    pub mu: f64,
    pub l: f64,
    /// Whether the aggregate Gram matrix is nonsingular (above `mu_tol`).
    pub is_unique_primal: bool,
}

impl OptimalPoint {
    /// `lambda* = [alpha*; -alpha*]`.
    pub fn lambda_star(&self) -> DVector<f64> {
        let mp = self.alpha_star.len();
        DVector::from_fn(2 * mp, |r, _| {
            if r < mp {
                self.alpha_star[r]
            } else {
                -self.alpha_star[r - mp]
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionQuantities {
    pub delta: f64,
    /// `1 / (1 + delta)`.
    pub q: f64,
    pub g: f64,
    /// `|x*(theta_k) - x*(theta_prev)|` over the stacked variable.
    pub dx_star: f64,
    /// `|grad f(x*(theta_k), theta_k) - grad f(x*(theta_prev), theta_prev)|`.
    pub dgrad_star: f64,
}

/// Step size, `phi` and graph constants entering `delta` and `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionParams {
    pub rho: f64,
    pub phi: f64,
    pub gamma_l: f64,
    pub big_gamma_l: f64,
}

impl ContractionParams {
    pub fn new(rho: f64, phi: f64, spectrum: &GraphSpectrum) -> Result<Self> {
        let params = Self {
            rho,
            phi,
            gamma_l: spectrum.gamma_l,
            big_gamma_l: spectrum.big_gamma_l,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.phi > 1.0 && self.phi.is_finite()) {
            return Err(Error::InvalidArgument(format!("phi must exceed 1, got {}", self.phi)));
        }
        if !(self.gamma_l > 0.0 && self.big_gamma_l >= self.gamma_l) {
            return Err(Error::InvalidArgument("graph constants must satisfy 0 < gamma_L <= Gamma_L".into()));
        }
        Ok(())
    }
}

/// Contraction margin of one exact ADMM round:
///
/// ```text
/// delta = min{ (phi-1) gamma_L / (phi Gamma_L),
///              2 rho mu gamma_L / (rho^2 Gamma_L gamma_L + phi L^2) }
/// ```
///
/// and `delta = 0` once `mu <= mu_tol` (curvature lost).
pub fn delta(mu: f64, l: f64, params: &ContractionParams, mu_tol: f64) -> f64 {
    if mu <= mu_tol {
        return 0.0;
    }
    let ContractionParams {
        rho,
        phi,
        gamma_l,
        big_gamma_l,
    } = *params;
    let graph_term = (phi - 1.0) * gamma_l / (phi * big_gamma_l);
    let curvature_term = 2.0 * rho * mu * gamma_l / (rho * rho * big_gamma_l * gamma_l + phi * l * l);
    graph_term.min(curvature_term)
}

/// Ground-truth solver bound to one network.
#[derive(Debug, Clone)]
pub struct Oracle {
    n_nodes: usize,
    p: usize,
    arcs: Vec<Arc>,
    laplacian_pinv: DMatrix<f64>,
    mu_tol: f64,
}

impl Oracle {
    pub fn new(arcs: &ArcMatrices, spectrum: &GraphSpectrum) -> Self {
        Self {
            n_nodes: arcs.n_nodes(),
            p: arcs.p(),
            arcs: arcs.arcs().to_vec(),
            laplacian_pinv: spectrum.laplacian_pinv(),
            mu_tol: DEFAULT_MU_TOL,
        }
    }

    /// Builds the Laplacian from the arc list and pseudo-inverts it.
    pub fn from_arcs(arcs: &ArcMatrices) -> Result<Self> {
        let n = arcs.n_nodes();
        let mut lap = DMatrix::zeros(n, n);
        for arc in arcs.arcs() {
            // Each undirected edge contributes through both of its arcs.
            lap[(arc.src, arc.src)] += 0.5;
            lap[(arc.dst, arc.dst)] += 0.5;
            lap[(arc.src, arc.dst)] -= 0.5;
            lap[(arc.dst, arc.src)] -= 0.5;
        }
        Ok(Self {
            n_nodes: n,
            p: arcs.p(),
            arcs: arcs.arcs().to_vec(),
            laplacian_pinv: pinv_psd(&lap, 1e-12),
            mu_tol: DEFAULT_MU_TOL,
        })
    }

    pub fn with_mu_tol(mut self, mu_tol: f64) -> Self {
        self.mu_tol = mu_tol;
        self
    }

    pub fn mu_tol(&self) -> f64 {
        self.mu_tol
    }

    pub fn m_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Consensus optimum and minimum-norm multiplier of `theta`.
    pub fn solve(&self, theta: &ParameterState) -> Result<OptimalPoint> {
        let (n, p) = (self.n_nodes, self.p);
        if theta.n_nodes() != n || theta.p() != p {
            return Err(Error::InvalidArgument("parameter state does not match the network".into()));
        }
        let mut gram = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        let grams: Vec<_> = (0..n).map(|i| theta.gram(i)).collect();
        let htys: Vec<_> = (0..n).map(|i| theta.hty(i)).collect();
        for i in 0..n {
            gram += &grams[i];
            rhs += &htys[i];
        }
        let (lo, _) = psd_extremes(&gram);
        let x_bar = pinv_psd(&gram, PINV_REL_CUTOFF) * &rhs;

        let mut grad_star = DVector::zeros(n * p);
        for i in 0..n {
            let gi = &grams[i] * &x_bar - &htys[i];
            grad_star.rows_mut(i * p, p).copy_from(&gi);
        }

        // alpha* = -E_o (E_o^T E_o)^+ grad with E_o^T E_o = 2 L (x) I_p.
        let mut w: DVector<f64> = DVector::zeros(n * p);
        for i in 0..n {
            for j in 0..n {
                let c = 0.5 * self.laplacian_pinv[(i, j)];
                if c != 0.0 {
                    for r in 0..p {
                        w[i * p + r] += c * grad_star[j * p + r];
                    }
                }
            }
        }
        let m = self.arcs.len();
        let mut alpha_star = DVector::zeros(m * p);
        for (a, arc) in self.arcs.iter().enumerate() {
            for r in 0..p {
                alpha_star[a * p + r] = w[arc.dst * p + r] - w[arc.src * p + r];
            }
        }

        let x_star = DVector::from_fn(n * p, |r, _| x_bar[r % p]);
        let z_star = DVector::from_fn(m * p, |r, _| x_bar[r % p]);
        let curv = curvature_constants(theta);
        Ok(OptimalPoint {
            x_bar,
            x_star,
            z_star,
            alpha_star,
            grad_star,
            mu: curv.mu,
            l: curv.l,
            is_unique_primal: lo > self.mu_tol,
        })
    }

    /// Contraction quantities between consecutive optima.
    pub fn contraction(
        &self,
        opt_k: &OptimalPoint,
        opt_prev: &OptimalPoint,
        params: &ContractionParams,
    ) -> Result<ContractionQuantities> {
        params.validate()?;
        let delta = delta(opt_k.mu, opt_k.l, params, self.mu_tol);
        let dx_star = dist_sq(opt_k.x_star.as_slice(), opt_prev.x_star.as_slice()).sqrt();
        let dgrad_star = dist_sq(opt_k.grad_star.as_slice(), opt_prev.grad_star.as_slice()).sqrt();
        let ratio = self.arcs.len() as f64 / self.n_nodes as f64;
        let g = (params.rho * ratio).sqrt() * dx_star + dgrad_star / (2.0 * params.rho * params.gamma_l).sqrt();
        Ok(ContractionQuantities {
            delta,
            q: 1.0 / (1.0 + delta),
            g,
            dx_star,
            dgrad_star,
        })
    }
}

/// Convenience wrapper building a throwaway [`Oracle`].
pub fn solve_optimal(theta: &ParameterState, arcs: &ArcMatrices) -> Result<OptimalPoint> {
    Oracle::from_arcs(arcs)?.solve(theta)
}

/// Contraction quantities of the transition `theta_prev -> theta_k`.
pub fn contraction(
    theta_k: &ParameterState,
    theta_prev: &ParameterState,
    arcs: &ArcMatrices,
    spectrum: &GraphSpectrum,
    rho: f64,
    phi: f64,
) -> Result<ContractionQuantities> {
    let params = ContractionParams::new(rho, phi, spectrum)?;
    let oracle = Oracle::new(arcs, spectrum);
    let opt_k = oracle.solve(theta_k)?;
    let opt_prev = oracle.solve(theta_prev)?;
    oracle.contraction(&opt_k, &opt_prev, &params)
}

/// `|u - u*|_G = sqrt(rho |z - z*|^2 + |alpha - alpha*|^2 / rho)`.
pub fn g_deviation(state: &AdmmState, opt: &OptimalPoint) -> f64 {
    g_deviation_sq(state, opt).sqrt()
}

pub fn g_deviation_sq(state: &AdmmState, opt: &OptimalPoint) -> f64 {
    let dz = dist_sq(state.z.as_slice(), opt.z_star.as_slice());
    let da = dist_sq(state.alpha.as_slice(), opt.alpha_star.as_slice());
    state.rho * dz + da / state.rho
}

/// Unweighted `|u - u*|^2`.
pub fn u_deviation_sq(state: &AdmmState, opt: &OptimalPoint) -> f64 {
    dist_sq(state.z.as_slice(), opt.z_star.as_slice()) + dist_sq(state.alpha.as_slice(), opt.alpha_star.as_slice())
}

/// Both sides of the one-step tracking inequality
/// `|u(k) - u*(k)|_G <= (|u(k-1) - u*(k-1)|_G + g) / sqrt(1 + delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Check {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub passed: bool,
}

/// Relative tolerance of [`check_lemma1`].
pub const LEMMA1_REL_TOL: f64 = 1e-8;

/// Checks the one-step inequality for `state_k`, the result of one exact
/// round against `theta_k` started from `state_prev`.
pub fn check_lemma1(
    state_prev: &AdmmState,
    state_k: &AdmmState,
    opt_prev: &OptimalPoint,
    opt_k: &OptimalPoint,
    cq: &ContractionQuantities,
) -> Lemma1Check {
    let lhs = g_deviation(state_k, opt_k);
    let rhs = cq.q.sqrt() * (g_deviation(state_prev, opt_prev) + cq.g);
    let slack = rhs - lhs;
    Lemma1Check {
        lhs,
        rhs,
        slack,
        passed: slack >= -LEMMA1_REL_TOL * (1.0 + rhs),
    }
}
