//! The Markov parameter process.
//!
//! Each node `i` holds a least-squares term `0.5 * |H_i x_i - y_i|^2`. Every
//! entry of `H_i` and `y_i` follows the same scalar AR(1) recursion
//! `v' = (1 - eps) v + eps * w` with `w ~ N(0, 1)`, whose stationary law is
//! `N(0, eps / (2 - eps))`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::psd_extremes;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessConfig {
    /// AR mixing weight. `0` freezes the chain (accepted for testing).
    pub epsilon_ar: f64,
    pub rows_per_node: usize,
    pub p: usize,
    pub n_nodes: usize,
    pub seed: u64,
}

impl ProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon_ar) {
            return Err(Error::InvalidArgument(format!(
                "epsilon_ar must lie in [0, 1], got {}",
                self.epsilon_ar
            )));
        }
        if self.rows_per_node == 0 || self.p == 0 || self.n_nodes == 0 {
            return Err(Error::InvalidArgument(
                "rows_per_node, p and n_nodes must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Per-entry stationary variance `eps / (2 - eps)`.
    ///
    /// A frozen chain (`eps = 0`) leaves every law invariant; it is started
    /// from unit-variance entries so the frozen problem is nondegenerate.
    pub fn stationary_variance(&self) -> f64 {
        if self.epsilon_ar == 0.0 {
            1.0
        } else {
            self.epsilon_ar / (2.0 - self.epsilon_ar)
        }
    }
}

/// One draw of the parameter chain: per-node `(H_i, y_i)` at time `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    pub k: u64,
    pub h: Vec<DMatrix<f64>>,
    pub y: Vec<DVector<f64>>,
}

impl ParameterState {
    /// Builds a state, checking that all nodes share one shape and that every
    /// entry is finite.
    pub fn new(k: u64, h: Vec<DMatrix<f64>>, y: Vec<DVector<f64>>) -> Result<Self> {
        if h.is_empty() || h.len() != y.len() {
            return Err(Error::InvalidArgument(
                "need one (H_i, y_i) pair per node".into(),
            ));
        }
        let (rows, p) = h[0].shape();
        for (hi, yi) in h.iter().zip(&y) {
            if hi.shape() != (rows, p) || yi.len() != rows {
                return Err(Error::InvalidArgument("inconsistent node shapes".into()));
            }
            if hi.iter().chain(yi.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite parameter entry".into()));
            }
        }
        Ok(Self { k, h, y })
    }

    pub fn n_nodes(&self) -> usize {
        self.h.len()
    }

    pub fn rows_per_node(&self) -> usize {
        self.h[0].nrows()
    }

    pub fn p(&self) -> usize {
        self.h[0].ncols()
    }

    /// `H_i^T H_i`.
    pub fn gram(&self, i: usize) -> DMatrix<f64> {
        self.h[i].tr_mul(&self.h[i])
    }

    /// `H_i^T y_i`.
    pub fn hty(&self, i: usize) -> DVector<f64> {
        self.h[i].tr_mul(&self.y[i])
    }

    /// CSV dump, one line per node: `k,node` then `H_i` row-major, then `y_i`.
    pub fn to_csv(&self) -> String {
        let (rows, p) = (self.rows_per_node(), self.p());
        let mut out = String::from("k,node");
        for r in 0..rows {
            for c in 0..p {
                let _ = write!(out, ",h_{r}_{c}");
            }
        }
        for r in 0..rows {
            let _ = write!(out, ",y_{r}");
        }
        out.push('\n');
        for (i, (hi, yi)) in self.h.iter().zip(&self.y).enumerate() {
            let _ = write!(out, "{},{}", self.k, i);
            for r in 0..rows {
                for c in 0..p {
                    let _ = write!(out, ",{}", hi[(r, c)]);
                }
            }
            for r in 0..rows {
                let _ = write!(out, ",{}", yi[r]);
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`ParameterState::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format {
            what: "parameter CSV",
            msg,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let rows = cols.iter().filter(|c| c.starts_with("y_")).count();
        let n_h = cols.iter().filter(|c| c.starts_with("h_")).count();
        if rows == 0 || n_h % rows != 0 || cols.len() != 2 + n_h + rows {
            return Err(bad(format!("unexpected header `{header}`")));
        }
        let p = n_h / rows;
        let mut k = None;
        let mut h = Vec::new();
        let mut y = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let vals: Vec<&str> = line.split(',').collect();
            if vals.len() != cols.len() {
                return Err(bad(format!("line {}: wrong field count", lineno + 2)));
            }
            let row_k: u64 = vals[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {}: bad k", lineno + 2)))?;
            let node: usize = vals[1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {}: bad node", lineno + 2)))?;
            if *k.get_or_insert(row_k) != row_k || node != h.len() {
                return Err(bad(format!("line {}: out-of-order row", lineno + 2)));
            }
            let nums = vals[2..]
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?;
            h.push(DMatrix::from_row_slice(rows, p, &nums[..n_h]));
            y.push(DVector::from_column_slice(&nums[n_h..]));
        }
        Self::new(k.unwrap_or(0), h, y)
    }
}

/// A time-homogeneous Markov chain over [`ParameterState`]s.
///
/// `advance` may only read the current state and fresh randomness, which is
/// what makes the chain Markov.
pub trait ParameterProcess: Sync {
    /// Draw from the stationary law.
    fn initial(&self, rng: &mut dyn RngCore) -> ParameterState;

    fn advance(&self, state: &ParameterState, rng: &mut dyn RngCore) -> ParameterState;
}

/// The AR(1) Gaussian least-squares process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Process {
    cfg: ProcessConfig,
}

impl Ar1Process {
    pub fn new(cfg: ProcessConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &ProcessConfig {
        &self.cfg
    }
}

impl ParameterProcess for Ar1Process {
    fn initial(&self, rng: &mut dyn RngCore) -> ParameterState {
        stationary_sample(&self.cfg, rng)
    }

    fn advance(&self, state: &ParameterState, rng: &mut dyn RngCore) -> ParameterState {
        ar1_step(state, &self.cfg, rng)
    }
}

// Entries are drawn node by node, H row-major first, then y. Every consumer of
// the stream relies on this order.
fn fill_node(
    rows: usize,
    p: usize,
    rng: &mut dyn RngCore,
    mut f: impl FnMut(&mut dyn RngCore) -> (f64, f64),
    h: &mut DMatrix<f64>,
    y: &mut DVector<f64>,
) {
    for r in 0..rows {
        for c in 0..p {
            let (keep, noise) = f(rng);
            h[(r, c)] = keep * h[(r, c)] + noise;
        }
    }
    for r in 0..rows {
        let (keep, noise) = f(rng);
        y[r] = keep * y[r] + noise;
    }
}

/// Draws `Theta_0 ~ pi`: independent `N(0, eps / (2 - eps))` entries.
pub fn stationary_sample(cfg: &ProcessConfig, rng: &mut dyn RngCore) -> ParameterState {
    let sd = cfg.stationary_variance().sqrt();
    let (rows, p) = (cfg.rows_per_node, cfg.p);
    let mut h = Vec::with_capacity(cfg.n_nodes);
    let mut y = Vec::with_capacity(cfg.n_nodes);
    for _ in 0..cfg.n_nodes {
        let mut hi = DMatrix::zeros(rows, p);
        let mut yi = DVector::zeros(rows);
        fill_node(
            rows,
            p,
            rng,
            |r| {
                let w: f64 = StandardNormal.sample(r);
                (0.0, sd * w)
            },
            &mut hi,
            &mut yi,
        );
        h.push(hi);
        y.push(yi);
    }
    ParameterState { k: 0, h, y }
}

/// One AR(1) transition: `H' = (1 - eps) H + eps V`, `y' = (1 - eps) y + eps W`.
pub fn ar1_step(
    state: &ParameterState,
    cfg: &ProcessConfig,
    rng: &mut dyn RngCore,
) -> ParameterState {
    let eps = cfg.epsilon_ar;
    let mut next = state.clone();
    next.k = state.k + 1;
    let (rows, p) = (state.rows_per_node(), state.p());
    for (hi, yi) in next.h.iter_mut().zip(next.y.iter_mut()) {
        fill_node(
            rows,
            p,
            rng,
            |r| {
                let w: f64 = StandardNormal.sample(r);
                (1.0 - eps, eps * w)
            },
            hi,
            yi,
        );
    }
    next
}

/// Curvature of the separable objective: `mu = min_i lambda_min(H_i^T H_i)`,
/// `l = max_i lambda_max(H_i^T H_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub mu: f64,
    pub l: f64,
}

pub fn curvature_constants(state: &ParameterState) -> Curvature {
    let mut mu = f64::INFINITY;
    let mut l = 0.0f64;
    let rank_deficient = state.rows_per_node() < state.p();
    for i in 0..state.n_nodes() {
        let (lo, hi) = psd_extremes(&state.gram(i));
        mu = mu.min(if rank_deficient { 0.0 } else { lo });
        l = l.max(hi);
    }
    Curvature { mu, l }
}

/// `H_i^T (H_i x_i - y_i)`.
pub fn local_gradient(state: &ParameterState, i: usize, x_i: &DVector<f64>) -> Result<DVector<f64>> {
    if i >= state.n_nodes() {
        return Err(Error::NodeOutOfRange {
            index: i,
            n_nodes: state.n_nodes(),
        });
    }
    if x_i.len() != state.p() {
        return Err(Error::InvalidArgument(format!(
            "x_i has length {}, expected {}",
            x_i.len(),
            state.p()
        )));
    }
    let resid = &state.h[i] * x_i - &state.y[i];
    Ok(state.h[i].tr_mul(&resid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(eps: f64, rows: usize, p: usize, n: usize) -> ProcessConfig {
        ProcessConfig {
            epsilon_ar: eps,
            rows_per_node: rows,
            p,
            n_nodes: n,
            seed: 42,
        }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn pooled_variance(states: &[ParameterState]) -> f64 {
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut count = 0.0;
        for s in states {
            for v in s.h.iter().flat_map(|m| m.iter()).chain(s.y.iter().flat_map(|v| v.iter())) {
                sum += v;
                sq += v * v;
                count += 1.0;
            }
        }
        let mean = sum / count;
        sq / count - mean * mean
    }

    #[test]
    fn same_seed_same_state() {
        let c = cfg(0.01, 3, 3, 10);
        let a = stationary_sample(&c, &mut rng(5));
        let b = stationary_sample(&c, &mut rng(5));
        assert_eq!(a, b);
        assert_ne!(a, stationary_sample(&c, &mut rng(6)));
    }

    #[test]
    fn unit_epsilon_gives_standard_normal_entries() {
        let c = cfg(1.0, 4, 5, 50);
        assert_eq!(c.stationary_variance(), 1.0);
        let mut r = rng(1);
        let states: Vec<_> = (0..50).map(|_| stationary_sample(&c, &mut r)).collect();
        let v = pooled_variance(&states);
        assert!((v - 1.0).abs() < 0.02, "variance {v}");
    }

    #[test]
    fn stationary_variance_fixed_point() {
        let c = cfg(0.01, 1, 1, 1);
        let s2 = c.stationary_variance();
        assert!((s2 - 0.01 / 1.99).abs() < 1e-15);
        let e = c.epsilon_ar;
        assert!(((1.0 - e) * (1.0 - e) * s2 + e * e - s2).abs() < 1e-15);
    }

    #[test]
    fn scalar_recursion_long_run_variance() {
        // Independent scalar simulation of v' = (1 - eps) v + eps w.
        let eps = 0.01;
        let mut r = rng(99);
        let mut v = 0.0f64;
        for _ in 0..5_000 {
            let w: f64 = StandardNormal.sample(&mut r);
            v = (1.0 - eps) * v + eps * w;
        }
        let n = 1_000_000;
        let mut sq = 0.0;
        for _ in 0..n {
            let w: f64 = StandardNormal.sample(&mut r);
            v = (1.0 - eps) * v + eps * w;
            sq += v * v;
        }
        let emp = sq / n as f64;
        let target = eps / (2.0 - eps);
        assert!((emp / target - 1.0).abs() < 0.05, "{emp} vs {target}");
    }

    #[test]
    fn frozen_chain_is_identity() {
        let c = cfg(0.0, 3, 2, 4);
        let mut r = rng(3);
        let s = stationary_sample(&c, &mut r);
        let t = ar1_step(&s, &c, &mut r);
        assert_eq!(t.h, s.h);
        assert_eq!(t.y, s.y);
        assert_eq!(t.k, 1);
    }

    #[test]
    fn unit_epsilon_forgets_input() {
        let c = cfg(1.0, 2, 2, 3);
        let s1 = stationary_sample(&c, &mut rng(1));
        let s2 = stationary_sample(&c, &mut rng(2));
        let a = ar1_step(&s1, &c, &mut rng(10));
        let b = ar1_step(&s2, &c, &mut rng(10));
        assert_eq!(a.h, b.h);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn iterated_steps_keep_stationary_variance() {
        let c = cfg(0.01, 3, 3, 10);
        let mut r = rng(17);
        // Many short independent chains keep the pooled samples nearly independent.
        let mut states = Vec::new();
        for _ in 0..1000 {
            let mut s = stationary_sample(&c, &mut r);
            for _ in 0..100 {
                s = ar1_step(&s, &c, &mut r);
            }
            states.push(s);
        }
        let v = pooled_variance(&states);
        let target = c.stationary_variance();
        assert!((v / target - 1.0).abs() < 0.02, "{v} vs {target}");
    }

    #[test]
    fn identity_blocks_have_unit_curvature() {
        let s = ParameterState::new(
            0,
            vec![DMatrix::identity(3, 3); 4],
            vec![DVector::zeros(3); 4],
        )
        .unwrap();
        let c = curvature_constants(&s);
        assert!((c.mu - 1.0).abs() < 1e-14 && (c.l - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wide_rows_lose_strong_convexity() {
        let c = cfg(1.0, 2, 3, 5);
        let s = stationary_sample(&c, &mut rng(0));
        assert_eq!(curvature_constants(&s).mu, 0.0);
    }

    #[test]
    fn curvature_matches_explicit_gram_eigenvalues() {
        let c = cfg(1.0, 3, 3, 6);
        let mut r = rng(8);
        for _ in 0..20 {
            let s = stationary_sample(&c, &mut r);
            let cur = curvature_constants(&s);
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for h in &s.h {
                // Oracle: form the Gram matrix by hand and use the SVD of H.
                let sv = h.clone().singular_values();
                for v in sv.iter() {
                    lo = lo.min(v * v);
                    hi = hi.max(v * v);
                }
            }
            assert!((cur.mu - lo).abs() < 1e-10 * (1.0 + hi));
            assert!((cur.l - hi).abs() < 1e-10 * (1.0 + hi));
        }
    }

    #[test]
    fn curvature_scales_quadratically() {
        let c = cfg(1.0, 4, 3, 5);
        let s = stationary_sample(&c, &mut rng(4));
        let mut t = s.clone();
        for h in &mut t.h {
            *h *= 2.5;
        }
        let (a, b) = (curvature_constants(&s), curvature_constants(&t));
        assert!((b.mu - 6.25 * a.mu).abs() < 1e-10 * b.l);
        assert!((b.l - 6.25 * a.l).abs() < 1e-10 * b.l);
    }

    #[test]
    fn gradient_trivial_cases() {
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let s = ParameterState::new(0, vec![DMatrix::identity(3, 3)], vec![DVector::zeros(3)]).unwrap();
        assert_eq!(local_gradient(&s, 0, &v).unwrap(), v);
        let z = ParameterState::new(0, vec![DMatrix::zeros(3, 3)], vec![DVector::from_element(3, 4.0)]).unwrap();
        assert_eq!(local_gradient(&z, 0, &v).unwrap(), DVector::zeros(3));
        assert!(matches!(
            local_gradient(&s, 1, &v),
            Err(Error::NodeOutOfRange { index: 1, .. })
        ));
        assert!(local_gradient(&s, 0, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let c = cfg(1.0, 4, 3, 2);
        let mut r = rng(12);
        for _ in 0..100 {
            let s = stationary_sample(&c, &mut r);
            let x = stationary_sample(&cfg(1.0, 3, 1, 1), &mut r).y[0].clone();
            let grad = local_gradient(&s, 1, &x).unwrap();
            let f = |x: &DVector<f64>| 0.5 * (&s.h[1] * x - &s.y[1]).norm_squared();
            let h = 1e-6;
            for j in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (f(&xp) - f(&xm)) / (2.0 * h);
                assert!((fd - grad[j]).abs() < 1e-4, "{fd} vs {}", grad[j]);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ParameterState::new(0, vec![DMatrix::zeros(2, 2)], vec![DVector::zeros(3)]).is_err());
        assert!(ParameterState::new(
            0,
            vec![DMatrix::zeros(2, 2), DMatrix::zeros(3, 2)],
            vec![DVector::zeros(2), DVector::zeros(3)]
        )
        .is_err());
        assert!(ParameterState::new(
            0,
            vec![DMatrix::from_element(1, 1, f64::NAN)],
            vec![DVector::zeros(1)]
        )
        .is_err());
        assert!(Ar1Process::new(cfg(1.5, 1, 1, 1)).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(seed in any::<u64>(), rows in 1usize..4, p in 1usize..4, n in 1usize..5) {
            let c = cfg(1.0, rows, p, n);
            let mut s = stationary_sample(&c, &mut rng(seed));
            s.k = seed % 1000;
            let back = ParameterState::from_csv(&s.to_csv()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
