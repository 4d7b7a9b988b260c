//! Empirical decay of expected contraction products.
//!
//! For window lengths `w = 1..=W` the mean of `prod_{i=j}^{j+w-1} q(Theta_i)`
//! over all windows of all tracks is fitted by `C * gamma^w` through least
//! squares on `ln(mean)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::oracle::{delta, ContractionParams};
use crate::process::{curvature_constants, Ar1Process, ParameterProcess};

use super::{derive_seed, Experiment, MeanSem};

/// Fitted slopes at or above this value count as no decay at all.
pub const DEGENERATE_GAMMA: f64 = 1.0 - 1e-12;

/// Window statistics of the contraction products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStat {
    pub window: usize,
    pub mean_product: f64,
    /// Naive standard error over all (overlapping) windows.
    pub sem: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub c_hat: f64,
    pub gamma_hat: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: f64,
    pub windows: Vec<WindowStat>,
}

/// Producer of contraction-factor sequences, one per track.
pub trait QSource: Sync {
    fn num_tracks(&self) -> usize;

    fn q_track(&self, index: usize) -> Result<Vec<f64>>;
}

/// `q(Theta_k) = 1 / (1 + delta(Theta_k))` along stationary tracks of the
/// parameter process. Only curvature is needed, no ADMM rounds.
#[derive(Debug, Clone)]
pub struct ProcessQSource {
    process: Ar1Process,
    params: ContractionParams,
    mu_tol: f64,
    seed: u64,
    num_tracks: usize,
    track_len: usize,
}

impl ProcessQSource {
    pub fn new(exp: &Experiment) -> Self {
        let cfg = exp.config();
        Self {
            process: *exp.process(),
            params: *exp.contraction_params(),
            mu_tol: cfg.mu_tol,
            seed: cfg.seed,
            num_tracks: cfg.num_tracks,
            track_len: cfg.track_len,
        }
    }
}

impl QSource for ProcessQSource {
    fn num_tracks(&self) -> usize {
        self.num_tracks
    }

    fn q_track(&self, index: usize) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, index as u64));
        let mut theta = self.process.initial(&mut rng);
        let mut out = Vec::with_capacity(self.track_len);
        for _ in 0..self.track_len {
            theta = self.process.advance(&theta, &mut rng);
            let c = curvature_constants(&theta);
            out.push(1.0 / (1.0 + delta(c.mu, c.l, &self.params, self.mu_tol)));
        }
        Ok(out)
    }
}

/// Fits `C gamma^w` to the mean window products of `sequences`.
pub fn fit_decay(sequences: &[Vec<f64>], max_window: usize) -> Result<DecayFit> {
    if max_window < 2 {
        return Err(Error::InvalidArgument("decay fit needs max_window >= 2".into()));
    }
    if sequences.is_empty() || sequences.iter().any(|s| s.len() < max_window) {
        return Err(Error::InvalidArgument(format!(
            "every q sequence must hold at least max_window = {max_window} values"
        )));
    }
    if sequences.iter().flatten().any(|&q| !(q > 0.0 && q <= 1.0)) {
        return Err(Error::InvalidArgument("contraction factors must lie in (0, 1]".into()));
    }
    let mut products: Vec<Vec<f64>> = vec![Vec::new(); max_window];
    for seq in sequences {
        for j in 0..seq.len() {
            let mut prod = 1.0;
            for (w, &q) in seq[j..].iter().take(max_window).enumerate() {
                prod *= q;
                products[w].push(prod);
            }
        }
    }
    let windows: Vec<WindowStat> = products
        .iter()
        .enumerate()
        .map(|(w, v)| {
            let m = MeanSem::of(v.iter().copied());
            WindowStat {
                window: w + 1,
                mean_product: m.mean,
                sem: m.sem,
                count: v.len(),
            }
        })
        .collect();

    let xs: Vec<f64> = windows.iter().map(|s| s.window as f64).collect();
    let ys: Vec<f64> = windows.iter().map(|s| s.mean_product.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let gamma_hat = slope.exp();
    if gamma_hat >= DEGENERATE_GAMMA {
        return Err(Error::DegenerateDecay { gamma_hat });
    }
    Ok(DecayFit {
        c_hat: intercept.exp(),
        gamma_hat,
        r_squared,
        windows,
    })
}

/// Draws every track of `source` (in parallel, order preserved) and fits.
pub fn estimate_decay_with(source: &dyn QSource, max_window: usize) -> Result<DecayFit> {
    let seqs = (0..source.num_tracks())
        .into_par_iter()
        .map(|t| source.q_track(t))
        .collect::<Result<Vec<_>>>()?;
    fit_decay(&seqs, max_window)
}

/// Decay fit along stationary tracks of the process configured by `cfg`.
pub fn estimate_decay(cfg: &SimConfig, max_window: usize) -> Result<DecayFit> {
    let exp = Experiment::new(cfg)?;
    estimate_decay_with(&ProcessQSource::new(&exp), max_window)
}
