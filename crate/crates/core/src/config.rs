//! Experiment configuration as flat `key = value` text.
//!
//! ```text
//! # ten-node network
//! n_nodes = 10
//! edge_prob = 0.5
//! rho = 10
//! ```
//!
//! Blank lines and `#` comments are ignored, absent keys take their defaults
//! and unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::GammaConvention;
use crate::process::ProcessConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub edge_prob: f64,
    pub dim_p: usize,
    pub rows_per_node: usize,
    pub epsilon_ar: f64,
    pub rho: f64,
    pub phi: f64,
    pub gamma_l_convention: GammaConvention,
    pub track_len: usize,
    pub num_tracks: usize,
    /// Warm-start tolerance on `|u(0) - u*(theta_0)|_G`.
    pub warm_start_eps: f64,
    pub warm_start_max_iters: u64,
    pub mu_tol: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Longest window of the contraction-decay fit.
    pub decay_window: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_nodes: 10,
            edge_prob: 0.5,
            dim_p: 3,
            rows_per_node: 3,
            epsilon_ar: 0.01,
            rho: 10.0,
            phi: 2.0,
            gamma_l_convention: GammaConvention::SecondLargest,
            track_len: 300,
            num_tracks: 200,
            warm_start_eps: 1e-6,
            warm_start_max_iters: 2_000_000,
            mu_tol: 1e-12,
            seed: 1,
            out_dir: PathBuf::from("out"),
            decay_window: 50,
        }
    }
}

const KEYS: [&str; 16] = [
    "n_nodes",
    "edge_prob",
    "dim_p",
    "rows_per_node",
    "epsilon_ar",
    "rho",
    "phi",
    "gamma_l_convention",
    "track_len",
    "num_tracks",
    "warm_start_eps",
    "warm_start_max_iters",
    "mu_tol",
    "seed",
    "out_dir",
    "decay_window",
];

fn bad(key: &'static str, constraint: impl Into<String>) -> Error {
    Error::ConfigValue {
        key,
        constraint: constraint.into(),
    }
}

impl SimConfig {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = [false; KEYS.len()];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let slot = KEYS.iter().position(|k| *k == key).ok_or_else(|| Error::ConfigParse {
                line: line_no,
                msg: format!("unknown key `{key}`"),
            })?;
            if seen[slot] {
                return Err(Error::ConfigParse {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            seen[slot] = true;
            cfg.set(KEYS[slot], value).map_err(|msg| Error::ConfigParse { line: line_no, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &'static str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}` as a value for `{key}`"))
        }
        match key {
            "n_nodes" => self.n_nodes = num(key, value)?,
            "edge_prob" => self.edge_prob = num(key, value)?,
            "dim_p" => self.dim_p = num(key, value)?,
            "rows_per_node" => self.rows_per_node = num(key, value)?,
            "epsilon_ar" => self.epsilon_ar = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "phi" => self.phi = num(key, value)?,
            "gamma_l_convention" => self.gamma_l_convention = value.parse().map_err(|e: Error| e.to_string())?,
            "track_len" => self.track_len = num(key, value)?,
            "num_tracks" => self.num_tracks = num(key, value)?,
            "warm_start_eps" => self.warm_start_eps = num(key, value)?,
            "warm_start_max_iters" => self.warm_start_max_iters = num(key, value)?,
            "mu_tol" => self.mu_tol = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out_dir" => {
                if value.is_empty() {
                    return Err("out_dir must not be empty".into());
                }
                self.out_dir = PathBuf::from(value)
            }
            "decay_window" => self.decay_window = num(key, value)?,
            _ => unreachable!("key table and setter disagree on `{key}`"),
        }
        Ok(())
    }

    /// Reads and parses a configuration file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 2 {
            return Err(bad("n_nodes", "must be at least 2"));
        }
        if !(self.edge_prob > 0.0 && self.edge_prob <= 1.0) {
            return Err(bad("edge_prob", format!("must lie in (0, 1], got {}", self.edge_prob)));
        }
        if self.dim_p == 0 {
            return Err(bad("dim_p", "must be positive"));
        }
        if self.rows_per_node == 0 {
            return Err(bad("rows_per_node", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_ar) {
            return Err(bad("epsilon_ar", format!("must lie in [0, 1], got {}", self.epsilon_ar)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(bad("rho", format!("must be positive, got {}", self.rho)));
        }
        if !(self.phi > 1.0 && self.phi.is_finite()) {
            return Err(bad("phi", format!("must exceed 1, got {}", self.phi)));
        }
        if self.track_len == 0 {
            return Err(bad("track_len", "must be positive"));
        }
        if self.num_tracks < 2 {
            return Err(bad("num_tracks", "must be at least 2"));
        }
        if !(self.warm_start_eps > 0.0 && self.warm_start_eps.is_finite()) {
            return Err(bad("warm_start_eps", format!("must be positive, got {}", self.warm_start_eps)));
        }
        if self.warm_start_max_iters == 0 {
            return Err(bad("warm_start_max_iters", "must be positive"));
        }
        if !(self.mu_tol > 0.0 && self.mu_tol.is_finite()) {
            return Err(bad("mu_tol", format!("must be positive, got {}", self.mu_tol)));
        }
        if self.decay_window == 0 {
            return Err(bad("decay_window", "must be positive"));
        }
        Ok(())
    }

    /// Serialises every key; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n_nodes = {}", self.n_nodes);
        let _ = writeln!(out, "edge_prob = {}", self.edge_prob);
        let _ = writeln!(out, "dim_p = {}", self.dim_p);
        let _ = writeln!(out, "rows_per_node = {}", self.rows_per_node);
        let _ = writeln!(out, "epsilon_ar = {}", self.epsilon_ar);
        let _ = writeln!(out, "rho = {}", self.rho);
        let _ = writeln!(out, "phi = {}", self.phi);
        let _ = writeln!(out, "gamma_l_convention = {}", self.gamma_l_convention);
        let _ = writeln!(out, "track_len = {}", self.track_len);
        let _ = writeln!(out, "num_tracks = {}", self.num_tracks);
        let _ = writeln!(out, "warm_start_eps = {}", self.warm_start_eps);
        let _ = writeln!(out, "warm_start_max_iters = {}", self.warm_start_max_iters);
        let _ = writeln!(out, "mu_tol = {}", self.mu_tol);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(out, "decay_window = {}", self.decay_window);
        out
    }

    /// Process parameters implied by this configuration.
    pub fn process_config(&self) -> ProcessConfig {
        ProcessConfig {
            epsilon_ar: self.epsilon_ar,
            rows_per_node: self.rows_per_node,
            p: self.dim_p,
            n_nodes: self.n_nodes,
            seed: self.seed,
        }
    }
}

impl std::str::FromStr for SimConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}
