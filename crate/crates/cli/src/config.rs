//! Flat experiment configuration.
//!
//! Every key is optional; missing keys take the defaults below. Model keys
//! carry the same names as [`HyperParams`] fields.
//!
//! ```toml
//! d = 20
//! clients = 5
//! samples = [100]          # one value for all clients, or one per client
//! q = 0.5
//! beta = 0.015
//! grid_nu = [1.0, 10.0, 100.0]
//! ```

use std::path::Path;

use fedgl::federation::Scheduler;
use fedgl::HyperParams;
use serde::{Deserialize, Serialize};

use crate::dataset::Manifest;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub d: usize,
    pub clients: usize,
    pub samples: Vec<usize>,
    pub q: f64,
    pub sigma_r: f64,
    pub threshold: f64,
    pub sigma_w: f64,

    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub lambda: f64,
    pub xi: f64,
    pub eta_w: f64,
    pub zeta: f64,
    pub eps_gamma: f64,
    pub local_loops: usize,
    pub rounds: usize,
    pub gamma_cap: f64,

    pub scheduler: Scheduler,
    pub strict_stepsize: bool,
    /// Baseline solver tolerance and iteration cap.
    pub tol: f64,
    pub max_iter: usize,
    /// Estimated weights above this count as edges.
    pub edge_threshold: f64,

    pub grid_beta: Vec<f64>,
    pub grid_nu: Vec<f64>,
    pub grid_lambda: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        let hp = HyperParams::default();
        Self {
            seed: 0,
            d: 20,
            clients: 5,
            samples: vec![100],
            q: 0.5,
            sigma_r: 0.5,
            threshold: 0.7,
            sigma_w: 0.1,
            alpha: hp.alpha,
            beta: hp.beta,
            nu: hp.nu,
            lambda: hp.lambda,
            xi: hp.xi,
            eta_w: hp.eta_w,
            zeta: hp.zeta,
            eps_gamma: hp.eps_gamma,
            local_loops: hp.local_loops,
            rounds: hp.rounds,
            gamma_cap: hp.gamma_cap,
            scheduler: Scheduler::Sequential,
            strict_stepsize: false,
            tol: fedgl::client::DEFAULT_TOL,
            max_iter: fedgl::client::DEFAULT_MAX_ITER,
            edge_threshold: fedgl::evaluation::DEFAULT_EDGE_THRESHOLD,
            grid_beta: vec![0.01, 0.015, 0.02],
            grid_nu: log_space(1.0, 100.0, 5),
            grid_lambda: log_space(0.01, 1.0, 5),
        }
    }
}

/// `n` points from `lo` to `hi`, evenly spaced in log scale.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text).map_err(|e| match e {
                    CliError::Config(msg) => CliError::Config(format!("{}: {msg}", p.display())),
                    other => other,
                })
            }
        }
    }

    /// This config with its data keys replaced by those of a generated dataset.
    pub fn with_data(&self, m: &Manifest) -> Self {
        Self {
            seed: m.seed,
            d: m.d,
            clients: m.clients,
            samples: m.samples.clone(),
            q: m.q,
            sigma_r: m.sigma_r,
            threshold: m.threshold,
            sigma_w: m.sigma_w,
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hyper_params(&self) -> HyperParams {
        HyperParams {
            alpha: self.alpha,
            beta: self.beta,
            nu: self.nu,
            lambda: self.lambda,
            xi: self.xi,
            eta_w: self.eta_w,
            zeta: self.zeta,
            eps_gamma: self.eps_gamma,
            local_loops: self.local_loops,
            rounds: self.rounds,
            gamma_cap: self.gamma_cap,
        }
    }

    /// Sample count of every client.
    pub fn sample_sizes(&self) -> Vec<usize> {
        if self.samples.len() == 1 {
            vec![self.samples[0]; self.clients]
        } else {
            self.samples.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.hyper_params().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if self.clients == 0 {
            return bad("clients must be positive".into());
        }
        if self.samples.len() != 1 && self.samples.len() != self.clients {
            return bad(format!("samples lists {} sizes for {} clients", self.samples.len(), self.clients));
        }
        if self.samples.contains(&0) {
            return bad("every client needs at least one sample".into());
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return bad(format!("q must lie in (0, 1], got {}", self.q));
        }
        if !(self.sigma_r > 0.0 && self.sigma_r.is_finite()) {
            return bad(format!("sigma_r must be positive, got {}", self.sigma_r));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1), got {}", self.threshold));
        }
        if !(self.sigma_w >= 0.0 && self.sigma_w.is_finite()) {
            return bad(format!("sigma_w must be nonnegative, got {}", self.sigma_w));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return bad("tol and max_iter must be positive".into());
        }
        if !(self.edge_threshold >= 0.0) {
            return bad(format!("edge_threshold must be nonnegative, got {}", self.edge_threshold));
        }
        for (name, grid) in [("grid_beta", &self.grid_beta), ("grid_nu", &self.grid_nu), ("grid_lambda", &self.grid_lambda)] {
            if grid.is_empty() {
                return bad(format!("{name} is empty"));
            }
            if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad(format!("{name} needs positive values"));
            }
        }
        Ok(())
    }
}
