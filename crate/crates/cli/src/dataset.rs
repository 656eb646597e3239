//! Synthetic datasets on disk, one directory per client.
//!
//! ```text
//! <dir>/manifest.toml
//! <dir>/config.toml
//! <dir>/truth/{base,consensus,client_<i>}.edges
//! <dir>/clients/client_<i>/signals.csv      d rows, N_i columns
//! ```
//!
//! Client directories are numbered from 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use fedgl::datagen::{derive_seed, generate_rbf_graph, make_family, sample_smooth_signals, ADDED_EDGE_WEIGHT};
use fedgl::io::{parse_edge_list, read_matrix_csv, write_edge_list, write_matrix_csv};
use fedgl::objective::pairwise_distance;
use fedgl::{DistanceVector, GraphFamily, GraphVector, Matrix};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, Result};

/// Seed streams derived from the master seed.
pub const GRAPH_STREAM: u64 = 0;
pub const FAMILY_STREAM: u64 = 1;
pub const SIGNAL_STREAM: u64 = 10;

/// Ground truth and per-client signals of one benchmark instance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub family: GraphFamily,
    pub signals: Vec<Matrix>,
    pub seed: u64,
}

impl Dataset {
    pub fn generate(cfg: &Config, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let g0 = generate_rbf_graph(cfg.d, cfg.sigma_r, cfg.threshold, derive_seed(seed, GRAPH_STREAM))?;
        let family = make_family(&g0, cfg.clients, cfg.q, derive_seed(seed, FAMILY_STREAM))?;
        let signals = family
            .locals_truth
            .iter()
            .zip(cfg.sample_sizes())
            .enumerate()
            .map(|(i, (g, n))| sample_smooth_signals(g, n, cfg.sigma_w, derive_seed(seed, SIGNAL_STREAM + i as u64)))
            .collect::<fedgl::Result<Vec<_>>>()?;
        Ok(Self { family, signals, seed })
    }

    pub fn summaries(&self) -> Result<Vec<DistanceVector>> {
        Ok(self.signals.iter().map(pairwise_distance).collect::<fedgl::Result<_>>()?)
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        self.signals.iter().map(|x| x.ncols()).collect()
    }

    pub fn write(&self, cfg: &Config, dir: &Path) -> Result<()> {
        let manifest = Manifest::new(self, cfg);
        write_file(&dir.join("manifest.toml"), &toml::to_string(&manifest).expect("manifest serializes"))?;
        write_file(&dir.join("config.toml"), &cfg.to_toml())?;
        let truth = dir.join("truth");
        write_file(&truth.join("base.edges"), &write_edge_list(&self.family.base))?;
        write_file(&truth.join("consensus.edges"), &write_edge_list(&self.family.consensus_truth))?;
        for (i, g) in self.family.locals_truth.iter().enumerate() {
            write_file(&truth.join(format!("client_{}.edges", i + 1)), &write_edge_list(g))?;
        }
        for (i, x) in self.signals.iter().enumerate() {
            let mut buf = Vec::new();
            write_matrix_csv(x, &mut buf)?;
            write_bytes(&client_dir(dir, i).join("signals.csv"), &buf)?;
        }
        Ok(())
    }
}

/// Directory holding client `i`'s private data.
pub fn client_dir(dataset: &Path, i: usize) -> PathBuf {
    dataset.join("clients").join(format!("client_{}", i + 1))
}

/// Description of a generated dataset, written next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub d: usize,
    pub clients: usize,
    pub samples: Vec<usize>,
    pub q: f64,
    pub sigma_r: f64,
    pub threshold: f64,
    pub sigma_w: f64,
    pub base_edges: usize,
    pub consensus_edges: usize,
    pub homogeneous: bool,
    /// Modelling assumptions not fixed by the benchmark definition.
    pub added_edge_weight_min: f64,
    pub added_edge_weight_max: f64,
    pub added_edges_may_coincide: bool,
}

impl Manifest {
    fn new(ds: &Dataset, cfg: &Config) -> Self {
        Self {
            seed: ds.seed,
            d: cfg.d,
            clients: ds.family.clients(),
            samples: ds.sample_sizes(),
            q: ds.family.q,
            sigma_r: cfg.sigma_r,
            threshold: cfg.threshold,
            sigma_w: cfg.sigma_w,
            base_edges: ds.family.base.num_edges(),
            consensus_edges: ds.family.consensus_truth.num_edges(),
            homogeneous: ds.family.is_homogeneous(),
            added_edge_weight_min: ADDED_EDGE_WEIGHT.start,
            added_edge_weight_max: ADDED_EDGE_WEIGHT.end,
            added_edges_may_coincide: true,
        }
    }
}

/// One file access made through a [`SiloStore`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Access {
    /// Client `client` read `path`.
    Client { client: usize, path: PathBuf },
    /// Evaluation read a ground-truth file.
    Truth { path: PathBuf },
    /// Learning started; no client data may be read afterwards.
    SolveStarted,
}

/// Read access to a dataset directory that keeps client data apart.
///
/// A client can only open files under its own directory, and every access
/// can be recorded for audits.
#[derive(Debug, Clone)]
pub struct SiloStore {
    root: PathBuf,
    log: Option<Arc<Mutex<Vec<Access>>>>,
}

impl SiloStore {
    pub fn open(root: &Path) -> Result<Self> {
        if !root.join("manifest.toml").is_file() {
            return Err(CliError::Config(format!("{} is not a dataset directory (no manifest.toml)", root.display())));
        }
        Ok(Self { root: root.to_path_buf(), log: None })
    }

    /// Records every access into `log`.
    pub fn with_audit(mut self, log: Arc<Mutex<Vec<Access>>>) -> Self {
        self.log = Some(log);
        self
    }

    fn record(&self, a: Access) {
        if let Some(log) = &self.log {
            log.lock().expect("audit log poisoned").push(a);
        }
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let path = self.root.join("manifest.toml");
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Reads client `i`'s signals and reduces them to its distance summary
    /// on the spot; the raw matrix never leaves this call.
    pub fn client_summary(&self, i: usize) -> Result<DistanceVector> {
        let path = client_dir(&self.root, i).join("signals.csv");
        self.record(Access::Client { client: i, path: path.clone() });
        let file = fs::File::open(&path).map_err(CliError::io(&path))?;
        let x = read_matrix_csv(std::io::BufReader::new(file))
            .map_err(|source| CliError::Format { path: path.clone(), source })?;
        Ok(pairwise_distance(&x)?)
    }

    pub fn mark_solve_started(&self) {
        self.record(Access::SolveStarted);
    }

    pub fn truth(&self, name: &str) -> Result<GraphVector> {
        let path = self.root.join("truth").join(format!("{name}.edges"));
        self.record(Access::Truth { path: path.clone() });
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        parse_edge_list(&text).map_err(|source| CliError::Format { path, source })
    }

    pub fn family(&self, manifest: &Manifest) -> Result<GraphFamily> {
        Ok(GraphFamily {
            base: self.truth("base")?,
            consensus_truth: self.truth("consensus")?,
            locals_truth: (0..manifest.clients).map(|i| self.truth(&format!("client_{}", i + 1))).collect::<Result<_>>()?,
            q: manifest.q,
            seed: manifest.seed,
        })
    }
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    fs::write(path, bytes).map_err(CliError::io(path))
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}
