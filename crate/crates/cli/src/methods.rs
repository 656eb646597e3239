//! Dispatch of the three learning methods over client summaries.

use fedgl::client::{initial_graph, ClientState};
use fedgl::evaluation::score_run;
use fedgl::federation::FederationOptions;
use fedgl::{
    solve_global, solve_igl, DistanceVector, FederationRun, GraphFamily, GraphVector, RoundRecord, RunScores,
    StepsizeCheck,
};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Personalized local graphs plus a consensus graph, learned federatedly.
    Ppgl,
    /// Each client learns alone.
    Igl,
    /// One graph for all clients from pooled data.
    Global,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ppgl => "ppgl",
            Method::Igl => "igl",
            Method::Global => "global",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct MethodOutput {
    pub method: Method,
    /// One estimate per client; the global method repeats its single graph.
    pub locals: Vec<GraphVector>,
    /// Consensus graph for ppgl, the shared graph for global.
    pub consensus: Option<GraphVector>,
    /// Per-round trace, empty for the baselines.
    pub trace: Vec<RoundRecord>,
    /// Final contribution weights (ppgl only).
    pub gamma: Option<Vec<f64>>,
    /// Baselines report whether the solver met its tolerance; ppgl runs a
    /// fixed number of rounds and is always `true`.
    pub converged: bool,
    /// Largest solver iteration count (baselines only).
    pub iterations: Option<usize>,
    pub stepsize: Option<StepsizeCheck>,
}

impl MethodOutput {
    pub fn score(&self, family: &GraphFamily, edge_threshold: f64) -> Result<RunScores> {
        Ok(score_run(&self.locals, self.consensus.as_ref(), family, edge_threshold)?)
    }
}

pub fn run_method(method: Method, summaries: Vec<DistanceVector>, cfg: &Config) -> Result<MethodOutput> {
    let hp = cfg.hyper_params();
    let d = summaries.first().ok_or_else(|| CliError::Config("dataset has no clients".into()))?.d();
    match method {
        Method::Ppgl => {
            let w0 = initial_graph(d);
            let clients = summaries
                .into_iter()
                .enumerate()
                .map(|(i, z)| ClientState::from_summary(i, z, &w0))
                .collect::<fedgl::Result<Vec<_>>>()?;
            let options = FederationOptions {
                scheduler: cfg.scheduler,
                audit: false,
                strict_stepsize: cfg.strict_stepsize,
            };
            let mut run = FederationRun::new(clients, w0, hp, options)?;
            run.run()?;
            Ok(MethodOutput {
                method,
                locals: run.local_graphs(),
                consensus: Some(run.consensus().clone()),
                trace: run.trace().to_vec(),
                gamma: Some(run.server().gamma().to_vec()),
                converged: true,
                iterations: None,
                stepsize: Some(run.stepsize_check()),
            })
        }
        Method::Igl => {
            let out = solve_igl(&summaries, &hp, cfg.tol, cfg.max_iter)?;
            Ok(MethodOutput {
                method,
                converged: out.iter().all(|o| o.converged),
                iterations: out.iter().map(|o| o.iterations).max(),
                locals: out.into_iter().map(|o| o.w).collect(),
                consensus: None,
                trace: Vec::new(),
                gamma: None,
                stepsize: None,
            })
        }
        Method::Global => {
            let out = solve_global(&summaries, &hp, cfg.tol, cfg.max_iter)?;
            Ok(MethodOutput {
                method,
                locals: vec![out.w.clone(); summaries.len()],
                consensus: Some(out.w),
                trace: Vec::new(),
                gamma: None,
                converged: out.converged,
                iterations: Some(out.iterations),
                stepsize: None,
            })
        }
    }
}
