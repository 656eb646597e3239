//! Round-synchronous orchestration of clients and server.
//!
//! Each round fans the current consensus and weights out to every client,
//! runs the local solvers (sequentially or on a thread pool), waits for all
//! updates and then performs one server aggregation. Every message that
//! crosses the client/server boundary can be captured in an audit log.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::client::{ClientState, ClientUpdateMsg};
use crate::error::{check_dim, Error, Result};
use crate::graph::{dist2_sq, GraphVector};
use crate::objective::{check_stepsize, HyperParams, StepsizeCheck};
use crate::server::{Broadcast, ServerState};
use crate::Matrix;

/// How the local rounds of one communication round are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheduler {
    #[default]
    Sequential,
    /// One rayon task per client.
    Parallel,
}

/// A message crossing the silo boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    ToServer(ClientUpdateMsg),
    ToClient(Broadcast),
}

/// Per-round convergence trace entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// `sum_i ||w_i^(t+1) - w_i^(t)||^2`
    pub sum_dw_local_sq: f64,
    /// `||w_con^(t+1) - w_con^(t)||^2`
    pub dw_con_sq: f64,
    pub mu: f64,
    /// Weights after the round, indexed by client id.
    pub gamma: Vec<f64>,
    /// Joint objective at the post-round iterates.
    pub objective: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FederationOptions {
    pub scheduler: Scheduler,
    /// Record every boundary message.
    pub audit: bool,
    /// Fail instead of warning when the stepsize rule is violated.
    pub strict_stepsize: bool,
}

#[derive(Debug, Clone)]
pub struct FederationRun {
    clients: Vec<ClientState>,
    server: ServerState,
    hp: HyperParams,
    options: FederationOptions,
    trace: Vec<RoundRecord>,
    audit: Vec<Message>,
    stepsize: StepsizeCheck,
}

impl FederationRun {
    /// Sets every client and the consensus to `w0` with equal weights.
    ///
    /// `clients[i]` must have id `i`.
    pub fn new(clients: Vec<ClientState>, w0: GraphVector, hp: HyperParams, options: FederationOptions) -> Result<Self> {
        hp.validate()?;
        if clients.is_empty() {
            return Err(Error::InvalidInput("at least one client is required".into()));
        }
        for (i, c) in clients.iter().enumerate() {
            if c.id() != i {
                return Err(Error::InvalidInput(format!("client at position {i} has id {}", c.id())));
            }
            check_dim(w0.d(), c.d())?;
            check_dim(w0.weights().len(), c.graph().weights().len())?;
        }
        let stepsize = check_stepsize(&hp, w0.d(), hp.gamma_cap);
        if !stepsize.passed {
            let msg = format!(
                "stepsize {} exceeds 1/L_max = {:.3e} (L_max = {:.3e} at gamma cap {})",
                hp.eta_w, stepsize.max_stepsize, stepsize.lipschitz, hp.gamma_cap
            );
            if options.strict_stepsize {
                return Err(Error::InvalidInput(msg));
            }
            log::warn!("{msg}");
        }
        let server = ServerState::new(clients.len(), w0)?;
        Ok(Self { clients, server, hp, options, trace: Vec::new(), audit: Vec::new(), stepsize })
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn hp(&self) -> &HyperParams {
        &self.hp
    }

    pub fn trace(&self) -> &[RoundRecord] {
        &self.trace
    }

    pub fn audit_log(&self) -> &[Message] {
        &self.audit
    }

    pub fn stepsize_check(&self) -> StepsizeCheck {
        self.stepsize
    }

    pub fn local_graphs(&self) -> Vec<GraphVector> {
        self.clients.iter().map(ClientState::graph).collect()
    }

    pub fn consensus(&self) -> &GraphVector {
        self.server.consensus()
    }

    /// `sum_i g_i(w_i) + lambda nu sum_i ||w_i - w_con|| + lambda ||w_con||_1`.
    pub fn joint_objective(&self) -> f64 {
        let con = self.server.consensus().weights();
        let local: f64 = self
            .clients
            .iter()
            .map(|c| c.local_objective(&self.hp) + self.hp.rho() * dist2_sq(c.graph().weights(), con).sqrt())
            .sum();
        local + self.hp.lambda * con.iter().sum::<f64>()
    }

    /// One communication round: broadcast, local rounds, barrier, aggregation.
    pub fn step(&mut self) -> Result<&RoundRecord> {
        let broadcasts = self.server.broadcasts();
        if self.options.audit {
            self.audit.extend(broadcasts.iter().cloned().map(Message::ToClient));
        }
        let before: Vec<GraphVector> = self.local_graphs();
        let hp = &self.hp;
        let run = |(c, b): (&mut ClientState, &Broadcast)| c.local_round(&b.w_con, b.gamma, hp);
        let updates: Vec<ClientUpdateMsg> = match self.options.scheduler {
            Scheduler::Sequential => self.clients.iter_mut().zip(&broadcasts).map(run).collect::<Result<_>>()?,
            Scheduler::Parallel => {
                self.clients.par_iter_mut().zip(broadcasts.par_iter()).map(run).collect::<Result<_>>()?
            }
        };
        if self.options.audit {
            self.audit.extend(updates.iter().cloned().map(Message::ToServer));
        }
        let sum_dw_local_sq =
            updates.iter().zip(&before).map(|(u, w)| dist2_sq(u.w.weights(), w.weights())).sum();
        let con_before = self.server.consensus().clone();
        self.server.server_round(&updates, &self.hp)?;
        let record = RoundRecord {
            round: self.trace.len(),
            sum_dw_local_sq,
            dw_con_sq: dist2_sq(self.server.consensus().weights(), con_before.weights()),
            mu: self.server.last_mu().expect("set by server_round"),
            gamma: self.server.gamma().to_vec(),
            objective: self.joint_objective(),
        };
        self.trace.push(record);
        Ok(self.trace.last().expect("just pushed"))
    }

    /// Runs the configured number of rounds.
    pub fn run(&mut self) -> Result<()> {
        for _ in 0..self.hp.rounds {
            self.step()?;
        }
        if self.options.audit {
            self.audit.extend(self.server.broadcasts().into_iter().map(Message::ToClient));
        }
        Ok(())
    }
}

/// Output of [`run_federation`].
#[derive(Debug, Clone)]
pub struct FederationResult {
    pub locals: Vec<GraphVector>,
    pub consensus: GraphVector,
    pub run: FederationRun,
}

/// Learns personalized and consensus graphs from per-client signal matrices,
/// starting every graph from [`initial_graph`](crate::client::initial_graph).
pub fn run_federation(datasets: &[Matrix], hp: &HyperParams, options: FederationOptions) -> Result<FederationResult> {
    let d = datasets.first().ok_or_else(|| Error::InvalidInput("no datasets".into()))?.nrows();
    if d < 2 {
        return Err(Error::InvalidInput(format!("signals need at least 2 nodes, got {d}")));
    }
    let w0 = crate::client::initial_graph(d);
    let clients = datasets
        .iter()
        .enumerate()
        .map(|(i, x)| {
            check_dim(d, x.nrows())?;
            ClientState::init(i, x, &w0)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut run = FederationRun::new(clients, w0, hp.clone(), options)?;
    run.run()?;
    Ok(FederationResult { locals: run.local_graphs(), consensus: run.consensus().clone(), run })
}

/// Empirical check of the `O(1/T)` decay of successive-iterate differences.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// `A_local(T') = (1/T') sum_{t<T'} sum_i ||dw_i^(t)||^2`, for `T' = 1..=T`.
    pub a_local: Vec<f64>,
    /// Same for the consensus graph.
    pub a_con: Vec<f64>,
    /// Least-squares slope of `log A` against `log T'` over the second half of the run.
    pub local_exponent: Option<f64>,
    pub con_exponent: Option<f64>,
    /// `T' A_local(T')` is non-increasing for `T' >= tail_start`.
    pub local_tail_nonincreasing: bool,
    pub con_tail_nonincreasing: bool,
    pub tail_start: usize,
    /// Every trace entry is zero.
    pub converged: bool,
}

impl ConvergenceReport {
    /// Partial sums `T' A(T')` of the local differences.
    pub fn local_partial_sums(&self) -> Vec<f64> {
        partial_sums(&self.a_local)
    }

    pub fn con_partial_sums(&self) -> Vec<f64> {
        partial_sums(&self.a_con)
    }
}

fn partial_sums(avg: &[f64]) -> Vec<f64> {
    avg.iter().enumerate().map(|(k, a)| a * (k + 1) as f64).collect()
}

/// Minimum number of rounds for [`convergence_report`].
pub const MIN_REPORT_ROUNDS: usize = 5;

pub fn convergence_report(trace: &[RoundRecord], tail_start: usize) -> Result<ConvergenceReport> {
    if trace.len() < MIN_REPORT_ROUNDS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_REPORT_ROUNDS} rounds for a convergence report, got {}",
            trace.len()
        )));
    }
    let running = |f: fn(&RoundRecord) -> f64| -> Vec<f64> {
        let mut acc = 0.0;
        trace
            .iter()
            .enumerate()
            .map(|(k, r)| {
                acc += f(r);
                acc / (k + 1) as f64
            })
            .collect()
    };
    let a_local = running(|r| r.sum_dw_local_sq);
    let a_con = running(|r| r.dw_con_sq);
    let converged = trace.iter().all(|r| r.sum_dw_local_sq == 0.0 && r.dw_con_sq == 0.0);
    Ok(ConvergenceReport {
        local_exponent: decay_exponent(&a_local),
        con_exponent: decay_exponent(&a_con),
        local_tail_nonincreasing: tail_nonincreasing(&partial_sums(&a_local), tail_start),
        con_tail_nonincreasing: tail_nonincreasing(&partial_sums(&a_con), tail_start),
        a_local,
        a_con,
        tail_start,
        converged,
    })
}

fn tail_nonincreasing(values: &[f64], tail_start: usize) -> bool {
    // values[k] belongs to T' = k + 1
    let from = tail_start.max(1) - 1;
    values.get(from..).is_none_or(|tail| tail.windows(2).all(|w| w[1] <= w[0]))
}

fn decay_exponent(avg: &[f64]) -> Option<f64> {
    let half = avg.len() / 2;
    let pts: Vec<(f64, f64)> = avg
        .iter()
        .enumerate()
        .skip(half)
        .filter(|(_, a)| **a > 0.0)
        .map(|(k, a)| (((k + 1) as f64).ln(), a.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
