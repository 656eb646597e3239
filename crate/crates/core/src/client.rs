//! One silo's local solver.
//!
//! A client keeps its distance summary private and exposes only graphs. Each
//! communication round runs `K` steps of accelerated projected gradient
//! descent on the round objective, starting from the last two iterates of
//! the previous round:
//!
//! ```text
//! w_ex  = w + xi (w - w_prev)
//! w_new = max(0, w_ex - eta (grad g(w_ex) + rho gamma (w_ex - w_con)))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::graph::{dist2_sq, norm2, GraphVector};
use crate::objective::{pairwise_distance, round_gradient, DistanceVector, HyperParams};
use crate::Matrix;

/// Local graph sent from a client to the server at the end of a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdateMsg {
    pub id: usize,
    pub round: usize,
    pub w: GraphVector,
}

#[derive(Debug, Clone)]
pub struct ClientState {
    id: usize,
    z: DistanceVector,
    w: Vec<f64>,
    w_prev: Vec<f64>,
    gamma: f64,
    w_con: Vec<f64>,
    round: usize,
}

impl ClientState {
    /// Summarizes the signals into pairwise distances; `x` itself is not kept.
    pub fn init(id: usize, x: &Matrix, w0: &GraphVector) -> Result<Self> {
        Self::from_summary(id, pairwise_distance(x)?, w0)
    }

    pub fn from_summary(id: usize, z: DistanceVector, w0: &GraphVector) -> Result<Self> {
        check_dim(z.d(), w0.d())?;
        Ok(Self {
            id,
            z,
            w: w0.weights().to_vec(),
            w_prev: w0.weights().to_vec(),
            gamma: 0.0,
            w_con: w0.weights().to_vec(),
            round: 0,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn d(&self) -> usize {
        self.z.d()
    }

    /// Number of local samples. Used only for reporting.
    pub fn sample_count(&self) -> usize {
        self.z.n()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn graph(&self) -> GraphVector {
        GraphVector::new(self.d(), self.w.clone()).expect("iterates stay in the orthant")
    }

    pub fn previous_graph(&self) -> GraphVector {
        GraphVector::new(self.d(), self.w_prev.clone()).expect("iterates stay in the orthant")
    }

    /// Current round objective at the current iterate.
    pub fn round_objective(&self, hp: &HyperParams) -> f64 {
        crate::objective::local_objective(&self.w, &self.z, hp)
            + 0.5 * hp.rho() * self.gamma * dist2_sq(&self.w, &self.w_con)
    }

    /// `g(w)` at the current iterate, without the coupling term.
    pub fn local_objective(&self, hp: &HyperParams) -> f64 {
        crate::objective::local_objective(&self.w, &self.z, hp)
    }

    /// Installs the consensus graph and contribution weight for the next inner steps.
    pub fn receive(&mut self, w_con: &GraphVector, gamma: f64) -> Result<()> {
        check_dim(self.d(), w_con.d())?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("contribution weight must be positive, got {gamma}")));
        }
        self.w_con.copy_from_slice(w_con.weights());
        self.gamma = gamma;
        Ok(())
    }

    /// One extrapolate / gradient / project step.
    pub fn inner_step(&mut self, hp: &HyperParams) {
        let w_ex: Vec<f64> =
            self.w.iter().zip(&self.w_prev).map(|(w, wp)| w + hp.xi * (w - wp)).collect();
        let grad = round_gradient(&w_ex, &self.w_con, self.gamma, &self.z, hp);
        let w_new: Vec<f64> =
            w_ex.iter().zip(&grad).map(|(x, g)| (x - hp.eta_w * g).max(0.0)).collect();
        self.w_prev = std::mem::replace(&mut self.w, w_new);
    }

    /// Runs `local_loops` inner steps against the received consensus and reports the result.
    pub fn local_round(&mut self, w_con: &GraphVector, gamma: f64, hp: &HyperParams) -> Result<ClientUpdateMsg> {
        self.receive(w_con, gamma)?;
        for _ in 0..hp.local_loops {
            self.inner_step(hp);
        }
        let msg = ClientUpdateMsg { id: self.id, round: self.round, w: self.graph() };
        self.round += 1;
        Ok(msg)
    }
}

/// Result of running the local solver until the iterates stall.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub w: GraphVector,
    pub iterations: usize,
    pub converged: bool,
}

/// Default relative step tolerance for [`solve_local_to_convergence`].
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default iteration cap for [`solve_local_to_convergence`].
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Starting point for every solver: the complete graph with unit node degrees.
///
/// The empty graph is a poor start: the barrier gradient there is `-2 alpha / zeta`
/// per edge, and with a small degree floor the first momentum steps overshoot
/// into negative degrees and collapse back to the empty graph.
pub fn initial_graph(d: usize) -> GraphVector {
    let w = 1.0 / (d as f64 - 1.0);
    GraphVector::new(d, vec![w; crate::graph::edge_count(d)]).expect("positive weights")
}

/// Minimizes the round objective for a fixed consensus graph and weight,
/// starting from [`initial_graph`].
///
/// Stops once `||w_{k+1} - w_k|| <= tol (1 + ||w_k||)`. Hitting `max_iter`
/// is reported through [`SolveOutcome::converged`], not as an error. With
/// `gamma = 0` this solves the single-graph problem.
pub fn solve_local_to_convergence(
    z: &DistanceVector,
    w_con: &GraphVector,
    gamma: f64,
    hp: &HyperParams,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutcome> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    check_dim(z.d(), w_con.d())?;
    let mut state = ClientState::from_summary(0, z.clone(), &initial_graph(z.d()))?;
    state.w_con.copy_from_slice(w_con.weights());
    state.gamma = gamma;
    for it in 1..=max_iter {
        state.inner_step(hp);
        let step = dist2_sq(&state.w, &state.w_prev).sqrt();
        if step <= tol * (1.0 + norm2(&state.w_prev)) {
            return Ok(SolveOutcome { w: state.graph(), iterations: it, converged: true });
        }
    }
    Ok(SolveOutcome { w: state.graph(), iterations: max_iter, converged: false })
}
