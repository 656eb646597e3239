//! Graph learning from smooth signals held in isolated clients.
//!
//! Every client learns a personalized graph from its own signals while a
//! central server maintains a sparse consensus graph and an inverse-distance
//! contribution weight per client. Only graphs and scalar weights ever leave
//! a client; the raw signals and their distance summaries stay local.
//!
//! Graphs are represented as [`GraphVector`]s: the nonnegative upper-triangle
//! edge weights of a symmetric adjacency matrix, in row-major order.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | edge indexing, adjacency/Laplacian conversion, degree operator, projections |
//! | [`objective`] | smoothness objective, gradient, Lipschitz bound and stepsize rule |
//! | [`client`] | local accelerated projected gradient solver |
//! | [`server`] | consensus proximal update and contribution weights |
//! | [`federation`] | round-synchronous orchestration, traces, convergence report |
//! | [`datagen`] | RBF graphs, heterogeneous families, smooth signal sampling |
//! | [`baselines`] | independent and single-global-graph learning |
//! | [`evaluation`] | precision / recall / F-score / relative error |
//! | [`io`] | edge-list, message and CSV formats |

pub mod baselines;
pub mod client;
pub mod datagen;
mod error;
pub mod evaluation;
pub mod federation;
pub mod graph;
pub mod io;
pub mod objective;
pub mod server;

pub use baselines::{solve_global, solve_igl};
pub use client::{ClientState, ClientUpdateMsg, SolveOutcome};
pub use datagen::GraphFamily;
pub use error::{Error, Result};
pub use evaluation::{GraphMetrics, RunScores};
pub use federation::{ConvergenceReport, FederationRun, Message, RoundRecord, Scheduler};
pub use graph::{DegreeOperator, GraphVector};
pub use objective::{DistanceVector, HyperParams, StepsizeCheck};
pub use server::{Broadcast, ServerState};

/// Dense matrix used for signal data (`d` rows, one column per sample).
pub type Matrix = nalgebra::DMatrix<f64>;
