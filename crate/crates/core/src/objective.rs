//! The per-client smoothness objective and its first-order machinery.
//!
//! For a client with distance summary `z` computed from `N` samples,
//!
//! ```text
//! g(w) = (1/N) z'w - alpha * sum_i log((S w)_i + zeta) + 2 beta ||w||^2
//! f(w) = g(w) + (rho gamma / 2) ||w - w_con||^2,     rho = lambda * nu
//! ```
//!
//! `g` is convex on the nonnegative orthant and its gradient is Lipschitz with
//! constant `4 beta + 2 alpha (d-1) / zeta^2`; the coupling term adds `rho gamma`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::graph::{dist2_sq, dot, edge_count, edge_pairs, DegreeOperator, GraphVector};
use crate::Matrix;

/// Squared pairwise distances between the rows of a signal matrix.
///
/// Carries the sample count so that the data term is always scaled by `1/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVector {
    d: usize,
    z: Vec<f64>,
    n: usize,
}

impl DistanceVector {
    pub fn new(d: usize, z: Vec<f64>, n: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 nodes, got {d}")));
        }
        if n == 0 {
            return Err(Error::InvalidInput("sample count must be positive".into()));
        }
        check_dim(edge_count(d), z.len())?;
        if z.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("distances must be finite and nonnegative".into()));
        }
        Ok(Self { d, z, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    /// Sum of several summaries over the same node set; sample counts add up.
    pub fn pooled(parts: &[&DistanceVector]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidInput("nothing to pool".into()))?;
        let mut z = vec![0.0; first.z.len()];
        let mut n = 0;
        for part in parts {
            check_dim(first.d, part.d)?;
            for (acc, x) in z.iter_mut().zip(&part.z) {
                *acc += x;
            }
            n += part.n;
        }
        Self::new(first.d, z, n)
    }
}

/// `z[(i,j)] = ||x_i - x_j||^2` for rows `x_i` of the `d x N` signal matrix.
pub fn pairwise_distance(x: &Matrix) -> Result<DistanceVector> {
    let (d, n) = x.shape();
    if d < 2 {
        return Err(Error::InvalidInput(format!("signal matrix needs at least 2 rows, got {d}")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("signal matrix has no samples".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("signal matrix contains non-finite values".into()));
    }
    // ||x_i - x_j||^2 = |x_i|^2 + |x_j|^2 - 2 <x_i, x_j> loses precision for
    // nearly equal rows, so accumulate the differences directly
    let xt = x.transpose();
    let node = |i: usize| &xt.as_slice()[i * n..(i + 1) * n];
    let z = edge_pairs(d)
        .map(|(i, j)| node(i).iter().zip(node(j)).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    DistanceVector::new(d, z, n)
}

/// Model and solver constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Log-degree barrier weight.
    pub alpha: f64,
    /// Squared-norm weight.
    pub beta: f64,
    /// Weight of the local-to-consensus distance.
    pub nu: f64,
    /// Overall regularization weight; also scales the consensus `l1` term.
    pub lambda: f64,
    /// Momentum weight in `[0, 1)`.
    pub xi: f64,
    pub eta_w: f64,
    /// Degree floor inside the log barrier.
    pub zeta: f64,
    /// Floor added to distances in the contribution-weight update.
    pub eps_gamma: f64,
    /// Inner iterations per communication round.
    pub local_loops: usize,
    /// Communication rounds.
    pub rounds: usize,
    /// Practical upper bound on contribution weights used by the stepsize check.
    pub gamma_cap: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.015,
            nu: 2.5,
            lambda: 0.01,
            xi: 0.9,
            eta_w: 0.005,
            zeta: 1e-4,
            eps_gamma: 1e-8,
            local_loops: 5,
            rounds: 50,
            gamma_cap: 1e3,
        }
    }
}

impl HyperParams {
    /// Consensus coupling strength `lambda * nu`.
    pub fn rho(&self) -> f64 {
        self.lambda * self.nu
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("nu", self.nu),
            ("lambda", self.lambda),
            ("eta_w", self.eta_w),
            ("zeta", self.zeta),
            ("eps_gamma", self.eps_gamma),
            ("gamma_cap", self.gamma_cap),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.xi) {
            return Err(Error::InvalidInput(format!("xi must lie in [0, 1), got {}", self.xi)));
        }
        if self.local_loops == 0 || self.rounds == 0 {
            return Err(Error::InvalidInput("local_loops and rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// `(1/N) z'w`, the average Dirichlet energy of the signals on `g`.
pub fn smoothness_value(g: &GraphVector, z: &DistanceVector) -> Result<f64> {
    check_dim(z.d, g.d())?;
    Ok(dot(&z.z, g.weights()) / z.n as f64)
}

/// `g(w)`; `w` may be an extrapolated point slightly outside the orthant.
pub fn local_objective(w: &[f64], z: &DistanceVector, hp: &HyperParams) -> f64 {
    debug_assert_eq!(w.len(), z.z.len());
    let deg = DegreeOperator::new(z.d).apply_unchecked(w);
    let barrier: f64 = deg.iter().map(|s| (s + hp.zeta).ln()).sum();
    dot(&z.z, w) / z.n as f64 - hp.alpha * barrier + 2.0 * hp.beta * dot(w, w)
}

/// `(1/N) z - alpha S'(1 / (S w + zeta)) + 4 beta w`.
pub fn local_gradient(w: &[f64], z: &DistanceVector, hp: &HyperParams) -> Vec<f64> {
    debug_assert_eq!(w.len(), z.z.len());
    let s = DegreeOperator::new(z.d);
    let inv: Vec<f64> = s.apply_unchecked(w).iter().map(|v| 1.0 / (v + hp.zeta)).collect();
    let barrier = s.adjoint_unchecked(&inv);
    let scale = 1.0 / z.n as f64;
    z.z.iter()
        .zip(&barrier)
        .zip(w)
        .map(|((zk, bk), wk)| scale * zk - hp.alpha * bk + 4.0 * hp.beta * wk)
        .collect()
}

/// `g(w) + (rho gamma / 2) ||w - w_con||^2`.
pub fn round_objective(
    w: &[f64],
    w_con: &[f64],
    gamma: f64,
    z: &DistanceVector,
    hp: &HyperParams,
) -> Result<f64> {
    check_dim(w.len(), w_con.len())?;
    check_dim(z.z.len(), w.len())?;
    Ok(local_objective(w, z, hp) + 0.5 * hp.rho() * gamma * dist2_sq(w, w_con))
}

/// Gradient of [`round_objective`] with respect to `w`.
pub fn round_gradient(w: &[f64], w_con: &[f64], gamma: f64, z: &DistanceVector, hp: &HyperParams) -> Vec<f64> {
    let coupling = hp.rho() * gamma;
    let mut grad = local_gradient(w, z, hp);
    for ((gk, wk), ck) in grad.iter_mut().zip(w).zip(w_con) {
        *gk += coupling * (wk - ck);
    }
    grad
}

/// Lipschitz constant of the round-objective gradient: `4 beta + 2 alpha (d-1) / zeta^2 + rho gamma`.
pub fn lipschitz_bound(hp: &HyperParams, d: usize, gamma: f64) -> f64 {
    4.0 * hp.beta + 2.0 * hp.alpha * (d as f64 - 1.0) / (hp.zeta * hp.zeta) + hp.rho() * gamma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeCheck {
    pub passed: bool,
    pub lipschitz: f64,
    /// Largest admissible stepsize, `1 / lipschitz`.
    pub max_stepsize: f64,
}

/// Passes iff `eta_w <= 1 / L_max` with `L_max` evaluated at `gamma_max`.
pub fn check_stepsize(hp: &HyperParams, d: usize, gamma_max: f64) -> StepsizeCheck {
    let lipschitz = lipschitz_bound(hp, d, gamma_max);
    let max_stepsize = 1.0 / lipschitz;
    StepsizeCheck { passed: hp.eta_w <= max_stepsize, lipschitz, max_stepsize }
}
