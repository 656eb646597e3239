//! Server-side aggregation: the consensus graph and contribution weights.
//!
//! The consensus update is the proximal step
//! `w_con = prox_{mu ||.||_1}(sum_i gamma_i w_i / C)` with `C = sum_i gamma_i`
//! and `mu = lambda / (C rho)`. The weights are refreshed afterwards from the
//! new consensus: `gamma_i = 1 / (||w_i - w_con|| + eps_gamma)`.

use serde::{Deserialize, Serialize};

use crate::client::ClientUpdateMsg;
use crate::error::{check_dim, Error, Result};
use crate::graph::{dist2_sq, soft_threshold, GraphVector};
use crate::objective::HyperParams;

/// Consensus graph and contribution weight sent to one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Broadcast {
    pub id: usize,
    pub round: usize,
    pub gamma: f64,
    pub w_con: GraphVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    w_con: GraphVector,
    gamma: Vec<f64>,
    round: usize,
    last_mu: Option<f64>,
}

impl ServerState {
    /// Starts from `w0` with equal weights `1 / clients`.
    pub fn new(clients: usize, w0: GraphVector) -> Result<Self> {
        if clients == 0 {
            return Err(Error::InvalidInput("at least one client is required".into()));
        }
        Ok(Self { w_con: w0, gamma: vec![1.0 / clients as f64; clients], round: 0, last_mu: None })
    }

    pub fn consensus(&self) -> &GraphVector {
        &self.w_con
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn clients(&self) -> usize {
        self.gamma.len()
    }

    /// Number of completed aggregation rounds.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Shrinkage level used by the most recent consensus update.
    pub fn last_mu(&self) -> Option<f64> {
        self.last_mu
    }

    /// Current consensus and weight for every client.
    pub fn broadcasts(&self) -> Vec<Broadcast> {
        self.gamma
            .iter()
            .enumerate()
            .map(|(id, &gamma)| Broadcast { id, round: self.round, gamma, w_con: self.w_con.clone() })
            .collect()
    }

    /// Aggregates one complete set of client updates: consensus first, then weights.
    pub fn server_round(&mut self, updates: &[ClientUpdateMsg], hp: &HyperParams) -> Result<Vec<Broadcast>> {
        let ordered = order_updates(updates, self.clients(), self.round, self.w_con.d())?;
        let (w_con, mu) = consensus_from_ordered(&ordered, &self.gamma, hp)?;
        let gamma = gamma_from_ordered(&ordered, &w_con, hp);
        log::debug!("round {}: mu = {mu:e}", self.round);
        self.w_con = w_con;
        self.gamma = gamma;
        self.last_mu = Some(mu);
        self.round += 1;
        Ok(self.broadcasts())
    }
}

/// Checks that there is exactly one update per client for `round` and sorts them by id.
fn order_updates(
    updates: &[ClientUpdateMsg],
    clients: usize,
    round: usize,
    d: usize,
) -> Result<Vec<&ClientUpdateMsg>> {
    let mut slots: Vec<Option<&ClientUpdateMsg>> = vec![None; clients];
    for u in updates {
        if u.id >= clients {
            return Err(Error::Protocol(format!("update from unknown client {}", u.id)));
        }
        if u.round != round {
            return Err(Error::Protocol(format!(
                "client {} sent an update for round {}, expected round {round}",
                u.id, u.round
            )));
        }
        check_dim(d, u.w.d())?;
        if slots[u.id].replace(u).is_some() {
            return Err(Error::Protocol(format!("duplicate update from client {} in round {round}", u.id)));
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(id, u)| u.ok_or_else(|| Error::Protocol(format!("missing update from client {id} in round {round}"))))
        .collect()
}

fn consensus_from_ordered(
    ordered: &[&ClientUpdateMsg],
    gamma: &[f64],
    hp: &HyperParams,
) -> Result<(GraphVector, f64)> {
    let d = ordered[0].w.d();
    let c_gamma: f64 = gamma.iter().sum();
    let mut avg = vec![0.0; ordered[0].w.weights().len()];
    for (u, g) in ordered.iter().zip(gamma) {
        for (acc, w) in avg.iter_mut().zip(u.w.weights()) {
            *acc += g * w;
        }
    }
    for v in &mut avg {
        *v /= c_gamma;
    }
    let mu = hp.lambda / (c_gamma * hp.rho());
    Ok((GraphVector::new(d, soft_threshold(&avg, mu))?, mu))
}

fn gamma_from_ordered(ordered: &[&ClientUpdateMsg], w_con: &GraphVector, hp: &HyperParams) -> Vec<f64> {
    ordered
        .iter()
        .map(|u| 1.0 / (dist2_sq(u.w.weights(), w_con.weights()).sqrt() + hp.eps_gamma))
        .collect()
}

/// Weighted-average-then-shrink consensus update. Returns the new consensus and `mu`.
///
/// `gamma[i]` is the weight of client `i`; updates may arrive in any order.
pub fn consensus_update(
    updates: &[ClientUpdateMsg],
    gamma: &[f64],
    round: usize,
    hp: &HyperParams,
) -> Result<(GraphVector, f64)> {
    let d = updates.first().ok_or_else(|| Error::Protocol("no client updates".into()))?.w.d();
    let ordered = order_updates(updates, gamma.len(), round, d)?;
    consensus_from_ordered(&ordered, gamma, hp)
}

/// Inverse-distance contribution weights, indexed by client id.
pub fn gamma_update(updates: &[ClientUpdateMsg], w_con: &GraphVector, round: usize, hp: &HyperParams) -> Result<Vec<f64>> {
    let ordered = order_updates(updates, updates.len(), round, w_con.d())?;
    Ok(gamma_from_ordered(&ordered, w_con, hp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn msg(id: usize, w: &[f64]) -> ClientUpdateMsg {
        ClientUpdateMsg { id, round: 0, w: GraphVector::new(d_of(w.len()), w.to_vec()).unwrap() }
    }

    fn d_of(p: usize) -> usize {
        (2..).find(|d| d * (d - 1) / 2 == p).unwrap()
    }

    #[test]
    fn consensus_hand_example() {
        let hp = HyperParams { lambda: 0.2, nu: 5.0, ..Default::default() };
        assert_eq!(hp.rho(), 1.0);
        let (w, mu) = consensus_update(&[msg(0, &[1.0]), msg(1, &[0.0])], &[1.0, 1.0], 0, &hp).unwrap();
        assert!((mu - 0.1).abs() < 1e-15);
        assert!((w.weights()[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn identical_clients_and_vanishing_lambda() {
        let hp = HyperParams { lambda: 1e-14, nu: 1.0, ..Default::default() };
        let w = [0.3, 0.0, 1.1];
        let (con, _) = consensus_update(&[msg(0, &w), msg(1, &w), msg(2, &w)], &[0.2, 0.5, 0.3], 0, &hp).unwrap();
        // mu = 1 / (C nu) does not vanish with lambda; the shrinkage stays at 1 / nu
        assert!((con.weights()[0] - (0.3 - 1.0f64).max(0.0)).abs() < 1e-15);
        let hp = HyperParams { lambda: 1e-12, nu: 1e12, ..Default::default() };
        let (con, _) = consensus_update(&[msg(0, &w), msg(1, &w)], &[1.0, 1.0], 0, &hp).unwrap();
        for (a, b) in con.weights().iter().zip(w) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn consensus_matches_coordinatewise_minimizer() {
        // argmin_{x >= 0} sum_i (rho gamma_i / 2)(w_ik - x)^2 + lambda x, coordinate by coordinate:
        // the stationary point of the quadratic plus linear term, clipped at zero
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let hp = HyperParams {
                lambda: rng.random_range(0.01..1.0),
                nu: rng.random_range(1.0..100.0),
                ..Default::default()
            };
            let gamma: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..5.0)).collect();
            let ws: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
            let updates: Vec<_> = ws.iter().enumerate().map(|(i, w)| msg(i, w)).collect();
            let (con, _) = consensus_update(&updates, &gamma, 0, &hp).unwrap();
            for k in 0..6 {
                let a: f64 = gamma.iter().map(|g| hp.rho() * g).sum();
                let b: f64 = gamma.iter().zip(&ws).map(|(g, w)| hp.rho() * g * w[k]).sum();
                let x = ((b - hp.lambda) / a).max(0.0);
                assert!((con.weights()[k] - x).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let hp = HyperParams { eps_gamma: 1e-8, ..Default::default() };
        let con = GraphVector::new(3, vec![1.0, 1.0, 1.0]).unwrap();
        let g = gamma_update(&[msg(0, &[1.0, 1.0, 1.0])], &con, 0, &hp).unwrap();
        assert!((g[0] - 1e8).abs() < 1e-6);
        let hp = HyperParams { eps_gamma: 1e-300, ..Default::default() };
        let g = gamma_update(&[msg(0, &[2.0, 1.0, 1.0]), msg(1, &[4.0, 1.0, 1.0])], &con, 0, &hp).unwrap();
        assert!((g[0] / g[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn closer_clients_get_larger_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let hp = HyperParams::default();
        for _ in 0..100 {
            let con = GraphVector::new(4, (0..6).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
            let updates: Vec<_> = (0..3)
                .map(|i| msg(i, &(0..6).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>()))
                .collect();
            let g = gamma_update(&updates, &con, 0, &hp).unwrap();
            let dist: Vec<f64> = updates.iter().map(|u| dist2_sq(u.w.weights(), con.weights())).collect();
            for i in 0..3 {
                assert!(g[i] > 0.0 && g[i] <= 1.0 / hp.eps_gamma);
                for j in 0..3 {
                    assert_eq!(g[i] > g[j], dist[i] < dist[j]);
                }
            }
        }
    }

    #[test]
    fn first_round_is_plain_average() {
        let hp = HyperParams { lambda: 0.1, nu: 2.0, ..Default::default() };
        let mut s = ServerState::new(2, GraphVector::zeros(3)).unwrap();
        let out = s.server_round(&[msg(1, &[1.0, 0.0, 0.5]), msg(0, &[0.5, 0.4, 0.5])], &hp).unwrap();
        // C = 1, mu = lambda / rho = 1 / nu
        let expected = [0.75 - 0.5, 0.0, 0.0];
        for (a, b) in s.consensus().weights().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(s.last_mu(), Some(0.5));
        assert_eq!(s.round(), 1);
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|b| b.round == 1 && b.w_con == *s.consensus()));
        assert_eq!(out[1].gamma, s.gamma()[1]);
    }

    #[test]
    fn identical_clients_receive_equal_weights() {
        let hp = HyperParams::default();
        let mut s = ServerState::new(3, GraphVector::zeros(3)).unwrap();
        let w = [0.4, 0.9, 0.0];
        s.server_round(&[msg(0, &w), msg(1, &w), msg(2, &w)], &hp).unwrap();
        assert!(s.gamma().iter().all(|g| *g == s.gamma()[0]));
    }

    #[test]
    fn permuting_clients_permutes_weights_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let hp = HyperParams::default();
        let ws: Vec<Vec<f64>> = (0..4).map(|_| (0..10).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let mut perm: Vec<usize> = (0..4).collect();
        perm.shuffle(&mut rng);
        let mut a = ServerState::new(4, GraphVector::zeros(5)).unwrap();
        let mut b = a.clone();
        a.server_round(&ws.iter().enumerate().map(|(i, w)| msg(i, w)).collect::<Vec<_>>(), &hp).unwrap();
        // client perm[i] now holds the graph of client i
        let permuted: Vec<_> = (0..4).map(|i| msg(perm[i], &ws[i])).collect();
        b.server_round(&permuted, &hp).unwrap();
        for (x, y) in a.consensus().weights().iter().zip(b.consensus().weights()) {
            assert!((x - y).abs() < 1e-14);
        }
        for i in 0..4 {
            assert!((a.gamma()[i] - b.gamma()[perm[i]]).abs() < 1e-9 * a.gamma()[i]);
        }
    }

    #[test]
    fn full_round_matches_straight_line_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let hp = HyperParams { lambda: 0.3, nu: 4.0, eps_gamma: 1e-6, ..Default::default() };
        let ws: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| rng.random_range(0.0..2.0)).collect()).collect();
        let gamma0 = [0.7, 1.9, 0.4];
        let mut s = ServerState::new(3, GraphVector::zeros(4)).unwrap();
        s.gamma = gamma0.to_vec();
        s.server_round(&ws.iter().enumerate().map(|(i, w)| msg(i, w)).collect::<Vec<_>>(), &hp).unwrap();

        let c = gamma0[0] + gamma0[1] + gamma0[2];
        let mu = 0.3 / (c * 1.2);
        let mut con = [0.0; 6];
        for k in 0..6 {
            let avg = (gamma0[0] * ws[0][k] + gamma0[1] * ws[1][k] + gamma0[2] * ws[2][k]) / c;
            con[k] = if avg > mu { avg - mu } else { 0.0 };
            assert!((s.consensus().weights()[k] - con[k]).abs() < 1e-14);
        }
        for i in 0..3 {
            let mut sq = 0.0;
            for k in 0..6 {
                sq += (ws[i][k] - con[k]) * (ws[i][k] - con[k]);
            }
            assert!((s.gamma()[i] - 1.0 / (sq.sqrt() + 1e-6)).abs() < 1e-12 * s.gamma()[i]);
        }
    }

    #[test]
    fn protocol_violations() {
        let hp = HyperParams::default();
        let mut s = ServerState::new(2, GraphVector::zeros(2)).unwrap();
        let dup = [msg(0, &[1.0]), msg(0, &[1.0])];
        assert!(matches!(s.server_round(&dup, &hp), Err(Error::Protocol(_))));
        assert!(matches!(s.server_round(&[msg(0, &[1.0])], &hp), Err(Error::Protocol(_))));
        assert!(matches!(s.server_round(&[msg(0, &[1.0]), msg(2, &[1.0])], &hp), Err(Error::Protocol(_))));
        let stale = ClientUpdateMsg { id: 1, round: 5, w: GraphVector::zeros(2) };
        assert!(matches!(s.server_round(&[msg(0, &[1.0]), stale], &hp), Err(Error::Protocol(_))));
        assert!(s.server_round(&[msg(0, &[1.0]), msg(1, &[1.0, 0.0, 0.0])], &hp).is_err());
        assert_eq!(s.round(), 0);
        assert!(ServerState::new(0, GraphVector::zeros(2)).is_err());
    }
}
