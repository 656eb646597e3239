//! Synthetic benchmark data: RBF ground-truth graphs, heterogeneous graph
//! families and smooth signals.
//!
//! Signals on a graph with Laplacian `L` are drawn from
//! `N(0, pinv(L) + sigma_w^2 I)`, so that strongly connected nodes carry
//! similar values.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{edge_count, edge_pairs, GraphVector};
use crate::Matrix;

/// Eigenvalues of the Laplacian below this are treated as zero in the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Range of the weights given to randomly added heterogeneity edges.
pub const ADDED_EDGE_WEIGHT: std::ops::Range<f64> = 0.7..1.0;

/// Mixes a master seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gaussian kernel weights `exp(-dist^2 / (2 sigma_r^2))` between points,
/// with weights below `threshold` removed.
pub fn rbf_graph_from_points(points: &[[f64; 2]], sigma_r: f64, threshold: f64) -> Result<GraphVector> {
    let d = points.len();
    let w = edge_pairs(d)
        .map(|(i, j)| {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            let k = (-(dx * dx + dy * dy) / (2.0 * sigma_r * sigma_r)).exp();
            if k < threshold {
                0.0
            } else {
                k
            }
        })
        .collect();
    GraphVector::new(d, w)
}

/// RBF graph on `d` points drawn uniformly in the unit square.
pub fn generate_rbf_graph(d: usize, sigma_r: f64, threshold: f64, seed: u64) -> Result<GraphVector> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 nodes, got {d}")));
    }
    if !(sigma_r > 0.0) {
        return Err(Error::InvalidInput(format!("kernel width must be positive, got {sigma_r}")));
    }
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!("threshold must lie in [0, 1), got {threshold}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<[f64; 2]> = (0..d).map(|_| [rng.random(), rng.random()]).collect();
    rbf_graph_from_points(&points, sigma_r, threshold)
}

/// Ground truth for one heterogeneous benchmark instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFamily {
    pub base: GraphVector,
    /// Edges of `base` shared by every client.
    pub consensus_truth: GraphVector,
    pub locals_truth: Vec<GraphVector>,
    /// Fraction of `base` edges kept in the consensus.
    pub q: f64,
    pub seed: u64,
}

impl GraphFamily {
    pub fn clients(&self) -> usize {
        self.locals_truth.len()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.locals_truth.iter().all(|g| *g == self.consensus_truth)
    }
}

/// Keeps `ceil(q |E0|)` random edges of `g0` as the consensus and gives every
/// client the consensus plus `|E0| - ceil(q |E0|)` random new edges, so that
/// each local graph has exactly `|E0|` edges.
///
/// Added edges get weights uniform in [`ADDED_EDGE_WEIGHT`]; different clients
/// may add the same pair.
pub fn make_family(g0: &GraphVector, clients: usize, q: f64, seed: u64) -> Result<GraphFamily> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidInput(format!("q must lie in (0, 1], got {q}")));
    }
    if clients == 0 {
        return Err(Error::InvalidInput("at least one client is required".into()));
    }
    let d = g0.d();
    let base_edges: Vec<usize> = (0..edge_count(d)).filter(|&k| g0.weights()[k] != 0.0).collect();
    let total = base_edges.len();
    if total == 0 {
        return Err(Error::InvalidInput("base graph has no edges".into()));
    }
    // q * total can land just above an integer in floating point
    let keep = ((q * total as f64) - 1e-9).ceil().max(0.0) as usize;
    if keep == 0 {
        return Err(Error::InvalidInput(format!("q = {q} keeps no edges of {total}")));
    }
    let add = total - keep;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut kept = sample(&mut rng, total, keep).into_vec();
    kept.sort_unstable();
    let mut con = vec![0.0; edge_count(d)];
    for idx in kept {
        let k = base_edges[idx];
        con[k] = g0.weights()[k];
    }
    let absent: Vec<usize> = (0..con.len()).filter(|&k| con[k] == 0.0).collect();
    if add > absent.len() {
        return Err(Error::InvalidInput(format!(
            "cannot add {add} edges: only {} node pairs are free",
            absent.len()
        )));
    }
    let locals = (0..clients)
        .map(|_| {
            let mut w = con.clone();
            let mut picks = sample(&mut rng, absent.len(), add).into_vec();
            picks.sort_unstable();
            for idx in picks {
                w[absent[idx]] = rng.random_range(ADDED_EDGE_WEIGHT);
            }
            GraphVector::new(d, w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GraphFamily {
        base: g0.clone(),
        consensus_truth: GraphVector::new(d, con)?,
        locals_truth: locals,
        q,
        seed,
    })
}

/// Symmetric square root of `pinv(L) + sigma_w^2 I`.
pub fn signal_covariance_sqrt(g: &GraphVector, sigma_w: f64) -> DMatrix<f64> {
    let eig = g.to_laplacian().symmetric_eigen();
    let scale = DVector::from_iterator(
        g.d(),
        eig.eigenvalues.iter().map(|&l| {
            let inv = if l > PINV_CUTOFF { 1.0 / l } else { 0.0 };
            (inv + sigma_w * sigma_w).sqrt()
        }),
    );
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&scale) * v.transpose()
}

/// `pinv(L) + sigma_w^2 I` for the Laplacian of `g`.
pub fn signal_covariance(g: &GraphVector, sigma_w: f64) -> DMatrix<f64> {
    let s = signal_covariance_sqrt(g, sigma_w);
    &s * &s
}

/// Draws `n` independent smooth signals on `g` as the columns of a `d x n` matrix.
pub fn sample_smooth_signals(g: &GraphVector, n: usize, sigma_w: f64, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    if !(sigma_w >= 0.0 && sigma_w.is_finite()) {
        return Err(Error::InvalidInput(format!("noise scale must be nonnegative, got {sigma_w}")));
    }
    let root = signal_covariance_sqrt(g, sigma_w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = g.d();
    let noise: Vec<f64> = (0..d * n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(root * Matrix::from_column_slice(d, n, &noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_index;
    use rand::seq::SliceRandom;

    #[test]
    fn rbf_pair_examples() {
        let g = rbf_graph_from_points(&[[0.0, 0.0], [0.5, 0.0]], 0.5, 0.0).unwrap();
        assert!((g.weights()[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((g.weights()[0] - 0.6065).abs() < 1e-4);
        let g = rbf_graph_from_points(&[[0.0, 0.0], [0.5, 0.0]], 0.5, 0.7).unwrap();
        assert_eq!(g.weights()[0], 0.0);
        let g = rbf_graph_from_points(&[[0.3, 0.3], [0.3, 0.3]], 0.5, 0.7).unwrap();
        assert_eq!(g.weights()[0], 1.0);
    }

    #[test]
    fn rbf_graphs_are_nonempty_and_deterministic() {
        let mut empty = 0;
        for seed in 0..100 {
            let g = generate_rbf_graph(20, 0.5, 0.7, seed).unwrap();
            assert!(g.weights().iter().all(|w| *w == 0.0 || (0.7..=1.0).contains(w)));
            if g.num_edges() == 0 {
                empty += 1;
            }
        }
        assert_eq!(empty, 0);
        assert_eq!(generate_rbf_graph(20, 0.5, 0.7, 7).unwrap(), generate_rbf_graph(20, 0.5, 0.7, 7).unwrap());
        assert!(generate_rbf_graph(1, 0.5, 0.7, 0).is_err());
        assert!(generate_rbf_graph(5, 0.0, 0.7, 0).is_err());
        assert!(generate_rbf_graph(5, 0.5, 1.0, 0).is_err());
    }

    #[test]
    fn full_retention_gives_identical_locals() {
        let g0 = generate_rbf_graph(20, 0.5, 0.7, 1).unwrap();
        let fam = make_family(&g0, 5, 1.0, 2).unwrap();
        assert!(fam.locals_truth.iter().all(|g| *g == g0));
        assert_eq!(fam.consensus_truth, g0);
        assert!(fam.is_homogeneous());
    }

    #[test]
    fn small_retention_shares_only_consensus_edges() {
        let d = 8;
        let mut w = vec![0.0; edge_count(d)];
        for k in 0..10 {
            w[k * 2] = 0.8;
        }
        let g0 = GraphVector::new(d, w).unwrap();
        let fam = make_family(&g0, 2, 0.25, 3).unwrap();
        assert_eq!(fam.consensus_truth.num_edges(), 3);
        for g in &fam.locals_truth {
            assert_eq!(g.num_edges(), 10);
            for (i, j, w) in fam.consensus_truth.edges() {
                assert_eq!(g.weight(i, j), w);
            }
        }
        assert!(make_family(&g0, 2, 0.0, 3).is_err());
        assert!(make_family(&GraphVector::zeros(4), 2, 0.5, 3).is_err());
    }

    #[test]
    fn every_local_graph_keeps_the_base_edge_count() {
        for seed in 0..100 {
            let g0 = generate_rbf_graph(20, 0.5, 0.7, seed).unwrap();
            for q in [0.3, 0.5, 0.9] {
                let fam = make_family(&g0, 5, q, seed + 1000).unwrap();
                for g in &fam.locals_truth {
                    assert_eq!(g.num_edges(), g0.num_edges());
                    for (i, j, w) in fam.consensus_truth.edges() {
                        assert_eq!(g.weight(i, j), w);
                        assert_eq!(g0.weight(i, j), w);
                    }
                }
            }
        }
    }

    #[test]
    fn family_is_deterministic() {
        let g0 = generate_rbf_graph(20, 0.5, 0.7, 4).unwrap();
        assert_eq!(make_family(&g0, 5, 0.5, 9).unwrap(), make_family(&g0, 5, 0.5, 9).unwrap());
        let x = sample_smooth_signals(&g0, 10, 0.1, 5).unwrap();
        assert_eq!(x, sample_smooth_signals(&g0, 10, 0.1, 5).unwrap());
        assert_eq!(x.shape(), (20, 10));
    }

    #[test]
    fn empty_graph_gives_white_noise() {
        let g = GraphVector::zeros(4);
        let cov = signal_covariance(&g, 1.0);
        assert!((cov - DMatrix::identity(4, 4)).abs().max() < 1e-12);
        let x = sample_smooth_signals(&g, 20_000, 1.0, 6).unwrap();
        let mean = x.column_mean();
        assert!(mean.amax() < 0.05);
        let emp = &x * x.transpose() / 20_000.0;
        assert!((emp - DMatrix::identity(4, 4)).abs().max() < 0.05);
    }

    #[test]
    fn covariance_root_squares_to_pinv_plus_noise() {
        let g = GraphVector::new(4, vec![1.0, 0.0, 0.5, 2.0, 0.0, 0.8]).unwrap();
        let l = g.to_laplacian();
        let pinv = l.clone().pseudo_inverse(1e-10).unwrap();
        let cov = signal_covariance(&g, 0.3);
        assert!((cov - (pinv + DMatrix::identity(4, 4) * 0.09)).abs().max() < 1e-10);
        // disconnected graph with no noise stays positive semidefinite
        let mut w = vec![0.0; 6];
        w[edge_index(4, 0, 1)] = 1.0;
        let cov = signal_covariance(&GraphVector::new(4, w).unwrap(), 0.0);
        assert!(cov.symmetric_eigenvalues().min() > -1e-12);
    }

    #[test]
    fn signals_are_smoother_on_their_own_graph() {
        let mut wins = 0;
        let mut trials = 0;
        for seed in 0..20 {
            let g = generate_rbf_graph(20, 0.5, 0.7, seed).unwrap();
            let x = sample_smooth_signals(&g, 100, 0.1, seed + 100).unwrap();
            let energy = |h: &GraphVector| (x.transpose() * h.to_laplacian() * &x).trace() / 100.0;
            let own = energy(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10 {
                let mut perm: Vec<usize> = (0..20).collect();
                perm.shuffle(&mut rng);
                let a = g.to_adjacency();
                let permuted = DMatrix::from_fn(20, 20, |i, j| a[(perm[i], perm[j])]);
                trials += 1;
                if own < energy(&GraphVector::from_adjacency(&permuted).unwrap()) {
                    wins += 1;
                }
            }
        }
        assert!(wins as f64 >= 0.95 * trials as f64, "{wins}/{trials}");
    }
}
