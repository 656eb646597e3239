//! Comparison methods sharing the local solver: independent per-client
//! learning and one global graph learned from all clients' data.

use rayon::prelude::*;

use crate::client::{solve_local_to_convergence, SolveOutcome};
use crate::error::{Error, Result};
use crate::graph::GraphVector;
use crate::objective::{DistanceVector, HyperParams};

/// Learns every client's graph on its own data only.
pub fn solve_igl(summaries: &[DistanceVector], hp: &HyperParams, tol: f64, max_iter: usize) -> Result<Vec<SolveOutcome>> {
    summaries
        .par_iter()
        .map(|z| solve_local_to_convergence(z, &GraphVector::zeros(z.d()), 0.0, hp, tol, max_iter))
        .collect()
}

/// Sample-weighted average of the client objectives, `sum_i (N_i / N') g_i(w)`.
///
/// This is `(1/N') sum_i z_i'w - alpha 1'log(Sw + zeta) + 2 beta ||w||^2`,
/// i.e. a single local problem on the summed distances with `N = N'`.
pub fn pooled_problem(summaries: &[DistanceVector]) -> Result<DistanceVector> {
    if summaries.is_empty() {
        return Err(Error::InvalidInput("no client data".into()));
    }
    DistanceVector::pooled(&summaries.iter().collect::<Vec<_>>())
}

/// Learns one graph for all clients from the pooled objective.
pub fn solve_global(summaries: &[DistanceVector], hp: &HyperParams, tol: f64, max_iter: usize) -> Result<SolveOutcome> {
    let pooled = pooled_problem(summaries)?;
    solve_local_to_convergence(&pooled, &GraphVector::zeros(pooled.d()), 0.0, hp, tol, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{local_objective, pairwise_distance};
    use crate::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn summary(seed: u64, d: usize, n: usize) -> DistanceVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pairwise_distance(&Matrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn identical_data_gives_identical_graphs() {
        let z = summary(1, 5, 20);
        let hp = HyperParams::default();
        let out = solve_igl(&[z.clone(), z.clone()], &hp, 1e-8, 100_000).unwrap();
        assert_eq!(out[0], out[1]);
        assert!(out[0].converged);
    }

    #[test]
    fn single_client_global_matches_igl() {
        let z = summary(2, 5, 20);
        let hp = HyperParams::default();
        let igl = solve_igl(std::slice::from_ref(&z), &hp, 1e-10, 200_000).unwrap();
        let global = solve_global(std::slice::from_ref(&z), &hp, 1e-10, 200_000).unwrap();
        // same problem up to the positive factor 1/N
        let a = local_objective(igl[0].w.weights(), &z, &hp);
        let b = local_objective(global.w.weights(), &z, &hp);
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn repeated_client_pooling_keeps_argmin() {
        let z = summary(3, 5, 20);
        let hp = HyperParams::default();
        let one = solve_global(std::slice::from_ref(&z), &hp, 1e-10, 200_000).unwrap();
        let three = solve_global(&[z.clone(), z.clone(), z.clone()], &hp, 1e-10, 200_000).unwrap();
        for (a, b) in one.w.weights().iter().zip(three.w.weights()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn pooled_objective_is_sample_weighted_average() {
        let zs = [summary(4, 4, 10), summary(5, 4, 30)];
        let hp = HyperParams::default();
        let pooled = pooled_problem(&zs).unwrap();
        assert_eq!(pooled.n(), 40);
        let w = [0.2, 0.5, 0.0, 0.1, 0.7, 0.3];
        let direct = 0.25 * local_objective(&w, &zs[0], &hp) + 0.75 * local_objective(&w, &zs[1], &hp);
        assert!((local_objective(&w, &pooled, &hp) - direct).abs() < 1e-12);
    }

    #[test]
    fn global_argmin_invariant_under_rescaling() {
        // doubling every summary and its sample count leaves the pooled problem unchanged
        let zs = [summary(6, 5, 10), summary(7, 5, 25)];
        let doubled: Vec<DistanceVector> = zs
            .iter()
            .map(|z| DistanceVector::new(5, z.values().iter().map(|v| 2.0 * v).collect(), 2 * z.n()).unwrap())
            .collect();
        let hp = HyperParams::default();
        let a = solve_global(&zs, &hp, 1e-10, 200_000).unwrap();
        let b = solve_global(&doubled, &hp, 1e-10, 200_000).unwrap();
        for (x, y) in a.w.weights().iter().zip(b.w.weights()) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}
