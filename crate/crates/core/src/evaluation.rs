//! Edge-recovery metrics against ground-truth graphs.

use serde::Serialize;

use crate::datagen::GraphFamily;
use crate::error::{check_dim, Error, Result};
use crate::graph::{dist2_sq, norm2, GraphVector};

/// Default weight above which an estimated edge counts as present.
pub const DEFAULT_EDGE_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphMetrics {
    pub precision: f64,
    pub recall: f64,
    pub fs: f64,
    /// Relative weight error; `None` when the truth is the empty graph.
    pub re: Option<f64>,
    pub edge_threshold: f64,
}

/// Precision, recall and F-score of the edges of `est` (weights above
/// `edge_threshold`) against the nonzero edges of `truth`, plus the relative
/// error of the raw weights.
pub fn score_graph(est: &GraphVector, truth: &GraphVector, edge_threshold: f64) -> Result<GraphMetrics> {
    check_dim(truth.d(), est.d())?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (e, t) in est.weights().iter().zip(truth.weights()) {
        match (*e > edge_threshold, *t != 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let fs = ratio(2 * tp, 2 * tp + fp + fn_);
    let truth_norm = norm2(truth.weights());
    let re = (truth_norm > 0.0).then(|| dist2_sq(est.weights(), truth.weights()).sqrt() / truth_norm);
    Ok(GraphMetrics { precision, recall, fs, re, edge_threshold })
}

/// Scores for one method on one benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunScores {
    pub per_client: Vec<GraphMetrics>,
    /// Per-client metrics averaged over clients.
    pub local_avg: GraphMetrics,
    /// Consensus (or single global graph) against the consensus truth.
    pub consensus: Option<GraphMetrics>,
}

pub fn average(metrics: &[GraphMetrics]) -> Result<GraphMetrics> {
    let first = metrics.first().ok_or_else(|| Error::InvalidInput("nothing to average".into()))?;
    let n = metrics.len() as f64;
    let mean = |f: fn(&GraphMetrics) -> f64| metrics.iter().map(f).sum::<f64>() / n;
    let re = metrics.iter().map(|m| m.re).sum::<Option<f64>>().map(|s| s / n);
    Ok(GraphMetrics {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        fs: mean(|m| m.fs),
        re,
        edge_threshold: first.edge_threshold,
    })
}

/// Scores each local estimate against its own truth and the consensus
/// estimate, if any, against the consensus truth.
pub fn score_run(
    locals: &[GraphVector],
    consensus: Option<&GraphVector>,
    family: &GraphFamily,
    edge_threshold: f64,
) -> Result<RunScores> {
    check_dim(family.clients(), locals.len())?;
    let per_client = locals
        .iter()
        .zip(&family.locals_truth)
        .map(|(est, truth)| score_graph(est, truth, edge_threshold))
        .collect::<Result<Vec<_>>>()?;
    let local_avg = average(&per_client)?;
    let consensus = consensus.map(|c| score_graph(c, &family.consensus_truth, edge_threshold)).transpose()?;
    Ok(RunScores { per_client, local_avg, consensus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(w: &[f64]) -> GraphVector {
        GraphVector::new(3, w.to_vec()).unwrap()
    }

    #[test]
    fn partial_recovery() {
        let m = score_graph(&g(&[0.5, 0.0, 0.0]), &g(&[1.0, 1.0, 0.0]), 1e-4).unwrap();
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.fs - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_recovery() {
        let t = g(&[0.3, 0.0, 0.9]);
        let m = score_graph(&t, &t, 1e-4).unwrap();
        assert_eq!((m.precision, m.recall, m.fs, m.re), (1.0, 1.0, 1.0, Some(0.0)));
    }

    #[test]
    fn relative_error_example() {
        let est = GraphVector::new(3, vec![1.0, 0.0, 0.0]).unwrap();
        let truth = GraphVector::new(3, vec![1.0, 1.0, 0.0]).unwrap();
        let re = score_graph(&est, &truth, 1e-4).unwrap().re.unwrap();
        assert!((re - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cases() {
        let m = score_graph(&g(&[0.0; 3]), &g(&[0.0; 3]), 1e-4).unwrap();
        assert_eq!((m.precision, m.recall, m.fs, m.re), (0.0, 0.0, 0.0, None));
        // weights at or below the threshold do not count as edges
        let m = score_graph(&g(&[1e-4, 0.0, 0.0]), &g(&[1.0, 0.0, 0.0]), 1e-4).unwrap();
        assert_eq!(m.recall, 0.0);
        assert!(score_graph(&g(&[0.0; 3]), &GraphVector::zeros(4), 1e-4).is_err());
    }

    #[test]
    fn run_scores_average_over_clients() {
        let truth = g(&[1.0, 0.0, 1.0]);
        let family = GraphFamily {
            base: truth.clone(),
            consensus_truth: g(&[1.0, 0.0, 0.0]),
            locals_truth: vec![truth.clone(), truth.clone()],
            q: 0.5,
            seed: 0,
        };
        let perfect = score_run(&[truth.clone(), truth.clone()], Some(&family.consensus_truth), &family, 1e-4).unwrap();
        assert_eq!(perfect.local_avg.fs, 1.0);
        assert_eq!(perfect.local_avg.re, Some(0.0));
        assert_eq!(perfect.consensus.unwrap().fs, 1.0);

        let a = g(&[1.0, 0.0, 0.0]);
        let b = g(&[1.0, 1.0, 1.0]);
        let s1 = score_run(&[a.clone(), b.clone()], None, &family, 1e-4).unwrap();
        let s2 = score_run(&[b, a], None, &family, 1e-4).unwrap();
        assert_eq!(s1.local_avg, s2.local_avg);
        assert!(s1.consensus.is_none());
        assert!(score_run(&[truth], None, &family, 1e-4).is_err());
    }

    proptest! {
        #[test]
        fn fs_lies_between_precision_and_recall(
            est in prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], 10),
            truth in prop::collection::vec(prop_oneof![Just(0.0), 0.1..1.0f64], 10),
            scale in 0.5..3.0f64,
        ) {
            let e = GraphVector::new(5, est.clone()).unwrap();
            let t = GraphVector::new(5, truth).unwrap();
            let m = score_graph(&e, &t, 1e-4).unwrap();
            if m.precision + m.recall > 0.0 {
                prop_assert!(m.fs >= m.precision.min(m.recall) - 1e-15);
                prop_assert!(m.fs <= m.precision.max(m.recall) + 1e-15);
                prop_assert!((m.fs - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
            }
            // rescaling keeps the edge set (threshold 0 makes it exact) but moves RE
            let scaled = GraphVector::new(5, est.iter().map(|w| w * scale).collect()).unwrap();
            let a = score_graph(&e, &t, 0.0).unwrap();
            let b = score_graph(&scaled, &t, 0.0).unwrap();
            prop_assert_eq!((a.precision, a.recall, a.fs), (b.precision, b.recall, b.fs));
        }
    }
}
