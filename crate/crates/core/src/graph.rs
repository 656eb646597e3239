//! Graph representations and the linear/proximal primitives built on them.
//!
//! An undirected weighted graph on `d` nodes without self-loops is stored as
//! the vector of its `p = d(d-1)/2` upper-triangle adjacency entries in
//! row-major order: `(0,1), (0,2), .., (0,d-1), (1,2), .., (d-2,d-1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Number of free edge weights of a graph on `d` nodes.
#[inline]
pub fn edge_count(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// Position of edge `(i, j)`, `i < j < d`, in the upper-triangle vector.
#[inline]
pub fn edge_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * d - i * (i + 1) / 2 + (j - i - 1)
}

/// Inverse of [`edge_index`].
pub fn edge_pair(d: usize, k: usize) -> (usize, usize) {
    debug_assert!(k < edge_count(d));
    let p = edge_count(d);
    // count edges from position k to the end: they fill the last rows of the triangle
    let rest = p - 1 - k;
    let mut r = ((((8 * rest + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    // guard against rounding in the square root
    while (r + 1) * (r + 2) / 2 <= rest {
        r += 1;
    }
    while r * (r + 1) / 2 > rest {
        r -= 1;
    }
    let i = d - 2 - r;
    let j = k - edge_index(d, i, i + 1) + i + 1;
    (i, j)
}

/// Iterator over `(i, j)` node pairs in storage order.
pub fn edge_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |i| (i + 1..d).map(move |j| (i, j)))
}

/// Nonnegative upper-triangle edge-weight vector of an undirected graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphVector {
    d: usize,
    w: Vec<f64>,
}

impl GraphVector {
    /// Builds a graph from its edge weights, rejecting negative or non-finite entries.
    pub fn new(d: usize, w: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("graph needs at least 2 nodes, got {d}")));
        }
        check_dim(edge_count(d), w.len())?;
        if let Some(k) = w.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "edge weight {} at position {k} is not a finite nonnegative number",
                w[k]
            )));
        }
        Ok(Self { d, w })
    }

    /// Empty graph on `d` nodes.
    pub fn zeros(d: usize) -> Self {
        assert!(d >= 2, "graph needs at least 2 nodes");
        Self { d, w: vec![0.0; edge_count(d)] }
    }

    /// Reads the strict upper triangle of a symmetric matrix.
    pub fn from_adjacency(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidInput(format!(
                "adjacency must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let d = a.nrows();
        Self::new(d, edge_pairs(d).map(|(i, j)| a[(i, j)]).collect())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.w[edge_index(self.d, i, j)],
            std::cmp::Ordering::Greater => self.w[edge_index(self.d, j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Nonzero edges as `(i, j, weight)` in storage order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        edge_pairs(self.d).zip(&self.w).filter(|(_, w)| **w != 0.0).map(|((i, j), w)| (i, j, *w))
    }

    pub fn num_edges(&self) -> usize {
        self.w.iter().filter(|w| **w != 0.0).count()
    }

    pub fn to_adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.d, self.d);
        for ((i, j), w) in edge_pairs(self.d).zip(&self.w) {
            a[(i, j)] = *w;
            a[(j, i)] = *w;
        }
        a
    }

    /// Combinatorial Laplacian `D - A`.
    pub fn to_laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.to_adjacency();
        let deg = DegreeOperator::new(self.d).apply_unchecked(&self.w);
        for (i, di) in deg.into_iter().enumerate() {
            l[(i, i)] = di;
        }
        l
    }
}

/// Matrix-free degree operator `S` with `(S w)[i] = sum_{j != i} A[i, j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeOperator {
    d: usize,
}

impl DegreeOperator {
    pub fn new(d: usize) -> Self {
        Self { d }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Node degrees of the graph with edge weights `w`.
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(edge_count(self.d), w.len())?;
        Ok(self.apply_unchecked(w))
    }

    /// Adjoint: the entry at edge `(i, j)` is `v[i] + v[j]`.
    pub fn adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d, v.len())?;
        Ok(self.adjoint_unchecked(v))
    }

    pub(crate) fn apply_unchecked(&self, w: &[f64]) -> Vec<f64> {
        let mut deg = vec![0.0; self.d];
        for ((i, j), wk) in edge_pairs(self.d).zip(w) {
            deg[i] += wk;
            deg[j] += wk;
        }
        deg
    }

    pub(crate) fn adjoint_unchecked(&self, v: &[f64]) -> Vec<f64> {
        edge_pairs(self.d).map(|(i, j)| v[i] + v[j]).collect()
    }
}

/// Euclidean projection onto the nonnegative orthant.
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// Proximal operator of `mu * ||.||_1`.
pub fn soft_threshold(v: &[f64], mu: f64) -> Vec<f64> {
    debug_assert!(mu >= 0.0);
    v.iter().map(|x| x.signum() * (x.abs() - mu).max(0.0)).collect()
}

/// Projects onto the nonnegative orthant and wraps the result as a graph on `d` nodes.
pub fn project_graph(d: usize, v: &[f64]) -> Result<GraphVector> {
    GraphVector::new(d, project_nonneg(v))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist2_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smallest eigenvalue and matching eigenvector of a symmetric matrix.
pub fn min_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = m.clone().symmetric_eigen();
    let (k, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (k, *v))
        .expect("nonempty matrix");
    (val, eig.eigenvectors.column(k).into_owned())
}
