//! Budgeted convexity graph on a level.
//!
//! Two samples are adjacent when the midpoint of their segment performs at
//! least as well as the weaker of the pair, i.e. the midpoint stays inside
//! the smallest exceedance region containing both.

use rand::seq::index;

use crate::model::{CountedPerformanceFunction, Level};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Number of vertices whose complete graph fits in `budget` evaluations:
/// `floor((1 + sqrt(1 + 8 n_e)) / 2)`, and 1 when the budget is zero.
pub fn graph_sample_count(budget: u64) -> usize {
    if budget < 1 {
        return 1;
    }
    let disc = 1 + 8 * budget;
    // floor((1 + sqrt(d)) / 2) only depends on floor(sqrt(d))
    disc.isqrt().div_ceil(2) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityGraph {
    /// Level indices of the vertices.
    vertices: Vec<usize>,
    /// Row-major symmetric adjacency with an empty diagonal.
    adjacency: Vec<bool>,
}

impl ConvexityGraph {
    pub fn from_adjacency(vertices: Vec<usize>, adjacency: Vec<Vec<bool>>) -> Result<Self> {
        let n = vertices.len();
        if adjacency.len() != n || adjacency.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig("adjacency must be square".into()));
        }
        let mut flat = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && (adjacency[i][j] || adjacency[j][i]) {
                    flat[i * n + j] = true;
                }
            }
        }
        Ok(Self {
            vertices,
            adjacency: flat,
        })
    }

    /// Graph on `n` vertices (level indices `0..n`) with the given edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![false; n * n];
        for &(a, b) in edges {
            if a != b {
                adjacency[a * n + b] = true;
                adjacency[b * n + a] = true;
            }
        }
        Self {
            vertices: (0..n).collect(),
            adjacency,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a * self.len() + b]
    }

    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.len();
        (0..n).filter(move |&u| self.adjacency[v * n + u])
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count() / 2
    }

    pub fn is_complete(&self) -> bool {
        let n = self.len();
        self.edge_count() == n * n.saturating_sub(1) / 2
    }
}

/// Subsamples `min(graph_sample_count(budget), |level|)` level samples
/// without replacement and spends one counted evaluation per pair on the
/// midpoint check.
pub fn build_convexity_graph(
    level: &Level,
    pf: &CountedPerformanceFunction,
    budget: u64,
    stream: &RngStream,
) -> Result<ConvexityGraph> {
    if level.is_empty() {
        return Err(Error::EmptyInput("level"));
    }
    let size = graph_sample_count(budget).min(level.len());
    let mut rng = stream.rng();
    let mut vertices = index::sample(&mut rng, level.len(), size).into_vec();
    vertices.sort_unstable();
    let samples = level.samples();
    let mut adjacency = vec![false; size * size];
    for a in 0..size {
        for b in (a + 1)..size {
            let (x, y) = (&samples[vertices[a]], &samples[vertices[b]]);
            let midpoint: Vec<f64> = x.point.iter().zip(&y.point).map(|(u, v)| 0.5 * (u + v)).collect();
            let mid = pf.evaluate_unchecked(midpoint);
            if mid.performance >= x.performance.min(y.performance) {
                adjacency[a * size + b] = true;
                adjacency[b * size + a] = true;
            }
        }
    }
    Ok(ConvexityGraph {
        vertices,
        adjacency,
    })
}
