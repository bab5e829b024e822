//! Convex graph partitioner: convexity graph, label propagation, then a
//! linear classifier trained on the labelled vertices.

mod alp;
mod convexity;
mod graph;
mod lsvc;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use alp::{alp, alp_with_cap, community_count, compact, DEFAULT_MAX_SWEEPS};
pub use convexity::{estimate_convexity_measure, uniform_in_ball, DEFAULT_SEGMENT_CHECKS};
pub use graph::{build_convexity_graph, graph_sample_count, ConvexityGraph};
pub use lsvc::{fit_binary, train_lsvc, BinaryFit, LinearClassifier, LsvcParams, Penalty};

use crate::model::{CountedPerformanceFunction, Level};
use crate::rng::RngStream;
use crate::Result;

/// Level sample indices assigned to one partition label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCell {
    pub label: usize,
    pub members: Vec<usize>,
}

/// A partition of the input space restricted to a level.
///
/// `classifier` is `None` for the single-set partition. Cells without level
/// samples are omitted; members are in ascending level order.
#[derive(Debug, Clone)]
pub struct Partition {
    pub classifier: Option<Arc<LinearClassifier>>,
    pub cells: Vec<PartitionCell>,
}

impl Partition {
    pub fn single(level_len: usize) -> Self {
        Self {
            classifier: None,
            cells: vec![PartitionCell {
                label: 0,
                members: (0..level_len).collect(),
            }],
        }
    }

    /// Assigns every level sample to the classifier's cell. Falls back to the
    /// single-set partition when only one cell is populated.
    pub fn from_classifier(classifier: LinearClassifier, level: &Level) -> Self {
        let mut cells: Vec<PartitionCell> = classifier
            .classes()
            .iter()
            .map(|&label| PartitionCell {
                label,
                members: Vec::new(),
            })
            .collect();
        for (i, s) in level.samples().iter().enumerate() {
            let label = classifier.predict(&s.point);
            if let Some(cell) = cells.iter_mut().find(|c| c.label == label) {
                cell.members.push(i);
            }
        }
        cells.retain(|c| !c.members.is_empty());
        if cells.len() <= 1 {
            return Self::single(level.len());
        }
        Self {
            classifier: Some(Arc::new(classifier)),
            cells,
        }
    }

    pub fn is_single(&self) -> bool {
        self.classifier.is_none()
    }
}

/// Splits a level into cells. Implementations must be deterministic given
/// the stream.
pub trait Partitioner: Send + Sync {
    fn partition(
        &self,
        level: &Level,
        pf: &CountedPerformanceFunction,
        graph_budget: u64,
        stream: &RngStream,
    ) -> Result<Partition>;
}

/// Never splits; BSuS with this partitioner reproduces SuS.
#[derive(Debug, Clone, Copy, Default)]
pub struct SingleSetPartitioner;

impl Partitioner for SingleSetPartitioner {
    fn partition(
        &self,
        level: &Level,
        _pf: &CountedPerformanceFunction,
        _graph_budget: u64,
        _stream: &RngStream,
    ) -> Result<Partition> {
        Ok(Partition::single(level.len()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConvexGraphPartitioner {
    pub params: LsvcParams,
}

impl ConvexGraphPartitioner {
    pub fn new(params: LsvcParams) -> Self {
        Self { params }
    }
}

impl Partitioner for ConvexGraphPartitioner {
    fn partition(
        &self,
        level: &Level,
        pf: &CountedPerformanceFunction,
        graph_budget: u64,
        stream: &RngStream,
    ) -> Result<Partition> {
        cgp_partition(level, pf, graph_budget, self.params, stream)
    }
}

/// Moves every member of a one-vertex community into the community of its
/// nearest (Euclidean) vertex among communities with at least two members.
/// Returns compacted labels; when no community has two members every vertex
/// ends up in community 0.
pub fn merge_singletons(points: &[&[f64]], labels: &[usize]) -> Vec<usize> {
    let k = community_count(labels);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let anchors: Vec<usize> = (0..labels.len()).filter(|&v| sizes[labels[v]] >= 2).collect();
    if anchors.is_empty() {
        return vec![0; labels.len()];
    }
    let merged: Vec<usize> = labels
        .iter()
        .enumerate()
        .map(|(v, &l)| {
            if sizes[l] >= 2 {
                return l;
            }
            let nearest = anchors
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    sq_dist(points[v], points[a])
                        .total_cmp(&sq_dist(points[v], points[b]))
                        .then(a.cmp(&b))
                })
                .expect("anchors non-empty");
            labels[nearest]
        })
        .collect();
    compact(&merged)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// The full pipeline on one level.
pub fn cgp_partition(
    level: &Level,
    pf: &CountedPerformanceFunction,
    graph_budget: u64,
    params: LsvcParams,
    stream: &RngStream,
) -> Result<Partition> {
    if level.len() < 2 {
        return Ok(Partition::single(level.len()));
    }
    let graph = build_convexity_graph(level, pf, graph_budget, &stream.child(0))?;
    let labels = alp(&graph, &stream.child(1));
    if community_count(&labels) <= 1 {
        return Ok(Partition::single(level.len()));
    }
    let points: Vec<&[f64]> = graph
        .vertices()
        .iter()
        .map(|&i| level.samples()[i].point.as_slice())
        .collect();
    let labels = merge_singletons(&points, &labels);
    if community_count(&labels) <= 1 {
        return Ok(Partition::single(level.len()));
    }
    let owned: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    let classifier = train_lsvc(&owned, &labels, params)?;
    Ok(Partition::from_classifier(classifier, level))
}
