//! Plain serializable view of a run tree, used by the CLI `report` command.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cgp::LinearClassifier;
use crate::sus::SusRun;

use super::tree::{BranchTree, NodeStatus};

/// `classifier` indexes [`TreeRecord::classifiers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseRecord {
    pub classifier: usize,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    /// `None` stands for the root's `-inf`.
    pub threshold: Option<f64>,
    pub region: Vec<ClauseRecord>,
    pub chains: usize,
    pub status: NodeStatus,
    pub points: Vec<Vec<f64>>,
    pub performances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub level_size: usize,
    pub level_probability: f64,
    pub eval_count: u64,
    pub classifiers: Vec<LinearClassifier>,
    pub nodes: Vec<NodeRecord>,
}

fn finite(t: f64) -> Option<f64> {
    t.is_finite().then_some(t)
}

impl TreeRecord {
    pub fn from_tree(tree: &BranchTree) -> Self {
        let mut pool: Vec<Arc<LinearClassifier>> = Vec::new();
        let nodes = tree
            .nodes()
            .iter()
            .map(|n| {
                let region = n
                    .region()
                    .clauses()
                    .iter()
                    .map(|c| {
                        let idx = match pool.iter().position(|p| Arc::ptr_eq(p, &c.classifier)) {
                            Some(i) => i,
                            None => {
                                pool.push(Arc::clone(&c.classifier));
                                pool.len() - 1
                            }
                        };
                        ClauseRecord {
                            classifier: idx,
                            label: c.label,
                        }
                    })
                    .collect();
                NodeRecord {
                    id: n.id(),
                    parent: n.parent(),
                    threshold: finite(n.threshold()),
                    region,
                    chains: n.chains(),
                    status: n.status(),
                    points: n.level().samples().iter().map(|s| s.point.clone()).collect(),
                    performances: n.level().performances().collect(),
                }
            })
            .collect();
        Self {
            level_size: tree.level_size(),
            level_probability: tree.level_probability(),
            eval_count: tree.eval_count(),
            classifiers: pool.iter().map(|c| (**c).clone()).collect(),
            nodes,
        }
    }

    /// A SuS run as a path-shaped tree.
    pub fn from_sus(run: &SusRun, level_size: usize, level_probability: f64) -> Self {
        let last = run.levels().len() - 1;
        let nodes = run
            .levels()
            .iter()
            .enumerate()
            .map(|(k, level)| NodeRecord {
                id: k,
                parent: k.checked_sub(1),
                threshold: k.checked_sub(1).map(|j| run.thresholds()[j]),
                region: Vec::new(),
                chains: if k == 0 {
                    (level_size as f64 * level_probability).round() as usize
                } else {
                    level.len() / run.chain_length()
                },
                status: match (k == last, run.stop_reason()) {
                    (true, Some(r)) => NodeStatus::Stopped(r),
                    (true, None) => NodeStatus::Open,
                    _ => NodeStatus::Expanded,
                },
                points: level.samples().iter().map(|s| s.point.clone()).collect(),
                performances: level.performances().collect(),
            })
            .collect();
        Self {
            level_size,
            level_probability,
            eval_count: run.eval_count(),
            classifiers: Vec::new(),
            nodes,
        }
    }

    /// One line per node: id, parent, threshold, sample count, status.
    pub fn summary_lines(&self) -> Vec<String> {
        self.nodes
            .iter()
            .map(|n| {
                let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
                let threshold = n.threshold.map_or("-inf".to_string(), |t| format!("{t:.6}"));
                let status = match n.status {
                    NodeStatus::Open => "open",
                    NodeStatus::Expanded => "expanded",
                    NodeStatus::Stopped(r) => r.as_str(),
                };
                format!(
                    "node {:>4}  parent {:>4}  threshold {:>12}  samples {:>6}  chains {:>4}  {}",
                    n.id,
                    parent,
                    threshold,
                    n.points.len(),
                    n.chains,
                    status
                )
            })
            .collect()
    }
}
