use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cgp::{LinearClassifier, Partitioner};
use crate::model::{CountedPerformanceFunction, EvaluatedSample, InputModel, Level, RegionConstraint};
use crate::rng::{tags, RngStream};
use crate::sus::{global_stop, grow_level, initial_level, local_stop, StopCondition, StopReason, SusConfig};
use crate::Result;

/// Which open leaf to expand next.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChooseStrategy {
    /// The open leaf with the smallest creation index.
    #[default]
    Fifo,
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsusConfig {
    pub sus: SusConfig,
    /// Performance evaluations available to each convexity graph at the root;
    /// branches inherit a share proportional to their size.
    pub graph_budget: u64,
    pub choose: ChooseStrategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Open,
    Expanded,
    Stopped(StopReason),
}

/// The partition applied when a node was expanded. Child nodes refer to
/// their cell by index into `labels`.
#[derive(Debug, Clone)]
pub struct Split {
    pub classifier: Option<Arc<LinearClassifier>>,
    pub labels: Vec<usize>,
}

impl Split {
    pub fn cell_contains(&self, cell: usize, point: &[f64]) -> bool {
        match &self.classifier {
            Some(c) => c.predict(point) == self.labels[cell],
            None => true,
        }
    }
}

/// One `(level, region, exceedance threshold)` node.
#[derive(Debug, Clone)]
pub struct BranchNode {
    pub(crate) id: usize,
    pub(crate) parent: Option<usize>,
    pub(crate) cell: Option<usize>,
    pub(crate) depth: usize,
    pub(crate) level: Level,
    pub(crate) region: RegionConstraint,
    pub(crate) threshold: f64,
    pub(crate) children: Vec<usize>,
    pub(crate) status: NodeStatus,
    pub(crate) chains: usize,
    pub(crate) graph_budget: u64,
    pub(crate) split: Option<Split>,
    pub(crate) stream: RngStream,
}

impl BranchNode {
    /// Creation index; also the node's position in [`BranchTree::nodes`].
    pub fn id(&self) -> usize {
        self.id
    }
    pub fn parent(&self) -> Option<usize> {
        self.parent
    }
    /// Index of this node's cell in the parent's [`Split`].
    pub fn cell(&self) -> Option<usize> {
        self.cell
    }
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn level(&self) -> &Level {
        &self.level
    }
    pub fn region(&self) -> &RegionConstraint {
        &self.region
    }
    /// Exceedance threshold defining the node's `F`; `-inf` at the root.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
    pub fn children(&self) -> &[usize] {
        &self.children
    }
    pub fn status(&self) -> NodeStatus {
        self.status
    }
    /// Chains allocated to this node (`n p` at the root).
    pub fn chains(&self) -> usize {
        self.chains
    }
    pub fn graph_budget(&self) -> u64 {
        self.graph_budget
    }
    pub fn split(&self) -> Option<&Split> {
        self.split.as_ref()
    }
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Output of [`run_bsus`]: nodes in creation order, root first.
#[derive(Debug, Clone)]
pub struct BranchTree {
    pub(crate) nodes: Vec<BranchNode>,
    pub(crate) level_size: usize,
    pub(crate) level_probability: f64,
    pub(crate) chain_length: usize,
    pub(crate) eval_count: u64,
}

impl BranchTree {
    pub fn root(&self) -> &BranchNode {
        &self.nodes[0]
    }
    pub fn nodes(&self) -> &[BranchNode] {
        &self.nodes
    }
    pub fn node(&self, id: usize) -> &BranchNode {
        &self.nodes[id]
    }
    pub fn leaves(&self) -> impl Iterator<Item = &BranchNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }
    pub fn level_size(&self) -> usize {
        self.level_size
    }
    pub fn level_probability(&self) -> f64 {
        self.level_probability
    }
    pub fn chain_length(&self) -> usize {
        self.chain_length
    }
    /// Performance evaluations spent, graph midpoints included.
    pub fn eval_count(&self) -> u64 {
        self.eval_count
    }
    /// Every sample of every node.
    pub fn all_samples(&self) -> impl Iterator<Item = &EvaluatedSample> {
        self.nodes.iter().flat_map(|n| n.level.samples())
    }
}

/// Largest-remainder apportionment of `total` in proportion to `weights`;
/// remainder ties go to the lower index.
pub fn largest_remainder(total: u64, weights: &[u64]) -> Vec<u64> {
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut out = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    for &w in weights {
        let scaled = total as u128 * w as u128;
        out.push((scaled / sum) as u64);
        remainders.push(scaled % sum);
    }
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
    for &i in order.iter().take((total - assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Chain counts for the cells of a branching level: quotas `p |cell|`
/// apportioned so that they sum to `round(p sum |cell|)`. A cell may get 0.
pub fn allocate_chains(subset_sizes: &[usize], level_probability: f64) -> Vec<usize> {
    let chain_length = (1.0 / level_probability).round() as usize;
    let total: usize = subset_sizes.iter().sum();
    let chains = (total + chain_length / 2) / chain_length;
    let weights: Vec<u64> = subset_sizes.iter().map(|&s| s as u64).collect();
    largest_remainder(chains as u64, &weights)
        .into_iter()
        .map(|c| c as usize)
        .collect()
}

/// Runs Branching Subset Simulation.
pub fn run_bsus(
    config: &BsusConfig,
    model: &InputModel,
    pf: &CountedPerformanceFunction,
    partitioner: &dyn Partitioner,
    stop: &[StopCondition],
    stream: &RngStream,
) -> Result<BranchTree> {
    let sus = config.sus;
    let chain_length = sus.chain_length();
    let start = pf.count();
    let root = BranchNode {
        id: 0,
        parent: None,
        cell: None,
        depth: 0,
        level: initial_level(model, pf, sus.level_size(), stream)?,
        region: RegionConstraint::everywhere(),
        threshold: f64::NEG_INFINITY,
        children: Vec::new(),
        status: NodeStatus::Open,
        chains: sus.seeds_per_level(),
        graph_budget: config.graph_budget,
        split: None,
        stream: stream.child(tags::TREE),
    };
    let mut nodes = vec![root];
    let mut choose_step = 0u64;

    loop {
        if let Some(reason) = global_stop(stop, pf.count() - start) {
            for n in nodes.iter_mut().filter(|n| n.status == NodeStatus::Open) {
                n.status = NodeStatus::Stopped(reason);
            }
            break;
        }
        let open: Vec<usize> = nodes
            .iter()
            .filter(|n| n.status == NodeStatus::Open)
            .map(|n| n.id)
            .collect();
        let Some(&id) = (match config.choose {
            ChooseStrategy::Fifo => open.first(),
            ChooseStrategy::UniformRandom if open.is_empty() => None,
            ChooseStrategy::UniformRandom => {
                let mut rng = stream.tagged(tags::CHOOSE, choose_step).rng();
                choose_step += 1;
                Some(&open[rng.random_range(0..open.len())])
            }
        }) else {
            break;
        };

        let node = &nodes[id];
        if let Some(reason) = local_stop(stop, &node.level, node.depth, chain_length) {
            nodes[id].status = NodeStatus::Stopped(reason);
            continue;
        }

        let partition = partitioner.partition(
            &node.level,
            pf,
            node.graph_budget,
            &node.stream.child(tags::PARTITION),
        )?;
        let sizes: Vec<usize> = partition.cells.iter().map(|c| c.members.len()).collect();
        let chains = allocate_chains(&sizes, sus.level_probability());
        let budgets = largest_remainder(
            node.graph_budget,
            &sizes.iter().map(|&s| s as u64).collect::<Vec<_>>(),
        );

        let mut children = Vec::with_capacity(partition.cells.len());
        for (ci, cell) in partition.cells.iter().enumerate() {
            let region = match &partition.classifier {
                Some(c) => node.region.refine(Arc::clone(c), cell.label),
                None => node.region.clone(),
            };
            let child_stream = node.stream.tagged(tags::CELL, ci as u64);
            let (threshold, level, status) = if chains[ci] == 0 {
                (
                    node.threshold,
                    node.level.subset(&cell.members),
                    NodeStatus::Stopped(StopReason::NoChains),
                )
            } else {
                let samples: Vec<&EvaluatedSample> =
                    cell.members.iter().map(|&i| &node.level.samples()[i]).collect();
                let (threshold, level) = grow_level(
                    &samples,
                    chains[ci],
                    chain_length,
                    &region,
                    pf,
                    &sus.proposal(),
                    &child_stream,
                )?;
                (threshold, level, NodeStatus::Open)
            };
            children.push(BranchNode {
                id: nodes.len() + ci,
                parent: Some(id),
                cell: Some(ci),
                depth: node.depth + 1,
                level,
                region,
                threshold,
                children: Vec::new(),
                status,
                chains: chains[ci],
                graph_budget: budgets[ci],
                split: None,
                stream: child_stream,
            });
        }
        let split = Split {
            classifier: partition.classifier.clone(),
            labels: partition.cells.iter().map(|c| c.label).collect(),
        };
        let parent = &mut nodes[id];
        parent.children = children.iter().map(|c| c.id).collect();
        parent.split = Some(split);
        parent.status = NodeStatus::Expanded;
        nodes.extend(children);
    }

    Ok(BranchTree {
        nodes,
        level_size: sus.level_size(),
        level_probability: sus.level_probability(),
        chain_length,
        eval_count: pf.count() - start,
    })
}
