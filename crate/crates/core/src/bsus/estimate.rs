//! Trimmed-tree estimators and conditional sampling.
//!
//! A tree is trimmed for a target threshold `b` by keeping exactly the nodes
//! whose threshold lies strictly below `b` (the root always survives). Every
//! surviving path then ends in a *term*: either a kept node that has no kept
//! children, or a partition cell whose child was removed. The estimate is the
//! sum of the term products, each factor being a fraction of one node's level.

use crate::estimator::{delta_squared_sum, product, Factor};
use crate::exec::{map_indexed, Execution};
use crate::mcmc::{run_chain, ChainTarget, ProposalSpec};
use crate::model::{CountedPerformanceFunction, EvaluatedSample, RegionConstraint};
use crate::rng::{tags, RngStream};
use crate::{Error, Result};

use super::tree::{BranchNode, BranchTree};

use rand::Rng;

/// Keeps the nodes with threshold `< b` whose parent is kept; ids are
/// renumbered in creation order.
pub fn trim_tree(tree: &BranchTree, b: f64) -> BranchTree {
    let mut remap: Vec<Option<usize>> = vec![None; tree.nodes.len()];
    let mut nodes: Vec<BranchNode> = Vec::new();
    for node in &tree.nodes {
        let keep = match node.parent {
            None => true,
            Some(p) => remap[p].is_some() && node.threshold < b,
        };
        if !keep {
            continue;
        }
        let mut kept = node.clone();
        kept.id = nodes.len();
        kept.parent = node.parent.and_then(|p| remap[p]);
        remap[node.id] = Some(kept.id);
        nodes.push(kept);
    }
    for node in &mut nodes {
        node.children = node.children.iter().filter_map(|&c| remap[c]).collect();
    }
    BranchTree {
        nodes,
        level_size: tree.level_size,
        level_probability: tree.level_probability,
        chain_length: tree.chain_length,
        eval_count: tree.eval_count,
    }
}

/// Identifies a factor: `(node, Some(cell))` is a fraction towards a
/// partition cell of `node`, `(node, None)` the final fraction of a leaf.
type FactorKey = (usize, Option<usize>);

/// One root-to-term path of a trimmed tree.
pub(crate) struct Term<'a> {
    keys: Vec<FactorKey>,
    factors: Vec<Factor<'a>>,
    /// The node whose level holds the final factor.
    node: usize,
    /// `A` of the term: the node's region, refined by the cell when the
    /// term ends at a removed child.
    region: RegionConstraint,
}

impl Term<'_> {
    fn estimate(&self) -> f64 {
        product(&self.factors)
    }
}

pub(crate) fn terms(trimmed: &BranchTree, b: f64) -> Vec<Term<'_>> {
    let mut out = Vec::new();
    collect(trimmed, 0, b, Vec::new(), Vec::new(), &mut out);
    out
}

fn collect<'a>(
    tree: &'a BranchTree,
    id: usize,
    b: f64,
    keys: Vec<FactorKey>,
    factors: Vec<Factor<'a>>,
    out: &mut Vec<Term<'a>>,
) {
    let node = &tree.nodes[id];
    let n_s = tree.chain_length;
    let Some(split) = node.split.as_ref().filter(|_| !node.children.is_empty()) else {
        let mut keys = keys;
        let mut factors = factors;
        keys.push((id, None));
        factors.push(Factor::new(&node.level, n_s, move |s| s.performance >= b));
        out.push(Term {
            keys,
            factors,
            node: id,
            region: node.region.clone(),
        });
        return;
    };
    for cell in 0..split.labels.len() {
        let child = node
            .children
            .iter()
            .copied()
            .find(|&c| tree.nodes[c].cell == Some(cell));
        let mut keys = keys.clone();
        let mut factors = factors.clone();
        keys.push((id, Some(cell)));
        match child {
            Some(c) => {
                let bc = tree.nodes[c].threshold;
                factors.push(Factor::new(&node.level, n_s, move |s| {
                    s.performance >= bc && split.cell_contains(cell, &s.point)
                }));
                collect(tree, c, b, keys, factors, out);
            }
            None => {
                factors.push(Factor::new(&node.level, n_s, move |s| {
                    s.performance >= b && split.cell_contains(cell, &s.point)
                }));
                let region = match &split.classifier {
                    Some(c) => node.region.refine(c.clone(), split.labels[cell]),
                    None => node.region.clone(),
                };
                out.push(Term {
                    keys,
                    factors,
                    node: id,
                    region,
                });
            }
        }
    }
}

/// Per-term estimates `P_i` of the trimmed tree, in depth-first cell order.
pub fn bsus_term_estimates(tree: &BranchTree, b: f64) -> Vec<f64> {
    let trimmed = trim_tree(tree, b);
    terms(&trimmed, b).iter().map(Term::estimate).collect()
}

/// `sum_i P_i` over the terms of the trimmed tree; 0 when nothing reaches `b`.
pub fn bsus_probability_estimate(tree: &BranchTree, b: f64) -> f64 {
    bsus_term_estimates(tree, b).into_iter().fold(0.0, |acc, p| acc + p)
}

/// Pair weights `w_ij = P_i P_j / (sum P)^2`; they sum to one whenever some
/// `P_i` is positive.
pub fn pair_weights(estimates: &[f64]) -> Vec<Vec<f64>> {
    let total = estimates.iter().fold(0.0, |acc, p| acc + p);
    let norm = total * total;
    estimates
        .iter()
        .map(|pi| estimates.iter().map(|pj| pi * pj / norm).collect())
        .collect()
}

/// Combined c.o.v. `sqrt(sum_ij w_ij delta_ij^2)` with
/// `w_ij = P_i P_j / (sum P)^2` and `delta_ij^2` the squared c.o.v. of the
/// factors shared by terms `i` and `j` (0 when they share none).
///
/// Terms with a zero estimate carry zero weight; the c.o.v. is undefined
/// only when every term is zero.
pub fn bsus_cov(tree: &BranchTree, b: f64) -> Result<f64> {
    let trimmed = trim_tree(tree, b);
    let terms: Vec<Term<'_>> = terms(&trimmed, b)
        .into_iter()
        .filter(|t| t.estimate() > 0.0)
        .collect();
    if terms.is_empty() {
        return Err(Error::UndefinedCov("no sample reaches the threshold".into()));
    }
    let estimates: Vec<f64> = terms.iter().map(Term::estimate).collect();
    let per_factor: Vec<Vec<f64>> = terms
        .iter()
        .map(|t| t.factors.iter().map(|f| f.delta_squared()).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let weights = pair_weights(&estimates);
    let mut sum = 0.0;
    for i in 0..terms.len() {
        for j in 0..terms.len() {
            let shared = terms[i]
                .keys
                .iter()
                .zip(&terms[j].keys)
                .take_while(|(a, b)| a == b)
                .count();
            let delta_sq = if i == j {
                delta_squared_sum(&terms[i].factors)?
            } else {
                per_factor[i][..shared].iter().sum()
            };
            sum += weights[i][j] * delta_sq;
        }
    }
    Ok(sum.sqrt())
}

/// Draws approximately from the prior conditioned on `g >= b`.
///
/// Each draw picks a term with probability `P_i / sum P`, seeds a confined
/// chain at a uniformly chosen qualifying sample of that term and returns
/// the chain state after `steps` transitions.
#[allow(clippy::too_many_arguments)]
pub fn sample_conditional(
    tree: &BranchTree,
    b: f64,
    count: usize,
    steps: usize,
    proposal: &ProposalSpec,
    pf: &CountedPerformanceFunction,
    exec: Execution,
    stream: &RngStream,
) -> Result<Vec<EvaluatedSample>> {
    let trimmed = trim_tree(tree, b);
    let terms: Vec<Term<'_>> = terms(&trimmed, b);
    let pools: Vec<(f64, Vec<&EvaluatedSample>, &RegionConstraint)> = terms
        .iter()
        .map(|t| {
            let pool: Vec<&EvaluatedSample> = trimmed.nodes[t.node]
                .level
                .samples()
                .iter()
                .filter(|s| s.performance >= b && t.region.contains(&s.point))
                .collect();
            (t.estimate(), pool, &t.region)
        })
        .filter(|(p, pool, _)| *p > 0.0 && !pool.is_empty())
        .collect();
    if pools.is_empty() {
        return Err(Error::NoQualifyingSamples);
    }
    let total: f64 = pools.iter().map(|(p, _, _)| p).sum();
    map_indexed(exec, count, |d| {
        let draw = stream.tagged(tags::CONDITIONAL, d as u64);
        let mut rng = draw.rng();
        let mut u = rng.random::<f64>() * total;
        let mut pick = pools.len() - 1;
        for (i, (p, _, _)) in pools.iter().enumerate() {
            if u < *p {
                pick = i;
                break;
            }
            u -= p;
        }
        let (_, pool, region) = &pools[pick];
        let seed = pool[rng.random_range(0..pool.len())];
        let target = ChainTarget {
            threshold: b,
            constraint: region,
            pf,
        };
        let mut chain = run_chain(seed, steps + 1, &target, proposal, &draw.child(tags::CHAIN))?;
        Ok(chain.pop().expect("chain includes its seed"))
    })
    .into_iter()
    .collect()
}
