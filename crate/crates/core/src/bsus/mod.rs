//! Branching Subset Simulation.
//!
//! Each expanded node's level is partitioned; every cell becomes a branch
//! that continues SuS-style inside the cell's region, with a share of the
//! parent's chains proportional to the cell's size. With a partitioner that
//! never splits, [`run_bsus`] consumes random numbers exactly like
//! [`run_sus`](crate::sus::run_sus) and returns the same levels.

mod estimate;
mod record;
mod tree;

pub use estimate::{
    bsus_cov, bsus_probability_estimate, bsus_term_estimates, pair_weights, sample_conditional,
    trim_tree,
};
pub use record::{ClauseRecord, NodeRecord, TreeRecord};
pub use tree::{
    allocate_chains, largest_remainder, run_bsus, BranchNode, BranchTree, BsusConfig,
    ChooseStrategy, NodeStatus, Split,
};
