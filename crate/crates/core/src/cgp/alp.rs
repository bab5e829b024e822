//! Asynchronous label propagation.
//!
//! Every vertex starts with its own label. Each sweep visits the vertices
//! in a fresh random order and gives each one the most frequent label among
//! its neighbours (already-updated neighbours contribute their new label),
//! breaking ties uniformly at random. The sweep loop halts once every
//! vertex holds one of its neighbourhood's most frequent labels. Isolated
//! vertices keep their initial label.

use rand::seq::SliceRandom;
use rand::Rng;

use super::graph::ConvexityGraph;
use crate::rng::RngStream;

pub const DEFAULT_MAX_SWEEPS: usize = 1000;

/// Community id per vertex, numbered by first appearance.
pub fn alp(graph: &ConvexityGraph, stream: &RngStream) -> Vec<usize> {
    alp_with_cap(graph, stream, DEFAULT_MAX_SWEEPS)
}

pub fn alp_with_cap(graph: &ConvexityGraph, stream: &RngStream, max_sweeps: usize) -> Vec<usize> {
    let n = graph.len();
    let neighbours: Vec<Vec<usize>> = (0..n).map(|v| graph.neighbours(v).collect()).collect();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut rng = stream.rng();
    let mut order: Vec<usize> = (0..n).collect();
    let mut counts = vec![0usize; n];
    let mut best = Vec::new();

    for _ in 0..max_sweeps {
        order.shuffle(&mut rng);
        for &v in &order {
            if neighbours[v].is_empty() {
                continue;
            }
            most_frequent(&neighbours[v], &labels, &mut counts, &mut best);
            labels[v] = if best.len() == 1 {
                best[0]
            } else {
                best[rng.random_range(0..best.len())]
            };
        }
        if (0..n).all(|v| {
            neighbours[v].is_empty() || {
                most_frequent(&neighbours[v], &labels, &mut counts, &mut best);
                best.contains(&labels[v])
            }
        }) {
            break;
        }
    }
    compact(&labels)
}

/// Fills `best` with the labels of maximal count among `nbrs`, in
/// ascending label order.
fn most_frequent(nbrs: &[usize], labels: &[usize], counts: &mut [usize], best: &mut Vec<usize>) {
    best.clear();
    let mut top = 0;
    for &u in nbrs {
        counts[labels[u]] += 1;
    }
    for &u in nbrs {
        let l = labels[u];
        let c = counts[l];
        if c > top {
            top = c;
            best.clear();
        }
        if c == top && !best.contains(&l) {
            best.push(l);
        }
    }
    for &u in nbrs {
        counts[labels[u]] = 0;
    }
    best.sort_unstable();
}

/// Renumbers labels `0..k` in order of first appearance.
pub fn compact(labels: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(p) => p,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect()
}

pub fn community_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> ConvexityGraph {
        ConvexityGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    }

    #[test]
    fn two_triangles_two_communities() {
        for seed in 0..100 {
            let labels = alp(&two_triangles(), &RngStream::new(seed));
            assert_eq!(community_count(&labels), 2, "seed {seed}");
            assert_eq!(labels[0], labels[1]);
            assert_eq!(labels[1], labels[2]);
            assert_eq!(labels[3], labels[4]);
            assert_ne!(labels[0], labels[3]);
        }
    }

    #[test]
    fn isolated_vertex_keeps_its_own_label() {
        let g = ConvexityGraph::from_edges(4, &[(0, 1), (1, 2), (0, 2)]);
        for seed in 0..20 {
            let labels = alp(&g, &RngStream::new(seed));
            assert_eq!(community_count(&labels), 2);
            assert_ne!(labels[3], labels[0]);
        }
    }

    #[test]
    fn complete_graph_one_community() {
        let edges: Vec<(usize, usize)> = (0..5).flat_map(|a| ((a + 1)..5).map(move |b| (a, b))).collect();
        let g = ConvexityGraph::from_edges(5, &edges);
        for seed in 0..100 {
            assert_eq!(community_count(&alp(&g, &RngStream::new(seed))), 1, "seed {seed}");
        }
    }

    #[test]
    fn halts_in_argmax_state() {
        // two dense blocks joined by a single bridge
        let mut edges = Vec::new();
        for block in [0usize, 6] {
            for a in 0..6 {
                for b in (a + 1)..6 {
                    edges.push((block + a, block + b));
                }
            }
        }
        edges.push((5, 6));
        let g = ConvexityGraph::from_edges(12, &edges);
        for seed in 0..50 {
            let labels = alp(&g, &RngStream::new(seed));
            let mut counts = vec![0; 12];
            let mut best = Vec::new();
            for v in 0..12 {
                let nbrs: Vec<usize> = g.neighbours(v).collect();
                most_frequent(&nbrs, &labels, &mut counts, &mut best);
                assert!(best.contains(&labels[v]), "seed {seed} vertex {v}");
            }
        }
    }

    #[test]
    fn compact_numbers_by_first_appearance() {
        assert_eq!(compact(&[7, 7, 2, 9, 2]), vec![0, 0, 1, 2, 1]);
    }
}
