//! Strategy communication graphs and their Laplacians.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{DraError, Result};

/// Wiring of one PEV's strategy nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Topology {
    #[default]
    Ring,
    Complete,
}

impl Topology {
    pub fn build(self, n: usize) -> Result<StrategyGraph> {
        match self {
            Topology::Ring => ring_graph(n),
            Topology::Complete => complete_graph(n),
        }
    }
}

/// Undirected, unweighted graph over strategy nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyGraph {
    adjacency: Vec<Vec<bool>>,
    laplacian: Vec<Vec<f64>>,
    neighbors: Vec<Vec<usize>>,
}

impl StrategyGraph {
    /// Builds a graph from an undirected edge list. Self loops are rejected;
    /// duplicate edges collapse. Connectivity is not required here.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(DraError::Shape {
                    what: "edge endpoint",
                    expected: n,
                    found: a.max(b),
                });
            }
            if a == b {
                return Err(DraError::Domain {
                    what: "self loop",
                    value: a as f64,
                });
            }
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        let neighbors: Vec<Vec<usize>> = adjacency
            .iter()
            .map(|row| (0..n).filter(|&j| row[j]).collect())
            .collect();
        let laplacian = (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        if k == j {
                            neighbors[k].len() as f64
                        } else if adjacency[k][j] {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(StrategyGraph {
            adjacency,
            laplacian,
            neighbors,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &[Vec<f64>] {
        &self.laplacian
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Gershgorin bound on the largest Laplacian eigenvalue.
    pub fn spectral_bound(&self) -> f64 {
        2.0 * self.max_degree() as f64
    }
}

/// Cycle over `n` nodes; for `n = 2` a single edge.
pub fn ring_graph(n: usize) -> Result<StrategyGraph> {
    if n < 2 {
        return Err(DraError::Size {
            what: "ring graph",
            min: 2,
            found: n,
        });
    }
    let edges: Vec<(usize, usize)> = (0..n).map(|k| (k, (k + 1) % n)).collect();
    StrategyGraph::from_edges(n, &edges)
}

pub fn complete_graph(n: usize) -> Result<StrategyGraph> {
    if n < 2 {
        return Err(DraError::Size {
            what: "complete graph",
            min: 2,
            found: n,
        });
    }
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    StrategyGraph::from_edges(n, &edges)
}

/// Breadth-first reachability from node 0.
pub fn is_connected(g: &StrategyGraph) -> bool {
    let n = g.n_nodes();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(k) = queue.pop_front() {
        for &j in g.neighbors(k) {
            if !seen[j] {
                seen[j] = true;
                reached += 1;
                queue.push_back(j);
            }
        }
    }
    reached == n
}

/// `vᵀ L v`, evaluated as the sum of squared differences over edges.
pub fn quadratic_form(g: &StrategyGraph, v: &[f64]) -> Result<f64> {
    if v.len() != g.n_nodes() {
        return Err(DraError::Shape {
            what: "quadratic form vector",
            expected: g.n_nodes(),
            found: v.len(),
        });
    }
    let mut acc = 0.0;
    for k in 0..v.len() {
        for &j in g.neighbors(k) {
            if j > k {
                let d = v[k] - v[j];
                acc += d * d;
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_cycle_laplacian() {
        let g = ring_graph(3).unwrap();
        assert_eq!(
            g.laplacian(),
            &[
                vec![2.0, -1.0, -1.0],
                vec![-1.0, 2.0, -1.0],
                vec![-1.0, -1.0, 2.0]
            ]
        );
    }

    #[test]
    fn two_node_ring_is_one_edge() {
        let g = ring_graph(2).unwrap();
        assert_eq!(g.laplacian(), &[vec![1.0, -1.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn too_small() {
        assert!(matches!(ring_graph(1), Err(DraError::Size { .. })));
        assert!(matches!(ring_graph(0), Err(DraError::Size { .. })));
        assert!(complete_graph(1).is_err());
    }

    #[test]
    fn connectivity() {
        assert!(is_connected(&ring_graph(5).unwrap()));
        assert!(is_connected(&complete_graph(3).unwrap()));
        let split = StrategyGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!is_connected(&split));
        for n in 2..=64 {
            assert!(is_connected(&ring_graph(n).unwrap()));
        }
    }

    #[test]
    fn quadratic_form_values() {
        let g = ring_graph(3).unwrap();
        assert_eq!(quadratic_form(&g, &[0.0, 1.0, 2.0]).unwrap(), 6.0);
        assert_eq!(quadratic_form(&g, &[4.0; 3]).unwrap(), 0.0);
        let e = ring_graph(2).unwrap();
        assert_eq!(quadratic_form(&e, &[1.0, -1.0]).unwrap(), 4.0);
        assert!(quadratic_form(&g, &[1.0]).is_err());
    }

    #[test]
    fn self_loops_rejected() {
        assert!(StrategyGraph::from_edges(3, &[(1, 1)]).is_err());
        assert!(StrategyGraph::from_edges(3, &[(0, 3)]).is_err());
    }

    proptest! {
        #[test]
        fn quadratic_form_matches_matrix_product(
            n in 2usize..12,
            complete in any::<bool>(),
            v in proptest::collection::vec(-1e3f64..1e3, 12),
        ) {
            let g = if complete { complete_graph(n) } else { ring_graph(n) }.unwrap();
            let v = &v[..n];
            let q = quadratic_form(&g, v).unwrap();
            let dense: f64 = (0..n)
                .map(|k| v[k] * (0..n).map(|j| g.laplacian()[k][j] * v[j]).sum::<f64>())
                .sum();
            prop_assert!(q >= 0.0);
            prop_assert!((q - dense).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }
}
