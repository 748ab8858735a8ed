use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Feedback, PolicyError, PolicyKind, RoutingPolicy, TableRow};
use crate::topology::{NodeId, Topology};

/// Static hop-count routing: always forwards along a BFS shortest path,
/// preferring the lowest-index neighbor among equally short ones.
#[derive(Debug, Clone)]
pub struct ShortestPath {
    node_count: usize,
    /// `dist[d][x]`, hops from `x` to `d`.
    dist: Vec<Vec<Option<u32>>>,
    /// `next[x * n + d]`.
    next: Vec<Option<NodeId>>,
    neighbors: Vec<Vec<NodeId>>,
}

impl ShortestPath {
    pub fn new(topology: &Topology) -> Self {
        let mut sp = ShortestPath {
            node_count: topology.node_count(),
            dist: Vec::new(),
            next: Vec::new(),
            neighbors: Vec::new(),
        };
        sp.recompute(topology);
        sp
    }

    fn recompute(&mut self, topology: &Topology) {
        let n = self.node_count;
        self.neighbors = topology
            .nodes()
            .map(|x| topology.neighbors(x).map(<[_]>::to_vec).unwrap_or_default())
            .collect();
        self.dist = topology
            .nodes()
            .map(|d| topology.hop_distances(d).unwrap_or_default())
            .collect();
        self.next = vec![None; n * n];
        for x in 0..n {
            for d in 0..n {
                if x == d {
                    continue;
                }
                let dist_d = &self.dist[d];
                let Some(here) = dist_d[x] else { continue };
                self.next[x * n + d] = self.neighbors[x]
                    .iter()
                    .copied()
                    .find(|y| dist_d[y.index()] == Some(here - 1));
            }
        }
    }

    /// Hop count from `x` to `d`, if reachable.
    pub fn distance(&self, x: NodeId, d: NodeId) -> Option<u32> {
        self.dist.get(d.index())?.get(x.index()).copied().flatten()
    }

    pub fn next_hop(&self, x: NodeId, d: NodeId) -> Option<NodeId> {
        self.next
            .get(x.index() * self.node_count + d.index())
            .copied()
            .flatten()
    }
}

impl RoutingPolicy for ShortestPath {
    fn kind(&self) -> PolicyKind {
        PolicyKind::ShortestPath
    }

    fn select_next_hop<R: Rng + ?Sized>(
        &self,
        x: NodeId,
        d: NodeId,
        _rng: &mut R,
    ) -> Result<NodeId, PolicyError> {
        if self.neighbors.get(x.index()).is_none_or(Vec::is_empty) {
            return Err(PolicyError::Isolated(x));
        }
        self.next_hop(x, d).ok_or(PolicyError::NoRoute {
            at: x,
            destination: d,
        })
    }

    fn feedback(&self, y: NodeId, d: NodeId) -> Feedback {
        if y == d {
            return Feedback::at_destination(d);
        }
        Feedback {
            reporter: y,
            destination: d,
            best_estimate: self.distance(y, d).map_or(f64::INFINITY, f64::from),
            estimate_confidence: 1.0,
        }
    }

    fn learn(
        &mut self,
        _x: NodeId,
        _y: NodeId,
        _d: NodeId,
        _q_wait: u64,
        _s_transmit: u64,
        _fb: &Feedback,
    ) -> Result<(), PolicyError> {
        Ok(())
    }

    fn link_down(&mut self, topology: &Topology, _u: NodeId, _v: NodeId) {
        self.recompute(topology);
    }

    fn link_up(&mut self, topology: &Topology, _u: NodeId, _v: NodeId) {
        self.recompute(topology);
    }

    /// Rows carry the hop-count estimate `1 + dist(y, d)` as the Q value.
    fn dump(&self) -> Vec<TableRow> {
        let mut rows = Vec::new();
        for (x, neighbors) in self.neighbors.iter().enumerate() {
            for &y in neighbors {
                for d in 0..self.node_count {
                    if d == x {
                        continue;
                    }
                    let d = NodeId(d as u32);
                    rows.push(TableRow {
                        node: NodeId(x as u32),
                        neighbor: y,
                        destination: d,
                        q_value: self.distance(y, d).map(|h| f64::from(h) + 1.0),
                        c_value: None,
                    });
                }
            }
        }
        rows
    }
}
