use alloc::vec;
use alloc::vec::Vec;

use crate::topology::NodeId;

/// Dense per-node table keyed by (neighbor, destination).
///
/// Rows follow the owner's sorted neighbor list; the column for the owner
/// itself exists in storage but is never a valid key.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    owner: NodeId,
    neighbors: Vec<NodeId>,
    node_count: usize,
    values: Vec<f64>,
}

impl NeighborTable {
    pub fn new(owner: NodeId, neighbors: &[NodeId], node_count: usize, init: f64) -> Self {
        NeighborTable {
            owner,
            neighbors: neighbors.to_vec(),
            node_count,
            values: vec![init; neighbors.len() * node_count],
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn neighbors(&self) -> &[NodeId] {
        &self.neighbors
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    fn slot(&self, y: NodeId) -> Option<usize> {
        self.neighbors.binary_search(&y).ok()
    }

    fn index(&self, y: NodeId, d: NodeId) -> Option<usize> {
        if d == self.owner || d.index() >= self.node_count {
            return None;
        }
        self.slot(y).map(|s| s * self.node_count + d.index())
    }

    pub fn contains(&self, y: NodeId, d: NodeId) -> bool {
        self.index(y, d).is_some()
    }

    pub fn get(&self, y: NodeId, d: NodeId) -> Option<f64> {
        self.index(y, d).map(|i| self.values[i])
    }

    pub fn get_mut(&mut self, y: NodeId, d: NodeId) -> Option<&mut f64> {
        self.index(y, d).map(move |i| &mut self.values[i])
    }

    /// Values toward `d`, aligned with [`NeighborTable::neighbors`].
    pub fn column(&self, d: NodeId) -> impl Iterator<Item = (NodeId, f64)> + Clone + '_ {
        let n = self.node_count;
        self.neighbors
            .iter()
            .enumerate()
            .map(move |(s, &y)| (y, self.values[s * n + d.index()]))
    }

    /// All valid `(neighbor, destination, value)` entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        let n = self.node_count;
        let owner = self.owner;
        self.neighbors.iter().enumerate().flat_map(move |(s, &y)| {
            (0..n)
                .filter(move |&d| d != owner.index())
                .map(move |d| (y, NodeId(d as u32), self.values[s * n + d]))
        })
    }

    pub fn entry_count(&self) -> usize {
        self.neighbors.len() * self.node_count.saturating_sub(1)
    }

    /// Applies `f` to every valid entry whose key is not in `skip`.
    pub fn map_except(&mut self, skip: &[(NodeId, NodeId)], mut f: impl FnMut(f64) -> f64) {
        let n = self.node_count;
        let owner = self.owner.index();
        for (s, &y) in self.neighbors.iter().enumerate() {
            for d in 0..n {
                if d == owner || skip.iter().any(|&(sy, sd)| sy == y && sd.index() == d) {
                    continue;
                }
                let v = &mut self.values[s * n + d];
                *v = f(*v);
            }
        }
    }

    pub fn remove_neighbor(&mut self, y: NodeId) -> bool {
        let Some(s) = self.slot(y) else {
            return false;
        };
        let n = self.node_count;
        self.values.drain(s * n..(s + 1) * n);
        self.neighbors.remove(s);
        true
    }

    pub fn add_neighbor(&mut self, y: NodeId, init: f64) -> bool {
        let Err(s) = self.neighbors.binary_search(&y) else {
            return false;
        };
        let n = self.node_count;
        self.neighbors.insert(s, y);
        self.values
            .splice(s * n..s * n, core::iter::repeat_n(init, n));
        true
    }
}

/// Delivery-time estimates `Q_x(y, d)` in simulation steps.
pub type QTable = NeighborTable;

/// Confidence values `C_x(y, d)` in `[0, 1]`.
pub type ConfidenceTable = NeighborTable;
