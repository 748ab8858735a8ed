//! Undirected unit-delay network graphs.
//!
//! A [`Topology`] stores a dense node set `0..node_count` and a set of
//! unordered links. Neighbor lists are always kept sorted by node index so
//! that every iteration over them is deterministic.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

/// Dense node identifier in `0..node_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An unordered link, normalized so that `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    a: NodeId,
    b: NodeId,
}

impl Link {
    /// Returns `None` for a self-link.
    pub fn new(u: NodeId, v: NodeId) -> Option<Self> {
        match u.cmp(&v) {
            core::cmp::Ordering::Less => Some(Link { a: u, b: v }),
            core::cmp::Ordering::Greater => Some(Link { a: v, b: u }),
            core::cmp::Ordering::Equal => None,
        }
    }

    pub fn endpoints(self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: self-link on node {node}")]
    SelfLink { line: usize, node: u32 },
    #[error("line {line}: duplicate link ({u}, {v})")]
    DuplicateLink { line: usize, u: u32, v: u32 },
    #[error("line {line}: node {node} out of range for {node_count} nodes")]
    NodeOutOfRange {
        line: usize,
        node: u32,
        node_count: usize,
    },
    #[error("graph is not connected: node {unreachable} unreachable from node 0")]
    Disconnected { unreachable: u32 },
    #[error("topology has no nodes")]
    Empty,
    #[error("invalid node id {0}")]
    InvalidNode(u32),
    #[error("link ({0}, {1}) does not exist")]
    UnknownLink(u32, u32),
    #[error("link ({0}, {1}) already exists")]
    LinkExists(u32, u32),
    #[error("left and right sets do not partition the node set: {0}")]
    NotPartition(String),
}

/// Undirected graph with sorted adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    links: BTreeSet<Link>,
    adjacency: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Builds and validates a topology. Links are `(u, v)` pairs; their
    /// position in the slice (1-based) is reported as the line number on
    /// error.
    pub fn new(node_count: usize, links: &[(u32, u32)]) -> Result<Self, TopologyError> {
        let numbered: Vec<(usize, u32, u32)> = links
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| (i + 1, u, v))
            .collect();
        Self::from_numbered(node_count, &numbered)
    }

    fn from_numbered(
        node_count: usize,
        links: &[(usize, u32, u32)],
    ) -> Result<Self, TopologyError> {
        if node_count == 0 {
            return Err(TopologyError::Empty);
        }
        let mut t = Topology {
            node_count,
            links: BTreeSet::new(),
            adjacency: vec![Vec::new(); node_count],
        };
        for &(line, u, v) in links {
            for node in [u, v] {
                if node as usize >= node_count {
                    return Err(TopologyError::NodeOutOfRange {
                        line,
                        node,
                        node_count,
                    });
                }
            }
            let link =
                Link::new(NodeId(u), NodeId(v)).ok_or(TopologyError::SelfLink { line, node: u })?;
            if !t.links.insert(link) {
                return Err(TopologyError::DuplicateLink { line, u, v });
            }
        }
        t.rebuild_adjacency();
        t.check_connected()?;
        Ok(t)
    }

    fn rebuild_adjacency(&mut self) {
        for list in &mut self.adjacency {
            list.clear();
        }
        for link in &self.links {
            self.adjacency[link.a.index()].push(link.b);
            self.adjacency[link.b.index()].push(link.a);
        }
        for list in &mut self.adjacency {
            list.sort_unstable();
        }
    }

    fn check_connected(&self) -> Result<(), TopologyError> {
        let dist = self.bfs(NodeId(0));
        match dist.iter().position(Option::is_none) {
            Some(i) => Err(TopologyError::Disconnected {
                unreachable: i as u32,
            }),
            None => Ok(()),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.links.iter().copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count as u32).map(NodeId)
    }

    pub fn contains_node(&self, x: NodeId) -> bool {
        x.index() < self.node_count
    }

    pub fn has_link(&self, u: NodeId, v: NodeId) -> bool {
        Link::new(u, v).is_some_and(|l| self.links.contains(&l))
    }

    /// Neighbors of `x`, ascending by index.
    pub fn neighbors(&self, x: NodeId) -> Result<&[NodeId], TopologyError> {
        self.adjacency
            .get(x.index())
            .map(Vec::as_slice)
            .ok_or(TopologyError::InvalidNode(x.0))
    }

    pub fn is_connected(&self) -> bool {
        self.check_connected().is_ok()
    }

    fn bfs(&self, src: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count];
        let mut queue = VecDeque::new();
        dist[src.index()] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].unwrap_or(0);
            for &v in &self.adjacency[u.index()] {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Minimum hop counts from `src`; `None` marks unreachable nodes.
    pub fn hop_distances(&self, src: NodeId) -> Result<Vec<Option<u32>>, TopologyError> {
        if !self.contains_node(src) {
            return Err(TopologyError::InvalidNode(src.0));
        }
        Ok(self.bfs(src))
    }

    /// Removes a link. Connectivity is not re-checked: a running network
    /// may legitimately be partitioned by failures.
    pub fn remove_link(&mut self, u: NodeId, v: NodeId) -> Result<(), TopologyError> {
        let link = Link::new(u, v).ok_or(TopologyError::UnknownLink(u.0, v.0))?;
        if !self.links.remove(&link) {
            return Err(TopologyError::UnknownLink(u.0, v.0));
        }
        self.adjacency[u.index()].retain(|&n| n != v);
        self.adjacency[v.index()].retain(|&n| n != u);
        Ok(())
    }

    pub fn add_link(&mut self, u: NodeId, v: NodeId) -> Result<(), TopologyError> {
        for node in [u, v] {
            if !self.contains_node(node) {
                return Err(TopologyError::InvalidNode(node.0));
            }
        }
        let link = Link::new(u, v).ok_or(TopologyError::SelfLink { line: 0, node: u.0 })?;
        if !self.links.insert(link) {
            return Err(TopologyError::LinkExists(u.0, v.0));
        }
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adjacency[a.index()];
            let pos = list.partition_point(|&n| n < b);
            list.insert(pos, b);
        }
        Ok(())
    }

    /// True iff every link crossing between `left` and `right` is one of
    /// `allowed_cross`. The two sets must partition the node set.
    pub fn validate_cut(
        &self,
        left: &[NodeId],
        right: &[NodeId],
        allowed_cross: &[(NodeId, NodeId)],
    ) -> Result<bool, TopologyError> {
        let mut side = vec![None; self.node_count];
        for (nodes, label) in [(left, false), (right, true)] {
            for &x in nodes {
                let slot = side
                    .get_mut(x.index())
                    .ok_or(TopologyError::InvalidNode(x.0))?;
                if slot.is_some() {
                    return Err(TopologyError::NotPartition(alloc::format!(
                        "node {x} listed more than once"
                    )));
                }
                *slot = Some(label);
            }
        }
        if let Some(i) = side.iter().position(Option::is_none) {
            return Err(TopologyError::NotPartition(alloc::format!(
                "node {i} in neither set"
            )));
        }
        let allowed: BTreeSet<Link> = allowed_cross
            .iter()
            .filter_map(|&(u, v)| Link::new(u, v))
            .collect();
        Ok(self
            .links
            .iter()
            .filter(|l| side[l.a.index()] != side[l.b.index()])
            .all(|l| allowed.contains(l)))
    }

    /// Parses the plain-text format: first significant line is the node
    /// count, each following line is `u v`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let mut node_count = None;
        let mut links = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_ascii_whitespace().collect();
            let parse_int = |s: &str| {
                s.parse::<u32>().map_err(|_| TopologyError::Parse {
                    line,
                    message: alloc::format!("expected a non-negative integer, found `{s}`"),
                })
            };
            match (node_count, fields.as_slice()) {
                (None, [n]) => node_count = Some(parse_int(n)? as usize),
                (None, _) => {
                    return Err(TopologyError::Parse {
                        line,
                        message: "expected the node count alone on the first line".into(),
                    })
                }
                (Some(_), [u, v]) => links.push((line, parse_int(u)?, parse_int(v)?)),
                (Some(_), _) => {
                    return Err(TopologyError::Parse {
                        line,
                        message: alloc::format!(
                            "expected two node ids, found {} fields",
                            fields.len()
                        ),
                    })
                }
            }
        }
        let node_count = node_count.ok_or(TopologyError::Parse {
            line: 1,
            message: "missing node count".into(),
        })?;
        Self::from_numbered(node_count, &links)
    }

    /// Serializes into the text format read by [`Topology::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.node_count);
        for link in &self.links {
            let _ = writeln!(out, "{} {}", link.a, link.b);
        }
        out
    }
}

/// Left side of the irregular 6x6 grid.
pub const GRID6X6_LEFT: [u32; 18] = [
    0, 1, 2, 6, 7, 8, 12, 13, 14, 18, 19, 20, 24, 25, 26, 30, 31, 32,
];
/// Right side of the irregular 6x6 grid.
pub const GRID6X6_RIGHT: [u32; 18] = [
    3, 4, 5, 9, 10, 11, 15, 16, 17, 21, 22, 23, 27, 28, 29, 33, 34, 35,
];
/// The only two links joining the left and right halves.
pub const GRID6X6_CROSS: [(u32, u32); 2] = [(20, 21), (32, 33)];

/// Links of a regular `rows x cols` grid, node id `row * cols + col`.
pub fn grid_links(rows: u32, cols: u32) -> Vec<(u32, u32)> {
    let mut links = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                links.push((i, i + 1));
            }
            if r + 1 < rows {
                links.push((i, i + cols));
            }
        }
    }
    links
}

/// Regular grid topology.
pub fn build_grid(rows: u32, cols: u32) -> Topology {
    Topology::new((rows * cols) as usize, &grid_links(rows, cols))
        .expect("regular grid is a valid topology")
}

/// The irregular 6x6 grid: a regular grid whose column 2/3 links are cut
/// except at (20, 21) and (32, 33).
pub fn build_irregular_grid_6x6() -> Topology {
    let links: Vec<(u32, u32)> = grid_links(6, 6)
        .into_iter()
        .filter(|&(u, v)| !(v == u + 1 && u % 6 == 2 && !GRID6X6_CROSS.contains(&(u, v))))
        .collect();
    Topology::new(36, &links).expect("irregular grid is a valid topology")
}

/// Path graph `0 - 1 - ... - (n-1)`.
pub fn build_path(n: u32) -> Topology {
    let links: Vec<(u32, u32)> = (1..n).map(|i| (i - 1, i)).collect();
    Topology::new(n as usize, &links).expect("path graph is a valid topology")
}

/// Converts raw ids into [`NodeId`]s.
pub fn node_ids(raw: &[u32]) -> Vec<NodeId> {
    raw.iter().copied().map(NodeId).collect()
}
