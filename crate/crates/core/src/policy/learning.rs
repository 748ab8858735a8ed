use alloc::vec::Vec;

use rand::Rng;

use super::rules::{cq_update, decay_all_unvisited, q_update};
use super::{
    argmin, ConfidenceTable, Feedback, LearningParams, NeighborTable, PolicyError, PolicyKind,
    QTable, RoutingPolicy, TableRow,
};
use crate::topology::{NodeId, Topology};

/// Initial delivery-time estimate (optimistic).
pub const Q_INIT: f64 = 0.0;
/// Initial confidence of every learned entry.
pub const C_INIT: f64 = 0.0;

fn build_tables(topology: &Topology, init: f64) -> Vec<NeighborTable> {
    topology
        .nodes()
        .map(|x| {
            let neighbors = topology.neighbors(x).unwrap_or(&[]);
            NeighborTable::new(x, neighbors, topology.node_count(), init)
        })
        .collect()
}

/// Lowest-index argmin of `y`'s estimates toward `d`, with its value.
fn best_entry(table: &QTable, d: NodeId) -> Option<(NodeId, f64)> {
    table
        .column(d)
        .fold(None, |best: Option<(NodeId, f64)>, (z, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((z, v)),
        })
}

fn select<R: Rng + ?Sized>(
    tables: &[QTable],
    params: &LearningParams,
    x: NodeId,
    d: NodeId,
    rng: &mut R,
) -> Result<NodeId, PolicyError> {
    let table = tables.get(x.index()).ok_or(PolicyError::Isolated(x))?;
    argmin(table.column(d), params.tie_break, rng).ok_or(PolicyError::Isolated(x))
}

fn dump_tables(q: &[QTable], c: Option<&[ConfidenceTable]>) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for (x, table) in q.iter().enumerate() {
        for (y, d, value) in table.entries() {
            rows.push(TableRow {
                node: NodeId(x as u32),
                neighbor: y,
                destination: d,
                q_value: Some(value),
                c_value: c.and_then(|c| c[x].get(y, d)),
            });
        }
    }
    rows
}

/// Q-Routing with a fixed learning rate.
#[derive(Debug, Clone)]
pub struct QRouting {
    params: LearningParams,
    tables: Vec<QTable>,
}

impl QRouting {
    pub fn new(topology: &Topology, params: LearningParams) -> Self {
        QRouting {
            params,
            tables: build_tables(topology, Q_INIT),
        }
    }

    pub fn params(&self) -> &LearningParams {
        &self.params
    }

    pub fn table(&self, x: NodeId) -> Option<&QTable> {
        self.tables.get(x.index())
    }

    pub fn table_mut(&mut self, x: NodeId) -> Option<&mut QTable> {
        self.tables.get_mut(x.index())
    }
}

impl RoutingPolicy for QRouting {
    fn kind(&self) -> PolicyKind {
        PolicyKind::QRouting
    }

    fn select_next_hop<R: Rng + ?Sized>(
        &self,
        x: NodeId,
        d: NodeId,
        rng: &mut R,
    ) -> Result<NodeId, PolicyError> {
        select(&self.tables, &self.params, x, d, rng)
    }

    fn feedback(&self, y: NodeId, d: NodeId) -> Feedback {
        if y == d {
            return Feedback::at_destination(d);
        }
        let best = self.tables.get(y.index()).and_then(|t| best_entry(t, d));
        Feedback {
            reporter: y,
            destination: d,
            best_estimate: best.map_or(f64::INFINITY, |(_, v)| v),
            estimate_confidence: 1.0,
        }
    }

    fn learn(
        &mut self,
        x: NodeId,
        y: NodeId,
        d: NodeId,
        q_wait: u64,
        s_transmit: u64,
        fb: &Feedback,
    ) -> Result<(), PolicyError> {
        let eta = self.params.eta;
        let table = self
            .tables
            .get_mut(x.index())
            .ok_or(PolicyError::MissingEntry {
                owner: x,
                neighbor: y,
                destination: d,
            })?;
        q_update(table, y, d, q_wait, s_transmit, fb, eta).map(|_| ())
    }

    fn link_down(&mut self, _topology: &Topology, u: NodeId, v: NodeId) {
        self.tables[u.index()].remove_neighbor(v);
        self.tables[v.index()].remove_neighbor(u);
    }

    fn link_up(&mut self, _topology: &Topology, u: NodeId, v: NodeId) {
        self.tables[u.index()].add_neighbor(v, Q_INIT);
        self.tables[v.index()].add_neighbor(u, Q_INIT);
    }

    fn dump(&self) -> Vec<TableRow> {
        dump_tables(&self.tables, None)
    }
}

/// Q-Routing whose per-entry learning rate is driven by confidence values.
#[derive(Debug, Clone)]
pub struct CqRouting {
    params: LearningParams,
    q: Vec<QTable>,
    c: Vec<ConfidenceTable>,
    /// Entries refreshed during the current step, per node.
    updated: Vec<Vec<(NodeId, NodeId)>>,
}

impl CqRouting {
    pub fn new(topology: &Topology, params: LearningParams) -> Self {
        CqRouting {
            params,
            q: build_tables(topology, Q_INIT),
            c: build_tables(topology, C_INIT),
            updated: alloc::vec![Vec::new(); topology.node_count()],
        }
    }

    pub fn params(&self) -> &LearningParams {
        &self.params
    }

    pub fn q_table(&self, x: NodeId) -> Option<&QTable> {
        self.q.get(x.index())
    }

    pub fn c_table(&self, x: NodeId) -> Option<&ConfidenceTable> {
        self.c.get(x.index())
    }
}

impl RoutingPolicy for CqRouting {
    fn kind(&self) -> PolicyKind {
        PolicyKind::CqRouting
    }

    fn select_next_hop<R: Rng + ?Sized>(
        &self,
        x: NodeId,
        d: NodeId,
        rng: &mut R,
    ) -> Result<NodeId, PolicyError> {
        select(&self.q, &self.params, x, d, rng)
    }

    /// The reporter's confidence is that of its own best entry.
    fn feedback(&self, y: NodeId, d: NodeId) -> Feedback {
        if y == d {
            return Feedback::at_destination(d);
        }
        let best = self.q.get(y.index()).and_then(|t| best_entry(t, d));
        match best {
            Some((z, v)) => Feedback {
                reporter: y,
                destination: d,
                best_estimate: v,
                estimate_confidence: self.c[y.index()].get(z, d).unwrap_or(0.0),
            },
            None => Feedback {
                reporter: y,
                destination: d,
                best_estimate: f64::INFINITY,
                estimate_confidence: 0.0,
            },
        }
    }

    fn learn(
        &mut self,
        x: NodeId,
        y: NodeId,
        d: NodeId,
        q_wait: u64,
        s_transmit: u64,
        fb: &Feedback,
    ) -> Result<(), PolicyError> {
        let i = x.index();
        let missing = PolicyError::MissingEntry {
            owner: x,
            neighbor: y,
            destination: d,
        };
        let (Some(q), Some(c)) = (self.q.get_mut(i), self.c.get_mut(i)) else {
            return Err(missing);
        };
        cq_update(q, c, y, d, q_wait, s_transmit, fb)?;
        self.updated[i].push((y, d));
        Ok(())
    }

    fn end_step(&mut self) {
        let lambda = self.params.lambda;
        for (c, updated) in self.c.iter_mut().zip(&mut self.updated) {
            decay_all_unvisited(c, updated, lambda);
            updated.clear();
        }
    }

    fn link_down(&mut self, _topology: &Topology, u: NodeId, v: NodeId) {
        for (a, b) in [(u, v), (v, u)] {
            self.q[a.index()].remove_neighbor(b);
            self.c[a.index()].remove_neighbor(b);
            self.updated[a.index()].retain(|&(y, _)| y != b);
        }
    }

    fn link_up(&mut self, _topology: &Topology, u: NodeId, v: NodeId) {
        for (a, b) in [(u, v), (v, u)] {
            self.q[a.index()].add_neighbor(b, Q_INIT);
            self.c[a.index()].add_neighbor(b, C_INIT);
        }
    }

    fn dump(&self) -> Vec<TableRow> {
        dump_tables(&self.q, Some(&self.c))
    }
}
