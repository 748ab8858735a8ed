//! Routing policies.
//!
//! Every policy answers "which neighbor next" for a packet at node `x`
//! bound for `d`. Learning policies additionally consume [`Feedback`] from
//! the chosen neighbor after each forwarding decision.

mod learning;
pub mod rules;
mod shortest;
mod table;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

pub use learning::{CqRouting, QRouting};
pub use shortest::ShortestPath;
pub use table::{ConfidenceTable, NeighborTable, QTable};

use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("node {0} has no neighbors")]
    Isolated(NodeId),
    #[error("node {at} has no route toward {destination}")]
    NoRoute { at: NodeId, destination: NodeId },
    #[error("no table entry at node {owner} for neighbor {neighbor}, destination {destination}")]
    MissingEntry {
        owner: NodeId,
        neighbor: NodeId,
        destination: NodeId,
    },
    #[error("{name} = {value} is outside its valid range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("unknown policy `{0}`")]
    UnknownPolicy(alloc::string::String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TieBreak {
    /// Lowest neighbor index wins.
    First,
    /// Uniform among tied neighbors, drawn from the run's generator.
    #[default]
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LearningParams {
    /// Fixed learning rate of Q-Routing, in `(0, 1]`.
    pub eta: f64,
    /// Confidence decay of CQ-Routing, in `(0, 1)`.
    pub lambda: f64,
    pub tie_break: TieBreak,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            eta: 0.85,
            lambda: 0.95,
            tie_break: TieBreak::Random,
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(PolicyError::OutOfRange {
                name: "eta",
                value: self.eta,
            });
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(PolicyError::OutOfRange {
                name: "lambda",
                value: self.lambda,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PolicyKind {
    ShortestPath,
    QRouting,
    CqRouting,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::ShortestPath,
        PolicyKind::QRouting,
        PolicyKind::CqRouting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::ShortestPath => "shortest_path",
            PolicyKind::QRouting => "q_routing",
            PolicyKind::CqRouting => "cq_routing",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shortest_path" | "shortest-path" | "sp" => Ok(PolicyKind::ShortestPath),
            "q_routing" | "q-routing" | "q" => Ok(PolicyKind::QRouting),
            "cq_routing" | "cq-routing" | "cq" => Ok(PolicyKind::CqRouting),
            other => Err(PolicyError::UnknownPolicy(other.into())),
        }
    }
}

/// What the downstream node `reporter` tells the upstream node after
/// receiving a packet for `destination`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub reporter: NodeId,
    pub destination: NodeId,
    /// `min_z Q_reporter(z, destination)`; zero when the reporter is the
    /// destination.
    pub best_estimate: f64,
    /// Confidence of that best entry; one when the reporter is the
    /// destination.
    pub estimate_confidence: f64,
}

impl Feedback {
    pub fn at_destination(d: NodeId) -> Self {
        Feedback {
            reporter: d,
            destination: d,
            best_estimate: 0.0,
            estimate_confidence: 1.0,
        }
    }
}

/// One row of a policy's table dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub node: NodeId,
    pub neighbor: NodeId,
    pub destination: NodeId,
    pub q_value: Option<f64>,
    pub c_value: Option<f64>,
}

pub trait RoutingPolicy {
    fn kind(&self) -> PolicyKind;

    /// Next hop for a packet at `x` bound for `d`.
    fn select_next_hop<R: Rng + ?Sized>(
        &self,
        x: NodeId,
        d: NodeId,
        rng: &mut R,
    ) -> Result<NodeId, PolicyError>;

    /// The report `y` sends upstream for destination `d`.
    fn feedback(&self, y: NodeId, d: NodeId) -> Feedback;

    /// Consumes the report after `x` forwarded a packet for `d` to `y`.
    fn learn(
        &mut self,
        x: NodeId,
        y: NodeId,
        d: NodeId,
        q_wait: u64,
        s_transmit: u64,
        fb: &Feedback,
    ) -> Result<(), PolicyError>;

    /// Called once after all nodes have been processed in a step.
    fn end_step(&mut self) {}

    /// `topology` is the graph after the change.
    fn link_down(&mut self, topology: &Topology, u: NodeId, v: NodeId);

    /// `topology` is the graph after the change.
    fn link_up(&mut self, topology: &Topology, u: NodeId, v: NodeId);

    fn dump(&self) -> Vec<TableRow>;
}

/// Argmin over `(neighbor, value)` candidates with the given tie rule.
pub(crate) fn argmin<R: Rng + ?Sized>(
    candidates: impl Iterator<Item = (NodeId, f64)> + Clone,
    tie_break: TieBreak,
    rng: &mut R,
) -> Option<NodeId> {
    let best = candidates
        .clone()
        .map(|(_, v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut tied = candidates.filter(|&(_, v)| v == best).map(|(y, _)| y);
    match tie_break {
        TieBreak::First => tied.next(),
        TieBreak::Random => {
            let count = tied.clone().count();
            match count {
                0 => None,
                1 => tied.next(),
                n => tied.nth(rng.random_range(0..n)),
            }
        }
    }
}

/// A routing policy chosen at run time.
#[derive(Debug, Clone)]
pub enum Policy {
    ShortestPath(ShortestPath),
    QRouting(QRouting),
    CqRouting(CqRouting),
}

/// Builds a policy in its initial state for `topology`.
pub fn init_policy(
    kind: PolicyKind,
    topology: &Topology,
    params: LearningParams,
) -> Result<Policy, PolicyError> {
    params.validate()?;
    Ok(match kind {
        PolicyKind::ShortestPath => Policy::ShortestPath(ShortestPath::new(topology)),
        PolicyKind::QRouting => Policy::QRouting(QRouting::new(topology, params)),
        PolicyKind::CqRouting => Policy::CqRouting(CqRouting::new(topology, params)),
    })
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Policy::ShortestPath($p) => $e,
            Policy::QRouting($p) => $e,
            Policy::CqRouting($p) => $e,
        }
    };
}

impl RoutingPolicy for Policy {
    fn kind(&self) -> PolicyKind {
        dispatch!(self, p => p.kind())
    }

    fn select_next_hop<R: Rng + ?Sized>(
        &self,
        x: NodeId,
        d: NodeId,
        rng: &mut R,
    ) -> Result<NodeId, PolicyError> {
        dispatch!(self, p => p.select_next_hop(x, d, rng))
    }

    fn feedback(&self, y: NodeId, d: NodeId) -> Feedback {
        dispatch!(self, p => p.feedback(y, d))
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
        dispatch!(self, p => p.learn(x, y, d, q_wait, s_transmit, fb))
    }

    fn end_step(&mut self) {
        dispatch!(self, p => p.end_step())
    }

    fn link_down(&mut self, topology: &Topology, u: NodeId, v: NodeId) {
        dispatch!(self, p => p.link_down(topology, u, v))
    }

    fn link_up(&mut self, topology: &Topology, u: NodeId, v: NodeId) {
        dispatch!(self, p => p.link_up(topology, u, v))
    }

    fn dump(&self) -> Vec<TableRow> {
        dispatch!(self, p => p.dump())
    }
}
