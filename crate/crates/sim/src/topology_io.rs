//! Topology files and built-in topologies.

use std::fs;
use std::path::{Path, PathBuf};

use qrouting_core::topology::{self, NodeId, Topology};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Built-in topology names accepted wherever a topology is named.
pub const BUILTIN_NAMES: [&str; 2] = ["grid6x6", "grid6x6-full"];

pub fn builtin(name: &str) -> Option<Topology> {
    match name {
        "grid6x6" => Some(topology::build_irregular_grid_6x6()),
        "grid6x6-full" => Some(topology::build_grid(6, 6)),
        _ => None,
    }
}

pub fn load_topology(path: &Path) -> Result<Topology, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Topology::parse(&text).map_err(|source| HarnessError::TopologyFile {
        path: path.to_owned(),
        source,
    })
}

pub fn save_topology(t: &Topology, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, t.to_text()).map_err(|e| HarnessError::io(path, e))
}

/// Where an experiment's topology comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologySource {
    Builtin(String),
    File(PathBuf),
}

impl Default for TopologySource {
    fn default() -> Self {
        TopologySource::Builtin("grid6x6".into())
    }
}

impl TopologySource {
    /// Built-in name if it is one, file path otherwise.
    pub fn from_arg(arg: &str) -> Self {
        if BUILTIN_NAMES.contains(&arg) {
            TopologySource::Builtin(arg.into())
        } else {
            TopologySource::File(arg.into())
        }
    }

    pub fn load(&self) -> Result<Topology, HarnessError> {
        match self {
            TopologySource::Builtin(name) => builtin(name)
                .ok_or_else(|| HarnessError::Config(format!("unknown topology `{name}`"))),
            TopologySource::File(path) => load_topology(path),
        }
    }
}

/// Result of checking a 36-node topology against the left/right cut of the
/// irregular grid.
pub fn grid_cut_ok(t: &Topology) -> Option<bool> {
    if t.node_count() != 36 {
        return None;
    }
    let left = topology::node_ids(&topology::GRID6X6_LEFT);
    let right = topology::node_ids(&topology::GRID6X6_RIGHT);
    let cross: Vec<(NodeId, NodeId)> = topology::GRID6X6_CROSS
        .iter()
        .map(|&(u, v)| (NodeId(u), NodeId(v)))
        .collect();
    t.validate_cut(&left, &right, &cross).ok()
}

/// One-line summary: counts, connectivity, and the cut check when it applies.
pub fn describe(t: &Topology) -> String {
    let mut s = format!(
        "{} nodes, {} links, {}",
        t.node_count(),
        t.link_count(),
        if t.is_connected() {
            "connected"
        } else {
            "disconnected"
        }
    );
    match grid_cut_ok(t) {
        Some(true) => s.push_str(", cut OK"),
        Some(false) => s.push_str(", cut FAILED"),
        None => {}
    }
    s
}
