//! Communication graphs: the k-regular ring lattice (Watts-Strogatz with
//! rewiring probability 0) for decentralized runs and a star around a
//! server node for centralized runs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    Decentral,
    Central,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Decentral => "decentral",
            Self::Central => "central",
        }
    }
}

impl core::fmt::Display for Mode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "decentral" | "decentralized" | "dfl" => Ok(Self::Decentral),
            "central" | "centralized" | "cfl" => Ok(Self::Central),
            other => Err(Error::InvalidConfig {
                field: "mode",
                reason: format!("unknown mode {other:?}, expected central or decentral"),
            }),
        }
    }
}

/// Undirected graph over node ids with sorted adjacency lists.
///
/// In centralized mode clients are `0..n` and the server is node `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    mode: Mode,
    clients: usize,
    adjacency: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Ring lattice on `n` nodes where node `i` links to `i ± 1, …, i ± c/2`.
    pub fn ring_regular(n: usize, c: usize) -> Result<Self> {
        if c < 2 || c % 2 != 0 {
            return Err(Error::InvalidConfig {
                field: "degree",
                reason: format!("ring degree must be even and at least 2, got {c}"),
            });
        }
        if c >= n {
            return Err(Error::InvalidConfig {
                field: "degree",
                reason: format!("ring degree must be below the node count, got c = {c}, n = {n}"),
            });
        }
        let half = c / 2;
        let adjacency = (0..n)
            .map(|i| {
                let set: BTreeSet<NodeId> = (1..=half)
                    .flat_map(|h| [(i + h) % n, (i + n - h) % n])
                    .collect();
                set.into_iter().collect()
            })
            .collect();
        Ok(Self {
            mode: Mode::Decentral,
            clients: n,
            adjacency,
        })
    }

    /// Star with `n` clients around server node `n`.
    pub fn star(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig {
                field: "nodes",
                reason: "a star needs at least one client".into(),
            });
        }
        let mut adjacency: Vec<Vec<NodeId>> = (0..n).map(|_| alloc::vec![n]).collect();
        adjacency.push((0..n).collect());
        Ok(Self {
            mode: Mode::Central,
            clients: n,
            adjacency,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of clients (excludes the server in centralized mode).
    pub fn clients(&self) -> usize {
        self.clients
    }

    /// Total vertices, including the server if there is one.
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn server(&self) -> Option<NodeId> {
        match self.mode {
            Mode::Central => Some(self.clients),
            Mode::Decentral => None,
        }
    }

    /// Neighbors of `i`, ascending.
    pub fn neighbors(&self, i: NodeId) -> Result<&[NodeId]> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownNode(i))
    }

    pub fn degree(&self, i: NodeId) -> Result<usize> {
        self.neighbors(i).map(<[NodeId]>::len)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// How many of `i`'s neighbors are in `malicious`. For a client in
    /// centralized mode this is the number of malicious clients the server
    /// aggregates.
    pub fn malicious_neighbors(&self, i: NodeId, malicious: &[NodeId]) -> Result<usize> {
        let neighbors = match (self.mode, self.server()) {
            (Mode::Central, Some(s)) if i != s => self.neighbors(s)?,
            _ => self.neighbors(i)?,
        };
        Ok(neighbors.iter().filter(|j| malicious.contains(j)).count())
    }
}

pub fn build_ring_regular(n: usize, c: usize) -> Result<Topology> {
    Topology::ring_regular(n, c)
}

pub fn build_star(n: usize) -> Result<Topology> {
    Topology::star(n)
}
