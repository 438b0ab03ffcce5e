//! Configuration-model multigraphs built by uniform half-edge pairing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::degree::DegreeSequence;
use crate::error::{Error, Result};

const ABSENT: u32 = u32::MAX;

/// Live half-edges with O(1) uniform draw and O(1) removal.
///
/// Half-edge ids are `0..total`, grouped by owner vertex in index order.
#[derive(Debug, Clone)]
pub struct HalfEdgePool {
    entries: Vec<u32>,
    slot: Vec<u32>,
    owner: Vec<u32>,
}

impl HalfEdgePool {
    pub fn new(seq: &DegreeSequence) -> Self {
        let total = seq.total_degree() as usize;
        let mut owner = Vec::with_capacity(total);
        for (v, &d) in seq.degrees().iter().enumerate() {
            owner.extend(std::iter::repeat_n(v as u32, d as usize));
        }
        Self {
            entries: (0..total as u32).collect(),
            slot: (0..total as u32).collect(),
            owner,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn owner(&self, id: u32) -> u32 {
        self.owner[id as usize]
    }

    pub fn contains(&self, id: u32) -> bool {
        self.slot[id as usize] != ABSENT
    }

    /// Uniform live half-edge.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u32> {
        if self.entries.is_empty() {
            return Err(Error::EmptyPool);
        }
        Ok(self.entries[rng.random_range(0..self.entries.len())])
    }

    /// Swap-with-last removal; returns false when `id` was not live.
    pub fn remove(&mut self, id: u32) -> bool {
        let at = self.slot[id as usize];
        if at == ABSENT {
            return false;
        }
        let last = *self.entries.last().expect("non-empty when id is live");
        self.entries.swap_remove(at as usize);
        if last != id {
            self.slot[last as usize] = at;
        }
        self.slot[id as usize] = ABSENT;
        true
    }

    /// Draws and removes a uniform live half-edge.
    pub fn take<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<u32> {
        let id = self.draw(rng)?;
        self.remove(id);
        Ok(id)
    }
}

/// Undirected multigraph; self-loops appear twice in their vertex's list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
}

impl MultiGraph {
    pub fn from_edges(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        Self { n, edges, adjacency }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Neighbor per incident stub.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }
}

/// Uniform perfect matching of the half-edges of `seq`.
pub fn build_configuration_model<R: Rng + ?Sized>(seq: &DegreeSequence, rng: &mut R) -> Result<MultiGraph> {
    let total = seq.total_degree();
    if total % 2 == 1 {
        return Err(Error::OddDegreeSum(total));
    }
    let mut pool = HalfEdgePool::new(seq);
    let mut edges = Vec::with_capacity(total as usize / 2);
    while !pool.is_empty() {
        let a = pool.take(rng)?;
        let b = pool.take(rng)?;
        edges.push((pool.owner(a), pool.owner(b)));
    }
    Ok(MultiGraph::from_edges(seq.n(), edges))
}
