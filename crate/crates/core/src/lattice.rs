//! Finite bipartite graphs, the hypercubic torus, fermionic graphs ∧ⁿG, and
//! path enumeration.
//!
//! Vertices are dense indices 0..|Λ|−1. Geometric positions, when present,
//! are metadata used only to evaluate couplings as functions of vertex
//! differences; the combinatorics never looks at them. The sublattice sign
//! γ(x) comes from breadth-first two-coloring with γ = +1 assigned to the
//! lowest-indexed vertex of each component, so constructions are
//! deterministic.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop {{{0}, {0}}} is not allowed")]
    SelfLoop(usize),
    #[error("edge endpoint {vertex} out of range (vertex count {count})")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("graph is not bipartite: edge {{{x}, {y}}} closes an odd cycle")]
    NotBipartite { x: usize, y: usize },
    #[error("particle number {n} out of range 0..={max}")]
    ParticleNumberOutOfRange { n: usize, max: usize },
}

/// A finite bipartite graph with sublattice signs and optional geometry.
#[derive(Clone, Debug)]
pub struct LatticeGraph {
    vertex_count: usize,
    /// Sorted, deduplicated unordered pairs (x, y) with x < y.
    edges: Vec<(usize, usize)>,
    /// γ(x) = ±1; product is −1 across every edge.
    sublattice_sign: Vec<i8>,
    /// Integer coordinates in ℤ^d, when the graph has a geometric embedding.
    positions: Option<Vec<Vec<i64>>>,
    /// (L, d) when this is the periodic hypercubic torus [−L, L)^d.
    torus: Option<(usize, usize)>,
    connected: bool,
}

impl LatticeGraph {
    /// The hypercubic torus Λ = [−L, L)^d ∩ ℤ^d with nearest-neighbor edges
    /// plus the wrap pairs at distance 2L−1 along each axis, deduplicated.
    /// γ(x) = (−1)^{Σ xᵢ}.
    pub fn hypercubic(l: usize, d: usize) -> LatticeGraph {
        assert!(l >= 1 && d >= 1);
        let side = 2 * l;
        let count = side.pow(d as u32);
        let mut positions = Vec::with_capacity(count);
        for idx in 0..count {
            let mut rem = idx;
            let mut coord = Vec::with_capacity(d);
            for _ in 0..d {
                coord.push((rem % side) as i64 - l as i64);
                rem /= side;
            }
            positions.push(coord);
        }
        let index_of = |coord: &[i64]| -> usize {
            let mut idx = 0usize;
            for (axis, &c) in coord.iter().enumerate().rev() {
                let shifted = (c + l as i64).rem_euclid(side as i64) as usize;
                idx = idx * side + shifted;
                let _ = axis;
            }
            idx
        };
        let mut edges = Vec::new();
        for (x, coord) in positions.iter().enumerate() {
            for axis in 0..d {
                let mut next = coord.clone();
                next[axis] += 1; // wraps via rem_euclid; L=1 collapses to one bond
                let y = index_of(&next);
                if x != y {
                    edges.push((x.min(y), x.max(y)));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let sublattice_sign = positions
            .iter()
            .map(|c| if c.iter().sum::<i64>().rem_euclid(2) == 0 { 1 } else { -1 })
            .collect();
        LatticeGraph {
            vertex_count: count,
            edges,
            sublattice_sign,
            positions: Some(positions),
            torus: Some((l, d)),
            connected: true,
        }
    }

    /// A general graph from an explicit edge list. Fails on self-loops and on
    /// odd cycles; reports connectivity.
    pub fn from_edges(
        vertex_count: usize,
        raw_edges: &[(usize, usize)],
    ) -> Result<LatticeGraph, GraphError> {
        LatticeGraph::from_edges_with_positions(vertex_count, raw_edges, None)
    }

    pub fn from_edges_with_positions(
        vertex_count: usize,
        raw_edges: &[(usize, usize)],
        positions: Option<Vec<Vec<i64>>>,
    ) -> Result<LatticeGraph, GraphError> {
        let mut edges = Vec::with_capacity(raw_edges.len());
        for &(x, y) in raw_edges {
            if x == y {
                return Err(GraphError::SelfLoop(x));
            }
            for v in [x, y] {
                if v >= vertex_count {
                    return Err(GraphError::VertexOutOfRange {
                        vertex: v,
                        count: vertex_count,
                    });
                }
            }
            edges.push((x.min(y), x.max(y)));
        }
        edges.sort_unstable();
        edges.dedup();

        let adjacency = adjacency_lists(vertex_count, &edges);
        // two-coloring by BFS; +1 on the lowest-indexed vertex per component
        let mut sign = vec![0i8; vertex_count];
        let mut components = 0usize;
        for start in 0..vertex_count {
            if sign[start] != 0 {
                continue;
            }
            components += 1;
            sign[start] = 1;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                for &y in &adjacency[x] {
                    if sign[y] == 0 {
                        sign[y] = -sign[x];
                        queue.push_back(y);
                    } else if sign[y] == sign[x] {
                        return Err(GraphError::NotBipartite { x, y });
                    }
                }
            }
        }
        Ok(LatticeGraph {
            vertex_count,
            edges,
            sublattice_sign: sign,
            positions,
            torus: None,
            connected: components <= 1,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn gamma(&self, x: usize) -> f64 {
        self.sublattice_sign[x] as f64
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn is_torus(&self) -> Option<(usize, usize)> {
        self.torus
    }

    pub fn positions(&self) -> Option<&[Vec<i64>]> {
        self.positions.as_deref()
    }

    /// Difference vector x − y, wrapped into the fundamental domain
    /// [−L, L)^d on the torus. `None` when the graph carries no geometry.
    pub fn difference(&self, x: usize, y: usize) -> Option<Vec<i64>> {
        let pos = self.positions.as_ref()?;
        let mut diff: Vec<i64> = pos[x].iter().zip(&pos[y]).map(|(a, b)| a - b).collect();
        if let Some((l, _)) = self.torus {
            let side = 2 * l as i64;
            for c in &mut diff {
                *c = (*c + l as i64).rem_euclid(side) - l as i64;
            }
        }
        Some(diff)
    }

    /// True when {x, y} is an edge.
    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        let key = (x.min(y), x.max(y));
        self.edges.binary_search(&key).is_ok()
    }

    /// The fermionic graph ∧ⁿG of this graph.
    pub fn fermionic_graph(&self, n: usize) -> Result<FermionicGraph, GraphError> {
        FermionicGraph::build(self.vertex_count, &self.edges, n)
    }
}

fn adjacency_lists(count: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); count];
    for &(x, y) in edges {
        adj[x].push(y);
        adj[y].push(x);
    }
    adj
}

/// The n-particle fermionic graph ∧ⁿG: vertices are the C(|Λ|, n) sorted
/// n-subsets of Λ (stored as bit masks in ascending integer order), and
/// {X, Y} is an edge iff the subsets differ in exactly one element whose two
/// versions are adjacent in the base graph.
#[derive(Clone, Debug)]
pub struct FermionicGraph {
    pub n: usize,
    pub base_vertex_count: usize,
    /// Subset bit masks, ascending.
    pub vertices: Vec<u64>,
    /// Edges as index pairs into `vertices`, sorted, i < j.
    pub edges: Vec<(usize, usize)>,
}

impl FermionicGraph {
    /// Build ∧ⁿG from a plain adjacency description. The base graph need not
    /// be bipartite.
    pub fn build(
        vertex_count: usize,
        base_edges: &[(usize, usize)],
        n: usize,
    ) -> Result<FermionicGraph, GraphError> {
        if n > vertex_count {
            return Err(GraphError::ParticleNumberOutOfRange {
                n,
                max: vertex_count,
            });
        }
        let vertices = subsets_with_popcount(vertex_count, n);
        let mut index = std::collections::HashMap::with_capacity(vertices.len());
        for (i, &m) in vertices.iter().enumerate() {
            index.insert(m, i);
        }
        let adj = adjacency_lists(vertex_count, base_edges);
        let mut edges = Vec::new();
        for (i, &mask) in vertices.iter().enumerate() {
            for x in 0..vertex_count {
                if mask >> x & 1 == 0 {
                    continue;
                }
                for &y in &adj[x] {
                    if mask >> y & 1 == 1 {
                        continue;
                    }
                    let other = mask ^ (1 << x) | (1 << y);
                    let j = index[&other];
                    if i < j {
                        edges.push((i, j));
                    }
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(FermionicGraph {
            n,
            base_vertex_count: vertex_count,
            vertices,
            edges,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_connected(&self) -> bool {
        let count = self.vertices.len();
        if count <= 1 {
            return true;
        }
        let adj = adjacency_lists(count, &self.edges);
        let mut seen = vec![false; count];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        reached == count
    }

    /// All simple paths X = P₀ … P_L = Y of length exactly `len`, as vertex
    /// index sequences. Empty when none exist.
    pub fn paths_of_length(&self, x: usize, y: usize, len: usize) -> Vec<Vec<usize>> {
        let adj = adjacency_lists(self.vertices.len(), &self.edges);
        let mut out = Vec::new();
        let mut current = vec![x];
        let mut visited = vec![false; self.vertices.len()];
        visited[x] = true;
        fn dfs(
            adj: &[Vec<usize>],
            y: usize,
            len: usize,
            current: &mut Vec<usize>,
            visited: &mut [bool],
            out: &mut Vec<Vec<usize>>,
        ) {
            let head = *current.last().unwrap();
            if current.len() == len + 1 {
                if head == y {
                    out.push(current.clone());
                }
                return;
            }
            for &next in &adj[head] {
                if !visited[next] {
                    visited[next] = true;
                    current.push(next);
                    dfs(adj, y, len, current, visited, out);
                    current.pop();
                    visited[next] = false;
                }
            }
        }
        dfs(&adj, y, len, &mut current, &mut visited, &mut out);
        out
    }
}

/// All |Λ|-bit masks with exactly n bits set, in ascending integer order.
pub fn subsets_with_popcount(bits: usize, n: usize) -> Vec<u64> {
    assert!(bits <= 63);
    if n == 0 {
        return vec![0];
    }
    if n > bits {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut mask: u64 = (1 << n) - 1;
    let limit: u64 = 1 << bits;
    while mask < limit {
        out.push(mask);
        // Gosper's hack: next mask with the same popcount
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    out
}
