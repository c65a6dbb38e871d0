//! Spatial datasets and the graphs built over them.
//!
//! The pipeline works on sparse undirected graphs whose vertices are data
//! points: a k-nearest-neighbour graph for density, its minimum spanning
//! tree for guaranteed connectivity, and unions of the two. Groups of
//! vertices can be collapsed into a quotient graph, which is how the
//! aggregation stage shrinks problems before exact solving.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Points in d-dimensional space with optional scalar responses.
///
/// Coordinates are stored row-major; vertex ids are implicit indices
/// `0..n`, which every other structure in the library shares.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDataset {
    dim: usize,
    coords: Vec<f64>,
    responses: Option<Vec<f64>>,
}

impl SpatialDataset {
    pub fn new(dim: usize, coords: Vec<f64>, responses: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::InvalidData(format!(
                "coordinate buffer length {} is not a positive multiple of dim {dim}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidData(format!(
                "coordinate {i} is not finite"
            )));
        }
        let n = coords.len() / dim;
        if let Some(resp) = &responses {
            if resp.len() != n {
                return Err(Error::InvalidData(format!(
                    "{} responses for {n} points",
                    resp.len()
                )));
            }
            if let Some(i) = resp.iter().position(|y| !y.is_finite()) {
                return Err(Error::InvalidData(format!("response {i} is not finite")));
            }
        }
        Ok(Self { dim, coords, responses })
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn responses(&self) -> Option<&[f64]> {
        self.responses.as_deref()
    }

    /// Per-axis (min, max) over all points.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for (a, &c) in p.iter().enumerate() {
                lo[a] = lo[a].min(c);
                hi[a] = hi[a].max(c);
            }
        }
        (lo, hi)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        crate::prediction::l2_distance(self.point(i), self.point(j))
    }
}

/// An undirected edge with a nonnegative weight, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// A simple undirected graph over vertices `0..n`.
///
/// Edges are kept sorted by `(u, v)` with `u < v`, without duplicates or
/// self-loops, so equal graphs have equal representations and every
/// serialization is canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGraph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl SpatialGraph {
    pub fn new(n: usize, raw_edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one vertex".into()));
        }
        let mut edges = Vec::with_capacity(raw_edges.len());
        for (a, b, w) in raw_edges {
            if a == b {
                return Err(Error::InvalidData(format!("self-loop at vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidData(format!(
                    "edge ({a}, {b}) out of range for {n} vertices"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidData(format!(
                    "edge ({a}, {b}) has invalid weight {w}"
                )));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            edges.push(Edge { u, v, weight: w });
        }
        edges.sort_by(|x, y| (x.u, x.v).cmp(&(y.u, y.v)));
        if let Some(w) = edges.windows(2).find(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(Error::InvalidData(format!(
                "duplicate edge ({}, {})",
                w[0].u, w[0].v
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.u].push(e.v);
            adjacency[e.v].push(e.u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self { n, edges, adjacency })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn is_connected(&self) -> bool {
        connected_components(self).len() == 1
    }

    /// Errors with the component list unless the graph is connected.
    pub fn require_connected(&self) -> Result<()> {
        let components = connected_components(self);
        if components.len() == 1 {
            Ok(())
        } else {
            Err(Error::Disconnected { components })
        }
    }
}

/// Union-find over `0..n` with union by rank and path halving.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
    sets: usize,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n], sets: n }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets containing `a` and `b`; returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[lo] = hi;
        if self.rank[ra] == self.rank[rb] {
            self.rank[hi] += 1;
        }
        self.sets -= 1;
        true
    }

    pub fn set_count(&self) -> usize {
        self.sets
    }
}

/// Builds the symmetrized k-nearest-neighbour graph with Euclidean edge
/// weights: `{i, j}` is an edge when j is among i's k nearest or vice versa.
///
/// Distance ties are broken toward the smaller vertex id, so the result is
/// deterministic for any input.
pub fn build_knn_graph(data: &SpatialDataset, k: usize) -> Result<SpatialGraph> {
    let n = data.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k < n (got k={k}, n={n})"
        )));
    }
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        candidates.clear();
        for j in 0..n {
            if j != i {
                candidates.push((data.distance(i, j), j));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, j) in candidates.iter().take(k) {
            let (u, v) = if i < j { (i, j) } else { (j, i) };
            pairs.push((u, v, d));
        }
    }
    pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    pairs.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
    SpatialGraph::new(n, pairs)
}

/// Minimum spanning tree by Kruskal's algorithm.
///
/// Weight ties are broken by `(min id, max id)` so the tree is unique.
/// Errors with the component list if the input is disconnected.
pub fn build_mst(g: &SpatialGraph) -> Result<SpatialGraph> {
    let mut order: Vec<&Edge> = g.edges().iter().collect();
    order.sort_by(|a, b| a.weight.total_cmp(&b.weight).then((a.u, a.v).cmp(&(b.u, b.v))));
    let mut sets = DisjointSets::new(g.n());
    let mut kept = Vec::with_capacity(g.n().saturating_sub(1));
    for e in order {
        if sets.union(e.u, e.v) {
            kept.push((e.u, e.v, e.weight));
            if kept.len() + 1 == g.n() {
                break;
            }
        }
    }
    if kept.len() + 1 < g.n() {
        return Err(Error::Disconnected { components: connected_components(g) });
    }
    SpatialGraph::new(g.n(), kept)
}

/// Union of two graphs over the same vertex set. When both carry the same
/// edge, the smaller weight is kept.
pub fn union_graphs(a: &SpatialGraph, b: &SpatialGraph) -> Result<SpatialGraph> {
    if a.n() != b.n() {
        return Err(Error::InvalidParameter(format!(
            "vertex counts differ: {} vs {}",
            a.n(),
            b.n()
        )));
    }
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in a.edges().iter().chain(b.edges()) {
        merged
            .entry((e.u, e.v))
            .and_modify(|w| *w = w.min(e.weight))
            .or_insert(e.weight);
    }
    SpatialGraph::new(a.n(), merged.into_iter().map(|((u, v), w)| (u, v, w)).collect())
}

/// Connected components, each sorted ascending, ordered by minimum vertex id.
pub fn connected_components(g: &SpatialGraph) -> Vec<Vec<usize>> {
    let mut seen = vec![false; g.n()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..g.n() {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &w in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Connected components of the subgraph induced by `subset`, in the same
/// deterministic order as [`connected_components`].
pub fn components_of_subset(g: &SpatialGraph, subset: &[usize]) -> Vec<Vec<usize>> {
    let mut allowed = vec![false; g.n()];
    for &v in subset {
        allowed[v] = true;
    }
    let mut seen = vec![false; g.n()];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    for &start in &sorted {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &w in g.neighbors(v) {
                if allowed[w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Collapses groups of vertices into single vertices.
///
/// `membership[v]` names the group of vertex `v`; groups `0..group_count`
/// must all be nonempty. Two groups are adjacent in the quotient when any
/// edge crosses between them; the quotient edge carries the smallest
/// crossing weight.
pub fn quotient_graph(
    g: &SpatialGraph,
    membership: &[usize],
    group_count: usize,
) -> Result<SpatialGraph> {
    if membership.len() != g.n() {
        return Err(Error::InvalidParameter(format!(
            "membership length {} does not match vertex count {}",
            membership.len(),
            g.n()
        )));
    }
    if group_count == 0 {
        return Err(Error::InvalidParameter("group count must be positive".into()));
    }
    let mut seen_group = vec![false; group_count];
    for (v, &m) in membership.iter().enumerate() {
        if m >= group_count {
            return Err(Error::InvalidParameter(format!(
                "vertex {v} assigned to group {m}, but only {group_count} groups exist"
            )));
        }
        seen_group[m] = true;
    }
    if let Some(gid) = seen_group.iter().position(|s| !s) {
        return Err(Error::InvalidParameter(format!("group {gid} is empty")));
    }
    let mut cross: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in g.edges() {
        let (a, b) = (membership[e.u], membership[e.v]);
        if a != b {
            let key = if a < b { (a, b) } else { (b, a) };
            cross
                .entry(key)
                .and_modify(|w| *w = w.min(e.weight))
                .or_insert(e.weight);
        }
    }
    SpatialGraph::new(group_count, cross.into_iter().map(|((u, v), w)| (u, v, w)).collect())
}

/// Writes the canonical edge-list form: a `# vertices=<n>` header followed
/// by one `u v weight` line per edge in `(u, v)` order.
pub fn write_edge_list(g: &SpatialGraph, out: &mut impl Write) -> Result<()> {
    writeln!(out, "# vertices={}", g.n())?;
    for e in g.edges() {
        writeln!(out, "{} {} {}", e.u, e.v, e.weight)?;
    }
    Ok(())
}

/// Parses the edge-list form produced by [`write_edge_list`]. Later `#`
/// lines are ignored; the leading header is required.
pub fn read_edge_list(input: &mut impl BufRead) -> Result<SpatialGraph> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty edge list".into()))??;
    let n: usize = header
        .strip_prefix("# vertices=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Format(format!("bad header line: {header:?}")))?;
    let mut edges = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let parse = |tok: Option<&str>, what: &str| -> Result<String> {
            tok.map(str::to_owned).ok_or_else(|| {
                Error::Format(format!("edge line {}: missing {what}", lineno + 2))
            })
        };
        let u: usize = parse(parts.next(), "source")?
            .parse()
            .map_err(|_| Error::Format(format!("edge line {}: bad vertex", lineno + 2)))?;
        let v: usize = parse(parts.next(), "target")?
            .parse()
            .map_err(|_| Error::Format(format!("edge line {}: bad vertex", lineno + 2)))?;
        let w: f64 = parse(parts.next(), "weight")?
            .parse()
            .map_err(|_| Error::Format(format!("edge line {}: bad weight", lineno + 2)))?;
        if parts.next().is_some() {
            return Err(Error::Format(format!(
                "edge line {}: trailing tokens",
                lineno + 2
            )));
        }
        edges.push((u, v, w));
    }
    SpatialGraph::new(n, edges)
}
