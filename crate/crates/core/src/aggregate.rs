//! Aggregation: shrinking a prediction field into few connected groups.
//!
//! Before exact segmentation, the n-vertex problem is reduced to l groups
//! whose members share one representative value (the group mean). The
//! reduction is what makes exact solving tractable, and the error it
//! introduces is controlled by the bounds in [`crate::bounds`].
//!
//! Two constructions are provided: a greedy adjacent-merge scheme driven by
//! the smoothing error, and axis-aligned hyperrectangle cells (split where a
//! cell is not graph-connected) whose side lengths can be tuned from
//! gradient bounds.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::graph::{
    components_of_subset, quotient_graph, DisjointSets, SpatialDataset, SpatialGraph,
};
use crate::prediction::{kahan_sum, l2_distance, PredictionVector};

/// A partition of the vertices into connected groups, together with the
/// group-mean smoothing of a prediction vector.
///
/// Groups are numbered `0..l` in ascending order of their smallest member,
/// each group induces a connected subgraph, and the smoothed vector carries
/// the group mean at every member, so totals are preserved.
#[derive(Debug, Clone)]
pub struct Aggregation {
    sublabels: Vec<usize>,
    groups: Vec<Vec<usize>>,
    representative: Vec<f64>,
    aggregated: PredictionVector,
    quotient: SpatialGraph,
}

impl Aggregation {
    /// Builds an aggregation from a group-membership vector. Groups
    /// `0..group_count` must all be nonempty and graph-connected.
    pub fn from_sublabels(
        g: &SpatialGraph,
        eta: &PredictionVector,
        sublabels: Vec<usize>,
        group_count: usize,
    ) -> Result<Self> {
        if eta.len() != g.n() {
            return Err(Error::InvalidParameter(format!(
                "{} predictions for {} vertices",
                eta.len(),
                g.n()
            )));
        }
        let report = verify_group_connectivity(g, &sublabels, group_count)?;
        if let Some(gid) = report.connected.iter().position(|ok| !ok) {
            return Err(Error::InvalidPartition(format!(
                "group {gid} induces a disconnected subgraph"
            )));
        }
        let mut groups = vec![Vec::new(); group_count];
        for (v, &s) in sublabels.iter().enumerate() {
            groups[s].push(v);
        }
        let mut representative = Vec::with_capacity(group_count);
        for members in &groups {
            let total = kahan_sum(members.iter().map(|&v| eta[v]));
            representative.push(total / members.len() as f64);
        }
        let mut smoothed = vec![0.0; g.n()];
        for (v, &s) in sublabels.iter().enumerate() {
            smoothed[v] = representative[s];
        }
        let aggregated = PredictionVector::new(smoothed)?;
        let (total_raw, total_smooth) = (eta.sum(), aggregated.sum());
        if (total_raw - total_smooth).abs() > 1e-9 * total_raw.abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "group means failed to preserve the prediction total ({total_raw} vs {total_smooth})"
            )));
        }
        let quotient = quotient_graph(g, &sublabels, group_count)?;
        Ok(Self { sublabels, groups, representative, aggregated, quotient })
    }

    pub fn n(&self) -> usize {
        self.sublabels.len()
    }

    /// Number of groups, l.
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Group id of each vertex.
    pub fn sublabels(&self) -> &[usize] {
        &self.sublabels
    }

    /// Members of each group, sorted ascending.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Group means of the source predictions, indexed by group.
    pub fn representative(&self) -> &[f64] {
        &self.representative
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// The smoothed prediction vector: each vertex carries its group mean.
    pub fn aggregated(&self) -> &PredictionVector {
        &self.aggregated
    }

    /// The graph on groups induced by cross-group edges.
    pub fn quotient(&self) -> &SpatialGraph {
        &self.quotient
    }

    /// Broadcasts one value per group back to a full n-vector.
    pub fn expand(&self, per_group: &[f64]) -> Result<Vec<f64>> {
        if per_group.len() != self.group_count() {
            return Err(Error::InvalidParameter(format!(
                "{} values for {} groups",
                per_group.len(),
                self.group_count()
            )));
        }
        Ok(self.sublabels.iter().map(|&s| per_group[s]).collect())
    }

    /// Euclidean distance between the smoothed vector and the raw one.
    pub fn smoothing_error(&self, eta: &PredictionVector) -> f64 {
        l2_distance(self.aggregated.values(), eta.values())
    }
}

/// Connectivity status of each group of a membership vector.
#[derive(Debug, Clone)]
pub struct GroupConnectivityReport {
    pub connected: Vec<bool>,
    pub pass: bool,
}

/// Checks that groups `0..group_count` are all nonempty and that each one
/// induces a connected subgraph. Intended for validating membership vectors
/// from external sources before building an [`Aggregation`].
pub fn verify_group_connectivity(
    g: &SpatialGraph,
    sublabels: &[usize],
    group_count: usize,
) -> Result<GroupConnectivityReport> {
    if sublabels.len() != g.n() {
        return Err(Error::InvalidParameter(format!(
            "{} sublabels for {} vertices",
            sublabels.len(),
            g.n()
        )));
    }
    if group_count == 0 {
        return Err(Error::InvalidParameter("group count must be positive".into()));
    }
    let mut groups = vec![Vec::new(); group_count];
    for (v, &s) in sublabels.iter().enumerate() {
        if s >= group_count {
            return Err(Error::InvalidParameter(format!(
                "vertex {v} assigned to group {s}, but only {group_count} groups exist"
            )));
        }
        groups[s].push(v);
    }
    if let Some(gid) = groups.iter().position(Vec::is_empty) {
        return Err(Error::InvalidParameter(format!("group {gid} is empty")));
    }
    let connected: Vec<bool> = groups
        .iter()
        .map(|members| components_of_subset(g, members).len() == 1)
        .collect();
    let pass = connected.iter().all(|&c| c);
    Ok(GroupConnectivityReport { connected, pass })
}

/// Heap key for candidate merges: cost first, then the pair of group
/// minimum ids, which identifies the pair uniquely.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MergeKey(f64, usize, usize);

impl Eq for MergeKey {}

impl PartialOrd for MergeKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MergeKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .total_cmp(&other.0)
            .then(self.1.cmp(&other.1))
            .then(self.2.cmp(&other.2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct MergeCandidate {
    key: MergeKey,
    root_a: usize,
    root_b: usize,
    version_a: u64,
    version_b: u64,
}

/// Cost increase of the smoothing error (squared) when two groups merge:
/// the classical pooled-variance increment.
fn merge_cost(cnt_a: f64, sum_a: f64, cnt_b: f64, sum_b: f64) -> f64 {
    let (mean_a, mean_b) = (sum_a / cnt_a, sum_b / cnt_b);
    let d = mean_a - mean_b;
    cnt_a * cnt_b / (cnt_a + cnt_b) * d * d
}

/// Greedy aggregation: starting from singletons, repeatedly merge the
/// adjacent pair of groups whose union increases the smoothing error the
/// least, until exactly `l` groups remain.
///
/// Cost ties resolve toward the pair with the smallest member ids, so the
/// result is deterministic. Requires a connected graph.
pub fn greedy_aggregate(
    g: &SpatialGraph,
    eta: &PredictionVector,
    l: usize,
) -> Result<Aggregation> {
    let n = g.n();
    if eta.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} predictions for {n} vertices",
            eta.len()
        )));
    }
    if l == 0 || l > n {
        return Err(Error::InvalidParameter(format!(
            "group count must satisfy 1 <= l <= n (got l={l}, n={n})"
        )));
    }
    g.require_connected()?;

    let mut sets = DisjointSets::new(n);
    let mut count = vec![1.0f64; n];
    let mut sum: Vec<f64> = (0..n).map(|v| eta[v]).collect();
    let mut min_id: Vec<usize> = (0..n).collect();
    let mut version = vec![0u64; n];
    let mut neighbors: Vec<BTreeSet<usize>> = (0..n)
        .map(|v| g.neighbors(v).iter().copied().collect())
        .collect();

    let mut heap: BinaryHeap<Reverse<MergeCandidate>> = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Reverse<MergeCandidate>>,
                a: usize,
                b: usize,
                count: &[f64],
                sum: &[f64],
                min_id: &[usize],
                version: &[u64]| {
        let cost = merge_cost(count[a], sum[a], count[b], sum[b]);
        let (lo, hi) = if min_id[a] < min_id[b] { (min_id[a], min_id[b]) } else { (min_id[b], min_id[a]) };
        heap.push(Reverse(MergeCandidate {
            key: MergeKey(cost, lo, hi),
            root_a: a,
            root_b: b,
            version_a: version[a],
            version_b: version[b],
        }));
    };
    for e in g.edges() {
        push(&mut heap, e.u, e.v, &count, &sum, &min_id, &version);
    }

    let mut remaining = n;
    while remaining > l {
        let cand = match heap.pop() {
            Some(Reverse(c)) => c,
            None => {
                return Err(Error::Numerical(
                    "merge queue exhausted before reaching the target group count".into(),
                ))
            }
        };
        let (a, b) = (cand.root_a, cand.root_b);
        // Lazy invalidation: both endpoints must still be live roots with
        // the state they had when this candidate was pushed.
        if sets.find(a) != a
            || sets.find(b) != b
            || version[a] != cand.version_a
            || version[b] != cand.version_b
        {
            continue;
        }
        sets.union(a, b);
        let winner = sets.find(a);
        let loser = if winner == a { b } else { a };
        count[winner] += count[loser];
        sum[winner] += sum[loser];
        min_id[winner] = min_id[winner].min(min_id[loser]);
        version[winner] += 1;
        version[loser] += 1;

        let loser_neighbors = std::mem::take(&mut neighbors[loser]);
        let mut merged: BTreeSet<usize> = std::mem::take(&mut neighbors[winner]);
        merged.extend(loser_neighbors);
        merged.remove(&winner);
        merged.remove(&loser);
        // Re-root stale entries: neighbours recorded under old roots.
        let merged: BTreeSet<usize> = merged.into_iter().map(|x| sets.find(x)).collect();
        for &x in &merged {
            neighbors[x].remove(&a);
            neighbors[x].remove(&b);
            neighbors[x].insert(winner);
            push(&mut heap, winner, x, &count, &sum, &min_id, &version);
        }
        neighbors[winner] = merged;
        remaining -= 1;
    }

    // Canonical numbering: groups ordered by their smallest member.
    let mut roots: Vec<usize> = (0..n).filter(|&v| sets.find(v) == v).collect();
    roots.sort_by_key(|&r| min_id[r]);
    let index_of: BTreeMap<usize, usize> =
        roots.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let mut sublabels = vec![0usize; n];
    for v in 0..n {
        sublabels[v] = index_of[&sets.find(v)];
    }
    Aggregation::from_sublabels(g, eta, sublabels, roots.len())
}

/// An axis-aligned grid of cells: `cell(x) = floor((x - origin) / sides)`
/// per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperrectScheme {
    pub origin: Vec<f64>,
    pub sides: Vec<f64>,
}

impl HyperrectScheme {
    pub fn new(origin: Vec<f64>, sides: Vec<f64>) -> Result<Self> {
        if origin.len() != sides.len() {
            return Err(Error::InvalidParameter(
                "origin and side-length dimensions differ".into(),
            ));
        }
        if sides.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(
                "cell side lengths must be positive and finite".into(),
            ));
        }
        Ok(Self { origin, sides })
    }

    pub fn cell_of(&self, point: &[f64]) -> Vec<i64> {
        point
            .iter()
            .zip(self.origin.iter().zip(&self.sides))
            .map(|(&x, (&o, &s))| ((x - o) / s).floor() as i64)
            .collect()
    }
}

/// Aggregates by hyperrectangle cells. Points sharing a cell form a group;
/// a cell whose members are not graph-connected is split into its connected
/// components, so the groups always satisfy the aggregation invariants.
pub fn hyperrect_aggregate(
    g: &SpatialGraph,
    data: &SpatialDataset,
    eta: &PredictionVector,
    scheme: &HyperrectScheme,
) -> Result<Aggregation> {
    if data.n() != g.n() {
        return Err(Error::InvalidParameter(format!(
            "{} points for {} vertices",
            data.n(),
            g.n()
        )));
    }
    if scheme.sides.len() != data.dim() {
        return Err(Error::InvalidParameter(format!(
            "scheme dimension {} does not match data dimension {}",
            scheme.sides.len(),
            data.dim()
        )));
    }
    let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for v in 0..data.n() {
        cells.entry(scheme.cell_of(data.point(v))).or_default().push(v);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for members in cells.values() {
        for comp in components_of_subset(g, members) {
            groups.push(comp);
        }
    }
    groups.sort_by_key(|members| members[0]);
    let mut sublabels = vec![0usize; g.n()];
    for (gid, members) in groups.iter().enumerate() {
        for &v in members {
            sublabels[v] = gid;
        }
    }
    Aggregation::from_sublabels(g, eta, sublabels, groups.len())
}

/// Cell side lengths minimizing the aggregation error bound at a fixed
/// geometric-mean cell size.
#[derive(Debug, Clone, PartialEq)]
pub struct SideLengths {
    pub sides: Vec<f64>,
    pub geometric_mean: f64,
    /// The optimized bound is `coefficient * sqrt(n)`.
    pub bound_coefficient: f64,
}

impl SideLengths {
    /// Value of the optimized error bound for an n-point dataset.
    pub fn bound(&self, n: usize) -> f64 {
        self.bound_coefficient * (n as f64).sqrt()
    }
}

/// Given per-axis bounds on the field's partial derivatives, chooses cell
/// side lengths with geometric mean `delta` that minimize the worst-case
/// smoothing-error bound `2 sqrt(n) * sum_i side_i * sup_i`.
///
/// The optimum equalizes the per-axis products: `side_i` proportional to
/// `1 / sup_i`, giving the bound `2 d * (prod_i sup_i)^(1/d) * delta * sqrt(n)`.
pub fn optimal_side_lengths(sup_grad: &[f64], delta: f64) -> Result<SideLengths> {
    let d = sup_grad.len();
    if d == 0 {
        return Err(Error::InvalidParameter("no axes given".into()));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter("cell size must be positive".into()));
    }
    if let Some(i) = sup_grad.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gradient bound along axis {i} must be positive and finite \
             (a flat axis makes the optimal side length unbounded)"
        )));
    }
    let log_geo = sup_grad.iter().map(|s| s.ln()).sum::<f64>() / d as f64;
    let geo = log_geo.exp();
    let sides: Vec<f64> = sup_grad.iter().map(|&s| geo / s * delta).collect();
    Ok(SideLengths {
        sides,
        geometric_mean: delta,
        bound_coefficient: 2.0 * geo * d as f64 * delta,
    })
}

/// Worst-case bound on twice the smoothing error of an aggregation built
/// from `scheme`-sized cells, given per-axis gradient bounds.
pub fn cell_error_bound(scheme: &HyperrectScheme, sup_grad: &[f64], n: usize) -> f64 {
    let per_point: f64 = scheme
        .sides
        .iter()
        .zip(sup_grad)
        .map(|(&s, &g)| s * g)
        .sum();
    2.0 * (n as f64).sqrt() * per_point
}

/// Twice the smoothing error: an assumption-free upper bound on how much
/// the aggregated optimum can trail the exact one.
pub fn c2_of(agg: &Aggregation, eta: &PredictionVector) -> f64 {
    2.0 * agg.smoothing_error(eta)
}

/// Selects the groups with quotient degree at most one and restores the raw
/// predictions inside them.
///
/// Returns the selected group ids (ascending) and the adjusted vector:
/// group means everywhere except inside selected groups, which keep their
/// raw values. Totals are preserved, and the adjusted vector is never
/// farther from the raw predictions than the fully smoothed one.
pub fn revert_fringe_groups(
    agg: &Aggregation,
    eta: &PredictionVector,
) -> Result<(Vec<usize>, PredictionVector)> {
    if eta.len() != agg.n() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions for {} vertices",
            eta.len(),
            agg.n()
        )));
    }
    let q = agg.quotient();
    let selected: Vec<usize> = (0..agg.group_count()).filter(|&g| q.degree(g) <= 1).collect();
    let mut adjusted = agg.aggregated().values().to_vec();
    for &gid in &selected {
        for &v in &agg.groups()[gid] {
            adjusted[v] = eta[v];
        }
    }
    Ok((selected, PredictionVector::new(adjusted)?))
}

/// Per-group connectivity report for an aggregation checked against a
/// graph. Aggregations are constructed connected on their own graph, so a
/// failure means `g` is not the graph the aggregation was built from.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// For each group, whether its members induce a connected subgraph.
    pub group_connected: Vec<bool>,
    pub pass: bool,
}

/// Checks every group of `agg` for induced connectivity on `g`; used as a
/// guard before solving on artifacts loaded from disk.
pub fn verify_assumptions(agg: &Aggregation, g: &SpatialGraph) -> Result<AssumptionReport> {
    if g.n() != agg.n() {
        return Err(Error::InvalidParameter(format!(
            "aggregation covers {} vertices, graph has {}",
            agg.n(),
            g.n()
        )));
    }
    let group_connected: Vec<bool> = agg
        .groups()
        .iter()
        .map(|members| components_of_subset(g, members).len() == 1)
        .collect();
    let pass = group_connected.iter().all(|&c| c);
    Ok(AssumptionReport { group_connected, pass })
}
