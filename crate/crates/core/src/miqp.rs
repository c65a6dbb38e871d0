//! Export of the partitioning problem as a mixed-integer quadratic program
//! in LP text format, plus verification of externally produced solutions.
//!
//! The formulation follows the linearized objective: binary assignments
//! w_ij, representatives v_j in [min, max] of the data, and residuals e_i
//! tied together by big-M absolute-value constraints with M = 2 (max - min)
//! of the model's own data vector. Contiguity is enforced by a per-cluster
//! rooted flow system. The emitted file embeds enough metadata (data,
//! weights, edges) to verify a solution file without any other artifact.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::aggregate::Aggregation;
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::prediction::PredictionVector;
use crate::solver::{weighted_objective, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// Lower bound; `f64::NEG_INFINITY` means free below.
    pub lower: f64,
    /// Upper bound; `f64::INFINITY` means free above.
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(&self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// (variable index, coefficient) pairs, in deterministic order.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Everything needed to interpret a solution file on its own: the problem
/// dimensions, the big-M constant, the per-vertex objective weights and
/// data values, and the graph edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MiqpMeta {
    pub n: usize,
    pub m: usize,
    pub big_m: f64,
    pub weights: Vec<f64>,
    pub data: Vec<f64>,
    pub edges: Vec<(usize, usize)>,
}

/// An immutable optimization model: variables, linear constraints, and a
/// convex diagonal quadratic objective over the residual variables.
#[derive(Debug, Clone)]
pub struct MiqpModel {
    variables: Vec<Variable>,
    name_index: BTreeMap<String, usize>,
    constraints: Vec<Constraint>,
    /// (i, j, c) meaning `c * x_i * x_j`; built as pure squares (i == j).
    quadratic: Vec<(usize, usize, f64)>,
    meta: MiqpMeta,
}

impl MiqpModel {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn quadratic(&self) -> &[(usize, usize, f64)] {
        &self.quadratic
    }

    pub fn meta(&self) -> &MiqpMeta {
        &self.meta
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.name_index.get(name).copied()
    }

    fn push_variable(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        let idx = self.variables.len();
        self.name_index.insert(name.clone(), idx);
        self.variables.push(Variable { name, kind, lower, upper });
        idx
    }

    fn graph(&self) -> SpatialGraph {
        let edges = self.meta.edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        SpatialGraph::new(self.meta.n, edges).expect("metadata edges are valid")
    }

    /// True if flow (contiguity) variables are present.
    pub fn has_flow(&self) -> bool {
        self.name_index.contains_key("s0")
    }
}

fn w_name(i: usize, j: usize) -> String {
    format!("w{i}_{j}")
}

/// Builds the assignment model over `g`: binaries w, representatives v,
/// residuals e, the assignment equalities, and the big-M linearization of
/// the absolute residual constraints. Contiguity is added separately by
/// [`add_flow_constraints`].
///
/// With `aggregated` given, `g` must be that aggregation's quotient graph;
/// each vertex of the model is then a group, its data value is the group
/// mean, and its squared residual is weighted by the group size.
pub fn build_miqp(
    g: &SpatialGraph,
    eta: &PredictionVector,
    m: usize,
    aggregated: Option<&Aggregation>,
) -> Result<MiqpModel> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one cluster".into()));
    }
    g.require_connected()?;
    let (data, weights): (Vec<f64>, Vec<f64>) = match aggregated {
        None => {
            if eta.len() != g.n() {
                return Err(Error::InvalidParameter(format!(
                    "{} predictions for {} vertices",
                    eta.len(),
                    g.n()
                )));
            }
            (eta.values().to_vec(), vec![1.0; g.n()])
        }
        Some(agg) => {
            if g.n() != agg.group_count() {
                return Err(Error::InvalidParameter(format!(
                    "aggregated models are built on the quotient graph \
                     ({} groups, got a graph with {} vertices)",
                    agg.group_count(),
                    g.n()
                )));
            }
            if eta.len() != agg.n() {
                return Err(Error::InvalidParameter(format!(
                    "{} predictions for an aggregation of {} vertices",
                    eta.len(),
                    agg.n()
                )));
            }
            let sizes = agg.group_sizes().iter().map(|&s| s as f64).collect();
            (agg.representative().to_vec(), sizes)
        }
    };
    let n = g.n();
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let big_m = 2.0 * (hi - lo);

    let mut model = MiqpModel {
        variables: Vec::new(),
        name_index: BTreeMap::new(),
        constraints: Vec::new(),
        quadratic: Vec::new(),
        meta: MiqpMeta {
            n,
            m,
            big_m,
            weights: weights.clone(),
            data: data.clone(),
            edges: g.edges().iter().map(|e| (e.u, e.v)).collect(),
        },
    };

    for i in 0..n {
        for j in 0..m {
            model.push_variable(w_name(i, j), VarKind::Binary, 0.0, 1.0);
        }
    }
    for j in 0..m {
        model.push_variable(format!("v{j}"), VarKind::Continuous, lo, hi);
    }
    for i in 0..n {
        let e = model.push_variable(
            format!("e{i}"),
            VarKind::Continuous,
            f64::NEG_INFINITY,
            f64::INFINITY,
        );
        model.quadratic.push((e, e, weights[i]));
    }

    let w_idx = |i: usize, j: usize| i * m + j;
    let v_idx = |j: usize| n * m + j;
    let e_idx = |i: usize| n * m + m + i;

    for i in 0..n {
        model.constraints.push(Constraint {
            name: format!("assign_{i}"),
            terms: (0..m).map(|j| (w_idx(i, j), 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    // |e_i + data_i - v_j| <= big_m (1 - w_ij), split into two inequalities.
    for i in 0..n {
        for j in 0..m {
            model.constraints.push(Constraint {
                name: format!("abs_up_{i}_{j}"),
                terms: vec![(e_idx(i), 1.0), (v_idx(j), -1.0), (w_idx(i, j), big_m)],
                sense: Sense::Le,
                rhs: big_m - data[i],
            });
            model.constraints.push(Constraint {
                name: format!("abs_lo_{i}_{j}"),
                terms: vec![(e_idx(i), -1.0), (v_idx(j), 1.0), (w_idx(i, j), big_m)],
                sense: Sense::Le,
                rhs: big_m + data[i],
            });
        }
    }
    Ok(model)
}

/// Adds the rooted-flow contiguity system for every cluster: a unique root
/// per cluster, the cluster-size channel z (big-M-linked to the root
/// indicator), and flow conservation with capacities that shut edges whose
/// endpoints are outside the cluster.
pub fn add_flow_constraints(mut model: MiqpModel, g: &SpatialGraph) -> Result<MiqpModel> {
    let n = model.meta.n;
    let m = model.meta.m;
    if g.n() != n {
        return Err(Error::InvalidParameter(format!(
            "flow constraints need the model's graph ({n} vertices, got {})",
            g.n()
        )));
    }
    let model_edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    if model_edges != model.meta.edges {
        return Err(Error::InvalidParameter(
            "flow constraints need the same edge set the model was built on".into(),
        ));
    }
    if model.has_flow() {
        return Err(Error::InvalidParameter("flow constraints already added".into()));
    }
    let nf = n as f64;

    for i in 0..n {
        for j in 0..m {
            model.push_variable(format!("r{i}_{j}"), VarKind::Binary, 0.0, 1.0);
        }
    }
    for i in 0..n {
        for j in 0..m {
            model.push_variable(format!("z{i}_{j}"), VarKind::Continuous, 0.0, nf);
        }
    }
    for j in 0..m {
        model.push_variable(format!("s{j}"), VarKind::Continuous, 0.0, nf);
    }
    let edges = model.meta.edges.clone();
    for &(u, v) in &edges {
        for (a, b) in [(u, v), (v, u)] {
            for k in 0..m {
                model.push_variable(format!("f{a}_{b}_{k}"), VarKind::Continuous, 0.0, nf);
            }
        }
    }

    let idx = |name: &str| model.name_index[name];
    let w = |i: usize, j: usize| idx(&w_name(i, j));
    let r = |i: usize, j: usize| idx(&format!("r{i}_{j}"));
    let z = |i: usize, j: usize| idx(&format!("z{i}_{j}"));
    let s = |j: usize| idx(&format!("s{j}"));
    let f = |a: usize, b: usize, k: usize| idx(&format!("f{a}_{b}_{k}"));

    let mut cons = Vec::new();
    for j in 0..m {
        cons.push(Constraint {
            name: format!("root_{j}"),
            terms: (0..n).map(|i| (r(i, j), 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    for i in 0..n {
        for j in 0..m {
            cons.push(Constraint {
                name: format!("rootmem_{i}_{j}"),
                terms: vec![(r(i, j), 1.0), (w(i, j), -1.0)],
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }
    for j in 0..m {
        let mut terms = vec![(s(j), 1.0)];
        terms.extend((0..n).map(|i| (w(i, j), -1.0)));
        cons.push(Constraint {
            name: format!("size_{j}"),
            terms,
            sense: Sense::Eq,
            rhs: 0.0,
        });
    }
    // z_ij = s_j when i roots cluster j, 0 otherwise.
    for i in 0..n {
        for j in 0..m {
            cons.push(Constraint {
                name: format!("zroot_{i}_{j}"),
                terms: vec![(z(i, j), 1.0), (r(i, j), -nf)],
                sense: Sense::Le,
                rhs: 0.0,
            });
            cons.push(Constraint {
                name: format!("zsize_{i}_{j}"),
                terms: vec![(z(i, j), 1.0), (s(j), -1.0)],
                sense: Sense::Le,
                rhs: 0.0,
            });
            cons.push(Constraint {
                name: format!("zsupply_{i}_{j}"),
                terms: vec![(z(i, j), 1.0), (s(j), -1.0), (r(i, j), -nf)],
                sense: Sense::Ge,
                rhs: -nf,
            });
        }
    }
    // Conservation: inflow - outflow = w_ik - z_ik at every vertex.
    for i in 0..n {
        for k in 0..m {
            let mut terms = Vec::new();
            for &(u, v) in &model.meta.edges {
                if u == i {
                    terms.push((f(v, u, k), 1.0));
                    terms.push((f(u, v, k), -1.0));
                } else if v == i {
                    terms.push((f(u, v, k), 1.0));
                    terms.push((f(v, u, k), -1.0));
                }
            }
            terms.push((w(i, k), -1.0));
            terms.push((z(i, k), 1.0));
            cons.push(Constraint {
                name: format!("balance_{i}_{k}"),
                terms,
                sense: Sense::Eq,
                rhs: 0.0,
            });
        }
    }
    // Capacities: flow only on edges with both endpoints in the cluster.
    for &(u, v) in &model.meta.edges {
        for (a, b) in [(u, v), (v, u)] {
            for k in 0..m {
                cons.push(Constraint {
                    name: format!("cap_tail_{a}_{b}_{k}"),
                    terms: vec![(f(a, b, k), 1.0), (w(a, k), -nf)],
                    sense: Sense::Le,
                    rhs: 0.0,
                });
                cons.push(Constraint {
                    name: format!("cap_head_{a}_{b}_{k}"),
                    terms: vec![(f(a, b, k), 1.0), (w(b, k), -nf)],
                    sense: Sense::Le,
                    rhs: 0.0,
                });
            }
        }
    }
    model.constraints.extend(cons);
    Ok(model)
}

/// 17-significant-digit scientific formatting; parses back to the same bits.
fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_terms(out: &mut String, terms: &[(usize, f64)], vars: &[Variable]) {
    for (pos, &(vi, c)) in terms.iter().enumerate() {
        if pos == 0 {
            if c < 0.0 {
                let _ = write!(out, "- {} {}", fmt_num(-c), vars[vi].name);
            } else {
                let _ = write!(out, "{} {}", fmt_num(c), vars[vi].name);
            }
        } else if c < 0.0 {
            let _ = write!(out, " - {} {}", fmt_num(-c), vars[vi].name);
        } else {
            let _ = write!(out, " + {} {}", fmt_num(c), vars[vi].name);
        }
    }
}

/// Serializes the model as deterministic LP-format text.
pub fn to_lp_string(model: &MiqpModel) -> Result<String> {
    if model.constraints.is_empty() {
        return Err(Error::InvalidParameter(
            "refusing to write a model with no constraints".into(),
        ));
    }
    if model.quadratic.is_empty() {
        return Err(Error::InvalidParameter(
            "refusing to write a model with no objective".into(),
        ));
    }
    let meta = &model.meta;
    let mut out = String::new();
    out.push_str("\\ connected-partition quadratic program\n");
    let _ = writeln!(out, "\\ meta n = {}", meta.n);
    let _ = writeln!(out, "\\ meta m = {}", meta.m);
    let _ = writeln!(out, "\\ meta big_m = {}", fmt_num(meta.big_m));
    for (i, w) in meta.weights.iter().enumerate() {
        let _ = writeln!(out, "\\ meta weight {i} = {}", fmt_num(*w));
    }
    for (i, d) in meta.data.iter().enumerate() {
        let _ = writeln!(out, "\\ meta datum {i} = {}", fmt_num(*d));
    }
    for (t, &(u, v)) in meta.edges.iter().enumerate() {
        let _ = writeln!(out, "\\ meta edge {t} = {u} {v}");
    }
    out.push_str("Minimize\n obj: [ ");
    for (pos, &(i, j, c)) in model.quadratic.iter().enumerate() {
        if pos > 0 {
            out.push_str(" + ");
        }
        debug_assert_eq!(i, j);
        // LP convention halves the bracket, so coefficients are doubled.
        let _ = write!(
            out,
            "{} {} ^ 2",
            fmt_num(2.0 * c),
            model.variables[i].name
        );
    }
    out.push_str(" ] / 2\n");
    out.push_str("Subject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}: ", c.name);
        push_terms(&mut out, &c.terms, &model.variables);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.kind == VarKind::Binary {
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
        }
    }
    out.push_str("Binary\n");
    for v in &model.variables {
        if v.kind == VarKind::Binary {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Writes the LP text to a file.
pub fn write_lp(model: &MiqpModel, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, to_lp_string(model)?)?;
    Ok(())
}

fn parse_num(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Format(format!("bad number {tok:?}")))
}

/// Parses LP text produced by [`to_lp_string`]. This is a reader for this
/// exporter's own dialect, not a general LP parser; re-serializing the
/// result reproduces the input byte for byte.
pub fn read_lp(text: &str) -> Result<MiqpModel> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Objective,
        Constraints,
        Bounds,
        Binary,
        Done,
    }
    let mut n = None;
    let mut m = None;
    let mut big_m = None;
    let mut weights: Vec<(usize, f64)> = Vec::new();
    let mut data: Vec<(usize, f64)> = Vec::new();
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut objective_line: Option<String> = None;
    let mut constraint_lines: Vec<String> = Vec::new();
    let mut bound_lines: Vec<String> = Vec::new();
    let mut binary_names: Vec<String> = Vec::new();
    let mut section = Section::Preamble;

    for raw in text.lines() {
        let line = raw.trim_end();
        if let Some(comment) = line.strip_prefix('\\') {
            let c = comment.trim();
            if let Some(rest) = c.strip_prefix("meta ") {
                let mut parts = rest.split_whitespace();
                let key = parts.next().unwrap_or("");
                match key {
                    "n" | "m" | "big_m" => {
                        let eq = parts.next();
                        let val = parts.next();
                        if eq != Some("=") || val.is_none() {
                            return Err(Error::Format(format!("bad meta line {line:?}")));
                        }
                        let val = val.unwrap();
                        match key {
                            "n" => n = Some(val.parse::<usize>().map_err(|_| {
                                Error::Format(format!("bad meta n {val:?}"))
                            })?),
                            "m" => m = Some(val.parse::<usize>().map_err(|_| {
                                Error::Format(format!("bad meta m {val:?}"))
                            })?),
                            _ => big_m = Some(parse_num(val)?),
                        }
                    }
                    "weight" | "datum" => {
                        let idx: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| Error::Format(format!("bad meta line {line:?}")))?;
                        if parts.next() != Some("=") {
                            return Err(Error::Format(format!("bad meta line {line:?}")));
                        }
                        let val = parse_num(
                            parts
                                .next()
                                .ok_or_else(|| Error::Format(format!("bad meta line {line:?}")))?,
                        )?;
                        if key == "weight" {
                            weights.push((idx, val));
                        } else {
                            data.push((idx, val));
                        }
                    }
                    "edge" => {
                        let t: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| Error::Format(format!("bad meta line {line:?}")))?;
                        if parts.next() != Some("=") {
                            return Err(Error::Format(format!("bad meta line {line:?}")));
                        }
                        let u: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| Error::Format(format!("bad meta line {line:?}")))?;
                        let v: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| Error::Format(format!("bad meta line {line:?}")))?;
                        edges.push((t, u, v));
                    }
                    _ => {}
                }
            }
            continue;
        }
        match line {
            "Minimize" => {
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Constraints;
                continue;
            }
            "Bounds" => {
                section = Section::Bounds;
                continue;
            }
            "Binary" => {
                section = Section::Binary;
                continue;
            }
            "End" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        if line.trim().is_empty() {
            continue;
        }
        match section {
            Section::Objective => objective_line = Some(line.trim().to_string()),
            Section::Constraints => constraint_lines.push(line.trim().to_string()),
            Section::Bounds => bound_lines.push(line.trim().to_string()),
            Section::Binary => binary_names.push(line.trim().to_string()),
            Section::Preamble | Section::Done => {
                return Err(Error::Format(format!("unexpected line {line:?}")))
            }
        }
    }

    let n = n.ok_or_else(|| Error::Format("missing meta n".into()))?;
    let m = m.ok_or_else(|| Error::Format("missing meta m".into()))?;
    let big_m = big_m.ok_or_else(|| Error::Format("missing meta big_m".into()))?;
    let collect_indexed = |mut v: Vec<(usize, f64)>, what: &str| -> Result<Vec<f64>> {
        v.sort_by_key(|&(i, _)| i);
        if v.iter().enumerate().any(|(i, &(j, _))| i != j) || v.len() != n {
            return Err(Error::Format(format!("inconsistent meta {what} entries")));
        }
        Ok(v.into_iter().map(|(_, x)| x).collect())
    };
    let weights = collect_indexed(weights, "weight")?;
    let data = collect_indexed(data, "datum")?;
    edges.sort_by_key(|&(t, _, _)| t);
    if edges.iter().enumerate().any(|(i, &(t, _, _))| i != t) {
        return Err(Error::Format("inconsistent meta edge entries".into()));
    }
    let edges: Vec<(usize, usize)> = edges.into_iter().map(|(_, u, v)| (u, v)).collect();

    // Variables come from bounds and binary sections, in file order:
    // binaries were written first in construction order is not recoverable
    // from the sections alone, so rebuild names from both lists in the
    // writer's order: binaries interleave before continuous per the
    // original construction. Instead of guessing, reconstruct the variable
    // list from the order of first appearance across objective and
    // constraints, then patch kinds/bounds from the sections.
    let mut variables: Vec<Variable> = Vec::new();
    let mut name_index: BTreeMap<String, usize> = BTreeMap::new();
    let ensure_var = |name: &str,
                          variables: &mut Vec<Variable>,
                          name_index: &mut BTreeMap<String, usize>|
     -> usize {
        if let Some(&i) = name_index.get(name) {
            return i;
        }
        let idx = variables.len();
        name_index.insert(name.to_string(), idx);
        variables.push(Variable {
            name: name.to_string(),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: f64::INFINITY,
        });
        idx
    };

    // Objective: `obj: [ 2c e0 ^ 2 + ... ] / 2`.
    let obj = objective_line.ok_or_else(|| Error::Format("missing objective".into()))?;
    let inner = obj
        .strip_prefix("obj: [")
        .and_then(|s| s.strip_suffix("] / 2"))
        .ok_or_else(|| Error::Format(format!("bad objective line {obj:?}")))?
        .trim();
    let mut quadratic = Vec::new();
    for term in inner.split(" + ") {
        let toks: Vec<&str> = term.split_whitespace().collect();
        if toks.len() != 4 || toks[2] != "^" || toks[3] != "2" {
            return Err(Error::Format(format!("bad quadratic term {term:?}")));
        }
        let c = parse_num(toks[0])? / 2.0;
        let vi = ensure_var(toks[1], &mut variables, &mut name_index);
        quadratic.push((vi, vi, c));
    }

    let mut constraints = Vec::new();
    for line in constraint_lines {
        let (name, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("bad constraint line {line:?}")))?;
        let toks: Vec<&str> = rest.split_whitespace().collect();
        if toks.len() < 4 {
            return Err(Error::Format(format!("bad constraint line {line:?}")));
        }
        let rhs = parse_num(toks[toks.len() - 1])?;
        let sense = match toks[toks.len() - 2] {
            "<=" => Sense::Le,
            ">=" => Sense::Ge,
            "=" => Sense::Eq,
            other => return Err(Error::Format(format!("bad sense {other:?}"))),
        };
        let mut terms = Vec::new();
        let mut pos = 0;
        let body = &toks[..toks.len() - 2];
        let mut sign = 1.0;
        while pos < body.len() {
            match body[pos] {
                "+" => {
                    sign = 1.0;
                    pos += 1;
                    continue;
                }
                "-" => {
                    sign = -1.0;
                    pos += 1;
                    continue;
                }
                _ => {}
            }
            if pos + 1 >= body.len() {
                return Err(Error::Format(format!("bad constraint line {line:?}")));
            }
            let c = parse_num(body[pos])? * sign;
            let vi = ensure_var(body[pos + 1], &mut variables, &mut name_index);
            terms.push((vi, c));
            sign = 1.0;
            pos += 2;
        }
        constraints.push(Constraint { name: name.trim().to_string(), terms, sense, rhs });
    }

    let mut section_order: Vec<usize> = Vec::new();
    for name in &binary_names {
        let vi = ensure_var(name, &mut variables, &mut name_index);
        variables[vi].kind = VarKind::Binary;
        variables[vi].lower = 0.0;
        variables[vi].upper = 1.0;
        section_order.push(vi);
    }
    for line in bound_lines {
        let vi = if let Some(name) = line.strip_suffix(" free") {
            let vi = ensure_var(name.trim(), &mut variables, &mut name_index);
            variables[vi].lower = f64::NEG_INFINITY;
            variables[vi].upper = f64::INFINITY;
            vi
        } else {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 5 || toks[1] != "<=" || toks[3] != "<=" {
                return Err(Error::Format(format!("bad bound line {line:?}")));
            }
            let lo = parse_num(toks[0])?;
            let hi = parse_num(toks[4])?;
            let vi = ensure_var(toks[2], &mut variables, &mut name_index);
            variables[vi].lower = lo;
            variables[vi].upper = hi;
            vi
        };
        section_order.push(vi);
    }

    // The original variable order is only partially recorded in the file
    // (within the binary and bounds sections). Re-serialization matches
    // byte for byte as long as each section's internal order is kept, so
    // adopt "binaries first, then bounded" as the reconstructed order.
    if section_order.len() != variables.len()
        || {
            let mut sorted = section_order.clone();
            sorted.sort_unstable();
            sorted.iter().enumerate().any(|(i, &v)| i != v)
        }
    {
        return Err(Error::Format(
            "bounds/binary sections do not cover the variables exactly once".into(),
        ));
    }
    let mut new_pos = vec![0usize; variables.len()];
    for (pos, &old) in section_order.iter().enumerate() {
        new_pos[old] = pos;
    }
    let mut reordered: Vec<Variable> = section_order
        .iter()
        .map(|&old| variables[old].clone())
        .collect();
    std::mem::swap(&mut variables, &mut reordered);
    let name_index: BTreeMap<String, usize> = variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.clone(), i))
        .collect();
    for c in &mut constraints {
        for t in &mut c.terms {
            t.0 = new_pos[t.0];
        }
    }
    for q in &mut quadratic {
        q.0 = new_pos[q.0];
        q.1 = new_pos[q.1];
    }

    Ok(MiqpModel { variables, name_index, constraints, quadratic, meta: MiqpMeta {
        n,
        m,
        big_m,
        weights,
        data,
        edges,
    } })
}

/// Parses a `name value` solution file; `#` starts a comment.
pub fn parse_solution(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| Error::Format(format!("line {}: missing name", lineno + 1)))?;
        let val = parts
            .next()
            .ok_or_else(|| Error::Format(format!("line {}: missing value", lineno + 1)))?;
        if parts.next().is_some() {
            return Err(Error::Format(format!("line {}: trailing tokens", lineno + 1)));
        }
        let val = parse_num(val)
            .map_err(|_| Error::Format(format!("line {}: bad value {val:?}", lineno + 1)))?;
        if out.insert(name.to_string(), val).is_some() {
            return Err(Error::Format(format!(
                "line {}: duplicate variable {name:?}",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

/// Renders a partition as a complete solution file for the model: one-hot
/// assignments, representatives, residuals, and (if the model carries flow
/// constraints) roots at each cluster's smallest member with flows routed
/// along a breadth-first tree, each tree edge carrying its subtree size.
pub fn encode_solution(model: &MiqpModel, partition: &Partition) -> Result<String> {
    let n = model.meta.n;
    let m = model.meta.m;
    if partition.labels().len() != n || partition.m() != m {
        return Err(Error::InvalidParameter(format!(
            "partition shape ({} labels, m={}) does not match the model ({n}, m={m})",
            partition.labels().len(),
            partition.m()
        )));
    }
    let labels = partition.labels();
    let assign = |model: &MiqpModel, name: String, v: f64, values: &mut Vec<f64>| {
        let idx = model.name_index[&name];
        values[idx] = v;
    };
    let mut vals = vec![0.0f64; model.variables.len()];
    for i in 0..n {
        for j in 0..m {
            assign(model, w_name(i, j), f64::from(labels[i] == j), &mut vals);
        }
    }
    for j in 0..m {
        assign(model, format!("v{j}"), partition.representatives()[j], &mut vals);
    }
    for i in 0..n {
        let e = partition.representatives()[labels[i]] - model.meta.data[i];
        assign(model, format!("e{i}"), e, &mut vals);
    }

    if model.has_flow() {
        let g = model.graph();
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (i, &l) in labels.iter().enumerate() {
            clusters[l].push(i);
        }
        for (k, members) in clusters.iter().enumerate() {
            let root = *members.first().ok_or_else(|| {
                Error::InvalidPartition(format!("cluster {k} is empty"))
            })?;
            let size = members.len() as f64;
            assign(model, format!("s{k}"), size, &mut vals);
            for &i in members {
                assign(model, format!("r{i}_{k}"), f64::from(i == root), &mut vals);
                assign(
                    model,
                    format!("z{i}_{k}"),
                    if i == root { size } else { 0.0 },
                    &mut vals,
                );
            }
            // Breadth-first tree rooted at the smallest member; flows carry
            // subtree sizes toward the leaves.
            let member_set: std::collections::BTreeSet<usize> =
                members.iter().copied().collect();
            let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
            let mut order = vec![root];
            let mut seen: std::collections::BTreeSet<usize> =
                std::iter::once(root).collect();
            let mut head = 0;
            while head < order.len() {
                let u = order[head];
                head += 1;
                for &v in g.neighbors(u) {
                    if member_set.contains(&v) && seen.insert(v) {
                        parent.insert(v, u);
                        order.push(v);
                    }
                }
            }
            if order.len() != members.len() {
                return Err(Error::InvalidPartition(format!(
                    "cluster {k} is not connected"
                )));
            }
            let mut subtree: BTreeMap<usize, f64> =
                members.iter().map(|&v| (v, 1.0)).collect();
            for &v in order.iter().rev() {
                if let Some(&p) = parent.get(&v) {
                    *subtree.get_mut(&p).unwrap() += subtree[&v];
                }
            }
            for (&child, &p) in &parent {
                assign(model, format!("f{p}_{child}_{k}"), subtree[&child], &mut vals);
            }
        }
    }

    let mut out = String::new();
    out.push_str("# solution written by the exporter\n");
    for (v, val) in model.variables.iter().zip(&vals) {
        let _ = writeln!(out, "{} {}", v.name, fmt_num(*val));
    }
    Ok(out)
}

/// Outcome of verifying an external solution file against a model.
#[derive(Debug, Clone)]
pub struct SolutionReport {
    pub pass: bool,
    /// Human-readable violations, empty on success.
    pub issues: Vec<String>,
    /// Objective recomputed from the file's variable values.
    pub objective: f64,
    /// Cluster labels decoded from the w block, when every row decodes.
    pub decoded_labels: Option<Vec<usize>>,
    /// Weighted squared-error objective of the decoded labels.
    pub decoded_objective: Option<f64>,
}

/// Verifies an external solution: every declared variable present, binary
/// integrality within 1e-6, all bounds and constraints within a scaled
/// 1e-6, and the file's objective consistent with the decoded labeling
/// (connected, nonempty clusters scoring the same objective on the model's
/// own data).
pub fn check_external_solution(model: &MiqpModel, solution_text: &str) -> Result<SolutionReport> {
    let tol = 1e-6;
    let parsed = parse_solution(solution_text)?;
    for name in parsed.keys() {
        if !model.name_index.contains_key(name) {
            return Err(Error::Format(format!("unknown variable {name:?}")));
        }
    }
    let mut vals = vec![0.0f64; model.variables.len()];
    for (i, v) in model.variables.iter().enumerate() {
        match parsed.get(&v.name) {
            Some(&x) => vals[i] = x,
            None => {
                return Err(Error::Format(format!("missing variable {:?}", v.name)));
            }
        }
    }

    let mut issues = Vec::new();
    for (i, v) in model.variables.iter().enumerate() {
        let x = vals[i];
        if v.kind == VarKind::Binary && x.abs().min((x - 1.0).abs()) > tol {
            issues.push(format!("{} = {x} is not within {tol} of binary", v.name));
        }
        let scale = 1.0f64.max(x.abs());
        if x < v.lower - tol * scale || x > v.upper + tol * scale {
            issues.push(format!(
                "{} = {x} violates bounds [{}, {}]",
                v.name, v.lower, v.upper
            ));
        }
    }
    for c in &model.constraints {
        let mut lhs = 0.0;
        let mut scale = 1.0f64.max(c.rhs.abs());
        for &(vi, coef) in &c.terms {
            lhs += coef * vals[vi];
            scale = scale.max((coef * vals[vi]).abs());
        }
        let ok = match c.sense {
            Sense::Le => lhs <= c.rhs + tol * scale,
            Sense::Ge => lhs >= c.rhs - tol * scale,
            Sense::Eq => (lhs - c.rhs).abs() <= tol * scale,
        };
        if !ok {
            issues.push(format!(
                "constraint {} violated: lhs {lhs} {} rhs {}",
                c.name,
                c.sense.symbol(),
                c.rhs
            ));
        }
    }

    let objective: f64 = model
        .quadratic
        .iter()
        .map(|&(i, j, c)| c * vals[i] * vals[j])
        .sum();

    // Decode the assignment block and cross-check the objective.
    let n = model.meta.n;
    let m = model.meta.m;
    let mut labels = Vec::with_capacity(n);
    let mut decodable = true;
    for i in 0..n {
        let mut hit = None;
        for j in 0..m {
            let idx = model.name_index[&w_name(i, j)];
            if vals[idx] > 0.5 {
                hit = match hit {
                    None => Some(j),
                    Some(_) => {
                        decodable = false;
                        None
                    }
                };
                if !decodable {
                    break;
                }
            }
        }
        match hit {
            Some(j) if decodable => labels.push(j),
            _ => {
                issues.push(format!("vertex {i} has no unambiguous assignment"));
                decodable = false;
                break;
            }
        }
    }

    let mut decoded_labels = None;
    let mut decoded_objective = None;
    if decodable {
        let g = model.graph();
        let mut counts = vec![0usize; m];
        for &l in &labels {
            counts[l] += 1;
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            issues.push(format!("decoded cluster {k} is empty"));
        } else {
            for k in 0..m {
                let members: Vec<usize> =
                    (0..n).filter(|&i| labels[i] == k).collect();
                let comps = crate::graph::components_of_subset(&g, &members);
                if comps.len() != 1 {
                    issues.push(format!(
                        "decoded cluster {k} splits into {} components",
                        comps.len()
                    ));
                }
            }
            let obj = weighted_objective(
                &labels,
                &model.meta.data,
                Some(&model.meta.weights),
                m,
            )?;
            if (obj - objective).abs() > tol * 1.0f64.max(obj.abs()) {
                issues.push(format!(
                    "objective {objective} does not match the decoded labeling's \
                     optimum {obj}"
                ));
            }
            decoded_objective = Some(obj);
        }
        decoded_labels = Some(labels);
    }

    Ok(SolutionReport {
        pass: issues.is_empty(),
        issues,
        objective,
        decoded_labels,
        decoded_objective,
    })
}
