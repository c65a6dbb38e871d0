//! File formats for the pipeline artifacts: the point CSV, the prediction
//! CSV, and JSON documents for datasets, models, aggregations, and solved
//! partitions.
//!
//! Conventions: CSV and JSON files number vertices, groups, and clusters
//! from 1; everything in memory is 0-based. Floats are written in Rust's
//! shortest round-trip form, so rereading an artifact reproduces the exact
//! in-memory values and rewriting it reproduces the exact bytes.

use serde::{Deserialize, Serialize};

use crate::aggregate::Aggregation;
use crate::bounds::{BoundsReport, EtaVariant};
use crate::error::{Error, Result};
use crate::gp::{GpModel, KernelFamily, KernelSpec, PointPrediction};
use crate::graph::{SpatialDataset, SpatialGraph};
use crate::prediction::PredictionVector;
use crate::solver::{MahalanobisScore, Partition, SolveStats};

// ---------------------------------------------------------------------------
// Point CSV: `id,x1,...,xd[,y]`
// ---------------------------------------------------------------------------

/// Parses the input CSV. The header must be `id,x1,...,xd` with an optional
/// trailing `y` response column; ids must form a contiguous block starting
/// at 0 or 1, in any row order.
pub fn read_dataset_csv(text: &str) -> Result<SpatialDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"id") || cols.len() < 2 {
        return Err(Error::Format(format!(
            "line 1: header must be id,x1,...,xd[,y], got {header:?}"
        )));
    }
    let has_y = cols.last() == Some(&"y");
    let dim = cols.len() - 1 - usize::from(has_y);
    if dim == 0 {
        return Err(Error::Format(
            "line 1: need at least one coordinate column".into(),
        ));
    }
    for (a, col) in cols[1..1 + dim].iter().enumerate() {
        let expected = format!("x{}", a + 1);
        if *col != expected {
            return Err(Error::Format(format!(
                "line 1: column {} must be {expected:?}, got {col:?}",
                a + 2
            )));
        }
    }

    let mut rows: Vec<(i64, Vec<f64>, Option<f64>)> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Format(format!(
                "line {lineno}: expected {} fields, got {}",
                cols.len(),
                fields.len()
            )));
        }
        let id: i64 = fields[0]
            .parse()
            .map_err(|_| Error::Format(format!("line {lineno}: bad id {:?}", fields[0])))?;
        let mut coords = Vec::with_capacity(dim);
        for f in &fields[1..1 + dim] {
            let x: f64 = f
                .parse()
                .map_err(|_| Error::Format(format!("line {lineno}: bad number {f:?}")))?;
            coords.push(x);
        }
        let y = if has_y {
            Some(fields[cols.len() - 1].parse().map_err(|_| {
                Error::Format(format!(
                    "line {lineno}: bad number {:?}",
                    fields[cols.len() - 1]
                ))
            })?)
        } else {
            None
        };
        rows.push((id, coords, y));
    }
    if rows.is_empty() {
        return Err(Error::Format("CSV has a header but no data rows".into()));
    }
    rows.sort_by_key(|r| r.0);
    let base = rows[0].0;
    if base != 0 && base != 1 {
        return Err(Error::InvalidData(format!(
            "ids must start at 0 or 1, got {base}"
        )));
    }
    for (pos, row) in rows.iter().enumerate() {
        let expected = base + pos as i64;
        if row.0 != expected {
            return Err(Error::InvalidData(format!(
                "ids must be contiguous: expected {expected}, got {}",
                row.0
            )));
        }
    }
    let coords: Vec<f64> = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
    let responses = if has_y {
        Some(rows.iter().map(|r| r.2.unwrap()).collect())
    } else {
        None
    };
    SpatialDataset::new(dim, coords, responses)
}

// ---------------------------------------------------------------------------
// Prediction CSV: `id,eta,mu,sigma2`
// ---------------------------------------------------------------------------

pub fn write_predictions_csv(preds: &[PointPrediction]) -> String {
    let mut out = String::from("id,eta,mu,sigma2\n");
    for (i, p) in preds.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", i + 1, p.eta, p.mu, p.sigma2));
    }
    out
}

pub fn read_predictions_csv(text: &str) -> Result<Vec<PointPrediction>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format("empty prediction CSV".into()))?;
    if header.trim() != "id,eta,mu,sigma2" {
        return Err(Error::Format(format!(
            "line 1: header must be id,eta,mu,sigma2, got {header:?}"
        )));
    }
    let mut preds = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "line {lineno}: expected 4 fields, got {}",
                fields.len()
            )));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| Error::Format(format!("line {lineno}: bad id {:?}", fields[0])))?;
        if id != preds.len() + 1 {
            return Err(Error::Format(format!(
                "line {lineno}: ids must run 1..n in order, expected {}, got {id}",
                preds.len() + 1
            )));
        }
        let num = |f: &str| -> Result<f64> {
            f.parse()
                .map_err(|_| Error::Format(format!("line {lineno}: bad number {f:?}")))
        };
        preds.push(PointPrediction {
            eta: num(fields[1])?,
            mu: num(fields[2])?,
            sigma2: num(fields[3])?,
        });
    }
    if preds.is_empty() {
        return Err(Error::Format("prediction CSV has no data rows".into()));
    }
    Ok(preds)
}

/// The eta column as a prediction vector.
pub fn eta_of(preds: &[PointPrediction]) -> Result<PredictionVector> {
    PredictionVector::new(preds.iter().map(|p| p.eta).collect())
}

// ---------------------------------------------------------------------------
// Dataset JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    dim: usize,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    responses: Option<Vec<f64>>,
}

pub fn write_dataset_json(data: &SpatialDataset) -> String {
    let file = DatasetFile {
        dim: data.dim(),
        points: data.points().map(|p| p.to_vec()).collect(),
        responses: data.responses().map(|r| r.to_vec()),
    };
    to_pretty(&file)
}

pub fn read_dataset_json(text: &str) -> Result<SpatialDataset> {
    let file: DatasetFile = serde_json::from_str(text)?;
    for (i, p) in file.points.iter().enumerate() {
        if p.len() != file.dim {
            return Err(Error::Format(format!(
                "point {i} has {} coordinates, dim is {}",
                p.len(),
                file.dim
            )));
        }
    }
    SpatialDataset::new(
        file.dim,
        file.points.into_iter().flatten().collect(),
        file.responses,
    )
}

// ---------------------------------------------------------------------------
// GP model JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GpModelFile {
    family: String,
    length_scales: Vec<f64>,
    signal_variance: f64,
    white_noise: f64,
    jitter: f64,
    /// Inducing inputs, one row per point.
    z: Vec<Vec<f64>>,
    u0: Vec<f64>,
    /// Posterior covariance, row-major.
    s_mat: Vec<Vec<f64>>,
}

pub fn write_gp_model_json(model: &GpModel) -> String {
    let z = model.inducing_inputs();
    let s = model.s_mat();
    let file = GpModelFile {
        family: model.kernel().family.as_str().to_string(),
        length_scales: model.kernel().length_scales.clone(),
        signal_variance: model.kernel().signal_variance,
        white_noise: model.kernel().white_noise,
        jitter: model.jitter(),
        z: (0..z.nrows())
            .map(|i| z.row(i).iter().copied().collect())
            .collect(),
        u0: model.u0().to_vec(),
        s_mat: (0..s.nrows())
            .map(|i| s.row(i).iter().copied().collect())
            .collect(),
    };
    to_pretty(&file)
}

pub fn read_gp_model_json(text: &str) -> Result<GpModel> {
    let file: GpModelFile = serde_json::from_str(text)?;
    let kernel = KernelSpec::new(
        KernelFamily::parse(&file.family)?,
        file.length_scales,
        file.signal_variance,
        file.white_noise,
    )?;
    let z_flat: Vec<f64> = file.z.into_iter().flatten().collect();
    let s_flat: Vec<f64> = file.s_mat.into_iter().flatten().collect();
    GpModel::new(kernel, z_flat, file.u0, s_flat, file.jitter)
}

// ---------------------------------------------------------------------------
// Aggregation JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregationFile {
    /// Group id per vertex, 1-based.
    sublabels: Vec<usize>,
    representative_eta: Vec<f64>,
    group_sizes: Vec<usize>,
    /// Quotient edges as (group, group, weight), 1-based.
    quotient_edges: Vec<(usize, usize, f64)>,
}

pub fn write_aggregation_json(agg: &Aggregation) -> String {
    let file = AggregationFile {
        sublabels: agg.sublabels().iter().map(|&s| s + 1).collect(),
        representative_eta: agg.representative().to_vec(),
        group_sizes: agg.group_sizes(),
        quotient_edges: agg
            .quotient()
            .edges()
            .iter()
            .map(|e| (e.u + 1, e.v + 1, e.weight))
            .collect(),
    };
    to_pretty(&file)
}

/// Rebuilds the aggregation from its sublabels against the graph and
/// predictions it was made from, then checks the stored derived fields
/// (representatives, sizes, quotient edges) for consistency.
pub fn read_aggregation_json(
    text: &str,
    g: &SpatialGraph,
    eta: &PredictionVector,
) -> Result<Aggregation> {
    let file: AggregationFile = serde_json::from_str(text)?;
    if file.sublabels.iter().any(|&s| s == 0) {
        return Err(Error::Format("sublabels are 1-based; found 0".into()));
    }
    let sublabels: Vec<usize> = file.sublabels.iter().map(|&s| s - 1).collect();
    let l = file.representative_eta.len();
    let agg = Aggregation::from_sublabels(g, eta, sublabels, l)?;
    for (i, (&stored, computed)) in file
        .representative_eta
        .iter()
        .zip(agg.representative())
        .enumerate()
    {
        if (stored - computed).abs() > 1e-9 * computed.abs().max(1.0) {
            return Err(Error::Format(format!(
                "stored representative for group {} is {stored}, expected {computed}",
                i + 1
            )));
        }
    }
    if file.group_sizes != agg.group_sizes() {
        return Err(Error::Format(
            "stored group sizes disagree with the sublabels".into(),
        ));
    }
    let computed_edges: Vec<(usize, usize)> = agg
        .quotient()
        .edges()
        .iter()
        .map(|e| (e.u + 1, e.v + 1))
        .collect();
    let stored_edges: Vec<(usize, usize)> =
        file.quotient_edges.iter().map(|&(u, v, _)| (u, v)).collect();
    if stored_edges != computed_edges {
        return Err(Error::Format(
            "stored quotient edges disagree with the sublabels".into(),
        ));
    }
    Ok(agg)
}

// ---------------------------------------------------------------------------
// Partition JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TelemetryFile {
    nodes_expanded: u64,
    root_bound: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsFile {
    error_ratio: f64,
    gap_ratio: f64,
    c1: f64,
    c2: f64,
    tss: f64,
    which_eta: String,
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MahalanobisFile {
    v_hat: Vec<f64>,
    quadratic: f64,
    marginal_correction: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionFile {
    /// Cluster id per vertex, 1-based.
    labels: Vec<usize>,
    v: Vec<f64>,
    objective: f64,
    canonical: bool,
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    telemetry: Option<TelemetryFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mahalanobis: Option<MahalanobisFile>,
}

/// A solved partition plus the optional report sections stored with it.
#[derive(Debug, Clone)]
pub struct PartitionArtifact {
    pub partition: Partition,
    pub telemetry: Option<SolveStats>,
    pub bounds: Option<BoundsReport>,
    pub mahalanobis: Option<MahalanobisScore>,
}

pub fn write_partition_json(artifact: &PartitionArtifact) -> String {
    let p = &artifact.partition;
    let file = PartitionFile {
        labels: p.labels().iter().map(|&l| l + 1).collect(),
        v: p.representatives().to_vec(),
        objective: p.objective(),
        canonical: p.is_canonical(),
        m: p.m(),
        telemetry: artifact.telemetry.as_ref().map(|t| TelemetryFile {
            nodes_expanded: t.nodes_expanded,
            root_bound: t.root_bound,
        }),
        bounds: artifact.bounds.as_ref().map(|b| BoundsFile {
            error_ratio: b.error_ratio,
            gap_ratio: b.gap_ratio,
            c1: b.c1,
            c2: b.c2,
            tss: b.tss,
            which_eta: b.which_eta.as_str().to_string(),
            degenerate: b.degenerate,
        }),
        mahalanobis: artifact.mahalanobis.as_ref().map(|s| MahalanobisFile {
            v_hat: s.v_hat.clone(),
            quadratic: s.quadratic,
            marginal_correction: s.marginal_correction,
        }),
    };
    to_pretty(&file)
}

pub fn read_partition_json(text: &str) -> Result<PartitionArtifact> {
    let file: PartitionFile = serde_json::from_str(text)?;
    if file.labels.iter().any(|&l| l == 0) {
        return Err(Error::Format("labels are 1-based; found 0".into()));
    }
    let labels: Vec<usize> = file.labels.iter().map(|&l| l - 1).collect();
    let partition = Partition::new(labels, file.v, file.objective, file.m)?;
    if partition.is_canonical() != file.canonical {
        return Err(Error::Format(format!(
            "stored canonical flag is {}, but the labels say {}",
            file.canonical,
            partition.is_canonical()
        )));
    }
    let which = |s: &str| -> Result<EtaVariant> {
        match s {
            "tilde" => Ok(EtaVariant::Tilde),
            "hat" => Ok(EtaVariant::Hat),
            other => Err(Error::Format(format!("unknown eta variant {other:?}"))),
        }
    };
    Ok(PartitionArtifact {
        partition,
        telemetry: file.telemetry.map(|t| SolveStats {
            nodes_expanded: t.nodes_expanded,
            root_bound: t.root_bound,
        }),
        bounds: match file.bounds {
            None => None,
            Some(b) => Some(BoundsReport {
                error_ratio: b.error_ratio,
                gap_ratio: b.gap_ratio,
                c1: b.c1,
                c2: b.c2,
                tss: b.tss,
                which_eta: which(&b.which_eta)?,
                degenerate: b.degenerate,
            }),
        },
        mahalanobis: file.mahalanobis.map(|s| MahalanobisScore {
            v_hat: s.v_hat,
            quadratic: s.quadratic,
            marginal_correction: s.marginal_correction,
        }),
    })
}

fn to_pretty(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    text.push('\n');
    text
}
