//! Enriched text features: externally produced dense sentence embeddings are
//! fused with keyword vectors by truncated SVD followed by canonical
//! correlation analysis, and the two projections are concatenated.
//!
//! Dense vectors come from a sidecar file of JSON lines:
//!
//! ```text
//! {"endpoint_name": "/songs/{id}", "vector": [0.12, -0.4, ...]}
//! ```
//!
//! The vectors are expected to be sentence embeddings of the endpoint's
//! operation text, truncated to the embedding model's context window.

use std::collections::BTreeMap;
use std::io::BufRead;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Deserialize;
use thiserror::Error;

use crate::vectorize::SparseVector;

/// Ridge added to both covariance diagonals before whitening.
pub const CCA_RIDGE: f64 = 1e-4;
/// Cumulative explained-variance target for the keyword-side truncated SVD.
pub const SVD_VARIANCE_TARGET: f64 = 0.95;

#[derive(Debug, Error)]
pub enum EnrichError {
    #[error("reading embeddings: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: vector has dimension {found}, expected {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown endpoint {0:?} in embeddings file")]
    UnknownEndpointId(String),
    #[error("matrix is all zeros")]
    DegenerateMatrix,
    #[error("no feasible canonical dimension")]
    RankDeficient,
    #[error("matrices have {0} and {1} rows; they must be row aligned")]
    RowMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseEmbedding {
    pub endpoint_id: u32,
    pub vector: Vec<f64>,
}

#[derive(Deserialize)]
struct SidecarLine {
    endpoint_name: String,
    vector: Vec<f64>,
}

/// Reads a sidecar of JSON lines, mapping endpoint names to ids with `lookup`.
pub fn load_dense_embeddings<R: BufRead>(
    reader: R,
    lookup: impl Fn(&str) -> Option<u32>,
) -> Result<BTreeMap<u32, DenseEmbedding>, EnrichError> {
    let mut out = BTreeMap::new();
    let mut dim = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: SidecarLine = serde_json::from_str(&line).map_err(|e| EnrichError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let expected = *dim.get_or_insert(row.vector.len());
        if row.vector.len() != expected || expected == 0 {
            return Err(EnrichError::DimensionMismatch {
                line: line_no,
                expected,
                found: row.vector.len(),
            });
        }
        let id =
            lookup(&row.endpoint_name).ok_or(EnrichError::UnknownEndpointId(row.endpoint_name))?;
        out.insert(
            id,
            DenseEmbedding {
                endpoint_id: id,
                vector: row.vector,
            },
        );
    }
    Ok(out)
}

/// Rank-k projection keeping the smallest k whose squared singular values
/// reach the variance target.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// Right singular vectors, `n_features x k`.
    pub components: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub explained_variance_ratio: f64,
}

impl TruncatedSvd {
    pub fn k(&self) -> usize {
        self.components.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform_sparse(&self, x: &SparseVector) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        for (i, v) in x.iter() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += v * self.components[(i as usize, c)];
            }
        }
        out
    }

    pub fn transform(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m * &self.components
    }
}

/// Smallest k with `sum(s[..k]^2) / sum(s^2) >= target`, for descending `s`.
pub fn rank_for_variance(singular_values: &[f64], target: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc / total >= target - 1e-12 {
            return i + 1;
        }
    }
    singular_values.len()
}

pub fn truncated_svd(m: &DMatrix<f64>, variance_target: f64) -> Result<TruncatedSvd, EnrichError> {
    if m.iter().all(|&v| v == 0.0) || m.is_empty() {
        return Err(EnrichError::DegenerateMatrix);
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let k = rank_for_variance(&sorted, variance_target);
    let total: f64 = sorted.iter().map(|s| s * s).sum();
    let kept: f64 = sorted[..k].iter().map(|s| s * s).sum();
    let mut components = DMatrix::zeros(m.ncols(), k);
    for (c, &src) in order[..k].iter().enumerate() {
        components.set_column(c, &v_t.row(src).transpose());
    }
    Ok(TruncatedSvd {
        components,
        singular_values: sorted[..k].to_vec(),
        explained_variance_ratio: kept / total,
    })
}

/// Linear maps for the dense side (`u_proj`, `d_x x out_dim`) and the keyword
/// side (`v_proj`, `d_y x out_dim`), columns ordered by decreasing correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaProjection {
    pub u_proj: DMatrix<f64>,
    pub v_proj: DMatrix<f64>,
    pub correlations: Vec<f64>,
}

impl CcaProjection {
    pub fn out_dim(&self) -> usize {
        self.u_proj.ncols()
    }
}

fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    let tol = max * 1e-10 * (m.nrows().max(m.ncols()) as f64);
    s.iter().filter(|&&v| v > tol).count()
}

fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    for mut col in c.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    c
}

fn inverse_sqrt(sym: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym);
    let inv: DVector<f64> = eig.eigenvalues.map(|l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// CCA by whitening each side with its regularized covariance and taking the
/// SVD of the whitened cross-covariance. `out_dim` defaults to `X`'s width and
/// is clipped to `min(rank X, rank Y)`.
pub fn fit_cca(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    out_dim: Option<usize>,
    ridge: f64,
) -> Result<CcaProjection, EnrichError> {
    if x.nrows() != y.nrows() {
        return Err(EnrichError::RowMismatch(x.nrows(), y.nrows()));
    }
    let n = x.nrows();
    if n < 2 {
        return Err(EnrichError::RankDeficient);
    }
    let (xc, yc) = (centered(x), centered(y));
    let feasible = numeric_rank(&xc).min(numeric_rank(&yc));
    let dim = out_dim.unwrap_or(x.ncols()).min(feasible);
    if dim == 0 {
        return Err(EnrichError::RankDeficient);
    }
    let scale = 1.0 / (n as f64 - 1.0);
    let cxx = xc.transpose() * &xc * scale + DMatrix::identity(x.ncols(), x.ncols()) * ridge;
    let cyy = yc.transpose() * &yc * scale + DMatrix::identity(y.ncols(), y.ncols()) * ridge;
    let cxy = xc.transpose() * &yc * scale;
    let wx = inverse_sqrt(cxx);
    let wy = inverse_sqrt(cyy);
    let t = &wx * cxy * &wy;
    let svd = t.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut u_sel = DMatrix::zeros(x.ncols(), dim);
    let mut v_sel = DMatrix::zeros(y.ncols(), dim);
    let mut correlations = Vec::with_capacity(dim);
    for (c, &src) in order[..dim].iter().enumerate() {
        u_sel.set_column(c, &u.column(src));
        v_sel.set_column(c, &v_t.row(src).transpose());
        correlations.push(svd.singular_values[src].clamp(0.0, 1.0));
    }
    Ok(CcaProjection {
        u_proj: wx * u_sel,
        v_proj: wy * v_sel,
        correlations,
    })
}

/// `concat(u'^T x, v'^T y)`, of length `2 * out_dim`.
pub fn enrich_vector(x_dense: &[f64], y_keyword: &[f64], proj: &CcaProjection) -> Vec<f64> {
    let x = DVector::from_column_slice(x_dense);
    let y = DVector::from_column_slice(y_keyword);
    let a = proj.u_proj.tr_mul(&x);
    let b = proj.v_proj.tr_mul(&y);
    a.iter().chain(b.iter()).copied().collect()
}
