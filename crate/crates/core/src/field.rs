//! Matrix-valued functions on the mode space, sampled at grid nodes.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MjlsError, Result};
use crate::grid::GridSpace;
use crate::linalg;
use crate::par::map_indices;

/// Largest tolerated `|M - M'|` entry before a field is refused as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MatrixField {
    grid: Arc<GridSpace>,
    values: Vec<DMatrix<f64>>,
    rows: usize,
    cols: usize,
    symmetric: bool,
}

/// Result of a node-wise ordering test `P >= threshold * I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingCertificate {
    pub min_eigenvalue_over_nodes: f64,
    pub argmin_node: usize,
    pub threshold: f64,
}

impl OrderingCertificate {
    /// True when the margin strictly exceeds the threshold.
    pub fn holds(&self) -> bool {
        self.min_eigenvalue_over_nodes > self.threshold
    }
}

impl MatrixField {
    /// Field from per-node values; all values must share one shape.
    pub fn new(grid: Arc<GridSpace>, values: Vec<DMatrix<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(MjlsError::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let (rows, cols) = values.first().map_or((0, 0), |m| m.shape());
        if let Some(i) = values.iter().position(|m| m.shape() != (rows, cols)) {
            return Err(MjlsError::ShapeMismatch(format!(
                "node {i} has shape {:?}, expected {:?}",
                values[i].shape(),
                (rows, cols)
            )));
        }
        Ok(Self {
            grid,
            values,
            rows,
            cols,
            symmetric: false,
        })
    }

    /// Field flagged symmetric. Values within [`SYMMETRY_TOL`] of symmetric
    /// are re-symmetrized; anything further off is rejected.
    pub fn new_symmetric(grid: Arc<GridSpace>, values: Vec<DMatrix<f64>>) -> Result<Self> {
        let mut f = Self::new(grid, values)?;
        for (i, m) in f.values.iter_mut().enumerate() {
            let asym = linalg::asymmetry(m);
            if asym > SYMMETRY_TOL * m.amax().max(1.0) {
                return Err(MjlsError::NotSymmetric {
                    node: i,
                    asymmetry: asym,
                });
            }
            *m = linalg::symmetrize(m);
        }
        f.symmetric = true;
        Ok(f)
    }

    pub(crate) fn from_parts(grid: Arc<GridSpace>, values: Vec<DMatrix<f64>>, symmetric: bool) -> Self {
        let (rows, cols) = values.first().map_or((0, 0), |m| m.shape());
        Self {
            grid,
            values,
            rows,
            cols,
            symmetric,
        }
    }

    pub fn from_fn<F>(grid: Arc<GridSpace>, f: F) -> Result<Self>
    where
        F: Fn(usize) -> DMatrix<f64>,
    {
        let values = (0..grid.len()).map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<GridSpace>, m: &DMatrix<f64>) -> Self {
        let symmetric = m.is_square() && linalg::asymmetry(m) == 0.0;
        let values = vec![m.clone(); grid.len()];
        Self::from_parts(grid, values, symmetric)
    }

    pub fn zeros(grid: Arc<GridSpace>, rows: usize, cols: usize) -> Self {
        let mut f = Self::constant(grid, &DMatrix::zeros(rows, cols));
        f.rows = rows;
        f.cols = cols;
        f
    }

    pub fn identity(grid: Arc<GridSpace>, n: usize) -> Self {
        Self::constant(grid, &DMatrix::identity(n, n))
    }

    pub fn grid(&self) -> &Arc<GridSpace> {
        &self.grid
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<DMatrix<f64>> {
        self.values
    }

    pub fn get(&self, node: usize) -> &DMatrix<f64> {
        &self.values[node]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Every value is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|m| m.iter().all(|&v| v == 0.0))
    }

    fn check_same(&self, other: &MatrixField, what: &str) -> Result<()> {
        if self.shape() != other.shape() || self.len() != other.len() {
            return Err(MjlsError::ShapeMismatch(format!(
                "{what}: {:?} on {} nodes vs {:?} on {} nodes",
                self.shape(),
                self.len(),
                other.shape(),
                other.len()
            )));
        }
        Ok(())
    }

    /// Node-wise map; the result is flagged symmetric when `symmetric` is set
    /// and each output is re-symmetrized.
    pub fn map<F>(&self, symmetric: bool, f: F) -> MatrixField
    where
        F: Fn(usize, &DMatrix<f64>) -> DMatrix<f64> + Sync + Send,
    {
        let values = map_indices(self.len(), |i| {
            let m = f(i, &self.values[i]);
            if symmetric {
                linalg::symmetrize(&m)
            } else {
                m
            }
        });
        Self::from_parts(self.grid.clone(), values, symmetric)
    }

    pub fn add(&self, other: &MatrixField) -> Result<MatrixField> {
        self.check_same(other, "add")?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self::from_parts(self.grid.clone(), values, self.symmetric && other.symmetric))
    }

    pub fn sub(&self, other: &MatrixField) -> Result<MatrixField> {
        self.check_same(other, "sub")?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self::from_parts(self.grid.clone(), values, self.symmetric && other.symmetric))
    }

    pub fn scale(&self, c: f64) -> MatrixField {
        let values = self.values.iter().map(|m| m * c).collect();
        Self::from_parts(self.grid.clone(), values, self.symmetric)
    }

    pub fn transpose(&self) -> MatrixField {
        let values = self.values.iter().map(|m| m.transpose()).collect();
        Self::from_parts(self.grid.clone(), values, self.symmetric)
    }

    /// `sum_nodes ||P(l)|| w_l` with the spectral norm.
    pub fn norm_one(&self) -> f64 {
        let norms = map_indices(self.len(), |i| linalg::spectral_norm(&self.values[i]));
        norms.iter().zip(self.grid.weights()).map(|(n, w)| n * w).sum()
    }

    /// `max_nodes ||P(l)||`.
    pub fn norm_inf(&self) -> f64 {
        map_indices(self.len(), |i| linalg::spectral_norm(&self.values[i]))
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// `max_nodes ||P(l) - Q(l)||`.
    pub fn distance_inf(&self, other: &MatrixField) -> Result<f64> {
        self.check_same(other, "distance")?;
        Ok(map_indices(self.len(), |i| {
            linalg::spectral_norm(&(&self.values[i] - &other.values[i]))
        })
        .into_iter()
        .fold(0.0, f64::max))
    }

    /// Largest absolute entry-wise difference over all nodes.
    pub fn max_abs_diff(&self, other: &MatrixField) -> Result<f64> {
        self.check_same(other, "difference")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max))
    }

    /// `<V; U> = sum_nodes tr(V' U) w`.
    pub fn pairing(&self, other: &MatrixField) -> Result<f64> {
        self.check_same(other, "pairing")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((v, u), w)| v.dot(u) * w)
            .sum())
    }

    /// Minimum over nodes of the smallest eigenvalue, with threshold 0.
    pub fn uniform_psd_margin(&self) -> Result<OrderingCertificate> {
        self.psd_margin_above(0.0)
    }

    pub fn psd_margin_above(&self, threshold: f64) -> Result<OrderingCertificate> {
        if !self.symmetric {
            let worst = self
                .values
                .iter()
                .enumerate()
                .map(|(i, m)| (i, linalg::asymmetry(m)))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((0, 0.0));
            return Err(MjlsError::NotSymmetric {
                node: worst.0,
                asymmetry: worst.1,
            });
        }
        let eigs = map_indices(self.len(), |i| linalg::min_eigenvalue(&self.values[i]));
        let (argmin, min) = eigs
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        Ok(OrderingCertificate {
            min_eigenvalue_over_nodes: min,
            argmin_node: argmin,
            threshold,
        })
    }

    pub fn to_json(&self) -> FieldJson {
        FieldJson {
            rows: self.rows,
            cols: self.cols,
            symmetric: self.symmetric,
            nodes: self
                .values
                .iter()
                .enumerate()
                .map(|(i, m)| NodeValue {
                    label: self.grid.node(i).label,
                    t: self.grid.node(i).t,
                    value: linalg::to_rows(m),
                })
                .collect(),
        }
    }

    /// Rebuilds a field on `grid`; nodes are matched by `(label, t)` in order.
    pub fn from_json(grid: Arc<GridSpace>, json: &FieldJson) -> Result<Self> {
        if json.nodes.len() != grid.len() {
            return Err(MjlsError::ShapeMismatch(format!(
                "{} serialized nodes, grid has {}",
                json.nodes.len(),
                grid.len()
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for (i, nv) in json.nodes.iter().enumerate() {
            let node = grid.node(i);
            if nv.label != node.label || (nv.t - node.t).abs() > 1e-12 {
                return Err(MjlsError::ShapeMismatch(format!(
                    "serialized node {i} is ({}, {}), grid node is ({}, {})",
                    nv.label, nv.t, node.label, node.t
                )));
            }
            let m = linalg::from_rows(&nv.value)
                .ok_or_else(|| MjlsError::ShapeMismatch(format!("ragged matrix at node {i}")))?;
            values.push(m);
        }
        if json.symmetric {
            Self::new_symmetric(grid, values)
        } else {
            Self::new(grid, values)
        }
    }

    /// Rows `label,t,i,j,value` with a header line; indices are 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,t,i,j,value\n");
        for (k, m) in self.values.iter().enumerate() {
            let node = self.grid.node(k);
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let _ = writeln!(out, "{},{},{},{},{}", node.label, node.t, i + 1, j + 1, m[(i, j)]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldJson {
    pub rows: usize,
    pub cols: usize,
    pub symmetric: bool,
    pub nodes: Vec<NodeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeValue {
    pub label: i64,
    pub t: f64,
    pub value: Vec<Vec<f64>>,
}
