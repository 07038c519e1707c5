//! JSON model description: grid, kernel, affine coefficients and run
//! defaults. Field names are listed in `docs/schema.md`.
//!
//! Loading enforces every grid, kernel and system invariant, and names the
//! offending entry in its diagnostics. JSON syntax errors carry line and
//! column.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MjlsError, Result};
use crate::grid::{build_grid, build_mode_block_kernel_with_initial, Component, Quadrature};
use crate::model::{AffineCoefficient, AffineModel, ModeCoefficients};
use crate::operators::MjlsSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub label: i64,
    pub interval: [f64; 2],
    pub nodes: usize,
}

/// How the target coordinate is distributed inside a component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelDensity {
    /// Uniform on the target component.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDensitySpec {
    /// Constant density `1 / mu(Theta)`.
    #[default]
    Uniform,
    /// Probability of each component (in component order), spread uniformly
    /// inside it.
    ModeProbabilities(Vec<f64>),
}

/// A matrix given row by row, either constant or as values at `t = 0` and
/// `t = 1` with linear interpolation in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Constant(Vec<Vec<f64>>),
    Affine { at0: Vec<Vec<f64>>, at1: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub label: i64,
    pub a: CoefficientSpec,
    /// Defaults to an `n x 1` zero matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<CoefficientSpec>,
    /// Defaults to a `1 x n` zero matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<CoefficientSpec>,
    /// Defaults to a zero matrix matching `c` and `b`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<CoefficientSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub components: Vec<ComponentSpec>,
    pub mode_matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub kernel_density: KernelDensity,
    #[serde(default)]
    pub initial_density: InitialDensitySpec,
    pub modes: Vec<ModeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_period: Option<f64>,
}

fn cfg_err(msg: impl Into<String>) -> MjlsError {
    MjlsError::Config(msg.into())
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(cfg_err(format!("{what}: empty matrix")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(cfg_err(format!(
            "{what}: row {i} has {} entries, row 0 has {ncols}",
            rows[i].len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(cfg_err(format!("{what}: non-finite entry")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl CoefficientSpec {
    pub fn to_coefficient(&self, what: &str) -> Result<AffineCoefficient> {
        match self {
            CoefficientSpec::Constant(rows) => Ok(AffineCoefficient::constant(rows_to_matrix(rows, what)?)),
            CoefficientSpec::Affine { at0, at1 } => AffineCoefficient::affine(
                rows_to_matrix(at0, &format!("{what}.at0"))?,
                rows_to_matrix(at1, &format!("{what}.at1"))?,
            )
            .map_err(|e| cfg_err(format!("{what}: {e}"))),
        }
    }

    pub fn from_coefficient(c: &AffineCoefficient) -> Self {
        if c.is_constant() {
            CoefficientSpec::Constant(matrix_to_rows(&c.at0))
        } else {
            CoefficientSpec::Affine {
                at0: matrix_to_rows(&c.at0),
                at1: matrix_to_rows(&c.at1),
            }
        }
    }
}

impl ModelConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Replaces every component's node count.
    pub fn with_nodes(mut self, nodes: usize) -> Self {
        for c in &mut self.components {
            c.nodes = nodes;
        }
        self
    }

    pub fn with_quadrature(mut self, q: Quadrature) -> Self {
        self.quadrature = q;
        self
    }

    pub fn grid_components(&self) -> Vec<Component> {
        self.components
            .iter()
            .map(|c| Component::new(c.label, c.interval[0], c.interval[1], c.nodes))
            .collect()
    }

    pub fn mode_matrix(&self) -> Result<DMatrix<f64>> {
        rows_to_matrix(&self.mode_matrix, "mode_matrix")
    }

    pub fn model(&self) -> Result<AffineModel> {
        let labels: BTreeSet<i64> = self.components.iter().map(|c| c.label).collect();
        let mut seen = BTreeSet::new();
        for m in &self.modes {
            if !labels.contains(&m.label) {
                return Err(cfg_err(format!("modes: label {} has no component", m.label)));
            }
            if !seen.insert(m.label) {
                return Err(cfg_err(format!("modes: label {} given twice", m.label)));
            }
        }
        if let Some(missing) = labels.iter().find(|l| !seen.contains(l)) {
            return Err(cfg_err(format!("modes: component label {missing} has no coefficients")));
        }
        let mut modes = Vec::with_capacity(self.modes.len());
        for (k, spec) in self.modes.iter().enumerate() {
            let at = |field: &str| format!("modes[{k}] (label {}).{field}", spec.label);
            let a = spec.a.to_coefficient(&at("a"))?;
            let n = a.shape().0;
            let opt = |s: &Option<CoefficientSpec>, field: &str, default: (usize, usize)| match s {
                Some(s) => s.to_coefficient(&at(field)),
                None => Ok(AffineCoefficient::constant(DMatrix::zeros(default.0, default.1))),
            };
            let b = opt(&spec.b, "b", (n, 1))?;
            let c = opt(&spec.c, "c", (1, n))?;
            let d = opt(&spec.d, "d", (c.shape().0, b.shape().1))?;
            modes.push(ModeCoefficients {
                label: spec.label,
                a,
                b,
                c,
                d,
            });
        }
        AffineModel::new(modes).map_err(|e| cfg_err(format!("modes: {e}")))
    }

    /// Builds and validates the system. Kernel rescaling warnings are kept on
    /// the kernel.
    pub fn to_system(&self) -> Result<MjlsSystem> {
        let grid = Arc::new(build_grid(&self.grid_components(), self.quadrature).map_err(|e| cfg_err(format!("components: {e}")))?);
        let p = self.mode_matrix()?;
        let nu = match &self.initial_density {
            InitialDensitySpec::Uniform => vec![1.0 / grid.total_measure(); grid.len()],
            InitialDensitySpec::ModeProbabilities(pi) => {
                if pi.len() != grid.components().len() {
                    return Err(cfg_err(format!(
                        "initial_density: {} probabilities for {} components",
                        pi.len(),
                        grid.components().len()
                    )));
                }
                grid.nodes()
                    .iter()
                    .map(|n| pi[n.component] / grid.components()[n.component].length())
                    .collect()
            }
        };
        let kernel = match self.kernel_density {
            KernelDensity::Uniform => build_mode_block_kernel_with_initial(&grid, &p, &nu),
        }
        .map_err(|e| cfg_err(format!("mode_matrix/initial_density: {e}")))?;
        let system = self.model()?.build_system(grid, Arc::new(kernel))?;
        if let Some(x0) = &self.x0 {
            if x0.len() != system.n() {
                return Err(cfg_err(format!("x0 has {} entries, system has {} states", x0.len(), system.n())));
            }
        }
        Ok(system)
    }

    pub fn x0(&self) -> Option<DVector<f64>> {
        self.x0.as_ref().map(|v| DVector::from_column_slice(v))
    }

    /// Config describing a mode-block model with the given components.
    pub fn from_model(
        components: &[Component],
        mode_matrix: &DMatrix<f64>,
        quadrature: Quadrature,
        model: &AffineModel,
    ) -> Self {
        ModelConfig {
            components: components
                .iter()
                .map(|c| ComponentSpec {
                    label: c.label,
                    interval: [c.lo, c.hi],
                    nodes: c.node_count,
                })
                .collect(),
            mode_matrix: matrix_to_rows(mode_matrix),
            quadrature,
            kernel_density: KernelDensity::Uniform,
            initial_density: InitialDensitySpec::Uniform,
            modes: model
                .modes()
                .iter()
                .map(|m| ModeSpec {
                    label: m.label,
                    a: CoefficientSpec::from_coefficient(&m.a),
                    b: Some(CoefficientSpec::from_coefficient(&m.b)),
                    c: Some(CoefficientSpec::from_coefficient(&m.c)),
                    d: Some(CoefficientSpec::from_coefficient(&m.d)),
                })
                .collect(),
            gamma: None,
            eps: None,
            horizon: None,
            seed: None,
            x0: None,
            sampling_period: None,
        }
    }
}
