//! Discretized mode space: labeled interval components, quadrature weights
//! standing in for the measure, and the transition density between nodes.
//!
//! Every "almost everywhere" statement about the continuous mode space is
//! read as "at every grid node" here; refining `node_count` refines the
//! approximation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MjlsError, Result};

/// Tolerance on kernel row sums and initial-density mass.
pub const STOCHASTIC_TOL: f64 = 1e-10;

/// Row rescaling factors further than this from one are reported as warnings.
pub const RESCALE_WARN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    /// Composite midpoint rule, `node_count` equal cells.
    #[default]
    Midpoint,
    /// Composite trapezoid rule with nodes on both endpoints (needs two or more nodes).
    Trapezoid,
}

impl std::str::FromStr for Quadrature {
    type Err = MjlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Quadrature::Midpoint),
            "trapezoid" => Ok(Quadrature::Trapezoid),
            other => Err(MjlsError::InvalidArgument(format!(
                "unknown quadrature rule `{other}` (expected midpoint or trapezoid)"
            ))),
        }
    }
}

/// One labeled interval of the mode space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub label: i64,
    pub lo: f64,
    pub hi: f64,
    pub node_count: usize,
}

impl Component {
    pub fn new(label: i64, lo: f64, hi: f64, node_count: usize) -> Self {
        Self {
            label,
            lo,
            hi,
            node_count,
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A point of the mode space, `(label, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePoint {
    pub label: i64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: i64,
    pub t: f64,
    /// Index into [`GridSpace::components`].
    pub component: usize,
    /// Sub-interval of the component this node represents.
    pub cell: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    components: Vec<Component>,
    nodes: Vec<Node>,
    weights: Vec<f64>,
    quadrature: Quadrature,
    // first node index of each component, plus a trailing total
    offsets: Vec<usize>,
}

/// Builds the quadrature grid over the given components.
pub fn build_grid(components: &[Component], rule: Quadrature) -> Result<GridSpace> {
    if components.is_empty() {
        return Err(MjlsError::InvalidGrid("empty component list".into()));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut offsets = Vec::with_capacity(components.len() + 1);
    for (ci, comp) in components.iter().enumerate() {
        if components[..ci].iter().any(|c| c.label == comp.label) {
            return Err(MjlsError::InvalidGrid(format!(
                "duplicate component label {}",
                comp.label
            )));
        }
        if comp.node_count == 0 {
            return Err(MjlsError::InvalidGrid(format!(
                "component {} has non-positive node count",
                comp.label
            )));
        }
        if !(comp.lo.is_finite() && comp.hi.is_finite() && comp.lo < comp.hi) {
            return Err(MjlsError::InvalidGrid(format!(
                "component {} has degenerate interval [{}, {}]",
                comp.label, comp.lo, comp.hi
            )));
        }
        offsets.push(nodes.len());
        let len = comp.length();
        let count = comp.node_count;
        match rule {
            Quadrature::Midpoint => {
                let h = len / count as f64;
                for j in 0..count {
                    let a = comp.lo + j as f64 * h;
                    let b = if j + 1 == count { comp.hi } else { a + h };
                    nodes.push(Node {
                        label: comp.label,
                        t: comp.lo + (j as f64 + 0.5) * h,
                        component: ci,
                        cell: (a, b),
                    });
                    weights.push(h);
                }
            }
            Quadrature::Trapezoid => {
                if count < 2 {
                    return Err(MjlsError::InvalidGrid(format!(
                        "trapezoid rule needs at least 2 nodes on component {}",
                        comp.label
                    )));
                }
                let h = len / (count - 1) as f64;
                for j in 0..count {
                    let t = if j + 1 == count {
                        comp.hi
                    } else {
                        comp.lo + j as f64 * h
                    };
                    let end = j == 0 || j + 1 == count;
                    nodes.push(Node {
                        label: comp.label,
                        t,
                        component: ci,
                        cell: ((t - h / 2.0).max(comp.lo), (t + h / 2.0).min(comp.hi)),
                    });
                    weights.push(if end { h / 2.0 } else { h });
                }
            }
        }
    }
    offsets.push(nodes.len());
    Ok(GridSpace {
        components: components.to_vec(),
        nodes,
        weights,
        quadrature: rule,
        offsets,
    })
}

impl GridSpace {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    /// Total measure of the mode space under the quadrature.
    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn component_index(&self, label: i64) -> Option<usize> {
        self.components.iter().position(|c| c.label == label)
    }

    /// Node index range belonging to component `ci`.
    pub fn component_nodes(&self, ci: usize) -> std::ops::Range<usize> {
        self.offsets[ci]..self.offsets[ci + 1]
    }

    /// Node whose cell contains `p` (nearest node when `p` is off the grid).
    pub fn locate(&self, p: ModePoint) -> Option<usize> {
        let ci = self.component_index(p.label)?;
        self.component_nodes(ci).min_by(|&a, &b| {
            let da = (self.nodes[a].t - p.t).abs();
            let db = (self.nodes[b].t - p.t).abs();
            da.total_cmp(&db)
        })
    }

    /// Quadrature of a scalar function over the whole space.
    pub fn integrate<F: Fn(&Node) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| f(n) * w)
            .sum()
    }

    pub fn mode_point(&self, i: usize) -> ModePoint {
        ModePoint {
            label: self.nodes[i].label,
            t: self.nodes[i].t,
        }
    }
}

/// Discretized transition density `g(s|l)` and initial density `nu`.
///
/// Row `l` of the density holds `g(. | l)` evaluated at the target nodes. The
/// quadrature-weighted copies used by the operators are precomputed in both
/// orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    n: usize,
    // row-major, density[l * n + s] = g(s | l)
    density: Vec<f64>,
    initial_density: Vec<f64>,
    // forward[l * n + s] = g(s | l) w_s, used by E
    forward: Vec<f64>,
    // backward[l * n + s] = g(l | s) w_s, used by L_K
    backward: Vec<f64>,
    mode_matrix: Option<DMatrix<f64>>,
    warnings: Vec<String>,
}

impl TransitionKernel {
    /// Discretizes a user density and rescales each row to be exactly
    /// stochastic under the quadrature.
    ///
    /// `density(source, target)` is evaluated at node indices. The initial
    /// density is rescaled the same way.
    pub fn from_density<F>(grid: &GridSpace, density: F, initial_density: &[f64]) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64,
    {
        let n = grid.len();
        if initial_density.len() != n {
            return Err(MjlsError::InvalidKernel(format!(
                "initial density has {} entries, grid has {} nodes",
                initial_density.len(),
                n
            )));
        }
        let mut warnings = Vec::new();
        let mut dens = vec![0.0; n * n];
        for l in 0..n {
            let mut mass = 0.0;
            for s in 0..n {
                let g = density(l, s);
                if !(g.is_finite() && g >= 0.0) {
                    return Err(MjlsError::InvalidKernel(format!(
                        "density g({s}|{l}) = {g} is not a nonnegative number"
                    )));
                }
                dens[l * n + s] = g;
                mass += g * grid.weight(s);
            }
            if mass <= 0.0 {
                return Err(MjlsError::InvalidKernel(format!(
                    "degenerate kernel row at node {l}: zero outgoing mass"
                )));
            }
            if (mass - 1.0).abs() > RESCALE_WARN {
                warnings.push(format!(
                    "kernel row {l} rescaled by {:.6} to restore stochasticity",
                    1.0 / mass
                ));
            }
            for s in 0..n {
                dens[l * n + s] /= mass;
            }
        }
        let mut nu = initial_density.to_vec();
        let nu_mass: f64 = nu.iter().zip(grid.weights()).map(|(v, w)| v * w).sum();
        if nu.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || nu_mass <= 0.0 {
            return Err(MjlsError::InvalidKernel(
                "initial density must be nonnegative with positive mass".into(),
            ));
        }
        if (nu_mass - 1.0).abs() > RESCALE_WARN {
            warnings.push(format!("initial density rescaled by {:.6}", 1.0 / nu_mass));
        }
        nu.iter_mut().for_each(|v| *v /= nu_mass);
        for w in &warnings {
            log::warn!("{w}");
        }
        let kernel = Self::assemble(grid, dens, nu, None, warnings);
        kernel.validate(grid)?;
        Ok(kernel)
    }

    fn assemble(
        grid: &GridSpace,
        density: Vec<f64>,
        initial_density: Vec<f64>,
        mode_matrix: Option<DMatrix<f64>>,
        warnings: Vec<String>,
    ) -> Self {
        let n = grid.len();
        let w = grid.weights();
        let mut forward = vec![0.0; n * n];
        let mut backward = vec![0.0; n * n];
        for l in 0..n {
            for s in 0..n {
                forward[l * n + s] = density[l * n + s] * w[s];
                backward[l * n + s] = density[s * n + l] * w[s];
            }
        }
        Self {
            n,
            density,
            initial_density,
            forward,
            backward,
            mode_matrix,
            warnings,
        }
    }

    /// Checks the kernel invariants against `grid`.
    pub fn validate(&self, grid: &GridSpace) -> Result<()> {
        let n = self.n;
        if grid.len() != n {
            return Err(MjlsError::InvalidKernel(format!(
                "kernel has {n} nodes, grid has {}",
                grid.len()
            )));
        }
        for l in 0..n {
            let row: f64 = self.forward[l * n..(l + 1) * n].iter().sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL {
                return Err(MjlsError::InvalidKernel(format!(
                    "row {l} integrates to {row}, not 1"
                )));
            }
            let incoming: f64 = self.backward[l * n..(l + 1) * n].iter().sum();
            if incoming <= 0.0 {
                return Err(MjlsError::InvalidKernel(format!(
                    "node {l} is unreachable (zero incoming density)"
                )));
            }
            if self.initial_density[l] <= 0.0 {
                return Err(MjlsError::InvalidKernel(format!(
                    "initial density vanishes at node {l}"
                )));
            }
        }
        let mass: f64 = self
            .initial_density
            .iter()
            .zip(grid.weights())
            .map(|(v, w)| v * w)
            .sum();
        if (mass - 1.0).abs() > STOCHASTIC_TOL {
            return Err(MjlsError::InvalidKernel(format!(
                "initial density integrates to {mass}, not 1"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `g(target | source)`.
    pub fn density(&self, source: usize, target: usize) -> f64 {
        self.density[source * self.n + target]
    }

    pub fn initial_density(&self) -> &[f64] {
        &self.initial_density
    }

    /// Row `l` of `g(s|l) w_s` over targets `s`.
    pub fn forward_row(&self, l: usize) -> &[f64] {
        &self.forward[l * self.n..(l + 1) * self.n]
    }

    /// Row `l` of `g(l|s) w_s` over sources `s`.
    pub fn backward_row(&self, l: usize) -> &[f64] {
        &self.backward[l * self.n..(l + 1) * self.n]
    }

    /// Label-level transition matrix when the kernel was built from one.
    pub fn mode_matrix(&self) -> Option<&DMatrix<f64>> {
        self.mode_matrix.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

fn check_mode_matrix(grid: &GridSpace, p: &DMatrix<f64>) -> Result<()> {
    let k = grid.components().len();
    if p.nrows() != k || p.ncols() != k {
        return Err(MjlsError::InvalidKernel(format!(
            "mode matrix is {}x{}, grid has {k} components",
            p.nrows(),
            p.ncols()
        )));
    }
    for i in 0..k {
        let row = p.row(i);
        if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(MjlsError::InvalidKernel(format!(
                "mode matrix row {i} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(MjlsError::InvalidKernel(format!(
                "mode matrix row {i} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// Kernel that jumps between components with the probabilities of
/// `mode_matrix` and draws the target coordinate uniformly on the target
/// component. Rows and columns of `mode_matrix` follow the grid's component
/// order. The initial density is uniform over the whole space.
pub fn build_mode_block_kernel(grid: &GridSpace, mode_matrix: &DMatrix<f64>) -> Result<TransitionKernel> {
    let total = grid.total_measure();
    let nu = vec![1.0 / total; grid.len()];
    build_mode_block_kernel_with_initial(grid, mode_matrix, &nu)
}

pub fn build_mode_block_kernel_with_initial(
    grid: &GridSpace,
    mode_matrix: &DMatrix<f64>,
    initial_density: &[f64],
) -> Result<TransitionKernel> {
    check_mode_matrix(grid, mode_matrix)?;
    let nodes = grid.nodes();
    let comps = grid.components();
    let mut kernel = TransitionKernel::from_density(
        grid,
        |l, s| {
            let (ci, cj) = (nodes[l].component, nodes[s].component);
            mode_matrix[(ci, cj)] / comps[cj].length()
        },
        initial_density,
    )?;
    kernel.mode_matrix = Some(mode_matrix.clone());
    Ok(kernel)
}

/// Finite chain: one node of unit weight per label (counting measure).
pub fn finite_grid(labels: &[i64], mode_matrix: &DMatrix<f64>) -> Result<(GridSpace, TransitionKernel)> {
    let comps: Vec<Component> = labels.iter().map(|&l| Component::new(l, 0.0, 1.0, 1)).collect();
    let grid = build_grid(&comps, Quadrature::Midpoint)?;
    let kernel = build_mode_block_kernel(&grid, mode_matrix)?;
    Ok((grid, kernel))
}
