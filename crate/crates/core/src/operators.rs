//! Coupling operators on matrix fields and the system bundle they act on.
//!
//! With `w` the quadrature weights and `g(s|l)` the kernel density:
//!
//! * `E(U)(l)   = sum_s g(s|l) U(s) w_s`
//! * `T_K(U)(l) = K(l)' E(U)(l) K(l)`
//! * `L_K(V)(l) = sum_s g(l|s) K(s) V(s) K(s)' w_s`
//!
//! `L_K` and `T_K` are adjoint under the weighted trace pairing and both
//! preserve the cone of node-wise positive semidefinite fields.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{MjlsError, Result};
use crate::field::MatrixField;
use crate::grid::{GridSpace, TransitionKernel};
use crate::linalg;
use crate::model::AffineModel;
use crate::par::{map_indices, try_map_indices};

/// Tolerance on `C' D = 0`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// The disturbance block must have all eigenvalues below `-SIGN_EPS`.
pub const SIGN_EPS: f64 = 1e-12;

/// Default cap on `nodes * n^2` for [`densify`].
pub const DEFAULT_DENSIFY_BUDGET: usize = 20_000;

/// Minimum power iterations before convergence may be declared.
pub const MIN_POWER_ITERATIONS: usize = 10;

#[derive(Debug, Clone)]
pub struct MjlsSystem {
    grid: Arc<GridSpace>,
    kernel: Arc<TransitionKernel>,
    a: MatrixField,
    b: MatrixField,
    c: MatrixField,
    d: MatrixField,
    model: Option<Arc<AffineModel>>,
}

impl MjlsSystem {
    pub fn new(
        grid: Arc<GridSpace>,
        kernel: Arc<TransitionKernel>,
        a: MatrixField,
        b: MatrixField,
        c: MatrixField,
        d: MatrixField,
    ) -> Result<Self> {
        kernel.validate(&grid)?;
        for (name, f) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            if f.len() != grid.len() {
                return Err(MjlsError::InvalidSystem(format!(
                    "{name} has {} nodes, grid has {}",
                    f.len(),
                    grid.len()
                )));
            }
            if f.values().iter().any(|m| m.iter().any(|v| !v.is_finite())) {
                return Err(MjlsError::InvalidSystem(format!("{name} has non-finite entries")));
            }
        }
        let (n, n2) = a.shape();
        let r = b.shape().1;
        let m = c.shape().0;
        if n != n2 || b.shape().0 != n || c.shape().1 != n || d.shape() != (m, r) {
            return Err(MjlsError::InvalidSystem(format!(
                "incompatible shapes A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        for i in 0..grid.len() {
            let cd = c.get(i).transpose() * d.get(i);
            if cd.amax() > ORTHOGONALITY_TOL {
                return Err(MjlsError::InvalidSystem(format!(
                    "C'D = 0 fails at node {i} (max entry {:e})",
                    cd.amax()
                )));
            }
        }
        Ok(Self {
            grid,
            kernel,
            a,
            b,
            c,
            d,
            model: None,
        })
    }

    /// Attaches the analytic parameterization the fields were sampled from.
    pub fn with_model(mut self, model: Arc<AffineModel>) -> Result<Self> {
        let (n, r, m) = model.dims();
        if (n, r, m) != (self.n(), self.r(), self.m()) {
            return Err(MjlsError::InvalidSystem(
                "coefficient model dimensions differ from the sampled fields".into(),
            ));
        }
        self.model = Some(model);
        Ok(self)
    }

    /// Same system with the state matrix replaced.
    pub fn with_a(&self, a: MatrixField) -> Result<Self> {
        let mut s = Self::new(
            self.grid.clone(),
            self.kernel.clone(),
            a,
            self.b.clone(),
            self.c.clone(),
            self.d.clone(),
        )?;
        s.model = None;
        Ok(s)
    }

    pub fn grid(&self) -> &Arc<GridSpace> {
        &self.grid
    }

    pub fn kernel(&self) -> &Arc<TransitionKernel> {
        &self.kernel
    }

    pub fn a(&self) -> &MatrixField {
        &self.a
    }

    pub fn b(&self) -> &MatrixField {
        &self.b
    }

    pub fn c(&self) -> &MatrixField {
        &self.c
    }

    pub fn d(&self) -> &MatrixField {
        &self.d
    }

    pub fn model(&self) -> Option<&Arc<AffineModel>> {
        self.model.as_ref()
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.shape().0
    }

    /// Disturbance dimension.
    pub fn r(&self) -> usize {
        self.b.shape().1
    }

    /// Output dimension.
    pub fn m(&self) -> usize {
        self.c.shape().0
    }

    pub fn t_a(&self) -> OperatorHandle<'_> {
        OperatorHandle::t(&self.kernel, &self.a)
    }

    pub fn l_a(&self) -> OperatorHandle<'_> {
        OperatorHandle::l(&self.kernel, &self.a)
    }

    /// `T_A(U) + C'C`.
    pub fn psi1(&self, u: &MatrixField) -> Result<MatrixField> {
        let e = apply_e(&self.kernel, u)?;
        Ok(self.psi1_from_e(&e))
    }

    /// `A' E(U) B`.
    pub fn psi2(&self, u: &MatrixField) -> Result<MatrixField> {
        let e = apply_e(&self.kernel, u)?;
        Ok(self.psi2_from_e(&e))
    }

    /// `T_B(U) + D'D - gamma^2 I`.
    pub fn psi3(&self, u: &MatrixField, gamma: f64) -> Result<MatrixField> {
        let e = apply_e(&self.kernel, u)?;
        Ok(self.psi3_from_e(&e, gamma))
    }

    pub(crate) fn psi1_from_e(&self, e: &MatrixField) -> MatrixField {
        e.map(true, |i, e| {
            let a = self.a.get(i);
            let c = self.c.get(i);
            a.transpose() * e * a + c.transpose() * c
        })
    }

    pub(crate) fn psi2_from_e(&self, e: &MatrixField) -> MatrixField {
        e.map(false, |i, e| self.a.get(i).transpose() * e * self.b.get(i))
    }

    pub(crate) fn psi3_from_e(&self, e: &MatrixField, gamma: f64) -> MatrixField {
        let r = self.r();
        e.map(true, |i, e| {
            let b = self.b.get(i);
            let d = self.d.get(i);
            b.transpose() * e * b + d.transpose() * d - DMatrix::identity(r, r) * (gamma * gamma)
        })
    }

    /// `F(U) = -Psi3(U)^{-1} Psi2(U)'`, solved through a Cholesky factor of
    /// `-Psi3(U)`. Fails when `Psi3(U)` is not negative definite somewhere.
    pub fn gain_f(&self, u: &MatrixField, gamma: f64) -> Result<MatrixField> {
        let e = apply_e(&self.kernel, u)?;
        let psi2 = self.psi2_from_e(&e);
        let psi3 = self.psi3_from_e(&e, gamma);
        let gains = try_map_indices(self.grid.len(), |i| {
            let (chol, _) = factor_sign_block(&self.grid, psi3.get(i), i, None)?;
            Ok::<_, MjlsError>(chol.solve(&psi2.get(i).transpose()))
        })?;
        MatrixField::new(self.grid.clone(), gains)
    }

    /// `A + B F` node-wise.
    pub fn closed_loop(&self, f: &MatrixField) -> Result<MatrixField> {
        if f.shape() != (self.r(), self.n()) {
            return Err(MjlsError::ShapeMismatch(format!(
                "gain has shape {:?}, expected {:?}",
                f.shape(),
                (self.r(), self.n())
            )));
        }
        Ok(self.a.map(false, |i, a| a + self.b.get(i) * f.get(i)))
    }

    /// Node-wise block `[[Psi1(Yn) - Y, Psi2(Yn)], [Psi2(Yn)', Psi3(Yn)]]`.
    pub fn brl_residual_block(&self, y_next: &MatrixField, y_now: &MatrixField, gamma: f64) -> Result<MatrixField> {
        let n = self.n();
        if y_now.shape() != (n, n) || y_next.shape() != (n, n) {
            return Err(MjlsError::ShapeMismatch(format!(
                "Riccati iterates must be {n}x{n}, got {:?} and {:?}",
                y_next.shape(),
                y_now.shape()
            )));
        }
        let e = apply_e(&self.kernel, y_next)?;
        let p1 = self.psi1_from_e(&e);
        let p2 = self.psi2_from_e(&e);
        let p3 = self.psi3_from_e(&e, gamma);
        let r = self.r();
        let blocks = map_indices(self.grid.len(), |i| {
            let mut w = DMatrix::zeros(n + r, n + r);
            w.view_mut((0, 0), (n, n)).copy_from(&(p1.get(i) - y_now.get(i)));
            w.view_mut((0, n), (n, r)).copy_from(p2.get(i));
            w.view_mut((n, 0), (r, n)).copy_from(&p2.get(i).transpose());
            w.view_mut((n, n), (r, r)).copy_from(p3.get(i));
            linalg::symmetrize(&w)
        });
        Ok(MatrixField::from_parts(self.grid.clone(), blocks, true))
    }
}

/// Cholesky factor of `-psi3` and its smallest eigenvalue. Errors when the
/// block is not negative definite beyond [`SIGN_EPS`].
pub(crate) fn factor_sign_block(
    grid: &GridSpace,
    psi3: &DMatrix<f64>,
    node: usize,
    step: Option<usize>,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let neg = -psi3;
    let margin = linalg::min_eigenvalue(&neg);
    let violation = || MjlsError::SignCondition {
        step,
        node,
        label: grid.node(node).label,
        t: grid.node(node).t,
        max_eigenvalue: -margin,
    };
    if !(margin > SIGN_EPS) {
        return Err(violation());
    }
    let chol = Cholesky::new(neg).ok_or_else(violation)?;
    Ok((chol, margin))
}

fn check_kernel(kernel: &TransitionKernel, f: &MatrixField) -> Result<()> {
    if kernel.len() != f.len() {
        return Err(MjlsError::ShapeMismatch(format!(
            "field has {} nodes, kernel has {}",
            f.len(),
            kernel.len()
        )));
    }
    Ok(())
}

fn weighted_sums<'k, R>(n_nodes: usize, row: R, values: &[DMatrix<f64>], shape: (usize, usize)) -> Vec<DMatrix<f64>>
where
    R: Fn(usize) -> &'k [f64] + Sync + Send,
{
    map_indices(n_nodes, |l| {
        let mut acc: DMatrix<f64> = DMatrix::zeros(shape.0, shape.1);
        for (w, v) in row(l).iter().zip(values) {
            if *w != 0.0 {
                acc.zip_apply(v, |a, b| *a += *w * b);
            }
        }
        linalg::symmetrize(&acc)
    })
}

/// `E(U)(l) = sum_s g(s|l) U(s) w_s`.
pub fn apply_e(kernel: &TransitionKernel, u: &MatrixField) -> Result<MatrixField> {
    check_kernel(kernel, u)?;
    let (p, q) = u.shape();
    if p != q {
        return Err(MjlsError::ShapeMismatch(format!("E needs square values, got {p}x{q}")));
    }
    let values = weighted_sums(u.len(), |l| kernel.forward_row(l), u.values(), (p, p));
    Ok(MatrixField::from_parts(u.grid().clone(), values, true))
}

/// `T_K(U)(l) = K(l)' E(U)(l) K(l)`.
pub fn apply_t(kernel: &TransitionKernel, k: &MatrixField, u: &MatrixField) -> Result<MatrixField> {
    if k.shape().0 != u.shape().0 || k.len() != u.len() {
        return Err(MjlsError::ShapeMismatch(format!(
            "T_K with K {:?} cannot act on {:?}",
            k.shape(),
            u.shape()
        )));
    }
    let e = apply_e(kernel, u)?;
    Ok(e.map(true, |i, e| {
        let kk = k.get(i);
        kk.transpose() * e * kk
    }))
}

/// `L_K(V)(l) = sum_s g(l|s) K(s) V(s) K(s)' w_s`.
pub fn apply_l(kernel: &TransitionKernel, k: &MatrixField, v: &MatrixField) -> Result<MatrixField> {
    check_kernel(kernel, v)?;
    let (p, q) = v.shape();
    if p != q || k.shape().1 != p || k.len() != v.len() {
        return Err(MjlsError::ShapeMismatch(format!(
            "L_K with K {:?} cannot act on {:?}",
            k.shape(),
            v.shape()
        )));
    }
    let out = k.shape().0;
    let inner = map_indices(v.len(), |s| {
        let kk = k.get(s);
        kk * v.get(s) * kk.transpose()
    });
    let values = weighted_sums(v.len(), |l| kernel.backward_row(l), &inner, (out, out));
    Ok(MatrixField::from_parts(v.grid().clone(), values, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    L,
    T,
    E,
}

/// A linear operator on symmetric `n x n` fields, ready to apply.
#[derive(Debug, Clone, Copy)]
pub struct OperatorHandle<'a> {
    kind: OperatorKind,
    coeff: Option<&'a MatrixField>,
    kernel: &'a TransitionKernel,
    grid: &'a Arc<GridSpace>,
    dim: usize,
}

impl<'a> OperatorHandle<'a> {
    pub fn l(kernel: &'a TransitionKernel, k: &'a MatrixField) -> Self {
        Self {
            kind: OperatorKind::L,
            coeff: Some(k),
            kernel,
            grid: k.grid(),
            dim: k.shape().0,
        }
    }

    pub fn t(kernel: &'a TransitionKernel, k: &'a MatrixField) -> Self {
        Self {
            kind: OperatorKind::T,
            coeff: Some(k),
            kernel,
            grid: k.grid(),
            dim: k.shape().0,
        }
    }

    pub fn e(kernel: &'a TransitionKernel, grid: &'a Arc<GridSpace>, n: usize) -> Self {
        Self {
            kind: OperatorKind::E,
            coeff: None,
            kernel,
            grid,
            dim: n,
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &Arc<GridSpace> {
        self.grid
    }

    fn check_square(&self) -> Result<()> {
        if let Some(k) = self.coeff {
            let (p, q) = k.shape();
            if p != q {
                return Err(MjlsError::ShapeMismatch(format!(
                    "operator coefficient must be square to act on one space, got {p}x{q}"
                )));
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &MatrixField) -> Result<MatrixField> {
        match (self.kind, self.coeff) {
            (OperatorKind::L, Some(k)) => apply_l(self.kernel, k, x),
            (OperatorKind::T, Some(k)) => apply_t(self.kernel, k, x),
            _ => apply_e(self.kernel, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub estimate: f64,
    pub iterations: usize,
}

/// Budget of plain power steps before switching to the shifted iteration.
const PLAIN_POWER_BUDGET: usize = 2_000;

/// Power iteration from the identity field.
///
/// Each iterate is normalized in the weighted pairing, and the quotient
/// `<X; op(X)>` is the radius estimate. Convergence needs at least
/// [`MIN_POWER_ITERATIONS`] steps and two consecutive relative changes below
/// `tol`.
///
/// A positive operator can carry several eigenvalues on its spectral circle,
/// and then the plain quotient rotates without settling. If plain steps stall,
/// the iteration restarts on `op + s I` with `s > 0`. For a positive operator
/// the radius plus `s` is the only eigenvalue of that modulus, so the shifted
/// quotient converges, and subtracting `s` recovers the radius.
pub fn spectral_radius(op: &OperatorHandle<'_>, tol: f64, max_iter: usize) -> Result<SpectralEstimate> {
    op.check_square()?;
    let plain_budget = max_iter.min(PLAIN_POWER_BUDGET);
    let stall = match power_iterate(op, 0.0, tol, plain_budget)? {
        PowerOutcome::Converged(est) => return Ok(est),
        PowerOutcome::Stalled(stall) => stall,
    };
    let remaining = max_iter - plain_budget;
    if remaining == 0 {
        return Err(stall.into_error(plain_budget));
    }
    let shift = stall.growth.max(f64::MIN_POSITIVE);
    log::debug!("power iteration stalled after {plain_budget} steps; retrying with shift {shift:e}");
    match power_iterate(op, shift, tol, remaining)? {
        PowerOutcome::Converged(est) => Ok(SpectralEstimate {
            estimate: est.estimate.max(0.0),
            iterations: plain_budget + est.iterations,
        }),
        PowerOutcome::Stalled(stall) => Err(stall.into_error(max_iter)),
    }
}

struct Stall {
    previous: f64,
    last: f64,
    growth: f64,
}

impl Stall {
    fn into_error(self, iterations: usize) -> MjlsError {
        MjlsError::PowerIterationDiverged {
            iterations,
            previous: self.previous,
            last: self.last,
        }
    }
}

enum PowerOutcome {
    Converged(SpectralEstimate),
    Stalled(Stall),
}

/// Power iteration on `op + shift I`, reporting quotients of `op` itself.
fn power_iterate(op: &OperatorHandle<'_>, shift: f64, tol: f64, budget: usize) -> Result<PowerOutcome> {
    let mut x = MatrixField::identity(op.grid().clone(), op.dim());
    x = x.scale(1.0 / x.pairing(&x)?.sqrt());
    let mut history: Vec<f64> = Vec::with_capacity(3);
    let mut growth = 0.0;
    for it in 1..=budget {
        let mut y = op.apply(&x)?;
        if shift > 0.0 {
            y = y.add(&x.scale(shift))?;
        }
        let q = x.pairing(&y)?;
        let ny = y.pairing(&y)?.sqrt();
        if ny == 0.0 {
            return Ok(PowerOutcome::Converged(SpectralEstimate {
                estimate: 0.0,
                iterations: it,
            }));
        }
        if !ny.is_finite() {
            return Err(MjlsError::PowerIterationDiverged {
                iterations: it,
                previous: history.last().map_or(f64::NAN, |h| h - shift),
                last: q - shift,
            });
        }
        growth = ny;
        history.push(q);
        if history.len() > 3 {
            history.remove(0);
        }
        if it >= MIN_POWER_ITERATIONS && history.len() == 3 {
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
            if rel(history[2], history[1]) < tol && rel(history[1], history[0]) < tol {
                return Ok(PowerOutcome::Converged(SpectralEstimate {
                    estimate: q - shift,
                    iterations: it,
                }));
            }
        }
        x = y.scale(1.0 / ny);
    }
    let n = history.len();
    Ok(PowerOutcome::Stalled(Stall {
        previous: if n >= 2 { history[n - 2] - shift } else { f64::NAN },
        last: history.last().map_or(f64::NAN, |h| h - shift),
        growth,
    }))
}

/// Length of the weighted half-vectorization of an `n x n` symmetric field.
pub fn svec_len(nodes: usize, n: usize) -> usize {
    nodes * n * (n + 1) / 2
}

/// Weighted half-vectorization: node `l`, entry `(i, j)` with `i <= j`
/// maps to `sqrt(w_l) * X_ii` or `sqrt(w_l) * sqrt(2) * X_ij`, so the
/// Euclidean inner product of coordinates equals the field pairing.
pub fn svec(x: &MatrixField) -> DVector<f64> {
    let n = x.shape().0;
    let mut out = DVector::zeros(svec_len(x.len(), n));
    let mut k = 0;
    for (l, m) in x.values().iter().enumerate() {
        let sw = x.grid().weight(l).sqrt();
        for j in 0..n {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                out[k] = sw * scale * m[(i, j)];
                k += 1;
            }
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn unsvec(grid: &Arc<GridSpace>, n: usize, v: &DVector<f64>) -> Result<MatrixField> {
    if v.len() != svec_len(grid.len(), n) {
        return Err(MjlsError::ShapeMismatch(format!(
            "vector of length {} does not match {} nodes of {n}x{n}",
            v.len(),
            grid.len()
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut k = 0;
    for l in 0..grid.len() {
        let sw = grid.weight(l).sqrt();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                let val = v[k] / (sw * scale);
                m[(i, j)] = val;
                m[(j, i)] = val;
                k += 1;
            }
        }
        values.push(m);
    }
    Ok(MatrixField::from_parts(grid.clone(), values, true))
}

/// Explicit matrix of `op` in the [`svec`] coordinates.
pub fn densify(op: &OperatorHandle<'_>, budget: usize) -> Result<DMatrix<f64>> {
    op.check_square()?;
    let grid = op.grid();
    let n = op.dim();
    let columns = grid.len() * n * n;
    if columns > budget {
        return Err(MjlsError::BudgetExceeded { columns, budget });
    }
    let dim = svec_len(grid.len(), n);
    let cols = try_map_indices(dim, |c| {
        let mut e = DVector::zeros(dim);
        e[c] = 1.0;
        let basis = unsvec(grid, n, &e)?;
        Ok::<_, MjlsError>(svec(&op.apply(&basis)?))
    })?;
    Ok(DMatrix::from_columns(&cols))
}

/// Spectral radius of a dense matrix through its real Schur form.
pub fn dense_spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `X(k+1) = L_A(X(k))` for `steps` steps; returns `steps + 1` fields.
pub fn moment_recursion(system: &MjlsSystem, x0: &MatrixField, steps: usize) -> Result<Vec<MatrixField>> {
    let op = system.l_a();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.clone());
    for k in 0..steps {
        let next = op.apply(&out[k])?;
        out.push(next);
    }
    Ok(out)
}
