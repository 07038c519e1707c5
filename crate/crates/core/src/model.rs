//! Analytic coefficient parameterization: each mode carries matrices that
//! are affine in the coordinate, `M(i, t) = M_i0 + t (M_i1 - M_i0)`.
//!
//! The grid analysis samples this model at nodes; the simulator evaluates it
//! at continuously drawn coordinates.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{MjlsError, Result};
use crate::field::MatrixField;
use crate::grid::{GridSpace, ModePoint, TransitionKernel};
use crate::operators::MjlsSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineCoefficient {
    pub at0: DMatrix<f64>,
    pub at1: DMatrix<f64>,
}

impl AffineCoefficient {
    pub fn constant(m: DMatrix<f64>) -> Self {
        Self {
            at0: m.clone(),
            at1: m,
        }
    }

    pub fn affine(at0: DMatrix<f64>, at1: DMatrix<f64>) -> Result<Self> {
        if at0.shape() != at1.shape() {
            return Err(MjlsError::ShapeMismatch(format!(
                "affine endpoints have shapes {:?} and {:?}",
                at0.shape(),
                at1.shape()
            )));
        }
        Ok(Self { at0, at1 })
    }

    pub fn is_constant(&self) -> bool {
        self.at0 == self.at1
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        if self.is_constant() {
            return self.at0.clone();
        }
        &self.at0 + (&self.at1 - &self.at0) * t
    }

    pub fn shape(&self) -> (usize, usize) {
        self.at0.shape()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    pub label: i64,
    pub a: AffineCoefficient,
    pub b: AffineCoefficient,
    pub c: AffineCoefficient,
    pub d: AffineCoefficient,
}

/// Coefficients `(A, B, C, D)` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineModel {
    modes: Vec<ModeCoefficients>,
    n: usize,
    r: usize,
    m: usize,
}

impl AffineModel {
    pub fn new(modes: Vec<ModeCoefficients>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| MjlsError::InvalidSystem("no modes in coefficient model".into()))?;
        let (n, n2) = first.a.shape();
        let r = first.b.shape().1;
        let m = first.c.shape().0;
        if n != n2 {
            return Err(MjlsError::InvalidSystem(format!("A of mode {} is not square", first.label)));
        }
        for mode in &modes {
            let checks = [
                ("A", mode.a.shape(), (n, n)),
                ("B", mode.b.shape(), (n, r)),
                ("C", mode.c.shape(), (m, n)),
                ("D", mode.d.shape(), (m, r)),
            ];
            for (name, got, want) in checks {
                if got != want {
                    return Err(MjlsError::ShapeMismatch(format!(
                        "{name} of mode {} is {:?}, expected {:?}",
                        mode.label, got, want
                    )));
                }
            }
        }
        Ok(Self { modes, n, r, m })
    }

    pub fn modes(&self) -> &[ModeCoefficients] {
        &self.modes
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.r, self.m)
    }

    pub fn mode(&self, label: i64) -> Option<&ModeCoefficients> {
        self.modes.iter().find(|m| m.label == label)
    }

    pub fn eval(&self, p: ModePoint) -> Option<Coefficients> {
        let mode = self.mode(p.label)?;
        Some(Coefficients {
            a: mode.a.eval(p.t),
            b: mode.b.eval(p.t),
            c: mode.c.eval(p.t),
            d: mode.d.eval(p.t),
        })
    }

    /// Samples the model on `grid` and bundles it with `kernel`.
    pub fn build_system(self, grid: Arc<GridSpace>, kernel: Arc<TransitionKernel>) -> Result<MjlsSystem> {
        let mut coeffs = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let p = grid.mode_point(i);
            coeffs.push(self.eval(p).ok_or_else(|| {
                MjlsError::InvalidSystem(format!("no coefficients for mode label {}", p.label))
            })?);
        }
        let take = |f: fn(&Coefficients) -> DMatrix<f64>| coeffs.iter().map(f).collect::<Vec<_>>();
        let a = MatrixField::new(grid.clone(), take(|c| c.a.clone()))?;
        let b = MatrixField::new(grid.clone(), take(|c| c.b.clone()))?;
        let c = MatrixField::new(grid.clone(), take(|c| c.c.clone()))?;
        let d = MatrixField::new(grid.clone(), take(|c| c.d.clone()))?;
        MjlsSystem::new(grid, kernel, a, b, c, d)?.with_model(Arc::new(self))
    }
}
