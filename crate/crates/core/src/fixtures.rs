//! Reference systems: a two-mode solar receiver model with insolation
//! coordinate, a two-mode second-order system (finite chain and its
//! interval-valued counterpart), and the same system with a disturbance
//! channel for attenuation analysis.
//!
//! Every continuous fixture uses components `{1} x [0, 1]` and `{2} x [0, 1]`
//! with Lebesgue weights, a mode-block kernel (target coordinate uniform),
//! and a uniform initial density.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::field::MatrixField;
use crate::grid::{build_grid, build_mode_block_kernel, finite_grid, Component, GridSpace, Quadrature};
use crate::model::{AffineCoefficient, AffineModel, ModeCoefficients};
use crate::operators::MjlsSystem;

pub const SOLAR_P11: f64 = 0.9767;
pub const SOLAR_P22: f64 = 0.7611;
pub const TWO_MODE_P11: f64 = 0.15;
pub const TWO_MODE_P22: f64 = 0.1;

/// Attenuation level used with [`example3`].
pub const EXAMPLE3_GAMMA: f64 = 0.5;
/// Riccati accuracy used with [`example3`].
pub const EXAMPLE3_EPS: f64 = 1e-5;

pub fn two_mode_matrix(p11: f64, p22: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[p11, 1.0 - p11, 1.0 - p22, p22])
}

pub fn unit_components(nodes_per_component: usize) -> Vec<Component> {
    vec![
        Component::new(1, 0.0, 1.0, nodes_per_component),
        Component::new(2, 0.0, 1.0, nodes_per_component),
    ]
}

fn continuous(model: AffineModel, nodes: usize, p: &DMatrix<f64>) -> Result<MjlsSystem> {
    let grid = Arc::new(build_grid(&unit_components(nodes), Quadrature::Midpoint)?);
    let kernel = Arc::new(build_mode_block_kernel(&grid, p)?);
    model.build_system(grid, kernel)
}

fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

fn zero_io(label: i64, a: AffineCoefficient, n: usize) -> ModeCoefficients {
    ModeCoefficients {
        label,
        a,
        b: AffineCoefficient::constant(DMatrix::zeros(n, 1)),
        c: AffineCoefficient::constant(DMatrix::zeros(1, n)),
        d: AffineCoefficient::constant(DMatrix::zeros(1, 1)),
    }
}

/// Scalar solar receiver: `a(i, t) = a_i1 + t (a_i2 - a_i1)` with
/// `a_11 = 0.9, a_12 = 0.7, a_21 = 0.95, a_22 = 1.15`.
pub fn example1_model() -> AffineModel {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    AffineModel::new(vec![
        zero_io(1, AffineCoefficient { at0: s(0.9), at1: s(0.7) }, 1),
        zero_io(2, AffineCoefficient { at0: s(0.95), at1: s(1.15) }, 1),
    ])
    .expect("static fixture")
}

pub fn example1(nodes_per_component: usize) -> Result<MjlsSystem> {
    continuous(
        example1_model(),
        nodes_per_component,
        &two_mode_matrix(SOLAR_P11, SOLAR_P22),
    )
}

pub fn example2_a11() -> DMatrix<f64> {
    m(2, 2, &[2.0, -1.0, 0.0, 0.0])
}

pub fn example2_a21() -> DMatrix<f64> {
    m(2, 2, &[0.0, 1.0, 0.0, 2.0])
}

/// Finite two-mode chain under the counting measure.
pub fn example2_finite() -> Result<MjlsSystem> {
    let (grid, kernel) = finite_grid(&[1, 2], &two_mode_matrix(TWO_MODE_P11, TWO_MODE_P22))?;
    let model = AffineModel::new(vec![
        zero_io(1, AffineCoefficient::constant(example2_a11()), 2),
        zero_io(2, AffineCoefficient::constant(example2_a21()), 2),
    ])?;
    model.build_system(Arc::new(grid), Arc::new(kernel))
}

fn example2_a_affine() -> (AffineCoefficient, AffineCoefficient) {
    (
        AffineCoefficient {
            at0: example2_a11(),
            at1: example2_a11() * 0.5,
        },
        AffineCoefficient {
            at0: example2_a21(),
            at1: example2_a21() * 0.5,
        },
    )
}

/// `A(i, t) = A_i1 + t (A_i2 - A_i1)` with `A_i2 = A_i1 / 2`.
pub fn example2_borel_model() -> AffineModel {
    let (a1, a2) = example2_a_affine();
    AffineModel::new(vec![zero_io(1, a1, 2), zero_io(2, a2, 2)]).expect("static fixture")
}

pub fn example2_borel(nodes_per_component: usize) -> Result<MjlsSystem> {
    continuous(
        example2_borel_model(),
        nodes_per_component,
        &two_mode_matrix(TWO_MODE_P11, TWO_MODE_P22),
    )
}

/// The printed Lyapunov certificate `Y_1, Y_2` (constant in `t`).
pub fn example2_certificate_values() -> (DMatrix<f64>, DMatrix<f64>) {
    (
        m(2, 2, &[1.3438, -0.6177, -0.6177, 0.4501]) * 1e3,
        m(2, 2, &[0.1104, -0.0044, -0.0044, 1.3873]) * 1e3,
    )
}

/// Certificate field on a grid whose components are labeled 1 and 2.
pub fn example2_certificate(grid: &Arc<GridSpace>) -> Result<MatrixField> {
    let (y1, y2) = example2_certificate_values();
    let values = grid
        .nodes()
        .iter()
        .map(|n| if n.label == 1 { y1.clone() } else { y2.clone() })
        .collect();
    MatrixField::new_symmetric(grid.clone(), values)
}

/// Example-2 dynamics with `B(i, t) = t B_i`, `C(i, t) = t C_i`, `D = 0`.
pub fn example3_model() -> AffineModel {
    let (a1, a2) = example2_a_affine();
    let ramp = |v: DMatrix<f64>| AffineCoefficient {
        at0: DMatrix::zeros(v.nrows(), v.ncols()),
        at1: v,
    };
    AffineModel::new(vec![
        ModeCoefficients {
            label: 1,
            a: a1,
            b: ramp(m(2, 1, &[0.4, -0.2])),
            c: ramp(m(1, 2, &[-0.12, -0.3])),
            d: AffineCoefficient::constant(DMatrix::zeros(1, 1)),
        },
        ModeCoefficients {
            label: 2,
            a: a2,
            b: ramp(m(2, 1, &[-1.1, 0.3])),
            c: ramp(m(1, 2, &[0.4, 0.2])),
            d: AffineCoefficient::constant(DMatrix::zeros(1, 1)),
        },
    ])
    .expect("static fixture")
}

pub fn example3(nodes_per_component: usize) -> Result<MjlsSystem> {
    continuous(
        example3_model(),
        nodes_per_component,
        &two_mode_matrix(TWO_MODE_P11, TWO_MODE_P22),
    )
}
