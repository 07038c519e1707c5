//! Random instances shared by the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use mjls::grid::{build_grid, Component};
use mjls::{GridSpace, MatrixField, MjlsSystem, Quadrature, TransitionKernel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One or two components with random intervals, `nodes` nodes in total.
pub fn random_grid(rng: &mut ChaCha8Rng, nodes: usize) -> Arc<GridSpace> {
    let interval = |rng: &mut ChaCha8Rng| {
        let lo = rng.random_range(-1.0..1.0);
        (lo, lo + rng.random_range(0.5..2.0))
    };
    let comps = if nodes >= 2 && rng.random_bool(0.5) {
        let first = rng.random_range(1..nodes);
        let (a, b) = interval(rng);
        let (c, d) = interval(rng);
        vec![Component::new(3, a, b, first), Component::new(-1, c, d, nodes - first)]
    } else {
        let (a, b) = interval(rng);
        vec![Component::new(1, a, b, nodes)]
    };
    Arc::new(build_grid(&comps, Quadrature::Midpoint).unwrap())
}

/// Positive density table, renormalized by the kernel constructor.
pub fn random_kernel(rng: &mut ChaCha8Rng, grid: &GridSpace) -> TransitionKernel {
    let n = grid.len();
    let table: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.05..1.0)).collect();
    let nu: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    TransitionKernel::from_density(grid, |l, s| table[l * n + s], &nu).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn random_field(rng: &mut ChaCha8Rng, grid: &Arc<GridSpace>, rows: usize, cols: usize) -> MatrixField {
    let values = (0..grid.len()).map(|_| random_matrix(rng, rows, cols, 1.0)).collect();
    MatrixField::new(grid.clone(), values).unwrap()
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, grid: &Arc<GridSpace>, n: usize) -> MatrixField {
    let values = (0..grid.len())
        .map(|_| {
            let m = random_matrix(rng, n, n, 1.0);
            &m + m.transpose()
        })
        .collect();
    MatrixField::new_symmetric(grid.clone(), values).unwrap()
}

pub fn random_psd(rng: &mut ChaCha8Rng, grid: &Arc<GridSpace>, n: usize) -> MatrixField {
    let values = (0..grid.len())
        .map(|_| {
            let m = random_matrix(rng, n, n, 1.0);
            &m * m.transpose()
        })
        .collect();
    MatrixField::new_symmetric(grid.clone(), values).unwrap()
}

fn scaled_to_norm(m: DMatrix<f64>, target: f64) -> DMatrix<f64> {
    let norm = m.clone().svd(false, false).singular_values.max();
    if norm == 0.0 {
        m
    } else {
        m * (target / norm)
    }
}

/// Node-wise `|A| <= 0.9`, so `r(T_A) <= 0.81`. `D = 0`.
pub fn random_stable_system(rng: &mut ChaCha8Rng, nodes: usize, n: usize, r: usize, m: usize) -> MjlsSystem {
    let grid = random_grid(rng, nodes);
    let kernel = Arc::new(random_kernel(rng, &grid));
    let field = |rng: &mut ChaCha8Rng, rows, cols, target: f64| {
        let values = (0..grid.len())
            .map(|_| scaled_to_norm(random_matrix(rng, rows, cols, 1.0), target * rng.random_range(0.3..1.0)))
            .collect();
        MatrixField::new(grid.clone(), values).unwrap()
    };
    let a = field(rng, n, n, 0.9);
    let b = field(rng, n, r, 0.5);
    let c = field(rng, m, n, 0.5);
    let d = MatrixField::zeros(grid.clone(), m, r);
    MjlsSystem::new(grid.clone(), kernel, a, b, c, d).unwrap()
}

/// Single-node scalar system `x+ = a x + b v`, `y = c x`.
pub fn scalar_system(a: f64, b: f64, c: f64) -> MjlsSystem {
    let grid = Arc::new(build_grid(&[Component::new(1, 0.0, 1.0, 1)], Quadrature::Midpoint).unwrap());
    let kernel = Arc::new(TransitionKernel::from_density(&grid, |_, _| 1.0, &[1.0]).unwrap());
    let s = |v: f64| MatrixField::new(grid.clone(), vec![DMatrix::from_element(1, 1, v)]).unwrap();
    MjlsSystem::new(grid.clone(), kernel, s(a), s(b), s(c), s(0.0)).unwrap()
}

/// Smallest nonnegative root of `k = a^2 k g^2 / (g^2 - b^2 k) + c^2` on
/// `[0, g^2 / b^2)`: a scan for the first sign change, then bisection.
pub fn scalar_are_root(a: f64, b: f64, c: f64, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    if b == 0.0 {
        return c * c / (1.0 - a * a);
    }
    let pole = g2 / (b * b);
    let f = |k: f64| a * a * k * g2 / (g2 - b * b * k) + c * c - k;
    let steps = 100_000;
    let first_neg = (1..steps)
        .map(|i| pole * i as f64 / steps as f64)
        .find(|&k| f(k) <= 0.0)
        .expect("no root below the pole");
    let (mut lo, mut hi) = (first_neg - pole / steps as f64, first_neg);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Dense oracle for `L_K(V)(l) = sum_s g(l|s) w_s K(s) V(s) K(s)'` via
/// Kronecker products of explicit density matrices.
pub fn kron_apply_l(grid: &GridSpace, kernel: &TransitionKernel, k: &MatrixField, v: &MatrixField) -> Vec<DMatrix<f64>> {
    let n = k.shape().0;
    (0..grid.len())
        .map(|l| {
            let mut acc = DMatrix::<f64>::zeros(n * n, 1);
            for s in 0..grid.len() {
                let ks = k.get(s);
                let op = ks.kronecker(ks);
                let vs = DMatrix::from_column_slice(n * n, 1, v.get(s).as_slice());
                acc += op * vs * (kernel.density(s, l) * grid.weight(s));
            }
            DMatrix::from_column_slice(n, n, acc.as_slice())
        })
        .collect()
}
