//! Coupled Riccati recursions behind the bounded real lemma.
//!
//! One Riccati step maps `Y` to
//! `Psi1(Y) - Psi2(Y) Psi3(Y)^{-1} Psi2(Y)'`, provided the disturbance block
//! `Psi3(Y)` is negative definite at every node. The finite-horizon
//! difference equation runs the step backward from `Y(T+1) = 0`; the
//! infinite-horizon algebraic equation is reached by running it forward from
//! zero until consecutive horizons agree.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MjlsError, Result};
use crate::field::MatrixField;
use crate::linalg;
use crate::operators::{apply_e, factor_sign_block, spectral_radius, MjlsSystem, OperatorHandle};
use crate::par::try_map_indices;

/// Slack allowed on positive semidefiniteness of Riccati iterates.
pub const PSD_SLACK: f64 = 1e-10;

/// Result of a single Riccati step.
#[derive(Debug, Clone)]
pub struct RiccatiStep {
    pub next: MatrixField,
    /// `F(Y) = -Psi3(Y)^{-1} Psi2(Y)'`.
    pub gain: MatrixField,
    /// Minimum over nodes of the smallest eigenvalue of `-Psi3(Y)`.
    pub sign_margin: f64,
    pub sign_argmin: usize,
}

/// One application of the Riccati map to `y`.
pub fn riccati_step(system: &MjlsSystem, y: &MatrixField, gamma: f64, step: Option<usize>) -> Result<RiccatiStep> {
    let e = apply_e(system.kernel(), y)?;
    let p1 = system.psi1_from_e(&e);
    let p2 = system.psi2_from_e(&e);
    let p3 = system.psi3_from_e(&e, gamma);
    let grid = system.grid();
    let per_node = try_map_indices(grid.len(), |i| {
        let (chol, margin) = factor_sign_block(grid, p3.get(i), i, step)?;
        let gain: DMatrix<f64> = chol.solve(&p2.get(i).transpose());
        let next = linalg::symmetrize(&(p1.get(i) + p2.get(i) * &gain));
        Ok::<_, MjlsError>((next, gain, margin))
    })?;
    let (mut sign_margin, mut sign_argmin) = (f64::INFINITY, 0);
    let mut next = Vec::with_capacity(per_node.len());
    let mut gain = Vec::with_capacity(per_node.len());
    for (i, (y, f, m)) in per_node.into_iter().enumerate() {
        if m < sign_margin {
            sign_margin = m;
            sign_argmin = i;
        }
        next.push(y);
        gain.push(f);
    }
    Ok(RiccatiStep {
        next: MatrixField::new_symmetric(grid.clone(), next)?,
        gain: MatrixField::new(grid.clone(), gain)?,
        sign_margin,
        sign_argmin,
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(MjlsError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// Backward solution of the finite-horizon difference equation.
#[derive(Debug, Clone)]
pub struct DreSolution {
    pub horizon: usize,
    pub gamma: f64,
    /// `y[k]` for `k = 0..=horizon + 1`, with `y[horizon + 1] = 0`.
    pub y: Vec<MatrixField>,
    /// `sign_margins[k]` is the margin of `Psi3(Y(k + 1))`.
    pub sign_margins: Vec<f64>,
}

impl DreSolution {
    /// Smallest eigenvalue over all steps and nodes.
    pub fn min_eigenvalue(&self) -> f64 {
        self.y
            .iter()
            .filter_map(|y| y.uniform_psd_margin().ok())
            .map(|c| c.min_eigenvalue_over_nodes)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn solve_dre(system: &MjlsSystem, gamma: f64, horizon: usize) -> Result<DreSolution> {
    check_gamma(gamma)?;
    let n = system.n();
    let mut y = vec![MatrixField::zeros(system.grid().clone(), n, n); horizon + 2];
    let mut sign_margins = vec![0.0; horizon + 1];
    for k in (0..=horizon).rev() {
        let step = riccati_step(system, &y[k + 1], gamma, Some(k))?;
        y[k] = step.next;
        sign_margins[k] = step.sign_margin;
    }
    Ok(DreSolution {
        horizon,
        gamma,
        y,
        sign_margins,
    })
}

/// `K(0) = 0, K(k+1) = Riccati(K(k))`; returns `steps + 1` fields.
pub fn forward_iterate(system: &MjlsSystem, gamma: f64, steps: usize) -> Result<Vec<MatrixField>> {
    check_gamma(gamma)?;
    let n = system.n();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(MatrixField::zeros(system.grid().clone(), n, n));
    for k in 0..steps {
        let step = riccati_step(system, &out[k], gamma, Some(k))?;
        out.push(step.next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreOptions {
    /// Stopping accuracy on node-wise spectral-norm differences.
    pub eps: f64,
    pub max_rounds: usize,
    /// Recompute both horizons from zero every round instead of reusing the
    /// previous iterate. Same sequence, quadratic cost.
    pub literal: bool,
    pub power_tol: f64,
    pub power_max_iter: usize,
}

impl Default for AreOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_rounds: 100_000,
            literal: false,
            power_tol: 1e-10,
            power_max_iter: 200_000,
        }
    }
}

impl AreOptions {
    /// Residual tolerance used by [`verify_brl_infinite`].
    pub fn residual_tol(&self) -> f64 {
        100.0 * self.eps
    }
}

#[derive(Debug, Clone)]
pub struct AreSolution {
    pub k: MatrixField,
    pub gain: MatrixField,
    pub gamma: f64,
    /// Rounds until consecutive horizons agreed.
    pub iterations: usize,
    pub last_increment: f64,
    pub residual_inf: f64,
    pub sign_margin: f64,
    pub sign_argmin: usize,
    pub min_eigenvalue: f64,
    pub closed_loop_radius: f64,
    pub stabilizing: bool,
}

/// Serializable summary of an [`AreSolution`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreSummary {
    pub gamma: f64,
    pub iterations: usize,
    pub last_increment: f64,
    pub residual_inf: f64,
    pub sign_margin: f64,
    pub sign_argmin: usize,
    pub min_eigenvalue: f64,
    pub closed_loop_radius: f64,
    pub stabilizing: bool,
}

impl AreSolution {
    pub fn summary(&self) -> AreSummary {
        AreSummary {
            gamma: self.gamma,
            iterations: self.iterations,
            last_increment: self.last_increment,
            residual_inf: self.residual_inf,
            sign_margin: self.sign_margin,
            sign_argmin: self.sign_argmin,
            min_eigenvalue: self.min_eigenvalue,
            closed_loop_radius: self.closed_loop_radius,
            stabilizing: self.stabilizing,
        }
    }
}

fn iterate_from_zero(system: &MjlsSystem, gamma: f64, steps: usize) -> Result<MatrixField> {
    let n = system.n();
    let mut y = MatrixField::zeros(system.grid().clone(), n, n);
    for k in 0..steps {
        y = riccati_step(system, &y, gamma, Some(k))?.next;
    }
    Ok(y)
}

/// Forward iteration of the Riccati map from zero until the horizon-`T`
/// and horizon-`T+1` iterates differ by less than `eps` at every node, then
/// the a-posteriori checks: residual, sign margin, positivity and
/// closed-loop spectral radius.
pub fn solve_are(system: &MjlsSystem, gamma: f64, opts: &AreOptions) -> Result<AreSolution> {
    check_gamma(gamma)?;
    if !(opts.eps > 0.0) {
        return Err(MjlsError::InvalidArgument(format!("eps must be positive, got {}", opts.eps)));
    }
    let mut converged = None;
    let mut last_increment = f64::INFINITY;
    if opts.literal {
        for round in 1..=opts.max_rounds {
            let y = iterate_from_zero(system, gamma, round)?;
            let x = iterate_from_zero(system, gamma, round + 1)?;
            last_increment = x.distance_inf(&y)?;
            if last_increment < opts.eps {
                converged = Some((x, round));
                break;
            }
        }
    } else {
        let mut y = iterate_from_zero(system, gamma, 1)?;
        for round in 1..=opts.max_rounds {
            let x = riccati_step(system, &y, gamma, Some(round))?.next;
            last_increment = x.distance_inf(&y)?;
            if last_increment < opts.eps {
                converged = Some((x, round));
                break;
            }
            y = x;
        }
    }
    let (k, iterations) = converged.ok_or(MjlsError::NotConverged {
        solver: "Riccati forward iteration",
        iterations: opts.max_rounds,
        last_increment,
    })?;
    let at_k = riccati_step(system, &k, gamma, None)?;
    let residual_inf = k.distance_inf(&at_k.next)?;
    let min_eigenvalue = k.uniform_psd_margin()?.min_eigenvalue_over_nodes;
    let closed = system.closed_loop(&at_k.gain)?;
    let radius = spectral_radius(
        &OperatorHandle::t(system.kernel(), &closed),
        opts.power_tol,
        opts.power_max_iter,
    )?
    .estimate;
    Ok(AreSolution {
        k,
        gain: at_k.gain,
        gamma,
        iterations,
        last_increment,
        residual_inf,
        sign_margin: at_k.sign_margin,
        sign_argmin: at_k.sign_argmin,
        min_eigenvalue,
        closed_loop_radius: radius,
        stabilizing: radius < 1.0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrlVerdict {
    pub verdict: bool,
    pub gamma: f64,
    pub residual_ok: bool,
    pub psd_ok: bool,
    pub sign_ok: bool,
    pub stabilizing: bool,
    pub residual_inf: f64,
    pub residual_tol: f64,
    pub min_eigenvalue: f64,
    /// Achieved `eta_0`: smallest eigenvalue of `-Psi3(K)` over nodes.
    pub sign_margin: f64,
    pub closed_loop_radius: f64,
}

/// Infinite-horizon verdict: a true result certifies internal stability and
/// an attenuation level below `gamma`.
pub fn verify_brl_infinite(system: &MjlsSystem, gamma: f64, solution: &AreSolution, tol_res: f64) -> Result<BrlVerdict> {
    if (solution.gamma - gamma).abs() > 0.0 {
        return Err(MjlsError::InvalidArgument(format!(
            "solution was computed for gamma = {}, not {gamma}",
            solution.gamma
        )));
    }
    if solution.k.len() != system.grid().len() {
        return Err(MjlsError::ShapeMismatch("solution does not live on the system grid".into()));
    }
    let residual_ok = solution.residual_inf < tol_res;
    let psd_ok = solution.min_eigenvalue >= -PSD_SLACK;
    let sign_ok = solution.sign_margin > 0.0;
    let stabilizing = solution.closed_loop_radius < 1.0;
    Ok(BrlVerdict {
        verdict: residual_ok && psd_ok && sign_ok && stabilizing,
        gamma,
        residual_ok,
        psd_ok,
        sign_ok,
        stabilizing,
        residual_inf: solution.residual_inf,
        residual_tol: tol_res,
        min_eigenvalue: solution.min_eigenvalue,
        sign_margin: solution.sign_margin,
        closed_loop_radius: solution.closed_loop_radius,
    })
}

/// Solve and verify in one go; sign failures and non-convergence count as
/// infeasible.
pub fn is_feasible(system: &MjlsSystem, gamma: f64, opts: &AreOptions) -> Result<bool> {
    match solve_are(system, gamma, opts) {
        Ok(sol) => Ok(verify_brl_infinite(system, gamma, &sol, opts.residual_tol())?.verdict),
        Err(MjlsError::SignCondition { .. } | MjlsError::NotConverged { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaInterval {
    /// Largest level found infeasible.
    pub lower: f64,
    /// Smallest level found feasible; an upper estimate of the attenuation.
    pub upper: f64,
    pub evaluations: usize,
}

fn has_disturbance_channel(system: &MjlsSystem) -> bool {
    !(system.b().is_zero() && system.d().is_zero())
}

/// Bisection on `gamma` with infinite-horizon feasibility as the oracle.
pub fn hinf_bisection(system: &MjlsSystem, lo: f64, hi: f64, tol: f64, opts: &AreOptions) -> Result<GammaInterval> {
    if !(lo > 0.0 && hi.is_finite() && lo < hi) {
        return Err(MjlsError::InvalidArgument(format!(
            "need 0 < lo < hi, got lo = {lo}, hi = {hi}"
        )));
    }
    if !(tol > 0.0) {
        return Err(MjlsError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !has_disturbance_channel(system) {
        return Err(MjlsError::NoDisturbanceChannel);
    }
    if !is_feasible(system, hi, opts)? {
        return Err(MjlsError::BisectionPremise(format!("gamma = {hi} is not feasible")));
    }
    if is_feasible(system, lo, opts)? {
        return Err(MjlsError::BisectionPremise(format!("gamma = {lo} is already feasible")));
    }
    let (mut lower, mut upper, mut evaluations) = (lo, hi, 2);
    while upper - lower > tol {
        let mid = 0.5 * (lower + upper);
        evaluations += 1;
        if is_feasible(system, mid, opts)? {
            upper = mid;
        } else {
            lower = mid;
        }
    }
    Ok(GammaInterval {
        lower,
        upper,
        evaluations,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignViolation {
    pub step: Option<usize>,
    pub node: usize,
    pub label: i64,
    pub t: f64,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteBrlReport {
    pub verdict: bool,
    pub gamma: f64,
    pub horizon: usize,
    pub min_sign_margin: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub violation: Option<SignViolation>,
}

/// Finite-horizon verdict from the backward difference equation.
pub fn check_finite_brl(system: &MjlsSystem, gamma: f64, horizon: usize) -> Result<FiniteBrlReport> {
    match solve_dre(system, gamma, horizon) {
        Ok(sol) => {
            let min_margin = sol.sign_margins.iter().copied().fold(f64::INFINITY, f64::min);
            let min_eig = sol.min_eigenvalue();
            Ok(FiniteBrlReport {
                verdict: min_margin > 0.0 && min_eig >= -PSD_SLACK,
                gamma,
                horizon,
                min_sign_margin: Some(min_margin),
                min_eigenvalue: Some(min_eig),
                violation: None,
            })
        }
        Err(MjlsError::SignCondition {
            step,
            node,
            label,
            t,
            max_eigenvalue,
        }) => Ok(FiniteBrlReport {
            verdict: false,
            gamma,
            horizon,
            min_sign_margin: None,
            min_eigenvalue: None,
            violation: Some(SignViolation {
                step,
                node,
                label,
                t,
                max_eigenvalue,
            }),
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn quiet(sys: &MjlsSystem) -> MjlsSystem {
        let g = sys.grid().clone();
        MjlsSystem::new(
            g.clone(),
            sys.kernel().clone(),
            sys.a().clone(),
            MatrixField::zeros(g.clone(), 2, 1),
            MatrixField::zeros(g.clone(), 1, 2),
            MatrixField::zeros(g, 1, 1),
        )
        .unwrap()
    }

    #[test]
    fn no_channels_give_zero_solutions() {
        let sys = quiet(&fixtures::example3(6).unwrap());
        let dre = solve_dre(&sys, 0.7, 4).unwrap();
        assert!(dre.y.iter().all(MatrixField::is_zero));
        let fwd = forward_iterate(&sys, 0.7, 4).unwrap();
        assert!(fwd.iter().all(MatrixField::is_zero));
        let are = solve_are(&sys, 0.3, &AreOptions::default()).unwrap();
        assert!(are.k.is_zero());
        assert_eq!(are.iterations, 1);
        let v = verify_brl_infinite(&sys, 0.3, &are, 1e-3).unwrap();
        assert!(v.verdict);
        assert!(matches!(
            hinf_bisection(&sys, 0.1, 0.5, 1e-3, &AreOptions::default()),
            Err(MjlsError::NoDisturbanceChannel)
        ));
    }

    #[test]
    fn one_step_horizon() {
        let sys = fixtures::example3(4).unwrap();
        let dre = solve_dre(&sys, 0.5, 0).unwrap();
        assert_eq!(dre.y.len(), 2);
        for (i, m) in dre.y[0].values().iter().enumerate() {
            let c = sys.c().get(i);
            assert!((m - c.transpose() * c).amax() < 1e-15);
        }
        assert!((dre.sign_margins[0] - 0.25).abs() < 1e-15);
        let fwd = forward_iterate(&sys, 0.5, 1).unwrap();
        assert!(fwd[1].max_abs_diff(&dre.y[0]).unwrap() == 0.0);
    }

    #[test]
    fn literal_and_incremental_agree() {
        let sys = fixtures::example3(8).unwrap();
        let opts = AreOptions::default();
        let a = solve_are(&sys, 0.5, &opts).unwrap();
        let b = solve_are(&sys, 0.5, &AreOptions { literal: true, ..opts }).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.k.max_abs_diff(&b.k).unwrap(), 0.0);
    }

    #[test]
    fn tiny_gamma_fails_sign_condition() {
        let sys = fixtures::example3(8).unwrap();
        assert!(matches!(
            solve_are(&sys, 0.01, &AreOptions::default()),
            Err(MjlsError::SignCondition { .. })
        ));
        let rep = check_finite_brl(&sys, 0.01, 3).unwrap();
        assert!(!rep.verdict);
        assert!(rep.violation.is_some());
        assert!(matches!(solve_dre(&sys, -1.0, 3), Err(MjlsError::InvalidArgument(_))));
    }

    #[test]
    fn bisection_rejects_bad_brackets() {
        let sys = fixtures::example3(4).unwrap();
        let opts = AreOptions::default();
        assert!(hinf_bisection(&sys, 0.2, 0.2, 1e-3, &opts).is_err());
        assert!(matches!(
            hinf_bisection(&sys, 0.45, 0.5, 1e-3, &opts),
            Err(MjlsError::BisectionPremise(_))
        ));
    }
}
