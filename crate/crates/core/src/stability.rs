//! Mean-square stability tests.
//!
//! Conditional stability (EMSS-C) is decided by the spectral radius of
//! `T_A`, unconditional stability (EMSS) by that of `L_A`. Lyapunov-type
//! equations are solved by Neumann series in `T_A`, which is the fixed-point
//! iteration `U <- T_A(U) + V` started at `V`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MjlsError, Result};
use crate::field::{MatrixField, OrderingCertificate};
use crate::operators::{spectral_radius, MjlsSystem, OperatorHandle};

/// Radii within this distance of one are inconclusive.
pub const SPECTRAL_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub lyapunov_tol: f64,
    pub lyapunov_max_iter: usize,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            power_tol: 1e-10,
            power_max_iter: 200_000,
            lyapunov_tol: 1e-10,
            lyapunov_max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralVerdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl SpectralVerdict {
    pub fn classify(radius: f64) -> Self {
        if radius < 1.0 - SPECTRAL_MARGIN {
            SpectralVerdict::Stable
        } else if radius > 1.0 + SPECTRAL_MARGIN {
            SpectralVerdict::Unstable
        } else {
            SpectralVerdict::Inconclusive
        }
    }
}

/// Verdicts and diagnostics; criteria that were not run are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub emss_c_verdict: Option<bool>,
    pub emss_verdict: Option<bool>,
    pub emss_c_status: Option<SpectralVerdict>,
    pub emss_status: Option<SpectralVerdict>,
    pub r_sigma_t: Option<f64>,
    pub r_sigma_l: Option<f64>,
    pub power_iterations_t: Option<usize>,
    pub power_iterations_l: Option<usize>,
    #[serde(skip)]
    pub lyapunov_solution: Option<MatrixField>,
    /// Minimum node eigenvalue of `U - T_A(U)` for the Lyapunov solution.
    pub lyapunov_margin: Option<f64>,
    pub lyapunov_residual: Option<f64>,
    pub method_tags: Vec<String>,
    /// False when the conditional verdict holds but the unconditional fails.
    pub consistent: bool,
}

impl StabilityReport {
    fn empty() -> Self {
        Self {
            emss_c_verdict: None,
            emss_verdict: None,
            emss_c_status: None,
            emss_status: None,
            r_sigma_t: None,
            r_sigma_l: None,
            power_iterations_t: None,
            power_iterations_l: None,
            lyapunov_solution: None,
            lyapunov_margin: None,
            lyapunov_residual: None,
            method_tags: Vec::new(),
            consistent: true,
        }
    }

    fn merge(mut self, other: StabilityReport) -> Self {
        self.emss_verdict = self.emss_verdict.or(other.emss_verdict);
        self.emss_status = self.emss_status.or(other.emss_status);
        self.r_sigma_l = self.r_sigma_l.or(other.r_sigma_l);
        self.power_iterations_l = self.power_iterations_l.or(other.power_iterations_l);
        self.method_tags.extend(other.method_tags);
        if self.emss_c_verdict == Some(true) && self.emss_verdict == Some(false) {
            self.consistent = false;
            log::warn!("conditional stability holds but unconditional does not; check the grid resolution");
        }
        self
    }

    /// Both spectral verdicts available and stable.
    pub fn is_stable(&self) -> bool {
        self.emss_c_verdict == Some(true) && self.emss_verdict != Some(false)
    }
}

/// Spectral test of `T_A`.
pub fn check_emss_c(system: &MjlsSystem, opts: &StabilityOptions) -> Result<StabilityReport> {
    let est = spectral_radius(&system.t_a(), opts.power_tol, opts.power_max_iter)?;
    let status = SpectralVerdict::classify(est.estimate);
    let mut report = StabilityReport::empty();
    report.emss_c_verdict = Some(status == SpectralVerdict::Stable);
    report.emss_c_status = Some(status);
    report.r_sigma_t = Some(est.estimate);
    report.power_iterations_t = Some(est.iterations);
    report.method_tags.push("spectral-radius-T".into());
    Ok(report)
}

/// Spectral test of `L_A`.
pub fn check_emss(system: &MjlsSystem, opts: &StabilityOptions) -> Result<StabilityReport> {
    let est = spectral_radius(&system.l_a(), opts.power_tol, opts.power_max_iter)?;
    let status = SpectralVerdict::classify(est.estimate);
    let mut report = StabilityReport::empty();
    report.emss_verdict = Some(status == SpectralVerdict::Stable);
    report.emss_status = Some(status);
    report.r_sigma_l = Some(est.estimate);
    report.power_iterations_l = Some(est.iterations);
    report.method_tags.push("spectral-radius-L".into());
    Ok(report)
}

/// Both spectral tests plus, when conditionally stable, a Lyapunov
/// certificate `U - T_A(U) = I`.
pub fn analyze_stability(system: &MjlsSystem, opts: &StabilityOptions) -> Result<StabilityReport> {
    let mut report = check_emss_c(system, opts)?.merge(check_emss(system, opts)?);
    if report.emss_c_verdict == Some(true) {
        let n = system.n();
        let v = MatrixField::identity(system.grid().clone(), n);
        let sol = neumann(system, &v, opts.lyapunov_tol, opts.lyapunov_max_iter)?;
        let cert = max_lyapunov_xi(system, &sol.solution)?;
        report.lyapunov_margin = Some(cert.min_eigenvalue_over_nodes);
        report.lyapunov_residual = Some(sol.residual_inf);
        report.lyapunov_solution = Some(sol.solution);
        report.method_tags.push("lyapunov-neumann".into());
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub solution: MatrixField,
    pub iterations: usize,
    /// `||U - T_A(U) - V||_inf` of the returned field.
    pub residual_inf: f64,
}

fn neumann(system: &MjlsSystem, v: &MatrixField, tol: f64, max_iter: usize) -> Result<LyapunovSolution> {
    let op = system.t_a();
    let mut term = v.clone();
    let mut sum = v.clone();
    let mut iterations = 0;
    loop {
        if term.norm_inf() < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(MjlsError::NotConverged {
                solver: "Neumann series",
                iterations,
                last_increment: term.norm_inf(),
            });
        }
        term = op.apply(&term)?;
        sum = sum.add(&term)?;
        iterations += 1;
    }
    let residual = sum.sub(&op.apply(&sum)?)?.sub(v)?.norm_inf();
    if residual >= 10.0 * tol {
        return Err(MjlsError::NotConverged {
            solver: "Neumann series",
            iterations,
            last_increment: residual,
        });
    }
    Ok(LyapunovSolution {
        solution: sum,
        iterations,
        residual_inf: residual,
    })
}

fn require_conditional_stability(system: &MjlsSystem) -> Result<()> {
    let opts = StabilityOptions::default();
    let est = spectral_radius(&system.t_a(), opts.power_tol, opts.power_max_iter)?;
    if SpectralVerdict::classify(est.estimate) != SpectralVerdict::Stable {
        return Err(MjlsError::Unstable { radius: est.estimate });
    }
    Ok(())
}

/// Solves `U - T_A(U) = V` for a uniformly positive definite `V`.
pub fn solve_lyapunov_t(system: &MjlsSystem, v: &MatrixField, tol: f64, max_iter: usize) -> Result<LyapunovSolution> {
    let margin = v.uniform_psd_margin()?;
    if margin.min_eigenvalue_over_nodes <= 0.0 {
        return Err(MjlsError::InvalidArgument(format!(
            "right-hand side is not uniformly positive definite (margin {:e} at node {})",
            margin.min_eigenvalue_over_nodes, margin.argmin_node
        )));
    }
    require_conditional_stability(system)?;
    neumann(system, v, tol, max_iter)
}

/// Solves `U - T_A(U) = C'C`; the solution is only positive semidefinite.
pub fn solve_output_lyapunov(system: &MjlsSystem, tol: f64, max_iter: usize) -> Result<LyapunovSolution> {
    require_conditional_stability(system)?;
    let v = system.c().map(true, |_, c| c.transpose() * c);
    neumann(system, &v, tol, max_iter)
}

/// Certificate for `U - T_A(U) - xi I >= 0` at every node.
pub fn check_lyapunov_inequality(system: &MjlsSystem, u: &MatrixField, xi: f64) -> Result<OrderingCertificate> {
    let n = system.n();
    let tu = system.t_a().apply(u)?;
    let shift = DMatrix::identity(n, n) * xi;
    let diff = u.sub(&tu)?.map(true, |_, m| m - &shift);
    diff.psd_margin_above(0.0)
}

/// The largest `xi` with `U - T_A(U) >= xi I`, returned as the certificate margin.
pub fn max_lyapunov_xi(system: &MjlsSystem, u: &MatrixField) -> Result<OrderingCertificate> {
    check_lyapunov_inequality(system, u, 0.0)
}

/// `||T_A^k(I)||_inf` for `k = 0..=k_max`.
pub fn decay_profile_t(system: &MjlsSystem, k_max: usize) -> Result<Vec<f64>> {
    let op: OperatorHandle<'_> = system.t_a();
    let mut x = MatrixField::identity(system.grid().clone(), system.n());
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(x.norm_inf());
    for _ in 0..k_max {
        x = op.apply(&x)?;
        out.push(x.norm_inf());
    }
    Ok(out)
}

/// Envelope `beta * alpha^k` fitted to a decay profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub beta: f64,
}

/// Least-squares slope of `ln p_k` against `k` gives `alpha`; `beta` is the
/// smallest constant with `p_k <= beta alpha^k` on the profile. A profile
/// that reaches zero is nilpotent and fits `alpha = 0`.
pub fn fit_decay(profile: &[f64]) -> Option<DecayFit> {
    if profile.is_empty() {
        return None;
    }
    if profile.iter().skip(1).any(|&p| p == 0.0) {
        return Some(DecayFit {
            alpha: 0.0,
            beta: profile[0].max(1.0),
        });
    }
    if profile.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64, p.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let alpha = (sxy / sxx).exp();
    let beta = profile
        .iter()
        .enumerate()
        .map(|(k, p)| p / alpha.powi(k as i32))
        .fold(0.0, f64::max);
    Some(DecayFit { alpha, beta })
}
