//! Monte Carlo simulation of the jump system
//! `x(k+1) = A x(k) + B v(k)`, `y(k) = C x(k) + D v(k)`.
//!
//! Chain coordinates are drawn continuously: a mode-block kernel picks the
//! target component from its label matrix and a uniform coordinate on it;
//! any other kernel picks a target node from the quadrature-weighted row and
//! a uniform coordinate inside that node's cell. Coefficients come from the
//! system's analytic model when it has one, otherwise from the nearest node.
//!
//! Trajectory `i` uses the ChaCha8 stream `i` of the master seed, so a batch
//! is a pure function of its configuration regardless of thread count.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MjlsError, Result};
use crate::grid::{GridSpace, ModePoint, TransitionKernel};
use crate::model::Coefficients;
use crate::operators::MjlsSystem;
use crate::par::map_indices;

/// Samples the jump chain of a system.
#[derive(Debug, Clone, Copy)]
pub struct ChainSampler<'a> {
    grid: &'a GridSpace,
    kernel: &'a TransitionKernel,
}

fn draw_index<R: Rng>(weights: impl Iterator<Item = f64> + Clone, rng: &mut R) -> usize {
    let total: f64 = weights.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

fn uniform_in<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

impl<'a> ChainSampler<'a> {
    pub fn new(grid: &'a GridSpace, kernel: &'a TransitionKernel) -> Self {
        Self { grid, kernel }
    }

    pub fn for_system(system: &'a MjlsSystem) -> Self {
        Self::new(system.grid(), system.kernel())
    }

    /// Draw from the initial density.
    pub fn sample_initial<R: Rng>(&self, rng: &mut R) -> ModePoint {
        let nu = self.kernel.initial_density();
        let w = self.grid.weights();
        let i = draw_index(nu.iter().zip(w).map(|(a, b)| a * b), rng);
        let node = self.grid.node(i);
        ModePoint {
            label: node.label,
            t: uniform_in(node.cell.0, node.cell.1, rng),
        }
    }

    pub fn sample_next<R: Rng>(&self, from: ModePoint, rng: &mut R) -> ModePoint {
        if let (Some(p), Some(ci)) = (self.kernel.mode_matrix(), self.grid.component_index(from.label)) {
            let cj = draw_index(p.row(ci).iter().copied(), rng);
            let comp = &self.grid.components()[cj];
            return ModePoint {
                label: comp.label,
                t: uniform_in(comp.lo, comp.hi, rng),
            };
        }
        let l = self.grid.locate(from).unwrap_or(0);
        let s = draw_index(self.kernel.forward_row(l).iter().copied(), rng);
        let node = self.grid.node(s);
        ModePoint {
            label: node.label,
            t: uniform_in(node.cell.0, node.cell.1, rng),
        }
    }

    /// Path of length `horizon + 1`, starting at `start` or at a draw from
    /// the initial density.
    pub fn sample_chain<R: Rng>(&self, start: Option<ModePoint>, horizon: usize, rng: &mut R) -> Vec<ModePoint> {
        let mut path = Vec::with_capacity(horizon + 1);
        path.push(start.unwrap_or_else(|| self.sample_initial(rng)));
        for k in 0..horizon {
            let next = self.sample_next(path[k], rng);
            path.push(next);
        }
        path
    }
}

/// RNG for trajectory `stream` of a batch.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Scalar disturbance signals, broadcast to every disturbance channel, or an
/// explicit per-step series.
#[derive(Debug, Clone, PartialEq)]
pub enum Disturbance {
    Zero,
    /// `v(k) = exp(-rate k)`.
    Exp { rate: f64 },
    /// `v(k) = 1` at `k = at`, zero elsewhere.
    Impulse { at: usize },
    /// Row `k` is `v(k)`; a single column is broadcast. Zero past the end.
    Series(Vec<Vec<f64>>),
}

impl Disturbance {
    /// Parses `zero`, `exp(rate)`, `impulse(k0)` or `file(path)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let arg = |name: &str| {
            spec.strip_prefix(name)
                .and_then(|s| s.strip_prefix('('))
                .and_then(|s| s.strip_suffix(')'))
                .map(str::trim)
        };
        let bad = |msg: String| MjlsError::InvalidArgument(msg);
        if spec == "zero" {
            Ok(Disturbance::Zero)
        } else if let Some(a) = arg("exp") {
            let rate = a.parse().map_err(|_| bad(format!("bad exp rate `{a}`")))?;
            Ok(Disturbance::Exp { rate })
        } else if let Some(a) = arg("impulse") {
            let at = a.parse().map_err(|_| bad(format!("bad impulse time `{a}`")))?;
            Ok(Disturbance::Impulse { at })
        } else if let Some(a) = arg("file") {
            Self::from_file(Path::new(a))
        } else {
            Err(bad(format!(
                "unknown disturbance `{spec}` (expected zero, exp(rate), impulse(k0) or file(path))"
            )))
        }
    }

    /// One row per step, comma- or whitespace-separated values.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MjlsError::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        MjlsError::InvalidArgument(format!("{}:{}: bad number `{s}`", path.display(), ln + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Disturbance::Series(rows))
    }

    pub fn value(&self, k: usize, r: usize) -> Result<DVector<f64>> {
        let scalar = match self {
            Disturbance::Zero => 0.0,
            Disturbance::Exp { rate } => (-rate * k as f64).exp(),
            Disturbance::Impulse { at } => {
                if k == *at {
                    1.0
                } else {
                    0.0
                }
            }
            Disturbance::Series(rows) => match rows.get(k) {
                None => 0.0,
                Some(row) if row.len() == 1 => row[0],
                Some(row) if row.len() == r => return Ok(DVector::from_column_slice(row)),
                Some(row) => {
                    return Err(MjlsError::ShapeMismatch(format!(
                        "disturbance row {k} has {} values, system has {r} channels",
                        row.len()
                    )))
                }
            },
        };
        Ok(DVector::from_element(r, scalar))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    Analytic,
    NearestNode,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub modes: Vec<ModePoint>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub trajectories: Vec<Trajectory>,
    pub horizon: usize,
    pub sampling_period: f64,
    pub coefficient_source: CoefficientSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub x0: DVector<f64>,
    pub horizon: usize,
    pub n_traj: usize,
    pub seed: u64,
    /// Fixed initial mode; drawn from the initial density when `None`.
    pub initial_mode: Option<ModePoint>,
    /// Time between samples, used only for the time axis of outputs.
    pub sampling_period: f64,
}

fn coefficients_at(system: &MjlsSystem, p: ModePoint) -> Coefficients {
    if let Some(c) = system.model().and_then(|m| m.eval(p)) {
        return c;
    }
    let i = system.grid().locate(p).unwrap_or(0);
    Coefficients {
        a: system.a().get(i).clone(),
        b: system.b().get(i).clone(),
        c: system.c().get(i).clone(),
        d: system.d().get(i).clone(),
    }
}

/// Runs `n_traj` independent trajectories over `0..=horizon`.
pub fn simulate_phi(system: &MjlsSystem, disturbance: &Disturbance, cfg: &SimulationConfig) -> Result<TrajectoryBatch> {
    let n = system.n();
    let r = system.r();
    if cfg.x0.len() != n {
        return Err(MjlsError::ShapeMismatch(format!(
            "initial state has {} entries, system has {n} states",
            cfg.x0.len()
        )));
    }
    if let Some(p) = cfg.initial_mode {
        if system.grid().component_index(p.label).is_none() {
            return Err(MjlsError::InvalidArgument(format!("unknown initial mode label {}", p.label)));
        }
    }
    let v: Vec<DVector<f64>> = (0..=cfg.horizon)
        .map(|k| disturbance.value(k, r))
        .collect::<Result<_>>()?;
    let sampler = ChainSampler::for_system(system);
    let trajectories = map_indices(cfg.n_traj, |i| {
        let mut rng = stream_rng(cfg.seed, i as u64);
        let modes = sampler.sample_chain(cfg.initial_mode, cfg.horizon, &mut rng);
        let mut states = Vec::with_capacity(cfg.horizon + 1);
        let mut outputs = Vec::with_capacity(cfg.horizon + 1);
        let mut x = cfg.x0.clone();
        for (k, p) in modes.iter().enumerate() {
            let c = coefficients_at(system, *p);
            outputs.push(&c.c * &x + &c.d * &v[k]);
            let next = &c.a * &x + &c.b * &v[k];
            states.push(std::mem::replace(&mut x, next));
        }
        Trajectory {
            modes,
            states,
            outputs,
            disturbances: v.clone(),
        }
    });
    Ok(TrajectoryBatch {
        trajectories,
        horizon: cfg.horizon,
        sampling_period: cfg.sampling_period,
        coefficient_source: if system.model().is_some() {
            CoefficientSource::Analytic
        } else {
            CoefficientSource::NearestNode
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub k: usize,
    pub time: f64,
    /// Monte Carlo mean of `sum_{j <= k} |v(j)|^2`.
    pub v_energy: f64,
    /// Monte Carlo mean of `sum_{j <= k} |y(j)|^2`.
    pub y_energy: f64,
    /// `sqrt(y_energy / v_energy)`; absent while the disturbance energy is zero.
    pub ratio: Option<f64>,
}

/// Cumulative output-to-disturbance energy ratio at every sample time.
pub fn energy_ratio_curve(batch: &TrajectoryBatch) -> Vec<EnergyPoint> {
    let count = batch.trajectories.len().max(1) as f64;
    let mut y_cum = vec![0.0; batch.horizon + 1];
    let mut v_cum = vec![0.0; batch.horizon + 1];
    for tr in &batch.trajectories {
        let (mut ys, mut vs) = (0.0, 0.0);
        for k in 0..=batch.horizon {
            ys += tr.outputs[k].norm_squared();
            vs += tr.disturbances[k].norm_squared();
            y_cum[k] += ys;
            v_cum[k] += vs;
        }
    }
    (0..=batch.horizon)
        .map(|k| {
            let y_energy = y_cum[k] / count;
            let v_energy = v_cum[k] / count;
            EnergyPoint {
                k,
                time: (k + 1) as f64 * batch.sampling_period,
                v_energy,
                y_energy,
                ratio: (v_energy > 0.0).then(|| (y_energy / v_energy).sqrt()),
            }
        })
        .collect()
}

/// Per-step averages of `x(k) x(k)'` with the spread of `|x(k)|^2`.
#[derive(Debug, Clone)]
pub struct SecondMoments {
    pub count: usize,
    pub mean: Vec<DMatrix<f64>>,
    pub trace_mean: Vec<f64>,
    /// Standard error of `trace_mean` (sample standard deviation / sqrt(count)).
    pub trace_std_err: Vec<f64>,
}

/// Restricts the average to trajectories whose initial mode has `label` and
/// coordinate in `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialBucket {
    pub label: i64,
    pub lo: f64,
    pub hi: f64,
}

/// `None` when no trajectory falls in the bucket.
pub fn empirical_second_moment(batch: &TrajectoryBatch, bucket: Option<InitialBucket>) -> Option<SecondMoments> {
    let selected: Vec<&Trajectory> = batch
        .trajectories
        .iter()
        .filter(|tr| match bucket {
            None => true,
            Some(b) => {
                let p = tr.modes[0];
                p.label == b.label && p.t >= b.lo && p.t < b.hi
            }
        })
        .collect();
    let count = selected.len();
    if count == 0 {
        return None;
    }
    let n = selected[0].states[0].len();
    let mut mean = Vec::with_capacity(batch.horizon + 1);
    let mut trace_mean = Vec::with_capacity(batch.horizon + 1);
    let mut trace_std_err = Vec::with_capacity(batch.horizon + 1);
    for k in 0..=batch.horizon {
        let mut acc = DMatrix::zeros(n, n);
        let mut traces = Vec::with_capacity(count);
        for tr in &selected {
            let x = &tr.states[k];
            acc += x * x.transpose();
            traces.push(x.norm_squared());
        }
        acc /= count as f64;
        let tm = traces.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            traces.iter().map(|t| (t - tm).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        mean.push(acc);
        trace_mean.push(tm);
        trace_std_err.push((var / count as f64).sqrt());
    }
    Some(SecondMoments {
        count,
        mean,
        trace_mean,
        trace_std_err,
    })
}

/// `traj_id,k,time,label,t,x1..xn,y1..ym,v1..vr`.
pub fn trajectories_csv(batch: &TrajectoryBatch) -> String {
    let mut out = String::new();
    let Some(first) = batch.trajectories.first() else {
        return "traj_id,k,time,label,t\n".into();
    };
    let (n, m, r) = (first.states[0].len(), first.outputs[0].len(), first.disturbances[0].len());
    out.push_str("traj_id,k,time,label,t");
    for (prefix, count) in [("x", n), ("y", m), ("v", r)] {
        for i in 1..=count {
            let _ = write!(out, ",{prefix}{i}");
        }
    }
    out.push('\n');
    for (id, tr) in batch.trajectories.iter().enumerate() {
        for k in 0..=batch.horizon {
            let p = tr.modes[k];
            let _ = write!(out, "{id},{k},{},{},{}", k as f64 * batch.sampling_period, p.label, p.t);
            for vec in [&tr.states[k], &tr.outputs[k], &tr.disturbances[k]] {
                for v in vec.iter() {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
    }
    out
}

/// `time,vE,yE,ratio`; an absent ratio is an empty field.
pub fn energy_csv(points: &[EnergyPoint]) -> String {
    let mut out = String::from("time,vE,yE,ratio\n");
    for p in points {
        let ratio = p.ratio.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", p.time, p.v_energy, p.y_energy, ratio);
    }
    out
}

/// `k,i,j,value` with 1-based matrix indices.
pub fn moments_csv(moments: &SecondMoments) -> String {
    let mut out = String::from("k,i,j,value\n");
    for (k, m) in moments.mean.iter().enumerate() {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let _ = writeln!(out, "{k},{},{},{}", i + 1, j + 1, m[(i, j)]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grid::finite_grid;
    use crate::model::{AffineCoefficient, AffineModel, ModeCoefficients};
    use std::sync::Arc;

    fn cfg(x0: DVector<f64>, horizon: usize, n_traj: usize) -> SimulationConfig {
        SimulationConfig {
            x0,
            horizon,
            n_traj,
            seed: 11,
            initial_mode: None,
            sampling_period: 0.01,
        }
    }

    #[test]
    fn absorbing_kernel_keeps_label() {
        let (grid, kernel) = finite_grid(&[1, 2], &DMatrix::identity(2, 2)).unwrap();
        let s = ChainSampler::new(&grid, &kernel);
        let mut rng = stream_rng(3, 0);
        let start = ModePoint { label: 2, t: 0.3 };
        let path = s.sample_chain(Some(start), 50, &mut rng);
        assert_eq!(path[0], start);
        assert!(path.iter().all(|p| p.label == 2));
    }

    #[test]
    fn empirical_transitions_match_mode_matrix() {
        let sys = fixtures::example2_borel(10).unwrap();
        let s = ChainSampler::for_system(&sys);
        let mut rng = stream_rng(5, 0);
        let path = s.sample_chain(None, 100_000, &mut rng);
        let mut counts = [[0usize; 2]; 2];
        for w in path.windows(2) {
            counts[(w[0].label - 1) as usize][(w[1].label - 1) as usize] += 1;
        }
        let p = fixtures::two_mode_matrix(0.15, 0.1);
        for i in 0..2 {
            let total = (counts[i][0] + counts[i][1]) as f64;
            let freq = counts[i][0] as f64 / total;
            let sigma = (p[(i, 0)] * (1.0 - p[(i, 0)]) / total).sqrt();
            assert!((freq - p[(i, 0)]).abs() < 3.0 * sigma, "row {i}: {freq}");
        }
        assert!(path.iter().all(|p| (0.0..=1.0).contains(&p.t)));
    }

    #[test]
    fn zero_input_zero_state() {
        let sys = fixtures::example3(5).unwrap();
        let b = simulate_phi(&sys, &Disturbance::Zero, &cfg(DVector::zeros(2), 20, 4)).unwrap();
        for tr in &b.trajectories {
            assert!(tr.states.iter().all(|x| x.norm() == 0.0));
            assert!(tr.outputs.iter().all(|y| y.norm() == 0.0));
        }
        let e = energy_ratio_curve(&b);
        assert!(e.iter().all(|p| p.ratio.is_none()));
        let m = empirical_second_moment(&b, None).unwrap();
        assert!(m.trace_mean.iter().all(|&t| t == 0.0));
    }

    fn memoryless(d: f64) -> MjlsSystem {
        let (grid, kernel) = finite_grid(&[1], &DMatrix::from_element(1, 1, 1.0)).unwrap();
        let s = |v: f64| AffineCoefficient::constant(DMatrix::from_element(1, 1, v));
        AffineModel::new(vec![ModeCoefficients {
            label: 1,
            a: s(0.0),
            b: s(0.0),
            c: s(0.0),
            d: s(d),
        }])
        .unwrap()
        .build_system(Arc::new(grid), Arc::new(kernel))
        .unwrap()
    }

    #[test]
    fn pass_through_has_unit_ratio() {
        let sys = memoryless(1.0);
        let b = simulate_phi(&sys, &Disturbance::Exp { rate: 2.0 }, &cfg(DVector::zeros(1), 30, 3)).unwrap();
        for p in energy_ratio_curve(&b) {
            assert!((p.ratio.unwrap() - 1.0).abs() < 1e-15);
        }
        for tr in &b.trajectories {
            for k in 0..=30 {
                assert_eq!(tr.outputs[k][0], tr.disturbances[k][0]);
                assert_eq!(tr.states[k][0], 0.0);
            }
        }
        let silent = memoryless(0.0);
        let b = simulate_phi(&silent, &Disturbance::Exp { rate: 2.0 }, &cfg(DVector::zeros(1), 5, 2)).unwrap();
        assert!(energy_ratio_curve(&b).iter().all(|p| p.ratio == Some(0.0)));
    }

    #[test]
    fn deterministic_scalar_moments() {
        let (grid, kernel) = finite_grid(&[1], &DMatrix::from_element(1, 1, 1.0)).unwrap();
        let s = |v: f64| AffineCoefficient::constant(DMatrix::from_element(1, 1, v));
        let sys = AffineModel::new(vec![ModeCoefficients {
            label: 1,
            a: s(0.9),
            b: s(0.0),
            c: s(0.0),
            d: s(0.0),
        }])
        .unwrap()
        .build_system(Arc::new(grid), Arc::new(kernel))
        .unwrap();
        let b = simulate_phi(&sys, &Disturbance::Zero, &cfg(DVector::from_element(1, 2.0), 10, 5)).unwrap();
        let m = empirical_second_moment(&b, None).unwrap();
        for k in 0..=10 {
            let expected = 0.9f64.powi(2 * k as i32) * 4.0;
            assert!((m.trace_mean[k] - expected).abs() < 1e-12);
            assert!(m.trace_std_err[k] < 1e-12);
        }
    }

    #[test]
    fn reproducible_batches() {
        let sys = fixtures::example3(5).unwrap();
        let c = cfg(DVector::from_vec(vec![1.0, -1.0]), 25, 8);
        let a = simulate_phi(&sys, &Disturbance::Exp { rate: 2.0 }, &c).unwrap();
        let b = simulate_phi(&sys, &Disturbance::Exp { rate: 2.0 }, &c).unwrap();
        assert_eq!(trajectories_csv(&a), trajectories_csv(&b));
        let other = simulate_phi(&sys, &Disturbance::Exp { rate: 2.0 }, &SimulationConfig { seed: 12, ..c }).unwrap();
        assert_ne!(trajectories_csv(&a), trajectories_csv(&other));
    }

    #[test]
    fn impulse_without_input_channel() {
        let sys = fixtures::example2_borel(5).unwrap();
        let b = simulate_phi(&sys, &Disturbance::Impulse { at: 0 }, &cfg(DVector::zeros(2), 10, 3)).unwrap();
        for tr in &b.trajectories {
            assert!(tr.states.iter().all(|x| x.norm() == 0.0));
        }
    }

    #[test]
    fn bucket_selection() {
        let sys = fixtures::example2_borel(5).unwrap();
        let b = simulate_phi(&sys, &Disturbance::Zero, &cfg(DVector::from_element(2, 1.0), 3, 50)).unwrap();
        let bucket = InitialBucket { label: 1, lo: 0.0, hi: 0.5 };
        let m = empirical_second_moment(&b, Some(bucket)).unwrap();
        assert!(m.count > 0 && m.count < 50);
        let empty = InitialBucket { label: 9, lo: 0.0, hi: 1.0 };
        assert!(empirical_second_moment(&b, Some(empty)).is_none());
    }

    #[test]
    fn disturbance_parsing() {
        assert_eq!(Disturbance::parse("zero").unwrap(), Disturbance::Zero);
        assert_eq!(Disturbance::parse("exp(2)").unwrap(), Disturbance::Exp { rate: 2.0 });
        assert_eq!(Disturbance::parse("impulse(3)").unwrap(), Disturbance::Impulse { at: 3 });
        assert!(Disturbance::parse("sine(1)").is_err());
        assert!(Disturbance::parse("exp(x)").is_err());
        let v = Disturbance::Exp { rate: 2.0 }.value(1, 2).unwrap();
        assert!((v[1] - (-2f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn csv_headers() {
        let sys = fixtures::example3(3).unwrap();
        let b = simulate_phi(&sys, &Disturbance::Exp { rate: 2.0 }, &cfg(DVector::zeros(2), 2, 1)).unwrap();
        let t = trajectories_csv(&b);
        assert!(t.starts_with("traj_id,k,time,label,t,x1,x2,y1,v1\n"));
        assert_eq!(t.lines().count(), 1 + 3);
        assert!(energy_csv(&energy_ratio_curve(&b)).starts_with("time,vE,yE,ratio\n"));
        let m = empirical_second_moment(&b, None).unwrap();
        assert_eq!(moments_csv(&m).lines().count(), 1 + 3 * 4);
    }
}
