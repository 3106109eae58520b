//! Strip simulator for `V = g(x/eps, t/eps) |Du+|` with a graph front.
//!
//! The wet region is `{0 < x < h(y)}` in a strip periodic in `y`. Each step
//! maps it to the unit rectangle by `s = x/h(y)`, solves the transformed
//! Laplace equation with `u = psi(t)` at `x = 0` and `u = 0` on the front,
//! and moves the front along its normal with an explicit Euler step.

mod band;
pub mod hausdorff;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PlanarWave;
use crate::homog1d::{FlatnessTrace, Side};
use crate::medium::{Medium, MediumBounds, MediumError, MediumRef};

pub use band::{BandLu, BandMatrix};
pub use hausdorff::{hausdorff, Periodic};

#[derive(Debug, Error)]
pub enum Hs2dError {
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("front left the strip at t = {t}: h = {h} at node {node}, limit {limit}")]
    LeftStrip { t: f64, node: usize, h: f64, limit: f64 },
    #[error("front is no longer a resolved graph at t = {t}: slope {slope}")]
    Overhang { t: f64, slope: f64 },
    #[error("pressure solve failed at t = {0}")]
    Singular(f64),
    #[error("non-finite front at t = {0}")]
    NonFinite(f64),
    #[error("grid too coarse for eps = {eps}: spacing {spacing} exceeds eps/4")]
    Resolution { eps: f64, spacing: f64 },
    #[error("Hausdorff distance of an empty set")]
    EmptySet,
}

fn config_err(msg: impl Into<String>) -> Hs2dError {
    Hs2dError::Config(msg.into())
}

fn default_lx() -> f64 {
    4.0
}
fn default_ly() -> f64 {
    1.0
}
fn default_n() -> usize {
    64
}
fn default_mode() -> u32 {
    1
}
fn default_cfl() -> f64 {
    0.4
}

/// Simulation parameters. The initial front is
/// `h0 + h0_amplitude cos(2 pi h0_mode y / ly)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Strip depth.
    #[serde(default = "default_lx")]
    pub lx: f64,
    /// Tangential period.
    #[serde(default = "default_ly")]
    pub ly: f64,
    #[serde(default = "default_n")]
    pub nx: usize,
    #[serde(default = "default_n")]
    pub ny: usize,
    pub medium: MediumRef,
    #[serde(default)]
    pub eps: Option<f64>,
    pub psi0: f64,
    /// Linear growth of the boundary pressure, `psi(t) = psi0 + psi_rate t`.
    #[serde(default)]
    pub psi_rate: f64,
    pub h0: f64,
    #[serde(default)]
    pub h0_amplitude: f64,
    #[serde(default = "default_mode")]
    pub h0_mode: u32,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Upper bound on the step; the CFL bound still applies.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Snapshot spacing; defaults to `T/50`.
    #[serde(default)]
    pub save_interval: Option<f64>,
}

impl SimConfig {
    /// A config with defaults for everything but the data.
    pub fn new(medium: Medium, psi0: f64, h0: f64, t_end: f64) -> SimConfig {
        SimConfig {
            lx: default_lx(),
            ly: default_ly(),
            nx: default_n(),
            ny: default_n(),
            medium: MediumRef::Spec(crate::medium::MediumSpec::Expr {
                dim: medium.dim(),
                expr: medium.source().to_string(),
            }),
            eps: None,
            psi0,
            psi_rate: 0.0,
            h0,
            h0_amplitude: 0.0,
            h0_mode: 1,
            cfl: default_cfl(),
            dt: None,
            t_end,
            max_steps: None,
            save_interval: None,
        }
    }

    pub fn validate(&self) -> Result<(), Hs2dError> {
        if self.nx < 8 || self.ny < 8 {
            return Err(config_err(format!("nx, ny must be >= 8, got {}, {}", self.nx, self.ny)));
        }
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(config_err("lx and ly must be positive"));
        }
        if !(self.psi0 > 0.0) || !self.psi0.is_finite() {
            return Err(config_err(format!("psi0 must be positive, got {}", self.psi0)));
        }
        if !(self.psi_rate >= 0.0) {
            return Err(config_err("psi_rate must be nonnegative"));
        }
        if let Some(eps) = self.eps {
            if !(eps > 0.0) {
                return Err(config_err(format!("eps must be positive, got {eps}")));
            }
        }
        let lo = self.h0 - self.h0_amplitude.abs();
        let hi = self.h0 + self.h0_amplitude.abs();
        if !(lo > 0.0 && hi < self.lx) {
            return Err(config_err(format!(
                "initial front must lie in (0, lx), got [{lo}, {hi}]"
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(config_err("cfl must lie in (0, 1]"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(config_err("T must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(config_err("dt must be positive"));
            }
        }
        if let Some(s) = self.save_interval {
            if !(s > 0.0) {
                return Err(config_err("save_interval must be positive"));
            }
        }
        Ok(())
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn psi(&self, t: f64) -> f64 {
        self.psi0 + self.psi_rate * t
    }

    pub fn initial_front(&self) -> Vec<f64> {
        let k = 2.0 * std::f64::consts::PI * self.h0_mode as f64 / self.ly;
        (0..self.ny)
            .map(|j| self.h0 + self.h0_amplitude * (k * j as f64 * self.dy()).cos())
            .collect()
    }
}

/// Front heights `h_j` at `y_j = j ly / ny`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontGraph {
    pub t: f64,
    pub h: Vec<f64>,
}

impl FrontGraph {
    pub fn mean(&self) -> f64 {
        self.h.iter().sum::<f64>() / self.h.len() as f64
    }
}

/// Pressure on the mapped grid, `u[i][j]` for `i = 0..=nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pressure {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl Pressure {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ny + j]
    }

    /// Smallest and largest interior value.
    pub fn interior_range(&self) -> (f64, f64) {
        let inner = &self.values[self.ny..self.nx * self.ny];
        inner
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
    }
}

/// Position of column `j` in the folded ordering `0, ny-1, 1, ny-2, ...`,
/// which keeps periodic neighbors at most two slots apart.
fn fold_order(ny: usize) -> Vec<usize> {
    let mut pos = vec![0; ny];
    for k in 0..ny {
        let j = if k % 2 == 0 { k / 2 } else { ny - 1 - k / 2 };
        pos[j] = k;
    }
    pos
}

fn slopes(h: &[f64], dy: f64) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for j in 0..n {
        let (l, r) = (h[(j + n - 1) % n], h[(j + 1) % n]);
        d1[j] = (r - l) / (2.0 * dy);
        d2[j] = (r - 2.0 * h[j] + l) / (dy * dy);
    }
    (d1, d2)
}

/// Second-order finite differences of the mapped Laplace equation
/// `(1/h^2 + a^2) U_ss + 2 a U_sy + U_yy + s (2 h'^2/h^2 - h''/h) U_s = 0`
/// with `a = -s h'/h`, `U(0) = psi`, `U(1) = 0`.
pub fn solve_pressure(h: &[f64], dy: f64, nx: usize, psi: f64) -> Option<Pressure> {
    let ny = h.len();
    let ds = 1.0 / nx as f64;
    let (d1, d2) = slopes(h, dy);
    let pos = fold_order(ny);
    let n = (nx - 1) * ny;
    let band = (ny + 2).min(n - 1);
    let idx = |i: usize, j: usize| (i - 1) * ny + pos[j];
    let mut a = BandMatrix::zeros(n, band, band);
    let mut rhs = vec![0.0; n];
    for i in 1..nx {
        let s = i as f64 * ds;
        for j in 0..ny {
            let (hj, hp, hpp) = (h[j], d1[j], d2[j]);
            let av = -s * hp / hj;
            let css = 1.0 / (hj * hj) + av * av;
            let csy = 2.0 * av;
            let cs = s * (2.0 * hp * hp / (hj * hj) - hpp / hj);
            let jp = (j + 1) % ny;
            let jm = (j + ny - 1) % ny;
            let row = idx(i, j);
            let put = |ii: usize, jj: usize, v: f64, a: &mut BandMatrix, rhs: &mut [f64]| {
                if ii == 0 {
                    rhs[row] -= v * psi;
                } else if ii < nx {
                    a.add(row, idx(ii, jj), v);
                }
            };
            let xx = css / (ds * ds);
            let yy = 1.0 / (dy * dy);
            let first = cs / (2.0 * ds);
            let mixed = csy / (4.0 * ds * dy);
            put(i, j, -2.0 * xx - 2.0 * yy, &mut a, &mut rhs);
            put(i + 1, j, xx + first, &mut a, &mut rhs);
            put(i - 1, j, xx - first, &mut a, &mut rhs);
            put(i, jp, yy, &mut a, &mut rhs);
            put(i, jm, yy, &mut a, &mut rhs);
            if mixed != 0.0 {
                put(i + 1, jp, mixed, &mut a, &mut rhs);
                put(i + 1, jm, -mixed, &mut a, &mut rhs);
                put(i - 1, jp, -mixed, &mut a, &mut rhs);
                put(i - 1, jm, mixed, &mut a, &mut rhs);
            }
        }
    }
    let lu = a.factor()?;
    lu.solve(&mut rhs);
    let mut values = vec![0.0; (nx + 1) * ny];
    values[..ny].fill(psi);
    for i in 1..nx {
        for j in 0..ny {
            values[i * ny + j] = rhs[idx(i, j)];
        }
    }
    Some(Pressure { nx, ny, values })
}

/// `U_s` at the front by the one-sided second-order formula.
fn front_derivative(p: &Pressure, j: usize) -> f64 {
    let nx = p.nx;
    let ds = 1.0 / nx as f64;
    (3.0 * p.at(nx, j) - 4.0 * p.at(nx - 1, j) + p.at(nx - 2, j)) / (2.0 * ds)
}

/// Evolving simulation state.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub h: Vec<f64>,
    pub steps: usize,
}

/// Outcome of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub pressure_min: f64,
    pub pressure_max: f64,
    pub max_speed: f64,
}

/// A prepared simulation: resolved medium, bounds and config.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: SimConfig,
    pub medium: Medium,
    pub bounds: MediumBounds,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Simulator, Hs2dError> {
        config.validate()?;
        let medium = config.medium.build()?;
        if medium.dim() > 2 {
            return Err(config_err(format!(
                "medium has dimension {}, the strip is 2D",
                medium.dim()
            )));
        }
        let resolution = if medium.dim() == 1 { 64 } else { 24 };
        let bounds = medium.estimate_bounds(resolution)?;
        Ok(Simulator { config, medium, bounds })
    }

    pub fn initial_state(&self) -> SimState {
        SimState {
            t: 0.0,
            h: self.config.initial_front(),
            steps: 0,
        }
    }

    fn speed_factor(&self, x: f64, y: f64, t: f64) -> f64 {
        match self.config.eps {
            Some(e) => self.medium.eval(&[x / e, y / e], t / e),
            None => self.medium.eval(&[x, y], t),
        }
    }

    /// Front velocities `h_t` and `|Du+|` from a fresh pressure solve.
    fn velocities(&self, state: &SimState) -> Result<(Vec<f64>, Vec<f64>, Pressure), Hs2dError> {
        let c = &self.config;
        let dy = c.dy();
        let p = solve_pressure(&state.h, dy, c.nx, c.psi(state.t)).ok_or(Hs2dError::Singular(state.t))?;
        let (d1, _) = slopes(&state.h, dy);
        let mut ht = Vec::with_capacity(c.ny);
        let mut grad = Vec::with_capacity(c.ny);
        for j in 0..c.ny {
            let us = front_derivative(&p, j);
            let g = self.speed_factor(state.h[j], j as f64 * dy, state.t);
            let norm = (1.0 + d1[j] * d1[j]).sqrt();
            let du = (-us).max(0.0) / state.h[j] * norm;
            grad.push(du);
            ht.push(g * du * norm);
        }
        Ok((ht, grad, p))
    }

    /// Largest stable step: CFL against the mapped grid, plus `eps/20`
    /// resolution of the oscillations when `eps` is set.
    fn step_size(&self, state: &SimState, ht: &[f64], grad: &[f64]) -> f64 {
        let c = &self.config;
        let hmin = state.h.iter().copied().fold(f64::INFINITY, f64::min);
        let spacing = (hmin / c.nx as f64).min(c.dy());
        let du = grad.iter().copied().fold(0.0, f64::max).max(1e-300);
        let mut dt = c.cfl * spacing / (self.bounds.big_m * du);
        if let Some(e) = c.eps {
            let v = ht.iter().copied().fold(0.0, f64::max).max(1.0);
            dt = dt.min(e / (20.0 * v));
        }
        if let Some(cap) = c.dt {
            dt = dt.min(cap);
        }
        dt
    }

    /// Advances by at most `dt_cap`.
    pub fn step(&self, state: &mut SimState, dt_cap: f64) -> Result<StepInfo, Hs2dError> {
        let c = &self.config;
        let (ht, grad, p) = self.velocities(state)?;
        let dt = self.step_size(state, &ht, &grad).min(dt_cap);
        let (pressure_min, pressure_max) = p.interior_range();
        for (h, v) in state.h.iter_mut().zip(&ht) {
            *h += dt * v;
        }
        state.t += dt;
        state.steps += 1;
        let limit = c.lx - 2.0 * c.lx / c.nx as f64;
        for (node, &h) in state.h.iter().enumerate() {
            if !h.is_finite() {
                return Err(Hs2dError::NonFinite(state.t));
            }
            if h >= limit {
                return Err(Hs2dError::LeftStrip {
                    t: state.t,
                    node,
                    h,
                    limit,
                });
            }
        }
        let (d1, _) = slopes(&state.h, c.dy());
        let slope = d1.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        if slope > 10.0 {
            return Err(Hs2dError::Overhang { t: state.t, slope });
        }
        Ok(StepInfo {
            dt,
            pressure_min,
            pressure_max,
            max_speed: ht.iter().copied().fold(0.0, f64::max),
        })
    }

    pub fn run(&self) -> Result<SimResult, Hs2dError> {
        let c = &self.config;
        let interval = c.save_interval.unwrap_or(c.t_end / 50.0);
        let mut state = self.initial_state();
        let mut history = vec![FrontGraph {
            t: 0.0,
            h: state.h.clone(),
        }];
        let mut next_save = 1usize;
        let mut pressure_min = f64::INFINITY;
        let mut pressure_max = f64::NEG_INFINITY;
        let t_tol = 1e-12 * c.t_end;
        let max_steps = c.max_steps.unwrap_or(usize::MAX);
        while state.t < c.t_end - t_tol && state.steps < max_steps {
            let target = (next_save as f64 * interval).min(c.t_end);
            let cap = target - state.t;
            let info = self.step(&mut state, cap)?;
            pressure_min = pressure_min.min(info.pressure_min);
            pressure_max = pressure_max.max(info.pressure_max);
            if (state.t - target).abs() <= t_tol {
                state.t = target;
                history.push(FrontGraph {
                    t: state.t,
                    h: state.h.clone(),
                });
                next_save += 1;
            }
        }
        if history.last().is_some_and(|f| f.t != state.t) {
            history.push(FrontGraph {
                t: state.t,
                h: state.h.clone(),
            });
        }
        Ok(SimResult {
            history,
            steps: state.steps,
            final_time: state.t,
            pressure_min,
            pressure_max,
            bounds: self.bounds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub history: Vec<FrontGraph>,
    pub steps: usize,
    pub final_time: f64,
    /// Extremes of the interior pressure over all solves.
    pub pressure_min: f64,
    pub pressure_max: f64,
    pub bounds: MediumBounds,
}

impl SimResult {
    pub fn final_front(&self) -> &FrontGraph {
        // history always holds the initial front
        self.history.last().expect("nonempty history")
    }

    /// Mean front speed over the run.
    pub fn mean_speed(&self) -> f64 {
        let first = &self.history[0];
        let last = self.final_front();
        (last.mean() - first.mean()) / (last.t - first.t)
    }

    /// Points `(t, y, h)` of all snapshots.
    pub fn space_time_points(&self, ly: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for f in &self.history {
            let dy = ly / f.h.len() as f64;
            for (j, h) in f.h.iter().enumerate() {
                out.push(vec![f.t, j as f64 * dy, *h]);
            }
        }
        out
    }
}

pub fn simulate(config: &SimConfig) -> Result<SimResult, Hs2dError> {
    Simulator::new(config.clone())?.run()
}

/// Front points `(y, h)`.
pub fn front_points(front: &FrontGraph, ly: f64) -> Vec<Vec<f64>> {
    let dy = ly / front.h.len() as f64;
    front
        .h
        .iter()
        .enumerate()
        .map(|(j, h)| vec![j as f64 * dy, *h])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HausdorffPair {
    pub eps_a: f64,
    pub eps_b: f64,
    pub final_front: f64,
    pub space_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HausdorffReport {
    pub eps: Vec<f64>,
    pub pairs: Vec<HausdorffPair>,
    /// Mean front speed per run.
    pub speeds: Vec<f64>,
    /// `log(d_k / d_{k+1}) / log(eps_k / eps_{k+1})` between consecutive pairs.
    pub observed_rates: Vec<f64>,
}

/// Runs one simulation per `eps` with otherwise identical data and compares
/// consecutive runs.
pub fn convergence_study(config: &SimConfig, eps_list: &[f64]) -> Result<HausdorffReport, Hs2dError> {
    if eps_list.len() < 3 {
        return Err(config_err("need at least 3 values of eps"));
    }
    let medium = config.medium.build()?;
    let x_spacing = config.lx / config.nx as f64;
    for &eps in eps_list {
        if !(eps > 0.0) {
            return Err(config_err(format!("eps must be positive, got {eps}")));
        }
        let spacing = if medium.dim() >= 2 {
            x_spacing.max(config.dy())
        } else {
            x_spacing
        };
        if spacing > eps / 4.0 {
            return Err(Hs2dError::Resolution { eps, spacing });
        }
    }
    let runs = eps_list
        .par_iter()
        .map(|&eps| {
            let mut c = config.clone();
            c.eps = Some(eps);
            simulate(&c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let fy = Some(Periodic {
        axis: 0,
        period: config.ly,
    });
    let sty = Some(Periodic {
        axis: 1,
        period: config.ly,
    });
    let mut pairs = Vec::new();
    for k in 0..runs.len() - 1 {
        let (a, b) = (&runs[k], &runs[k + 1]);
        pairs.push(HausdorffPair {
            eps_a: eps_list[k],
            eps_b: eps_list[k + 1],
            final_front: hausdorff(
                &front_points(a.final_front(), config.ly),
                &front_points(b.final_front(), config.ly),
                fy,
            )?,
            space_time: hausdorff(&a.space_time_points(config.ly), &b.space_time_points(config.ly), sty)?,
        });
    }
    let observed_rates = pairs
        .windows(2)
        .map(|w| (w[0].space_time / w[1].space_time).ln() / (w[0].eps_a / w[1].eps_a).ln())
        .collect();
    Ok(HausdorffReport {
        eps: eps_list.to_vec(),
        pairs,
        speeds: runs.iter().map(SimResult::mean_speed).collect(),
        observed_rates,
    })
}

/// Upper (`Super`) and lower (`Sub`) flatness of a simulated front against
/// a planar wave moving in the `+x` direction.
pub fn flatness2d(history: &[FrontGraph], wave: &PlanarWave) -> Result<(FlatnessTrace, FlatnessTrace), Hs2dError> {
    let nu = wave.nu();
    if nu.len() != 2 || nu[0] < 1.0 - 1e-12 {
        return Err(config_err("the planar wave must move in the +x direction"));
    }
    let (mut up, mut down) = (0.0f64, 0.0f64);
    let mut times = Vec::with_capacity(history.len());
    let mut upper = Vec::with_capacity(history.len());
    let mut lower = Vec::with_capacity(history.len());
    for f in history {
        let p = wave.front_position(f.t);
        for h in &f.h {
            up = up.max(h - p);
            down = down.max(p - h);
        }
        times.push(f.t);
        upper.push(up);
        lower.push(down);
    }
    Ok((
        FlatnessTrace {
            side: Side::Super,
            times: times.clone(),
            phi: upper,
        },
        FlatnessTrace {
            side: Side::Sub,
            times,
            phi: lower,
        },
    ))
}
