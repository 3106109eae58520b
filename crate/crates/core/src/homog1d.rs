//! One-dimensional front dynamics `x' = q g(x/eps, t/eps)`, effective
//! velocities, obstacle fronts and their flatness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::medium::{Medium, MediumBounds, MediumError};
use crate::quad::adaptive_simpson;

#[derive(Debug, Error)]
pub enum HomogError {
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error("invalid parameters: {0}")]
    Param(String),
    #[error("front became non-finite at t = {0}")]
    NonFinite(f64),
    #[error("medium depends on time: g({x}, 0) = {a} but g({x}, {t}) = {b}")]
    TimeDependent { x: f64, t: f64, a: f64, b: f64 },
    #[error("{side:?} bisection bracket failed: flatness {flatness} >= threshold {threshold} at r = {r}")]
    Bracket {
        side: Side,
        r: f64,
        flatness: f64,
        threshold: f64,
    },
}

fn param(msg: impl Into<String>) -> HomogError {
    HomogError::Param(msg.into())
}

/// `x' = q g(x/eps, t/eps)`, `x(0) = x0`.
#[derive(Debug, Clone)]
pub struct FrontProblem {
    pub medium: Medium,
    pub q: f64,
    pub x0: f64,
    pub eps: f64,
}

impl FrontProblem {
    pub fn new(medium: Medium, q: f64, x0: f64, eps: f64) -> Result<FrontProblem, HomogError> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(param(format!("q must be positive, got {q}")));
        }
        if !(eps > 0.0) {
            return Err(param(format!("eps must be positive, got {eps}")));
        }
        if !x0.is_finite() {
            return Err(param("x0 must be finite"));
        }
        Ok(FrontProblem { medium, q, x0, eps })
    }

    #[inline]
    fn rhs(&self, x: f64, t: f64) -> f64 {
        self.q * self.medium.eval(&[x / self.eps], t / self.eps)
    }

    #[inline]
    fn rk4(&self, x: f64, t: f64, dt: f64) -> f64 {
        let k1 = self.rhs(x, t);
        let k2 = self.rhs(x + 0.5 * dt * k1, t + 0.5 * dt);
        let k3 = self.rhs(x + 0.5 * dt * k2, t + 0.5 * dt);
        let k4 = self.rhs(x + dt * k3, t + dt);
        x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    /// Position at `t_end` without storing the trajectory.
    pub fn position_at(&self, t_end: f64, dt: f64) -> Result<f64, HomogError> {
        let (steps, h) = step_count(t_end, dt)?;
        let mut x = self.x0;
        for k in 0..steps {
            let t = k as f64 * h;
            x = self.rk4(x, t, h);
            if !x.is_finite() {
                return Err(HomogError::NonFinite(t + h));
            }
        }
        Ok(x)
    }
}

fn step_count(t_end: f64, dt: f64) -> Result<(usize, f64), HomogError> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(param(format!("final time must be positive, got {t_end}")));
    }
    if !(dt > 0.0) {
        return Err(param(format!("dt must be positive, got {dt}")));
    }
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    Ok((steps, t_end / steps as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontTrace {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub dt: f64,
}

/// Classical RK4 on a uniform grid; `dt` is shrunk so it divides `t_end`.
pub fn integrate_front(p: &FrontProblem, t_end: f64, dt: f64) -> Result<FrontTrace, HomogError> {
    let (steps, h) = step_count(t_end, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut x = p.x0;
    times.push(0.0);
    positions.push(x);
    for k in 0..steps {
        let t = k as f64 * h;
        x = p.rk4(x, t, h);
        if !x.is_finite() {
            return Err(HomogError::NonFinite(t + h));
        }
        times.push((k + 1) as f64 * h);
        positions.push(x);
    }
    Ok(FrontTrace {
        times,
        positions,
        dt: h,
    })
}

pub const DEFAULT_DT: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityEstimate {
    pub q: f64,
    pub r_hat: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// `1/T`, from squeezing between `x(t)` and `x(t) + 1`.
    pub error_bound: f64,
    /// `2 r(T) - r(T/2)`
    pub richardson: f64,
}

/// `(x(T) - x0)/T` for the unscaled problem.
pub fn effective_velocity(medium: &Medium, q: f64, t_end: f64, x0: f64) -> Result<VelocityEstimate, HomogError> {
    effective_velocity_with_dt(medium, q, t_end, x0, DEFAULT_DT)
}

pub fn effective_velocity_with_dt(
    medium: &Medium,
    q: f64,
    t_end: f64,
    x0: f64,
    dt: f64,
) -> Result<VelocityEstimate, HomogError> {
    if !(t_end >= 10.0) {
        return Err(param(format!("T must be at least 10, got {t_end}")));
    }
    let p = FrontProblem::new(medium.clone(), q, x0, 1.0)?;
    let (steps, h) = step_count(t_end, dt)?;
    let half = steps / 2;
    let mut x = x0;
    let mut x_half = x0;
    for k in 0..steps {
        let t = k as f64 * h;
        x = p.rk4(x, t, h);
        if !x.is_finite() {
            return Err(HomogError::NonFinite(t + h));
        }
        if k + 1 == half {
            x_half = x;
        }
    }
    let r_hat = (x - x0) / t_end;
    let r_half = (x_half - x0) / (half as f64 * h);
    Ok(VelocityEstimate {
        q,
        r_hat,
        t_end,
        error_bound: 1.0 / t_end,
        richardson: 2.0 * r_hat - r_half,
    })
}

/// `q (int_0^1 g^{-1})^{-1}` for media independent of time.
pub fn harmonic_mean_oracle(medium: &Medium, q: f64) -> Result<f64, HomogError> {
    if !medium.is_time_independent() {
        // the expression mentions t; confirm by sampling before refusing
        for i in 0..16 {
            let x = i as f64 / 16.0;
            let a = medium.eval(&[x], 0.0);
            for j in 1..8 {
                let t = 0.137 * j as f64;
                let b = medium.eval(&[x], t);
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(HomogError::TimeDependent { x, t, a, b });
                }
            }
        }
    }
    let inv = adaptive_simpson(|y| 1.0 / medium.eval(&[y], 0.0), 0.0, 1.0, 1e-12);
    Ok(q / inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Sub,
    Super,
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Side, String> {
        match s {
            "sub" => Ok(Side::Sub),
            "super" => Ok(Side::Super),
            other => Err(format!("side must be `sub` or `super`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstacleFront {
    pub q: f64,
    pub r: f64,
    pub eps: f64,
    pub side: Side,
    pub trace: FrontTrace,
}

/// Running maximum of the detachment from the obstacle front `r t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessTrace {
    pub side: Side,
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
}

impl FlatnessTrace {
    pub fn last(&self) -> f64 {
        self.phi.last().copied().unwrap_or(0.0)
    }
}

/// Explicit Euler steps clipped to stay on one side of `r t`, starting at 0.
pub fn obstacle_front(
    medium: &Medium,
    q: f64,
    r: f64,
    eps: f64,
    side: Side,
    t_end: f64,
    dt: f64,
) -> Result<(ObstacleFront, FlatnessTrace), HomogError> {
    if !(r > 0.0) {
        return Err(param(format!("r must be positive, got {r}")));
    }
    if dt > eps / 10.0 {
        return Err(param(format!("dt = {dt} exceeds eps/10 = {}", eps / 10.0)));
    }
    let p = FrontProblem::new(medium.clone(), q, 0.0, eps)?;
    let (steps, h) = step_count(t_end, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut phi = Vec::with_capacity(steps + 1);
    // track the detachment d >= 0 from the wall directly so that a front
    // moving exactly with the wall stays on it without rounding drift
    let mut d: f64 = 0.0;
    let mut running: f64 = 0.0;
    times.push(0.0);
    positions.push(0.0);
    phi.push(0.0);
    for k in 0..steps {
        let t = k as f64 * h;
        let t_next = (k + 1) as f64 * h;
        let y = position(side, r * t, d);
        d = (d + h * relative_speed(side, p.rhs(y, t), r)).max(0.0);
        if !d.is_finite() {
            return Err(HomogError::NonFinite(t_next));
        }
        running = running.max(d);
        times.push(t_next);
        positions.push(position(side, r * t_next, d));
        phi.push(running);
    }
    let front = ObstacleFront {
        q,
        r,
        eps,
        side,
        trace: FrontTrace {
            times: times.clone(),
            positions,
            dt: h,
        },
    };
    Ok((front, FlatnessTrace { side, times, phi }))
}

/// Final flatness `Phi(t_end)` without storing the trace.
fn final_flatness(p: &FrontProblem, r: f64, side: Side, t_end: f64, dt: f64) -> Result<f64, HomogError> {
    let (steps, h) = step_count(t_end, dt)?;
    let mut d: f64 = 0.0;
    let mut running: f64 = 0.0;
    for k in 0..steps {
        let t = k as f64 * h;
        let y = position(side, r * t, d);
        d = (d + h * relative_speed(side, p.rhs(y, t), r)).max(0.0);
        if !d.is_finite() {
            return Err(HomogError::NonFinite(t + h));
        }
        running = running.max(d);
    }
    Ok(running)
}

/// Rate at which the free dynamics leaves the wall `r t`.
#[inline]
fn relative_speed(side: Side, v: f64, r: f64) -> f64 {
    match side {
        Side::Super => v - r,
        Side::Sub => r - v,
    }
}

#[inline]
fn position(side: Side, wall: f64, d: f64) -> f64 {
    match side {
        Side::Super => wall + d,
        Side::Sub => wall - d,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub monotone: bool,
    /// Largest `Phi(t+h) - Phi(t) - h rate`, before slack.
    pub max_excess: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Monotonicity and the one-sided Lipschitz bounds
/// `Phi_sub(t+h) <= Phi_sub(t) + h (r - m q)_+`,
/// `Phi_super(t+h) <= Phi_super(t) + h (M q - r)_+`.
pub fn flatness_lipschitz_check(trace: &FlatnessTrace, q: f64, r: f64, bounds: &MediumBounds) -> FlatnessReport {
    let rate = match trace.side {
        Side::Sub => (r - bounds.m * q).max(0.0),
        Side::Super => (bounds.big_m * q - r).max(0.0),
    };
    let dt = trace.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    // plus rounding of the differences
    let top = trace.phi.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
    let slack = q * bounds.lip * dt + 1e-12 * (1.0 + top);
    let mut monotone = trace.phi.first().is_none_or(|p| *p == 0.0);
    let mut max_excess = f64::NEG_INFINITY;
    for (w, p) in trace.times.windows(2).zip(trace.phi.windows(2)) {
        let h = w[1] - w[0];
        monotone &= p[1] >= p[0];
        max_excess = max_excess.max(p[1] - p[0] - h * rate);
    }
    if trace.phi.len() < 2 {
        max_excess = 0.0;
    }
    FlatnessReport {
        monotone,
        max_excess,
        slack,
        pass: monotone && max_excess <= slack,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDiagnostic {
    pub eps: f64,
    pub threshold: f64,
    /// `Phi_sub(T)` at `r_lower`
    pub phi_sub: f64,
    /// `Phi_super(T)` at `r_upper`
    pub phi_super: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidates {
    pub q: f64,
    pub beta: f64,
    pub r_lower: f64,
    pub r_upper: f64,
    /// Expected size of `|r_lower - r_upper|` from the flatness thresholds.
    pub tolerance: f64,
    pub diagnostics: Vec<CandidateDiagnostic>,
}

pub const DEFAULT_BETA: f64 = 0.9;
const BISECTION_TOL: f64 = 1e-4;

/// `r_lower = sup{r : Phi_sub(T) < eps^beta}` and
/// `r_upper = inf{r : Phi_super(T) < eps^beta}` over all `eps` in the list,
/// searched in `[m q, M q]`.
pub fn homogenized_candidates(
    medium: &Medium,
    bounds: &MediumBounds,
    q: f64,
    beta: f64,
    eps_list: &[f64],
    t_end: f64,
) -> Result<Candidates, HomogError> {
    if !(beta > 0.8 && beta < 1.0) {
        return Err(param(format!("beta must lie in (4/5, 1), got {beta}")));
    }
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(param("eps list must be nonempty and positive"));
    }
    let problems = eps_list
        .iter()
        .map(|&eps| FrontProblem::new(medium.clone(), q, 0.0, eps))
        .collect::<Result<Vec<_>, _>>()?;
    let flat = |side: Side, r: f64| -> Result<Vec<f64>, HomogError> {
        problems
            .par_iter()
            .map(|p| final_flatness(p, r, side, t_end, p.eps / 20.0))
            .collect()
    };
    let holds = |phis: &[f64]| phis.iter().zip(eps_list).all(|(p, e)| *p < e.powf(beta));
    let worst = |phis: &[f64]| {
        phis.iter()
            .zip(eps_list)
            .map(|(p, e)| (*p, e.powf(beta)))
            .fold(
                (0.0, f64::INFINITY),
                |acc, v| if v.0 - v.1 > acc.0 - acc.1 { v } else { acc },
            )
    };
    let lo = bounds.m * q;
    let hi = bounds.big_m * q;

    // Phi_sub increases with r: true at m q
    let r_lower = {
        let at_lo = flat(Side::Sub, lo)?;
        if !holds(&at_lo) {
            let (flatness, threshold) = worst(&at_lo);
            return Err(HomogError::Bracket {
                side: Side::Sub,
                r: lo,
                flatness,
                threshold,
            });
        }
        if holds(&flat(Side::Sub, hi)?) {
            hi
        } else {
            let (mut a, mut b) = (lo, hi);
            while b - a > BISECTION_TOL {
                let mid = 0.5 * (a + b);
                if holds(&flat(Side::Sub, mid)?) {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a
        }
    };
    // Phi_super decreases with r: true at M q
    let r_upper = {
        let at_hi = flat(Side::Super, hi)?;
        if !holds(&at_hi) {
            let (flatness, threshold) = worst(&at_hi);
            return Err(HomogError::Bracket {
                side: Side::Super,
                r: hi,
                flatness,
                threshold,
            });
        }
        if holds(&flat(Side::Super, lo)?) {
            lo
        } else {
            let (mut a, mut b) = (lo, hi);
            while b - a > BISECTION_TOL {
                let mid = 0.5 * (a + b);
                if holds(&flat(Side::Super, mid)?) {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            b
        }
    };
    let sub = flat(Side::Sub, r_lower)?;
    let sup = flat(Side::Super, r_upper)?;
    let diagnostics = eps_list
        .iter()
        .zip(sub.iter().zip(&sup))
        .map(|(&eps, (&phi_sub, &phi_super))| CandidateDiagnostic {
            eps,
            threshold: eps.powf(beta),
            phi_sub,
            phi_super,
        })
        .collect();
    let min_threshold = eps_list.iter().map(|e| e.powf(beta)).fold(f64::INFINITY, f64::min);
    Ok(Candidates {
        q,
        beta,
        r_lower,
        r_upper,
        tolerance: 2.0 * min_threshold / t_end + BISECTION_TOL,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityCurve {
    pub points: Vec<VelocityEstimate>,
}

/// Effective velocity at `samples` equally spaced `q`, in order.
pub fn velocity_curve(
    medium: &Medium,
    q_min: f64,
    q_max: f64,
    samples: usize,
    t_end: f64,
) -> Result<VelocityCurve, HomogError> {
    if !(q_min > 0.0 && q_min < q_max) {
        return Err(param(format!("need 0 < q_min < q_max, got {q_min}, {q_max}")));
    }
    if samples < 2 {
        return Err(param("need at least 2 samples"));
    }
    let points = (0..samples)
        .into_par_iter()
        .map(|i| {
            let q = q_min + (q_max - q_min) * i as f64 / (samples - 1) as f64;
            effective_velocity(medium, q, t_end, 0.0)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VelocityCurve { points })
}
