//! Radial barriers, quantitative bounds and auxiliary comparison functions.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{dot, norm};
use crate::quad::adaptive_simpson;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BarrierError {
    #[error("invalid parameters: {0}")]
    Param(String),
    #[error("t = {t} is outside the admissible window: M K(t) = {mk} not in ({lo}, 0)")]
    Window { t: f64, mk: f64, lo: f64 },
    #[error("radial perturbation needs n >= 3, got {0}")]
    Unsupported(usize),
}

fn param(msg: impl Into<String>) -> BarrierError {
    BarrierError::Param(msg.into())
}

/// Self-similar expanding solution `phi(x, t) = psi(x / rho(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialExpanding {
    pub n: usize,
    pub m: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub alpha: f64,
}

pub fn expanding_barrier(n: usize, m: f64, k: f64, a: f64) -> Result<RadialExpanding, BarrierError> {
    if n < 2 {
        return Err(param(format!("dimension must be >= 2, got {n}")));
    }
    if !(m > 0.0 && k > 0.0) || !m.is_finite() || !k.is_finite() {
        return Err(param("m and K must be positive"));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(param(format!("A must lie in (0, 1), got {a}")));
    }
    let alpha = if n == 2 {
        2.0 / -a.ln()
    } else {
        2.0 * (n as f64 - 2.0) / (a.powf(2.0 - n as f64) - 1.0)
    };
    Ok(RadialExpanding { n, m, k, a, alpha })
}

impl RadialExpanding {
    pub fn radius(&self, t: f64) -> f64 {
        (self.alpha * self.k * self.m * t).sqrt()
    }

    pub fn radius_rate(&self, t: f64) -> f64 {
        0.5 * self.alpha * self.k * self.m / self.radius(t)
    }

    /// Profile `psi(s)` at scaled radius `s = |x|/rho`.
    pub fn profile(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        if self.n == 2 {
            self.k * (1.0 / s).ln() / (1.0 / self.a).ln()
        } else {
            let e = 2.0 - self.n as f64;
            self.k * (s.powf(e) - 1.0) / (self.a.powf(e) - 1.0)
        }
    }

    /// `psi'(s)` for `s < 1`, the inner limit at `s = 1`.
    pub fn profile_slope(&self, s: f64) -> f64 {
        if self.n == 2 {
            -self.k / (s * (1.0 / self.a).ln())
        } else {
            let e = 2.0 - self.n as f64;
            self.k * e * s.powf(e - 1.0) / (self.a.powf(e) - 1.0)
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.profile(norm(x) / self.radius(t))
    }

    /// `|rho'(t) - m |D phi^+|` on the free boundary `|x| = rho(t)`.
    pub fn check_fbc(&self, t: f64) -> Result<f64, BarrierError> {
        if !(t > 0.0) {
            return Err(param(format!("t must be positive, got {t}")));
        }
        let rho = self.radius(t);
        let grad = self.profile_slope(1.0).abs() / rho;
        Ok((self.radius_rate(t) - self.m * grad).abs())
    }
}

/// Time-dependent boundary datum `chi` with optional exact `K(t) = int_0^t chi`.
#[derive(Clone)]
pub struct BoundaryData {
    chi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    cumulative: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryData")
            .field("exact_cumulative", &self.cumulative.is_some())
            .finish()
    }
}

impl BoundaryData {
    pub fn new(chi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> BoundaryData {
        BoundaryData {
            chi: Arc::new(chi),
            cumulative: None,
        }
    }

    pub fn constant(c: f64) -> BoundaryData {
        BoundaryData::new(move |_| c).with_cumulative(move |t| c * t)
    }

    pub fn with_cumulative(mut self, k: impl Fn(f64) -> f64 + Send + Sync + 'static) -> BoundaryData {
        self.cumulative = Some(Arc::new(k));
        self
    }

    pub fn chi(&self, t: f64) -> f64 {
        (self.chi)(t)
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        match &self.cumulative {
            Some(k) => k(t),
            None => adaptive_simpson(&*self.chi, 0.0, t, 1e-10),
        }
    }

    pub fn integral(&self, t1: f64, t2: f64) -> f64 {
        match &self.cumulative {
            Some(k) => k(t2) - k(t1),
            None => adaptive_simpson(&*self.chi, t1, t2, 1e-10),
        }
    }

    fn chi_rate(&self, t: f64) -> f64 {
        let h = 1e-6 * (1.0 + t.abs());
        (self.chi(t + h) - self.chi(t - h)) / (2.0 * h)
    }
}

/// Left-hand side of the radius equation, decreasing from 0 to `-mu^2/(2n)`.
pub fn contracting_lhs(n: usize, mu: f64, rho: f64) -> f64 {
    if n == 2 {
        0.5 * rho * rho * ((rho / mu).ln() - 0.5)
    } else {
        let nf = n as f64;
        mu * mu / (2.0 - nf) * (rho * rho / (2.0 * mu * mu) - (rho / mu).powi(n as i32) / nf)
    }
}

/// Solves `contracting_lhs(rho) = M K(t)` on `(0, mu)` by bisection.
pub fn contracting_radius(
    n: usize,
    big_m: f64,
    mu: f64,
    kfun: &dyn Fn(f64) -> f64,
    t: f64,
) -> Result<f64, BarrierError> {
    if n < 2 || !(big_m > 0.0 && mu > 0.0) {
        return Err(param("need n >= 2, M > 0, mu > 0"));
    }
    let target = big_m * kfun(t);
    let lo_val = -mu * mu / (2.0 * n as f64);
    if !(t < 0.0 && target < 0.0 && target > lo_val) {
        return Err(BarrierError::Window {
            t,
            mk: target,
            lo: lo_val,
        });
    }
    let mut lo = 1e-14 * mu;
    let mut hi = mu;
    // lhs is decreasing: lhs(lo) > target > lhs(hi)
    for _ in 0..200 {
        if hi - lo <= 1e-12 * mu {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if contracting_lhs(n, mu, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Contracting radial solution on `B_mu x (t0, 0)` with boundary datum `chi`.
#[derive(Debug, Clone)]
pub struct RadialContracting {
    pub n: usize,
    pub big_m: f64,
    pub mu: f64,
    pub data: BoundaryData,
}

impl RadialContracting {
    pub fn new(n: usize, big_m: f64, mu: f64, data: BoundaryData) -> Result<RadialContracting, BarrierError> {
        if n < 2 || !(big_m > 0.0 && mu > 0.0) {
            return Err(param("need n >= 2, M > 0, mu > 0"));
        }
        Ok(RadialContracting { n, big_m, mu, data })
    }

    /// `inf{t < 0 : K(t) > -mu^2/(2nM)}`; `-inf` if the datum never accumulates enough.
    pub fn t0(&self) -> f64 {
        let level = -self.mu * self.mu / (2.0 * self.n as f64 * self.big_m);
        let mut lo = -1.0;
        while self.data.cumulative(lo) > level {
            lo *= 2.0;
            if lo < -1e12 {
                return f64::NEG_INFINITY;
            }
        }
        let mut hi = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.data.cumulative(mid) > level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    pub fn radius(&self, t: f64) -> Result<f64, BarrierError> {
        contracting_radius(self.n, self.big_m, self.mu, &|s| self.data.cumulative(s), t)
    }

    /// Residual of the radius equation at the computed root.
    pub fn radius_residual(&self, t: f64) -> Result<f64, BarrierError> {
        let rho = self.radius(t)?;
        Ok((contracting_lhs(self.n, self.mu, rho) - self.big_m * self.data.cumulative(t)).abs())
    }

    fn denominators(&self, rho: f64) -> f64 {
        if self.n == 2 {
            (self.mu / rho).ln()
        } else {
            let e = 2.0 - self.n as f64;
            rho.powf(e) - self.mu.powf(e)
        }
    }

    /// `|D phi^+|` on `|x| = rho`.
    pub fn front_gradient(&self, t: f64) -> Result<f64, BarrierError> {
        let rho = self.radius(t)?;
        let chi = self.data.chi(t);
        let d = self.denominators(rho);
        Ok(if self.n == 2 {
            chi / (rho * d)
        } else {
            chi * (self.n as f64 - 2.0) * rho.powf(1.0 - self.n as f64) / d
        })
    }

    /// `rho'(t) = -M |D phi^+|`.
    pub fn radius_rate(&self, t: f64) -> Result<f64, BarrierError> {
        Ok(-self.big_m * self.front_gradient(t)?)
    }

    /// Harmonic profile continued inside the dry ball, so it is negative there.
    fn signed_parts(&self, x: &[f64], t: f64) -> Result<RadialParts, BarrierError> {
        let rho = self.radius(t)?;
        let rho_t = self.radius_rate(t)?;
        let chi = self.data.chi(t);
        let chi_t = self.data.chi_rate(t);
        let r = norm(x);
        let nf = self.n as f64;
        let d = self.denominators(rho);
        let (num, num_t, d_t, radial_slope) = if self.n == 2 {
            ((r / rho).ln(), -rho_t / rho, -rho_t / rho, 1.0 / r)
        } else {
            let e = 2.0 - nf;
            let rt = e * rho.powf(e - 1.0) * rho_t;
            (rho.powf(e) - r.powf(e), rt, rt, (nf - 2.0) * r.powf(1.0 - nf))
        };
        let value = chi * num / d;
        let time = chi_t * num / d + chi * (num_t * d - num * d_t) / (d * d);
        Ok(RadialParts {
            value,
            time,
            slope: chi * radial_slope / d,
            rho,
            rho_t,
        })
    }
}

struct RadialParts {
    value: f64,
    time: f64,
    /// `d phi / d|x|`
    slope: f64,
    rho: f64,
    rho_t: f64,
}

/// Smooth field data needed to test the superbarrier inequalities.
pub trait BarrierField {
    /// Smooth signed extension: positive in the wet set, zero on the front.
    fn value(&self, x: &[f64], t: f64) -> f64;
    fn time_derivative(&self, x: &[f64], t: f64) -> f64;
    fn gradient(&self, x: &[f64], t: f64) -> Vec<f64>;
    fn laplacian(&self, x: &[f64], t: f64) -> f64;
    /// Typical magnitude of `value`, used to size the front band.
    fn scale(&self) -> f64 {
        1.0
    }
}

impl BarrierField for crate::geometry::PlanarWave {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.linear(x, t)
    }
    fn time_derivative(&self, _x: &[f64], _t: f64) -> f64 {
        self.q_norm() * self.r
    }
    fn gradient(&self, _x: &[f64], _t: f64) -> Vec<f64> {
        self.q.clone()
    }
    fn laplacian(&self, _x: &[f64], _t: f64) -> f64 {
        0.0
    }
}

/// `psi = phi - kappa (|x|^2 - rho^2)_+` built from a contracting solution.
#[derive(Debug, Clone)]
pub struct PerturbedContracting {
    pub base: RadialContracting,
    pub kappa: f64,
}

impl PerturbedContracting {
    fn parts(&self, x: &[f64], t: f64) -> RadialParts {
        // callers sample inside (t0, 0), where the radius is defined
        match self.base.signed_parts(x, t) {
            Ok(p) => p,
            Err(_) => RadialParts {
                value: f64::NAN,
                time: f64::NAN,
                slope: f64::NAN,
                rho: f64::NAN,
                rho_t: f64::NAN,
            },
        }
    }

    fn outside(&self, x: &[f64], rho: f64) -> bool {
        norm(x) >= rho
    }
}

impl BarrierField for PerturbedContracting {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        let p = self.parts(x, t);
        p.value - self.kappa * (dot(x, x) - p.rho * p.rho).max(0.0)
    }

    fn time_derivative(&self, x: &[f64], t: f64) -> f64 {
        let p = self.parts(x, t);
        let extra = if self.outside(x, p.rho) {
            2.0 * self.kappa * p.rho * p.rho_t
        } else {
            0.0
        };
        p.time + extra
    }

    fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        let p = self.parts(x, t);
        let r = norm(x);
        let k = if self.outside(x, p.rho) { 2.0 * self.kappa } else { 0.0 };
        x.iter().map(|xi| p.slope * xi / r - k * xi).collect()
    }

    fn laplacian(&self, x: &[f64], t: f64) -> f64 {
        let p = self.parts(x, t);
        if self.outside(x, p.rho) {
            -2.0 * self.base.n as f64 * self.kappa
        } else {
            0.0
        }
    }

    fn scale(&self) -> f64 {
        self.base.data.chi(0.0).abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierCheck {
    pub name: String,
    /// Largest violation, `max(0, required - observed)`.
    pub residual: f64,
    /// Smallest observed margin over the checked points.
    pub margin: f64,
    pub points: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierReport {
    pub checks: Vec<BarrierCheck>,
}

impl BarrierReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&BarrierCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Accumulator {
    name: &'static str,
    margin: f64,
    points: usize,
}

impl Accumulator {
    fn new(name: &'static str) -> Accumulator {
        Accumulator {
            name,
            margin: f64::INFINITY,
            points: 0,
        }
    }

    fn add(&mut self, margin: f64) {
        self.points += 1;
        // NaN margins count as failures
        self.margin = if margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            self.margin.min(margin)
        };
    }

    fn finish(self) -> BarrierCheck {
        BarrierCheck {
            name: self.name.to_string(),
            residual: if self.points == 0 { 0.0 } else { (-self.margin).max(0.0) },
            margin: self.margin,
            points: self.points,
            pass: self.points == 0 || self.margin > 0.0,
        }
    }
}

/// Checks `-Lap phi > c` at interior samples and `|D phi| > c`,
/// `phi_t - g |D phi|^2 > c` at front samples, where `g` is the speed.
pub fn check_superbarrier(
    field: &dyn BarrierField,
    speed: &dyn Fn(&[f64], f64) -> f64,
    samples: &[(Vec<f64>, f64)],
    c: f64,
) -> BarrierReport {
    let band = 1e-8 * field.scale();
    let mut interior = Accumulator::new("interior_superharmonic");
    let mut grad = Accumulator::new("front_gradient");
    let mut velocity = Accumulator::new("front_velocity");
    for (x, t) in samples {
        let v = field.value(x, *t);
        if v > band {
            interior.add(-field.laplacian(x, *t) - c);
        } else if v >= -band {
            let g = field.gradient(x, *t);
            let g2 = dot(&g, &g);
            grad.add(g2.sqrt() - c);
            velocity.add(field.time_derivative(x, *t) - speed(x, *t) * g2 - c);
        }
    }
    BarrierReport {
        checks: vec![interior.finish(), grad.finish(), velocity.finish()],
    }
}

/// `int_{t1}^{t2} chi < mu^2/(2nM)`.
pub fn closing_criterion(n: usize, big_m: f64, mu: f64, data: &BoundaryData, t1: f64, t2: f64) -> bool {
    data.integral(t1, t2) < mu * mu / (2.0 * n as f64 * big_m)
}

/// `mu^2/(2nM dt)`.
pub fn nondegeneracy_bound(n: usize, big_m: f64, mu: f64, dt: f64) -> f64 {
    mu * mu / (2.0 * n as f64 * big_m * dt)
}

/// `sqrt(2nKM dt)`.
pub fn expansion_radius(n: usize, k: f64, big_m: f64, dt: f64) -> f64 {
    (2.0 * n as f64 * k * big_m * dt).sqrt()
}

/// `sigma < eps (exp(mu^2/(2nMA)) - 1)`.
pub fn rational_bound_check(n: usize, big_m: f64, mu: f64, sigma: f64, a: f64, eps: f64) -> bool {
    sigma < eps * (mu * mu / (2.0 * n as f64 * big_m * a)).exp_m1()
}

/// `sqrt(1 + r^2/n) cos(xn) - 3/2` and its Laplacian, `r = |x'|`.
pub fn thin_cylinder_phi(r: f64, xn: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let r2 = r * r;
    let value = (1.0 + r2 / nf).sqrt() * xn.cos() - 1.5;
    let lap = -(nf + 2.0 * r2 + nf * r2 + r2 * r2) * xn.cos() / (nf * nf * ((nf + r2) / nf).powf(1.5));
    (value, lap)
}

/// `R' = R - (6 sqrt(n)/pi)(K + 2) delta`.
pub fn thin_cylinder_margin(n: usize, r: f64, k: f64, delta: f64) -> f64 {
    r - 6.0 * (n as f64).sqrt() / PI * (k + 2.0) * delta
}

/// `rho(x) = phi(delta |x|)` on `R <= |x| <= 2R`, `phi^{2-n}` harmonic with
/// `phi(2) = 1`, `phi(1) = 6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialPerturbation {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
}

pub fn radial_perturbation(n: usize) -> Result<RadialPerturbation, BarrierError> {
    if n < 3 {
        return Err(BarrierError::Unsupported(n));
    }
    let e = 2.0 - n as f64;
    let b = (6f64.powf(e) - 1.0) / (1.0 - 2f64.powf(e));
    let a = 6f64.powf(e) - b;
    // phi(s) = 5 at s = ((5^e - a)/b)^(1/e); keep a margin below it
    let s5 = ((5f64.powf(e) - a) / b).powf(1.0 / e);
    let delta = 0.9 * (s5 - 1.0);
    Ok(RadialPerturbation {
        n,
        a,
        b,
        delta,
        big_r: 1.0 / delta,
    })
}

impl RadialPerturbation {
    fn e(&self) -> f64 {
        2.0 - self.n as f64
    }

    /// `(phi, phi', phi'')` at radius `s`.
    pub fn phi(&self, s: f64) -> (f64, f64, f64) {
        let e = self.e();
        let k = 1.0 / e;
        let u = self.a + self.b * s.powf(e);
        let du = e * self.b * s.powf(e - 1.0);
        let ddu = e * (e - 1.0) * self.b * s.powf(e - 2.0);
        let phi = u.powf(k);
        let d1 = k * u.powf(k - 1.0) * du;
        let d2 = k * (k - 1.0) * u.powf(k - 2.0) * du * du + k * u.powf(k - 1.0) * ddu;
        (phi, d1, d2)
    }

    /// `(rho, rho', rho'')` at `|x| = r`.
    pub fn rho(&self, r: f64) -> (f64, f64, f64) {
        let (p, d1, d2) = self.phi(self.delta * r);
        (p, self.delta * d1, self.delta * self.delta * d2)
    }

    /// `rho Lap rho - (n - 1)|D rho|^2` at `|x| = r`.
    pub fn inequality_residual(&self, r: f64) -> f64 {
        let (p, d1, d2) = self.rho(r);
        let nf = self.n as f64;
        let lap = d2 + (nf - 1.0) * d1 / r;
        // relative to the size of the terms; both sides are O(|D rho|^2)
        let scale = (nf - 1.0) * d1 * d1 + p * d2.abs();
        (p * lap - (nf - 1.0) * d1 * d1) / scale.max(1e-300)
    }

    /// Smallest relative residual over `samples` radii spanning the annulus.
    pub fn min_residual(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let r = self.big_r * (1.0 + i as f64 / (samples - 1).max(1) as f64);
                self.inequality_residual(r)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlanarWave;
    use proptest::prelude::*;

    #[test]
    fn expanding_examples() {
        let b = expanding_barrier(3, 1.0, 1.0, 0.5).unwrap();
        assert!((b.alpha - 2.0).abs() < 1e-15);
        assert!((b.radius(1.0) - 2f64.sqrt()).abs() < 1e-15);
        let b = expanding_barrier(2, 1.0, 1.0, 0.25).unwrap();
        assert!((b.alpha - 1.0 / 2f64.ln()).abs() < 1e-12);
        assert!((b.radius(1.0) - 1.201_122_408_786_449).abs() < 1e-12);
        assert!(b.check_fbc(0.5).unwrap() <= 1e-10);
        assert!(expanding_barrier(2, 1.0, 1.0, 1.0).is_err());
        assert!(b.check_fbc(0.0).is_err());
        let b = expanding_barrier(3, 1.0, 1.0, 0.5).unwrap();
        assert!(b.check_fbc(1.0).unwrap() <= 1e-10);
    }

    #[test]
    fn expanding_boundary_values() {
        for n in 2..6 {
            let b = expanding_barrier(n, 0.7, 2.5, 0.3).unwrap();
            for t in [0.1, 1.0, 3.0] {
                let rho = b.radius(t);
                let mut x = vec![0.0; n];
                x[0] = b.a * rho;
                assert_eq!(b.eval(&x, t), b.k);
                x[0] = rho;
                assert_eq!(b.eval(&x, t), 0.0);
                assert!(((rho * rho / t) - b.alpha * b.k * b.m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expanding_fbc_matches_finite_difference() {
        // oracle: differentiate radius and profile numerically
        let b = expanding_barrier(4, 1.3, 0.8, 0.4).unwrap();
        let t = 0.9;
        let h = 1e-6;
        let rate = (b.radius(t + h) - b.radius(t - h)) / (2.0 * h);
        let rho = b.radius(t);
        let inner = [rho * (1.0 - 1e-6), 0.0, 0.0, 0.0];
        let grad = b.eval(&inner, t) / (rho * 1e-6);
        assert!((rate - b.m * grad).abs() < 1e-5);
    }

    #[test]
    fn contracting_examples() {
        let k = |t: f64| t;
        let rho = contracting_radius(2, 1.0, 1.0, &k, -0.1).unwrap();
        assert!(rho > 0.0 && rho < 1.0);
        assert!((0.5 * rho * rho * (rho.ln() - 0.5) + 0.1).abs() < 1e-10);
        let near_zero = contracting_radius(2, 1.0, 1.0, &k, -1e-12).unwrap();
        assert!(near_zero < 1e-5);
        let near_mu = contracting_radius(2, 1.0, 1.0, &k, -0.25 + 1e-12).unwrap();
        assert!(near_mu > 0.99);
        assert!(matches!(
            contracting_radius(2, 1.0, 1.0, &k, -0.3),
            Err(BarrierError::Window { .. })
        ));
        assert!(contracting_radius(2, 1.0, 1.0, &k, 0.1).is_err());
    }

    #[test]
    fn contracting_lhs_limits() {
        for n in 2..7 {
            let mu = 1.7;
            assert!(contracting_lhs(n, mu, 1e-9 * mu).abs() < 1e-12);
            let lim = -mu * mu / (2.0 * n as f64);
            assert!((contracting_lhs(n, mu, mu) - lim).abs() < 1e-12);
        }
    }

    #[test]
    fn contracting_radius_integrates_front_law() {
        // oracle: rho' = -M |D phi^+| from the closed forms, checked by differencing rho
        for n in [2, 3, 5] {
            let data =
                BoundaryData::new(|t: f64| 1.0 + 0.5 * t.sin()).with_cumulative(|t: f64| t + 0.5 * (1.0 - t.cos()));
            let b = RadialContracting::new(n, 1.5, 2.0, data).unwrap();
            let t0 = b.t0();
            for k in 1..10 {
                let t = t0 * k as f64 / 10.0;
                let h = 1e-6;
                let fd = (b.radius(t + h).unwrap() - b.radius(t - h).unwrap()) / (2.0 * h);
                let exact = b.radius_rate(t).unwrap();
                assert!((fd - exact).abs() < 1e-4 * exact.abs(), "n = {n}, t = {t}");
            }
        }
    }

    #[test]
    fn contracting_monotone_on_grid() {
        let b = RadialContracting::new(3, 1.0, 1.0, BoundaryData::constant(1.0)).unwrap();
        let t0 = b.t0();
        assert!((t0 + 1.0 / 6.0).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let t = t0 * (1.0 - i as f64 / 101.0);
            let rho = b.radius(t).unwrap();
            assert!(rho < prev && rho > 0.0 && rho < 1.0);
            assert!(b.radius_residual(t).unwrap() <= 1e-10);
            prev = rho;
        }
    }

    #[test]
    fn quadrature_cumulative_matches_exact() {
        let exact = RadialContracting::new(
            2,
            1.0,
            1.0,
            BoundaryData::new(|t: f64| 2.0 + t).with_cumulative(|t| 2.0 * t + 0.5 * t * t),
        )
        .unwrap();
        let quad = RadialContracting::new(2, 1.0, 1.0, BoundaryData::new(|t: f64| 2.0 + t)).unwrap();
        let a = exact.radius(-0.05).unwrap();
        let b = quad.radius(-0.05).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn scalar_formulas() {
        assert!((nondegeneracy_bound(2, 1.0, 1.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((nondegeneracy_bound(2, 1.0, 2.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(nondegeneracy_bound(2, 1.0, 1.0, 1e300) < 1e-299);
        assert_eq!(expansion_radius(2, 1.0, 1.0, 1.0), 2.0);
        assert_eq!(expansion_radius(2, 1.0, 1.0, 0.0), 0.0);
        assert!((expansion_radius(3, 2.0, 1.0, 1.0) - 12f64.sqrt()).abs() < 1e-15);
        // mu^2/(2nMA) = ln 2 with n = 1, M = 1, mu^2 = 2 A ln 2
        let a = 0.5;
        let mu = (2.0 * a * 2f64.ln()).sqrt();
        assert!(rational_bound_check(1, 1.0, mu, 0.999, a, 1.0));
        assert!(!rational_bound_check(1, 1.0, mu, 1.001, a, 1.0));
        assert!(rational_bound_check(2, 1.0, 1.0, 0.0, 1.0, 1.0));
        assert!(!rational_bound_check(2, 1.0, 1.0, 1e-3, 1.0, 1e-12));
    }

    #[test]
    fn closing_examples() {
        let one = BoundaryData::constant(1.0);
        assert!(closing_criterion(2, 1.0, 1.0, &one, 0.0, 0.2));
        assert!(!closing_criterion(2, 1.0, 1.0, &one, 0.0, 0.3));
        let quad = BoundaryData::new(|_| 1.0);
        assert!(closing_criterion(2, 1.0, 1.0, &quad, 1.0, 1.2));
        assert!(!closing_criterion(2, 1.0, 1.0, &quad, 1.0, 1.3));
    }

    #[test]
    fn thin_cylinder_examples() {
        let (v, l) = thin_cylinder_phi(0.0, 0.0, 2);
        assert!((v + 0.5).abs() < 1e-15 && (l + 0.5).abs() < 1e-15);
        let (_, l) = thin_cylinder_phi(0.0, 0.0, 5);
        assert!((l + 0.2).abs() < 1e-15);
        let (_, l) = thin_cylinder_phi(1.3, PI / 2.0, 3);
        assert!(l.abs() < 1e-15);
        let r = thin_cylinder_margin(2, 1.0, 1.0, 0.1);
        assert!((r - (1.0 - 6.0 * 2f64.sqrt() / PI * 0.3)).abs() < 1e-15);
        assert!((r - 0.189_715).abs() < 1e-6);
    }

    #[test]
    fn thin_cylinder_laplacian_matches_finite_differences() {
        // oracle: 5-point Laplacian of the value in n dimensions, x' along e_1 and e_2
        for n in [2, 3, 4] {
            let f = |x: &[f64]| {
                let r2: f64 = x[..n - 1].iter().map(|v| v * v).sum();
                thin_cylinder_phi(r2.sqrt(), x[n - 1], n).0
            };
            let mut x = vec![0.0; n];
            x[0] = 0.7;
            if n > 2 {
                x[1] = -0.4;
            }
            x[n - 1] = 0.3;
            let h = 1e-4;
            let mut lap = 0.0;
            for i in 0..n {
                let mut p = x.clone();
                let mut m = x.clone();
                p[i] += h;
                m[i] -= h;
                lap += (f(&p) - 2.0 * f(&x) + f(&m)) / (h * h);
            }
            let r = x[..n - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
            let exact = thin_cylinder_phi(r, x[n - 1], n).1;
            assert!((lap - exact).abs() < 1e-5, "n = {n}: {lap} vs {exact}");
        }
    }

    #[test]
    fn radial_perturbation_examples() {
        let p = radial_perturbation(3).unwrap();
        assert!((p.b + 5.0 / 3.0).abs() < 1e-15 && (p.a - 11.0 / 6.0).abs() < 1e-15);
        assert!((p.phi(2.0).0 - 1.0).abs() < 1e-14);
        assert!((p.phi(1.0).0 - 6.0).abs() < 1e-14);
        assert!((p.phi(1.5).0 - 18.0 / 13.0).abs() < 1e-14);
        assert!(p.min_residual(100) >= -1e-9);
        assert!(matches!(radial_perturbation(2), Err(BarrierError::Unsupported(2))));
        // rho > 5 on the inner unit-width shell, rho = 1 on the outer sphere
        assert!(p.rho(p.big_r + 1.0).0 > 5.0);
        assert!((p.rho(2.0 * p.big_r).0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radial_perturbation_higher_dimensions() {
        for n in 3..9 {
            let p = radial_perturbation(n).unwrap();
            assert!((p.phi(2.0).0 - 1.0).abs() < 1e-12 && (p.phi(1.0).0 - 6.0).abs() < 1e-12);
            assert!(p.min_residual(1000) >= -1e-9, "n = {n}");
            assert!(p.rho(p.big_r + 1.0).0 > 5.0);
        }
    }

    fn perturbed(n: usize, big_m: f64, mu: f64, delta: f64, kappa: f64) -> PerturbedContracting {
        let data = BoundaryData::constant(1.0 + delta);
        PerturbedContracting {
            base: RadialContracting::new(n, big_m + delta, mu, data).unwrap(),
            kappa,
        }
    }

    fn front_and_interior_samples(f: &PerturbedContracting, n: usize) -> Vec<(Vec<f64>, f64)> {
        let t0 = f.base.t0();
        let mut out = Vec::new();
        for i in 1..20 {
            let t = t0 * i as f64 / 20.0;
            let rho = f.base.radius(t).unwrap();
            for j in 0..16 {
                let ang = 2.0 * PI * j as f64 / 16.0;
                for scale in [1.0, 1.2, 1.5] {
                    let radius = (rho * scale).min(f.base.mu * 0.999);
                    let mut x = vec![0.0; n];
                    x[0] = radius * ang.cos();
                    x[1] = radius * ang.sin();
                    out.push((x, t));
                }
            }
        }
        out
    }

    #[test]
    fn perturbed_contracting_is_superbarrier() {
        let (big_m, delta) = (1.0, 0.1);
        for n in [2, 3] {
            let f = perturbed(n, big_m, 1.0, delta, 1e-3);
            let samples = front_and_interior_samples(&f, n);
            let rep = check_superbarrier(&f, &|_, _| big_m, &samples, 1e-4);
            assert!(rep.pass(), "{rep:?}");
            assert!(rep.check("front_velocity").unwrap().points > 0);
            assert!(rep.check("interior_superharmonic").unwrap().points > 0);
            // a threshold above the interior margin 2 n kappa must fail
            let rep = check_superbarrier(&f, &|_, _| big_m, &samples, 1.0);
            assert!(!rep.pass());
        }
    }

    #[test]
    fn perturbed_front_margin_closed_form() {
        // margin = delta |Dphi|^2 + 2 kappa rho |Dphi| (M - delta) - 4 M kappa^2 rho^2
        let (big_m, delta, kappa) = (1.0, 0.1, 1e-2);
        let f = perturbed(3, big_m, 1.0, delta, kappa);
        let t = 0.5 * f.base.t0();
        let rho = f.base.radius(t).unwrap();
        let g = f.base.front_gradient(t).unwrap();
        let x = [rho, 0.0, 0.0];
        let grad = f.gradient(&x, t);
        let observed = f.time_derivative(&x, t) - big_m * dot(&grad, &grad);
        let expected =
            delta * g * g + 2.0 * kappa * rho * g * (big_m - delta) - 4.0 * big_m * kappa * kappa * rho * rho;
        assert!(
            (observed - expected).abs() < 1e-9 * expected.abs().max(1.0),
            "{observed} vs {expected}"
        );
    }

    #[test]
    fn planar_wave_is_not_superbarrier() {
        let p = PlanarWave::new(vec![1.0, 0.0], 3.0).unwrap();
        let samples: Vec<(Vec<f64>, f64)> = (0..10).map(|i| (vec![-3.0 + 0.5 * i as f64, 0.0], 1.0)).collect();
        let rep = check_superbarrier(&p, &|_, _| 2.0, &samples, 1e-3);
        assert!(!rep.check("interior_superharmonic").unwrap().pass);
        assert!(rep.check("front_velocity").unwrap().pass);
    }

    proptest! {
        #[test]
        fn expanding_fbc_residual(n in 2usize..7, a in 0.05f64..0.95, k in 0.1f64..10.0, m in 0.1f64..10.0, t in 0.01f64..10.0) {
            let b = expanding_barrier(n, m, k, a).unwrap();
            prop_assert!(b.check_fbc(t).unwrap() <= 1e-8);
        }

        #[test]
        fn thin_cylinder_superharmonic(n in 2usize..8, r in 0.0f64..10.0, u in -1.0f64..1.0) {
            let xn = u * (PI / 2.0 - 1e-3);
            prop_assert!(thin_cylinder_phi(r, xn, n).1 < 0.0);
        }
    }
}
