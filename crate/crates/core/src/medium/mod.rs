//! Space-time periodic media `g(x, t)`.
//!
//! A [`Medium`] is a parsed expression over `x1..xn` and `t`, assumed
//! periodic with respect to the integer lattice in all `n + 1` variables.
//! Bounds and Lipschitz constants are estimated by sampling the unit cell;
//! callers needing certified values should supply them directly.

mod expr;

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{parse, BinOp, Expr, Func, ParseError, Var};

#[derive(Debug, Error)]
pub enum MediumError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("spatial dimension must be at least 1")]
    ZeroDimension,
    #[error("unknown builtin medium `{0}`")]
    UnknownBuiltin(String),
    #[error("medium is not positive: g = {value} at x = {x:?}, t = {t}")]
    NotPositive { x: Vec<f64>, t: f64, value: f64 },
    #[error("medium evaluated to a non-finite value at x = {x:?}, t = {t}")]
    NonFinite { x: Vec<f64>, t: f64 },
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error("sampling resolution must be at least 8, got {0}")]
    BadResolution(usize),
    #[error("invalid medium config: {0}")]
    Config(String),
}

/// Names and sources of the shipped media.
pub const BUILTINS: &[(&str, usize, &str)] = &[
    // pinned traveling waves, r(q) = 1 on [1/2, 1]
    ("pinning", 1, "sin(pi*(x1-t))^2+1"),
    // same medium moving against the front; no plateau
    ("reverse", 1, "sin(pi*(-x1-t))^2+1"),
    // several pinning intervals
    ("fig2", 1, "sin(2*pi*(x1-3*t))*sin(2*pi*(2*t+x1))+11/10"),
    // time independent; effective speed sqrt(2) q
    ("harmonic", 1, "1+sin(pi*x1)^2"),
    ("constant", 1, "1"),
];

/// A periodic medium. Immutable after construction; evaluation is
/// reentrant.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    expr: Expr,
    dim: usize,
    source: String,
}

impl Medium {
    pub fn parse(src: &str, dim: usize) -> Result<Medium, MediumError> {
        if dim == 0 {
            return Err(MediumError::ZeroDimension);
        }
        let expr = parse(src, dim)?;
        Ok(Medium {
            expr,
            dim,
            source: src.to_string(),
        })
    }

    pub fn builtin(name: &str) -> Result<Medium, MediumError> {
        let (_, dim, src) = BUILTINS
            .iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| MediumError::UnknownBuiltin(name.to_string()))?;
        Medium::parse(src, *dim)
    }

    pub fn constant(c: f64) -> Medium {
        Medium {
            expr: Expr::Num(c),
            dim: 1,
            source: format!("{c:?}"),
        }
    }

    /// Same expression viewed in a higher spatial dimension; extra
    /// coordinates are ignored.
    pub fn with_dim(&self, dim: usize) -> Medium {
        Medium {
            dim: dim.max(self.expr.spatial_extent()).max(1),
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_time_independent(&self) -> bool {
        !self.expr.uses_time()
    }

    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.expr.eval(x, t)
    }

    /// `g(x/eps, t/eps)`.
    pub fn eval_scaled(&self, eps: f64, x: &[f64], t: f64) -> Result<f64, MediumError> {
        if !(eps > 0.0) {
            return Err(MediumError::BadScale(eps));
        }
        let v = match x.len() {
            1 => self.eval(&[x[0] / eps], t / eps),
            _ => {
                let xs: Vec<f64> = x.iter().map(|v| v / eps).collect();
                self.eval(&xs, t / eps)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(MediumError::NonFinite { x: x.to_vec(), t })
        }
    }

    /// Sampled `m`, `M` and Lipschitz constant over the unit cell.
    ///
    /// The grid has `resolution` points per axis. The extreme samples are
    /// polished by a local zoom search, so the reported range is never
    /// wider than the true range. `L` is the largest forward-difference
    /// gradient norm on the grid.
    pub fn estimate_bounds(&self, resolution: usize) -> Result<MediumBounds, MediumError> {
        if resolution < 8 {
            return Err(MediumError::BadResolution(resolution));
        }
        let axes = self.dim + 1;
        let h = 1.0 / resolution as f64;
        let total = resolution.pow(axes as u32);
        let mut values = vec![0.0; total];
        let mut point = vec![0.0; axes];
        for (k, slot) in values.iter_mut().enumerate() {
            unflatten(k, resolution, h, &mut point);
            let v = self.eval(&point[..self.dim], point[self.dim]);
            check_sample(v, &point, self.dim)?;
            *slot = v;
        }
        let (mut kmin, mut kmax) = (0, 0);
        let mut lip: f64 = 0.0;
        let stride = |axis: usize| resolution.pow(axis as u32);
        let mut idx = vec![0usize; axes];
        for k in 0..total {
            if values[k] < values[kmin] {
                kmin = k;
            }
            if values[k] > values[kmax] {
                kmax = k;
            }
            let mut rem = k;
            for i in idx.iter_mut() {
                *i = rem % resolution;
                rem /= resolution;
            }
            let mut sq = 0.0;
            for (axis, &i) in idx.iter().enumerate() {
                let s = stride(axis);
                let nb = if i + 1 == resolution {
                    k + s - resolution * s
                } else {
                    k + s
                };
                let d = (values[nb] - values[k]) / h;
                sq += d * d;
            }
            lip = lip.max(sq.sqrt());
        }
        unflatten(kmin, resolution, h, &mut point);
        let m = self.zoom_extreme(&point, h, -1.0)?;
        unflatten(kmax, resolution, h, &mut point);
        let big_m = self.zoom_extreme(&point, h, 1.0)?;
        if m <= 0.0 {
            return Err(MediumError::NotPositive {
                x: point[..self.dim].to_vec(),
                t: point[self.dim],
                value: m,
            });
        }
        Ok(MediumBounds {
            m,
            big_m,
            lip,
            resolution,
        })
    }

    /// Pattern search around `start` for the min (`sign < 0`) or max.
    fn zoom_extreme(&self, start: &[f64], h: f64, sign: f64) -> Result<f64, MediumError> {
        let axes = start.len();
        let mut best = start.to_vec();
        let mut best_v = sign * self.eval(&best[..self.dim], best[self.dim]);
        let mut step = h;
        let mut trial = best.clone();
        while step > 1e-10 {
            let mut improved = false;
            for axis in 0..axes {
                for dir in [-1.0, 1.0] {
                    trial.copy_from_slice(&best);
                    trial[axis] += dir * step;
                    let v = self.eval(&trial[..self.dim], trial[self.dim]);
                    check_sample(v, &trial, self.dim)?;
                    if sign * v > best_v {
                        best_v = sign * v;
                        best.copy_from_slice(&trial);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Ok(sign * best_v)
    }

    /// Largest `|g(x + k, t + l) - g(x, t)|` over random points in
    /// `[-10, 10]^{n+1}` and lattice shifts with entries in `-3..=3`.
    pub fn check_periodicity(&self, trials: usize, seed: u64) -> PeriodicityReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_dev: f64 = 0.0;
        let mut worst = None;
        let mut x = vec![0.0; self.dim];
        let mut xs = vec![0.0; self.dim];
        for _ in 0..trials.max(1) {
            for v in x.iter_mut() {
                *v = rng.gen_range(-10.0..10.0);
            }
            let t = rng.gen_range(-10.0..10.0);
            let l = rng.gen_range(-3..=3) as f64;
            for (s, v) in xs.iter_mut().zip(&x) {
                *s = v + rng.gen_range(-3..=3) as f64;
            }
            let dev = (self.eval(&xs, t + l) - self.eval(&x, t)).abs();
            if !(dev <= max_dev) {
                max_dev = if dev.is_nan() { f64::INFINITY } else { dev };
                let mut p = x.clone();
                p.push(t);
                worst = Some(p);
            }
        }
        PeriodicityReport {
            trials: trials.max(1),
            max_deviation: max_dev,
            worst_point: worst,
        }
    }
}

impl fmt::Display for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)
    }
}

fn unflatten(mut k: usize, resolution: usize, h: f64, point: &mut [f64]) {
    for p in point.iter_mut() {
        *p = (k % resolution) as f64 * h;
        k /= resolution;
    }
}

fn check_sample(v: f64, point: &[f64], dim: usize) -> Result<(), MediumError> {
    if !v.is_finite() {
        return Err(MediumError::NonFinite {
            x: point[..dim].to_vec(),
            t: point[dim],
        });
    }
    if v <= 0.0 {
        return Err(MediumError::NotPositive {
            x: point[..dim].to_vec(),
            t: point[dim],
            value: v,
        });
    }
    Ok(())
}

/// Sampled `0 < m <= g <= M` and Lipschitz constant `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumBounds {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    #[serde(rename = "L")]
    pub lip: f64,
    /// Samples per period axis used for the estimate.
    pub resolution: usize,
}

impl MediumBounds {
    pub fn exact(m: f64, big_m: f64, lip: f64) -> MediumBounds {
        MediumBounds {
            m,
            big_m,
            lip,
            resolution: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicityReport {
    pub trials: usize,
    pub max_deviation: f64,
    /// `(x..., t)` where the largest deviation was seen.
    pub worst_point: Option<Vec<f64>>,
}

/// A medium as written in config files: either an expression with its
/// dimension or the name of a builtin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MediumSpec {
    Expr { dim: usize, expr: String },
    Builtin { builtin: String },
}

impl MediumSpec {
    pub fn build(&self) -> Result<Medium, MediumError> {
        match self {
            MediumSpec::Expr { dim, expr } => Medium::parse(expr, *dim),
            MediumSpec::Builtin { builtin } => Medium::builtin(builtin),
        }
    }

    /// Resolves a command-line reference: `builtin:<name>`, a bare builtin
    /// name, or a path to a JSON file holding a [`MediumSpec`].
    pub fn resolve(reference: &str) -> Result<Medium, MediumError> {
        if let Some(name) = reference.strip_prefix("builtin:") {
            return Medium::builtin(name);
        }
        let path = Path::new(reference);
        if path.exists() {
            let text =
                std::fs::read_to_string(path).map_err(|e| MediumError::Config(format!("{}: {e}", path.display())))?;
            let spec: MediumSpec =
                serde_json::from_str(&text).map_err(|e| MediumError::Config(format!("{}: {e}", path.display())))?;
            return spec.build();
        }
        Medium::builtin(reference)
    }
}

/// A medium field in a config file: a reference string as accepted by
/// [`MediumSpec::resolve`] or an inline spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MediumRef {
    Name(String),
    Spec(MediumSpec),
}

impl MediumRef {
    pub fn build(&self) -> Result<Medium, MediumError> {
        match self {
            MediumRef::Name(r) => MediumSpec::resolve(r),
            MediumRef::Spec(s) => s.build(),
        }
    }
}
