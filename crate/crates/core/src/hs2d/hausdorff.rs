//! Brute-force Hausdorff distance with an optional periodic axis.

use super::Hs2dError;

/// One periodic coordinate: `axis` wraps with period `period`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Periodic {
    pub axis: usize,
    pub period: f64,
}

fn dist2(a: &[f64], b: &[f64], periodic: Option<Periodic>) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            let mut d = (x - y).abs();
            if let Some(p) = periodic {
                if p.axis == i {
                    d = d.rem_euclid(p.period);
                    d = d.min(p.period - d);
                }
            }
            d * d
        })
        .sum()
}

fn directed(a: &[Vec<f64>], b: &[Vec<f64>], periodic: Option<Periodic>) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| dist2(p, q, periodic)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
        .sqrt()
}

/// `max(sup_a inf_b |a - b|, sup_b inf_a |a - b|)`.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>], periodic: Option<Periodic>) -> Result<f64, Hs2dError> {
    if a.is_empty() || b.is_empty() {
        return Err(Hs2dError::EmptySet);
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != d) {
        return Err(Hs2dError::Config("points must share one dimension".into()));
    }
    Ok(directed(a, b, periodic).max(directed(b, a, periodic)))
}
