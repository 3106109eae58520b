//! Lambert-W time rescalings `f_sub`, `f_super` and the shift `theta`.

use std::f64::consts::E;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimescaleError {
    #[error("lambert W0 is undefined below -1/e, got {0}")]
    BelowBranch(f64),
    #[error("invalid parameters: {0}")]
    Param(String),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("t = {t} is at or beyond the horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
}

const INV_E: f64 = 1.0 / E;

/// Principal branch `W0` on `[-1/e, inf)`.
pub fn lambert_w0(x: f64) -> Result<f64, TimescaleError> {
    if x.is_nan() {
        return Err(TimescaleError::BelowBranch(x));
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    // e x + 1 with one rounding; tiny negative values are rounding noise of -1/e
    let gap = E.mul_add(x, 1.0);
    if gap < -1e-15 {
        return Err(TimescaleError::BelowBranch(x));
    }
    if x < 0.0 && gap < 0.25 {
        return Ok(w0_from_gap(gap.max(0.0)));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let guess = if x.abs() < 0.1 {
        x - x * x + 1.5 * x * x * x
    } else if x > 3.0 {
        let l = x.ln();
        l - l.ln()
    } else {
        (1.0 + x).ln() * 0.8
    };
    Ok(halley(x, guess))
}

/// `W0(e^l)`, usable when `e^l` overflows.
pub fn lambert_w0_exp(l: f64) -> f64 {
    if l < 500.0 {
        // lambert_w0 only errors below -1/e, impossible for e^l
        return lambert_w0(l.exp()).unwrap_or(f64::NAN);
    }
    // solve w + ln w = l by Newton
    let mut w = l - l.ln();
    for _ in 0..50 {
        let step = (w + w.ln() - l) / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 1e-16 * w {
            break;
        }
    }
    w
}

/// `W0(x)` given only `gap = e x + 1 >= 0`, accurate near the branch point.
pub fn w0_from_gap(gap: f64) -> f64 {
    let p = (2.0 * gap).sqrt();
    let series = -1.0
        + p * (1.0
            + p * (-1.0 / 3.0
                + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * (769.0 / 17280.0 + p * (-221.0 / 8505.0))))));
    if p < 1e-3 {
        return series;
    }
    let x = (gap - 1.0) * INV_E;
    halley(x, series)
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        if !step.is_finite() {
            break;
        }
        w -= step;
        if step.abs() <= 1e-16 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Parameters of the subsolution rescaling, `xi = gamma + lambda - alpha gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubScaling {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl SubScaling {
    pub fn new(alpha: f64, gamma: f64, lambda: f64) -> Result<SubScaling, TimescaleError> {
        if !(alpha > 0.0 && gamma > 0.0 && lambda >= 0.0) || !(alpha * gamma).is_finite() || !lambda.is_finite() {
            return Err(TimescaleError::Param(format!(
                "need alpha > 0, gamma > 0, lambda >= 0; got {alpha}, {gamma}, {lambda}"
            )));
        }
        Ok(SubScaling { alpha, gamma, lambda })
    }

    pub fn xi(&self) -> f64 {
        self.gamma + self.lambda - self.alpha * self.gamma
    }

    pub fn is_identity(&self) -> bool {
        self.xi() <= 0.0
    }

    /// `W` evaluated at `(xi/ag) e^{(t + xi)/ag}`.
    fn w(&self, t: f64) -> f64 {
        let ag = self.alpha * self.gamma;
        let xi = self.xi();
        lambert_w0_exp((xi / ag).ln() + (t + xi) / ag)
    }

    pub fn eval(&self, t: f64) -> Result<f64, TimescaleError> {
        check_time(t)?;
        if self.is_identity() || t == 0.0 {
            return Ok(t);
        }
        let ag = self.alpha * self.gamma;
        Ok(t + self.xi() - ag * self.w(t))
    }

    /// `f'(t) = alpha gamma / h(t)`.
    pub fn derivative(&self, t: f64) -> Result<f64, TimescaleError> {
        check_time(t)?;
        if self.is_identity() {
            return Ok(1.0);
        }
        Ok(1.0 / (1.0 + self.w(t)))
    }

    /// `h(t) = alpha gamma (1 + W)`, the solution of `h h'/(h - alpha gamma) = 1`.
    pub fn h(&self, t: f64) -> Result<f64, TimescaleError> {
        check_time(t)?;
        let ag = self.alpha * self.gamma;
        if self.is_identity() {
            return Ok(ag);
        }
        Ok(ag * (1.0 + self.w(t)))
    }
}

/// Parameters of the supersolution rescaling, `eta = gamma - lambda - alpha gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuperScaling {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl SuperScaling {
    pub fn new(alpha: f64, gamma: f64, lambda: f64) -> Result<SuperScaling, TimescaleError> {
        if !(alpha > 0.0 && gamma > lambda && lambda >= 0.0) || !(alpha * gamma).is_finite() {
            return Err(TimescaleError::Param(format!(
                "need alpha > 0, gamma > lambda >= 0; got {alpha}, {gamma}, {lambda}"
            )));
        }
        Ok(SuperScaling { alpha, gamma, lambda })
    }

    pub fn eta(&self) -> f64 {
        self.gamma - self.lambda - self.alpha * self.gamma
    }

    pub fn is_identity(&self) -> bool {
        self.eta() >= 0.0
    }

    /// Time at which the argument of `W` reaches `-1/e`; infinite on the identity branch.
    pub fn t_max(&self) -> f64 {
        if self.is_identity() {
            return f64::INFINITY;
        }
        let ag = self.alpha * self.gamma;
        let eta = self.eta();
        ag * ((ag / -eta).ln() - 1.0) - eta
    }

    fn w(&self, t: f64) -> Result<f64, TimescaleError> {
        let horizon = self.t_max();
        if t >= horizon {
            return Err(TimescaleError::BeyondHorizon { t, horizon });
        }
        // e z + 1 = 1 - e^{(t - t_max)/ag}, exact near the singularity
        let gap = -((t - horizon) / (self.alpha * self.gamma)).exp_m1();
        Ok(w0_from_gap(gap))
    }

    pub fn eval(&self, t: f64) -> Result<f64, TimescaleError> {
        check_time(t)?;
        if self.is_identity() || t == 0.0 {
            return Ok(t);
        }
        let w = self.w(t)?;
        Ok(t + self.eta() - self.alpha * self.gamma * w)
    }

    pub fn derivative(&self, t: f64) -> Result<f64, TimescaleError> {
        check_time(t)?;
        if self.is_identity() {
            return Ok(1.0);
        }
        Ok(1.0 / (1.0 + self.w(t)?))
    }
}

/// `theta(t; lambda) = t - gamma W(-(lambda/gamma) e^{(t - lambda)/gamma})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaShift {
    pub gamma: f64,
    pub lambda: f64,
}

impl ThetaShift {
    pub fn new(gamma: f64, lambda: f64) -> Result<ThetaShift, TimescaleError> {
        if !(gamma > 0.0 && lambda >= 0.0 && lambda <= gamma) || !gamma.is_finite() {
            return Err(TimescaleError::Param(format!(
                "need gamma > 0 and 0 <= lambda <= gamma; got {gamma}, {lambda}"
            )));
        }
        Ok(ThetaShift { gamma, lambda })
    }

    /// `gamma (ln(gamma/lambda) + lambda/gamma - 1)`; infinite for `lambda = 0`.
    pub fn t_lambda(&self) -> f64 {
        if self.lambda == 0.0 {
            return f64::INFINITY;
        }
        let g = self.gamma;
        g * ((g / self.lambda).ln() + self.lambda / g - 1.0)
    }

    fn w(&self, t: f64) -> Result<f64, TimescaleError> {
        let horizon = self.t_lambda();
        // allow the endpoint up to rounding
        if t > horizon + 1e-12 * (1.0 + horizon) {
            return Err(TimescaleError::BeyondHorizon { t, horizon });
        }
        let gap = -((t - horizon) / self.gamma).exp_m1();
        Ok(w0_from_gap(gap.max(0.0)))
    }

    pub fn eval(&self, t: f64) -> Result<f64, TimescaleError> {
        check_time(t)?;
        if self.lambda == 0.0 {
            return Ok(t);
        }
        if t == 0.0 {
            return Ok(self.lambda);
        }
        Ok(t - self.gamma * self.w(t)?)
    }

    /// `theta' = 1/(1 + W) >= 1`; infinite at `t_lambda`.
    pub fn derivative(&self, t: f64) -> Result<f64, TimescaleError> {
        check_time(t)?;
        if self.lambda == 0.0 {
            return Ok(1.0);
        }
        Ok(1.0 / (1.0 + self.w(t)?))
    }
}

fn check_time(t: f64) -> Result<(), TimescaleError> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(TimescaleError::NegativeTime(t))
    }
}

pub fn f_sub(t: f64, s: &SubScaling) -> Result<f64, TimescaleError> {
    s.eval(t)
}

pub fn f_super(t: f64, s: &SuperScaling) -> Result<f64, TimescaleError> {
    s.eval(t)
}

pub fn theta_shift(t: f64, sh: &ThetaShift) -> Result<f64, TimescaleError> {
    sh.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn w_examples() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        // -1/e is not representable; the nearest double sits ~2e-17 above the
        // branch point, where W + 1 ~ sqrt(2 e dx) ~ 6e-9
        let gap = E.mul_add(-INV_E, 1.0);
        let w = lambert_w0(-INV_E).unwrap();
        assert!((w + 1.0 - (2.0 * gap).sqrt()).abs() < 1e-15);
        assert_eq!(w0_from_gap(0.0), -1.0);
        assert!(lambert_w0(-0.5).is_err());
        // omega constant
        assert!((lambert_w0(1.0).unwrap() - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!((lambert_w0_exp(1000.0) - lambert_w0_exp(1000.0).ln().mul_add(-1.0, 1000.0)).abs() < 1e-9);
    }

    #[test]
    fn w_inverts_on_grid() {
        for i in 0..=10_000 {
            let w = -1.0 + 11.0 * i as f64 / 10_000.0;
            let got = lambert_w0(w * w.exp()).unwrap();
            assert!(
                (got - w).abs() < 1e-9 || (w < -0.999 && (got - w).abs() < 1e-7),
                "w = {w}, got {got}"
            );
        }
    }

    #[test]
    fn w_relative_accuracy() {
        for x in [1e-300, 1e-10, 0.3, 2.0, 50.0, 1e10, 1e300, -0.3, -0.36] {
            let w = lambert_w0(x).unwrap();
            let back = w * w.exp();
            assert!(((back - x) / x).abs() < 1e-14, "x = {x}");
        }
    }

    #[test]
    fn f_sub_examples() {
        let s = SubScaling::new(0.5, 1.0, 0.1).unwrap();
        assert_eq!(s.eval(0.0).unwrap(), 0.0);
        let h = 1e-6;
        let fd = (s.eval(h).unwrap() - s.eval(0.0).unwrap()) / h;
        assert!((fd - 0.5 / 1.1).abs() < 1e-6);
        assert!((s.derivative(0.0).unwrap() - 0.5 / 1.1).abs() < 1e-14);
        let id = SubScaling::new(1.0, 1.0, 0.0).unwrap();
        assert!(id.is_identity());
        for t in [0.0, 1.0, 7.5] {
            assert_eq!(id.eval(t).unwrap(), t);
        }
        assert!(s.eval(-1.0).is_err());
        assert!(s.eval(1e6).unwrap().is_finite());
    }

    #[test]
    fn f_sub_ode_identity() {
        let s = SubScaling::new(0.4, 2.0, 0.3).unwrap();
        let ag = s.alpha * s.gamma;
        for i in 1..50 {
            let t = 0.2 * i as f64;
            let d = 1e-5;
            let h = s.h(t).unwrap();
            let hp = (s.h(t + d).unwrap() - s.h(t - d).unwrap()) / (2.0 * d);
            assert!((h * hp / (h - ag) - 1.0).abs() < 1e-8, "t = {t}");
            let fd = (s.eval(t + d).unwrap() - s.eval(t - d).unwrap()) / (2.0 * d);
            let exact = s.derivative(t).unwrap();
            assert!(((fd - exact) / exact).abs() < 1e-6);
            assert!((exact - ag / h).abs() < 1e-14);
        }
    }

    #[test]
    fn f_super_examples() {
        let s = SuperScaling::new(1.2, 1.0, 0.0).unwrap();
        let expected = 1.2 * (6f64.ln() - 1.0) + 0.2;
        assert!((s.t_max() - expected).abs() < 1e-14);
        assert!((s.t_max() - 1.150_111).abs() < 1e-6);
        // at t_max the W argument is exactly -1/e
        let eta = s.eta();
        let z = eta / 1.2 * ((s.t_max() + eta) / 1.2).exp();
        assert!((z + INV_E).abs() < 1e-15);
        assert_eq!(s.eval(0.0).unwrap(), 0.0);
        assert!(matches!(s.eval(s.t_max()), Err(TimescaleError::BeyondHorizon { .. })));
        let s = SuperScaling::new(1.5, 1.0, 0.2).unwrap();
        let h = 1e-7;
        let fd = (s.eval(h).unwrap() - s.eval(0.0).unwrap()) / h;
        assert!((fd - 1.5 / 0.8).abs() < 1e-5);
        assert!(SuperScaling::new(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn f_super_close_to_horizon() {
        let s = SuperScaling::new(2.0, 1.0, 0.1).unwrap();
        let tm = s.t_max();
        let mut prev = 0.0;
        for k in 1..12 {
            let t = tm - 10f64.powi(-k);
            let f = s.eval(t).unwrap();
            assert!(f.is_finite() && f >= t && f > prev);
            prev = f;
        }
    }

    #[test]
    fn f_super_tends_to_identity() {
        let t_end = 0.5;
        let mut last = f64::INFINITY;
        for k in 1..6 {
            let d = 10f64.powi(-k);
            let s = SuperScaling::new(1.0 + d, 1.0, d).unwrap();
            assert!(s.t_max() > t_end);
            let err = (0..=50)
                .map(|i| {
                    let t = t_end * i as f64 / 50.0;
                    (s.eval(t).unwrap() - t).abs()
                })
                .fold(0.0, f64::max);
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn theta_examples() {
        let sh = ThetaShift::new(1.0, 0.0).unwrap();
        assert_eq!(sh.eval(4.2).unwrap(), 4.2);
        let sh = ThetaShift::new(1.0, 1.0).unwrap();
        assert_eq!(sh.t_lambda(), 0.0);
        assert!((sh.eval(0.0).unwrap() - 1.0).abs() < 1e-12);
        let sh = ThetaShift::new(2.0, 0.5).unwrap();
        let tl = sh.t_lambda();
        assert!((sh.eval(tl).unwrap() - (tl + 2.0)).abs() < 1e-9);
        assert!((sh.eval(0.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(sh.eval(tl + 0.1).is_err());
    }

    proptest! {
        #[test]
        fn f_sub_shape(alpha in 0.05f64..0.99, gamma in 0.1f64..5.0, lambda in 0.0f64..2.0, t in 0.0f64..20.0) {
            let s = SubScaling::new(alpha, gamma, lambda).unwrap();
            let f = s.eval(t).unwrap();
            let d = s.derivative(t).unwrap();
            prop_assert!(f <= t + 1e-12);
            prop_assert!(d > 0.0 && d <= 1.0);
            prop_assert!(s.derivative(t + 0.1).unwrap() <= d + 1e-15);
        }

        #[test]
        fn f_super_shape(alpha in 1.01f64..4.0, gamma in 0.1f64..5.0, frac in 0.0f64..0.9, u in 0.0f64..0.999) {
            let s = SuperScaling::new(alpha, gamma, frac * gamma).unwrap();
            let t = u * s.t_max();
            let f = s.eval(t).unwrap();
            let d = s.derivative(t).unwrap();
            prop_assert!(f >= t - 1e-12);
            prop_assert!(d > 1.0);
            let t2 = t + 0.5 * (s.t_max() - t);
            prop_assert!(s.derivative(t2).unwrap() >= d);
        }

        #[test]
        fn theta_monotone(gamma in 0.1f64..5.0, frac in 0.01f64..1.0, u in 0.0f64..0.99) {
            let sh = ThetaShift::new(gamma, frac * gamma).unwrap();
            let tl = sh.t_lambda();
            let t = u * tl;
            let t2 = t + 0.5 * (tl - t);
            prop_assert!(sh.eval(t2).unwrap() >= sh.eval(t).unwrap());
            prop_assert!(sh.derivative(t).unwrap() >= 1.0);
        }
    }
}
