//! Control-signal time series and their analytic time derivatives.
//!
//! Three families are implemented: the microwave flux pulse with a
//! sine-ramp envelope, the Gaussian+DRAG charge pulse and the
//! unimodal/bimodal error-function flux pulses. Flux evaluators return the
//! external flux in radians together with its exact analytic derivative;
//! the charge evaluator returns the dimensionless offset charge.
//!
//! Pulse-local time runs over `0 <= t <= T_d`. The charge pulse carrier
//! accepts an explicit phase so virtual z-rotations can be folded in by the
//! program compiler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TWO_PI;

/// Microwave flux pulse `φ(t) = 2π(φ₀ + δ e(t) cos(2π ν_D t))` with the
/// piecewise sine-ramp envelope `e(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxMw {
    /// Flux offset φ₀/2π.
    pub phi0_frac: f64,
    /// Amplitude δ/2π.
    pub delta_frac: f64,
    /// Drive frequency in GHz.
    pub nu_d: f64,
    /// Rise/fall time in ns.
    pub t_rf: f64,
    /// Pulse duration in ns.
    pub t_d: f64,
}

/// Gaussian + DRAG charge pulse
/// `n(t) = a G(t) cos(2π ν_D t − φ) + b Ġ(t) sin(2π ν_D t − φ)` with the
/// edge-zeroed Gaussian envelope `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeMp {
    /// Dimensionless main amplitude.
    pub a: f64,
    /// DRAG amplitude in ns (multiplies Ġ).
    pub b: f64,
    /// Drive frequency in GHz.
    pub nu_d: f64,
    /// Envelope width in ns.
    pub sigma: f64,
    /// Pulse duration in ns.
    pub t_d: f64,
    /// Carrier phase in rad.
    pub phase: f64,
}

/// Unimodal / bimodal (net-zero) error-function flux pulses, centered in
/// their `T_d` window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxErf {
    /// Amplitude δ/2π.
    pub delta_frac: f64,
    /// Flank width σ in ns.
    pub sigma: f64,
    /// Pulse time (plateau span) in ns.
    pub t_p: f64,
    /// Pulse duration (window incl. buffer) in ns.
    pub t_d: f64,
    /// Net-zero (bimodal) variant when true.
    pub bimodal: bool,
}

/// Any flux control signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum FluxPulse {
    FluxMw(FluxMw),
    FluxUmp(FluxErf),
    FluxBmp(FluxErf),
}

impl FluxMw {
    pub fn validate(&self) -> Result<()> {
        if self.t_d <= 0.0 {
            return Err(Error::config("flux_mw: T_d must be positive"));
        }
        if self.t_rf < 0.0 || self.t_rf > self.t_d / 2.0 {
            return Err(Error::config("flux_mw: require 0 <= T_rf <= T_d/2"));
        }
        Ok(())
    }

    /// Envelope and its derivative.
    fn envelope(&self, t: f64) -> (f64, f64) {
        if self.t_rf == 0.0 {
            return (1.0, 0.0);
        }
        let lam = std::f64::consts::PI / (2.0 * self.t_rf);
        let dt = self.t_d - self.t_rf;
        if t < self.t_rf {
            ((lam * t).sin(), lam * (lam * t).cos())
        } else if t <= dt {
            (1.0, 0.0)
        } else {
            let x = std::f64::consts::FRAC_PI_2 + lam * (t - dt);
            (x.sin(), lam * x.cos())
        }
    }

    /// Flux in rad and its time derivative in rad/ns at pulse-local `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (e, edot) = self.envelope(t);
        let wc = TWO_PI * self.nu_d;
        let (c, s) = ((wc * t).cos(), (wc * t).sin());
        let phi = TWO_PI * (self.phi0_frac + self.delta_frac * e * c);
        let phidot = TWO_PI * self.delta_frac * (edot * c - e * wc * s);
        (phi, phidot)
    }
}

impl ChargeMp {
    pub fn validate(&self) -> Result<()> {
        if self.t_d <= 0.0 {
            return Err(Error::config("charge_mp: T_d must be positive"));
        }
        if self.sigma <= 0.0 {
            return Err(Error::config("charge_mp: sigma must be positive"));
        }
        Ok(())
    }

    /// Edge-zeroed Gaussian `G(t) = [g(t) − g(0)] / [g(T_d/2) − g(0)]` and
    /// its derivative.
    pub fn envelope(&self, t: f64) -> (f64, f64) {
        let c = self.t_d / 2.0;
        let g = |x: f64| (-(x - c).powi(2) / (2.0 * self.sigma * self.sigma)).exp();
        let g0 = g(0.0);
        let denom = 1.0 - g0;
        let gt = g(t);
        let gdot = -(t - c) / (self.sigma * self.sigma) * gt;
        ((gt - g0) / denom, gdot / denom)
    }

    /// Offset charge `n(t)` (dimensionless) at pulse-local `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let (g, gdot) = self.envelope(t);
        let arg = TWO_PI * self.nu_d * t - self.phase;
        self.a * g * arg.cos() + self.b * gdot * arg.sin()
    }
}

impl FluxErf {
    pub fn validate(&self) -> Result<()> {
        if self.t_d <= 0.0 {
            return Err(Error::config("flux erf pulse: T_d must be positive"));
        }
        if self.t_p <= 0.0 || self.t_p > self.t_d {
            return Err(Error::config("flux erf pulse: require 0 < T_p <= T_d"));
        }
        if self.sigma <= 0.0 {
            return Err(Error::config("flux erf pulse: sigma must be positive"));
        }
        Ok(())
    }

    /// Flux deviation from the offset, in rad, plus its derivative. The
    /// pulse formulas are evaluated at `t' = t − (T_d − T_p)/2` so the
    /// plateau sits centered in the window.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let tp = t - (self.t_d - self.t_p) / 2.0;
        let s2 = std::f64::consts::SQRT_2 * self.sigma;
        let amp = TWO_PI * self.delta_frac / 2.0;
        // d/dt erf(x/s2) = 2/(sqrt(pi) s2) exp(-(x/s2)^2)
        let gauss = |x: f64| 2.0 / (std::f64::consts::PI.sqrt() * s2) * (-(x / s2) * (x / s2)).exp();
        if self.bimodal {
            let phi = amp * (erf(tp / s2) - 2.0 * erf((tp - self.t_p / 2.0) / s2) + erf((tp - self.t_p) / s2));
            let phidot = amp * (gauss(tp) - 2.0 * gauss(tp - self.t_p / 2.0) + gauss(tp - self.t_p));
            (phi, phidot)
        } else {
            let phi = amp * (erf(tp / s2) - erf((tp - self.t_p) / s2));
            let phidot = amp * (gauss(tp) - gauss(tp - self.t_p));
            (phi, phidot)
        }
    }
}

impl FluxPulse {
    pub fn validate(&self) -> Result<()> {
        match self {
            FluxPulse::FluxMw(p) => p.validate(),
            FluxPulse::FluxUmp(p) | FluxPulse::FluxBmp(p) => p.validate(),
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            FluxPulse::FluxMw(p) => p.t_d,
            FluxPulse::FluxUmp(p) | FluxPulse::FluxBmp(p) => p.t_d,
        }
    }

    /// Total flux in rad (offset included) and its derivative at
    /// pulse-local `t`. `phi0_frac` is the subsystem's flux offset; for the
    /// microwave variant it must agree with the pulse's own offset field.
    pub fn eval(&self, t: f64, phi0_frac: f64) -> Result<(f64, f64)> {
        match self {
            FluxPulse::FluxMw(p) => {
                if (p.phi0_frac - phi0_frac).abs() > 1e-12 {
                    return Err(Error::config(format!(
                        "flux_mw pulse offset {} does not match subsystem flux offset {}",
                        p.phi0_frac, phi0_frac
                    )));
                }
                Ok(p.eval(t))
            }
            FluxPulse::FluxUmp(p) | FluxPulse::FluxBmp(p) => {
                let (dphi, dphidot) = p.eval(t);
                Ok((TWO_PI * phi0_frac + dphi, dphidot))
            }
        }
    }
}

/// Error function. Maclaurin series for |x| <= 2 and the asymptotic
/// continued fraction of erfc (evaluated by backward recurrence) for the
/// tail; absolute error stays below 1e-14 on the real line.
pub fn erf(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    if ax > 6.5 {
        return x.signum();
    }
    if ax <= 2.0 {
        let x2 = x * x;
        let mut term = x * 2.0 / std::f64::consts::PI.sqrt();
        let mut sum = term;
        let mut n = 0u32;
        loop {
            n += 1;
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + (2/2)/(x + ...)))
        let mut f = 0.0f64;
        for k in (1..=80u32).rev() {
            f = (k as f64 / 2.0) / (ax + f);
        }
        let erfc = (-ax * ax).exp() / std::f64::consts::PI.sqrt() / (ax + f);
        (1.0 - erfc) * x.signum()
    }
}
