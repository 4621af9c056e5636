//! Lapse `β(t, x)` and conformal factor `a(t)` of `g = -β² dt² + a(t)² δ`,
//! drawn from a fixed catalogue so runs are reproducible from their ids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lapse {
    Const(f64),
    /// `b0 + slope * x[axis]`
    Ramp { b0: f64, slope: f64, axis: usize },
    /// `b0 * (1 + amp * sin(omega * t))`
    Breathing { b0: f64, amp: f64, omega: f64 },
    /// `b0 + amp * exp(-|x - c|² / w²)`, centre `c` on the diagonal.
    Gauss { b0: f64, amp: f64, centre: f64, width: f64 },
    /// `b0 * (1 + amp * sin(2π x[axis] / period))`
    Wave { b0: f64, amp: f64, period: f64, axis: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Conformal {
    Const(f64),
    /// `a0 * (1 + rate * t)`
    Linear { a0: f64, rate: f64 },
    /// `a0 * exp(rate * t)`
    Exp { a0: f64, rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    pub beta: Lapse,
    pub conf: Conformal,
}

pub const LAPSE_IDS: &[&str] = &["unit", "ramp", "breathing", "gauss", "wave"];
pub const CONFORMAL_IDS: &[&str] = &["unit", "linear", "exp", "double"];

impl Default for MetricField {
    fn default() -> Self {
        Self::unit()
    }
}

impl MetricField {
    pub fn unit() -> Self {
        MetricField { beta: Lapse::Const(1.0), conf: Conformal::Const(1.0) }
    }

    pub fn new(beta: Lapse, conf: Conformal) -> Self {
        MetricField { beta, conf }
    }

    /// Look up catalogue entries by id.
    pub fn from_ids(beta_id: &str, conf_id: &str) -> Result<Self> {
        let beta = match beta_id {
            "unit" => Lapse::Const(1.0),
            "ramp" => Lapse::Ramp { b0: 1.0, slope: 0.1, axis: 0 },
            "breathing" => Lapse::Breathing { b0: 1.0, amp: 0.1, omega: 1.0 },
            "gauss" => Lapse::Gauss { b0: 1.0, amp: 0.2, centre: 0.5, width: 0.25 },
            "wave" => Lapse::Wave { b0: 1.0, amp: 0.2, period: 1.0, axis: 0 },
            other => return Err(Error::InvalidArgument(format!("unknown beta expression id '{other}'"))),
        };
        let conf = match conf_id {
            "unit" => Conformal::Const(1.0),
            "linear" => Conformal::Linear { a0: 1.0, rate: 0.1 },
            "exp" => Conformal::Exp { a0: 1.0, rate: 0.05 },
            "double" => Conformal::Const(2.0),
            other => return Err(Error::InvalidArgument(format!("unknown conformal expression id '{other}'"))),
        };
        Ok(MetricField { beta, conf })
    }

    pub fn beta(&self, t: f64, x: &[f64]) -> f64 {
        match self.beta {
            Lapse::Const(b) => b,
            Lapse::Ramp { b0, slope, axis } => b0 + slope * x.get(axis).copied().unwrap_or(0.0),
            Lapse::Breathing { b0, amp, omega } => b0 * (1.0 + amp * (omega * t).sin()),
            Lapse::Gauss { b0, amp, centre, width } => {
                let r2: f64 = x.iter().map(|xi| (xi - centre).powi(2)).sum();
                b0 + amp * (-r2 / (width * width)).exp()
            }
            Lapse::Wave { b0, amp, period, axis } => {
                let x = x.get(axis).copied().unwrap_or(0.0);
                b0 * (1.0 + amp * (2.0 * std::f64::consts::PI * x / period).sin())
            }
        }
    }

    pub fn dbeta_dt(&self, t: f64, _x: &[f64]) -> f64 {
        match self.beta {
            Lapse::Breathing { b0, amp, omega } => b0 * amp * omega * (omega * t).cos(),
            _ => 0.0,
        }
    }

    pub fn a(&self, t: f64) -> f64 {
        match self.conf {
            Conformal::Const(a) => a,
            Conformal::Linear { a0, rate } => a0 * (1.0 + rate * t),
            Conformal::Exp { a0, rate } => a0 * (rate * t).exp(),
        }
    }

    pub fn da_dt(&self, t: f64) -> f64 {
        match self.conf {
            Conformal::Const(_) => 0.0,
            Conformal::Linear { a0, rate } => a0 * rate,
            Conformal::Exp { a0, rate } => a0 * rate * (rate * t).exp(),
        }
    }

    pub fn is_static(&self) -> bool {
        !matches!(self.beta, Lapse::Breathing { .. }) && matches!(self.conf, Conformal::Const(_))
    }

    /// Check positivity of β and a on sample points.
    pub fn check_positive(&self, times: &[f64], points: &[Vec<f64>]) -> Result<()> {
        for &t in times {
            let a = self.a(t);
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidArgument(format!("conformal factor a({t}) = {a} is not positive")));
            }
            for x in points {
                let b = self.beta(t, x);
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::InvalidArgument(format!("lapse β({t}, {x:?}) = {b} is not positive")));
                }
            }
        }
        Ok(())
    }
}
