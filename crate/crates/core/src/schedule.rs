//! Parameterized sequences for stepsizes, temperatures and exploration rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScheduleKind {
    /// `scale / (n + n0)^exponent`
    Power,
    /// `1 / (scale · ln(n + n0))`
    InverseLog,
    /// `scale`
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub scale: f64,
    #[serde(default)]
    pub exponent: f64,
    #[serde(default = "default_n0")]
    pub n0: u64,
}

fn default_n0() -> u64 {
    1
}

impl Schedule {
    pub fn power(scale: f64, exponent: f64, n0: u64) -> Schedule {
        Schedule { kind: ScheduleKind::Power, scale, exponent, n0 }
    }

    pub fn inverse_log(scale: f64, n0: u64) -> Schedule {
        Schedule { kind: ScheduleKind::InverseLog, scale, exponent: 0.0, n0 }
    }

    pub fn constant(level: f64) -> Schedule {
        Schedule { kind: ScheduleKind::Constant, scale: level, exponent: 0.0, n0: 1 }
    }

    /// Constant schedules may be zero (frozen runs, greedy limit); the
    /// other kinds need a positive scale.
    pub fn validate(&self) -> Result<()> {
        let scale_ok = match self.kind {
            ScheduleKind::Constant => self.scale >= 0.0 && self.scale.is_finite(),
            _ => self.scale > 0.0 && self.scale.is_finite(),
        };
        if !scale_ok {
            return Err(Error::InvalidSchedule(format!("scale {}", self.scale)));
        }
        if !(0.0..=1.0).contains(&self.exponent) {
            return Err(Error::InvalidSchedule(format!("exponent {} outside [0,1]", self.exponent)));
        }
        if self.n0 == 0 {
            return Err(Error::InvalidSchedule("n0 must be positive".into()));
        }
        Ok(())
    }

    /// Value at index `n`.
    pub fn eval(&self, n: u64) -> Result<f64> {
        let m = (n + self.n0) as f64;
        match self.kind {
            ScheduleKind::Power => Ok(self.scale / m.powf(self.exponent)),
            ScheduleKind::InverseLog => {
                if n + self.n0 < 2 {
                    return Err(Error::LogDomain(n + self.n0));
                }
                Ok(1.0 / (self.scale * m.ln()))
            }
            ScheduleKind::Constant => Ok(self.scale),
        }
    }
}

/// Free-function form of [`Schedule::eval`].
pub fn eval_schedule(s: &Schedule, n: u64) -> Result<f64> {
    s.eval(n)
}
