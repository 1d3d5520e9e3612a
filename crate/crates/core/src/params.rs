//! Model parameters and their defaults.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{0}` must be strictly positive (got {1})")]
    NotPositive(&'static str, f64),
    #[error("anticipation horizon t_a={t_a} must be smaller than the time gap T={time_gap}")]
    AnticipationExceedsTimeGap { t_a: f64, time_gap: f64 },
    #[error("integration step dt={dt} must be smaller than the time gap T={time_gap}")]
    StepExceedsTimeGap { dt: f64, time_gap: f64 },
}

/// Parameters of the navigation and speed modules.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Repulsion intensity `k` (dimensionless).
    pub k: f64,
    /// Repulsion range `D` in metres.
    pub range: f64,
    /// Time gap `T` in seconds.
    pub time_gap: f64,
    /// Integration step in seconds.
    pub dt: f64,
    /// Heading relaxation time in seconds.
    pub tau: f64,
    /// Anticipation horizon in seconds.
    pub t_a: f64,
    pub v0_moto: f64,
    pub v0_car: f64,
    /// Floor applied to the speed so that the velocity never vanishes.
    pub epsilon: f64,
    /// Look-ahead distance of the target direction in metres.
    pub look_ahead: f64,
    /// Optional interaction cutoff. `None` evaluates every pair.
    pub cutoff: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            k: 0.1,
            range: 3.0,
            time_gap: 0.9,
            dt: 0.05,
            tau: 0.3,
            t_a: 0.88,
            v0_moto: 10.0,
            v0_car: 8.85,
            epsilon: f64::EPSILON,
            look_ahead: 10.0,
            cutoff: None,
        }
    }
}

impl ModelParams {
    /// Curb repulsion intensity, twice the agent intensity.
    pub fn k_curb(&self) -> f64 {
        2.0 * self.k
    }

    /// Curb repulsion range, equal to the agent range.
    pub fn range_curb(&self) -> f64 {
        self.range
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("k", self.k),
            ("D", self.range),
            ("T", self.time_gap),
            ("dt", self.dt),
            ("tau", self.tau),
            ("t_a", self.t_a),
            ("v0_moto", self.v0_moto),
            ("v0_car", self.v0_car),
            ("epsilon", self.epsilon),
            ("look_ahead", self.look_ahead),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ParamError::NotPositive(name, value));
            }
        }
        if let Some(c) = self.cutoff {
            if !(c > 0.0) {
                return Err(ParamError::NotPositive("cutoff", c));
            }
        }
        if self.t_a >= self.time_gap {
            return Err(ParamError::AnticipationExceedsTimeGap {
                t_a: self.t_a,
                time_gap: self.time_gap,
            });
        }
        if self.dt >= self.time_gap {
            return Err(ParamError::StepExceedsTimeGap {
                dt: self.dt,
                time_gap: self.time_gap,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = ModelParams::default();
        p.validate().unwrap();
        assert_eq!(p.k_curb(), 0.2);
        assert_eq!(p.range_curb(), 3.0);
    }

    #[test]
    fn rejects_large_step() {
        let p = ModelParams {
            dt: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            p.validate(),
            Err(ParamError::StepExceedsTimeGap { .. })
        ));
    }

    #[test]
    fn rejects_long_anticipation() {
        let p = ModelParams {
            t_a: 0.95,
            ..Default::default()
        };
        assert!(matches!(
            p.validate(),
            Err(ParamError::AnticipationExceedsTimeGap { .. })
        ));
    }

    #[test]
    fn rejects_non_positive() {
        let p = ModelParams {
            tau: 0.0,
            ..Default::default()
        };
        assert_eq!(p.validate(), Err(ParamError::NotPositive("tau", 0.0)));
    }
}
