//! One-dimensional cuts through the (lambda, delta) plane.

use crate::error::{Error, Result};
use crate::fixed_points::SweepAxis;
use crate::model::ModelParams;

/// Inclusive uniform grid `min, min + step, ..., <= max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && step.is_finite()) || step <= 0.0 || max < min {
            return Err(Error::Config(format!(
                "invalid grid {min}:{max}:{step} (need min <= max, step > 0)"
            )));
        }
        Ok(Grid { min, max, step })
    }

    /// Parses `MIN:MAX:STEP`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("grid '{s}' is not MIN:MAX:STEP")));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("grid '{s}': '{p}' is not a number")))
        };
        Grid::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.min + k as f64 * self.step)
            .collect()
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub label: String,
    pub axis: SweepAxis,
    /// Value of the parameter held fixed along the cut.
    pub fixed: f64,
    pub values: Vec<f64>,
}

impl PathSpec {
    /// The three reference cuts: 1 = resonant drive (delta = J, sweep
    /// lambda), 2 = lambda = 7 (sweep delta), 3 = delta = 9.5 (sweep lambda).
    pub fn reference(id: u8, template: &ModelParams, grid: Option<Grid>) -> Result<Self> {
        let (axis, fixed, default_grid) = match id {
            1 => (SweepAxis::Lambda, template.j, Grid::new(0.1, 12.0, 0.1)?),
            2 => (SweepAxis::Delta, 7.0, Grid::new(8.0, 12.0, 0.05)?),
            3 => (SweepAxis::Lambda, 9.5, Grid::new(0.1, 12.0, 0.1)?),
            other => {
                return Err(Error::Config(format!("unknown path {other} (expected 1, 2 or 3)")))
            }
        };
        Ok(PathSpec {
            label: format!("path{id}"),
            axis,
            fixed,
            values: grid.unwrap_or(default_grid).values(),
        })
    }

    pub fn custom(axis: SweepAxis, fixed: f64, values: Vec<f64>) -> Self {
        PathSpec {
            label: "custom".into(),
            axis,
            fixed,
            values,
        }
    }

    pub fn params_at(&self, template: &ModelParams, value: f64) -> ModelParams {
        match self.axis {
            SweepAxis::Lambda => template.with_delta(self.fixed).with_lambda(value),
            SweepAxis::Delta => template.with_lambda(self.fixed).with_delta(value),
        }
    }

    /// Template with the fixed parameter applied.
    pub fn base(&self, template: &ModelParams) -> ModelParams {
        match self.axis {
            SweepAxis::Lambda => template.with_delta(self.fixed),
            SweepAxis::Delta => template.with_lambda(self.fixed),
        }
    }
}
