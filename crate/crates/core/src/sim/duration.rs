use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Activity;

pub const DEFAULT_CONCENTRATION: f64 = 4.0;

/// Scaled Beta on `[t_min, t_max]` with mean `t_exp`.
///
/// Shapes are `alpha = k (t_exp - t_min) / (t_max - t_min)` and
/// `beta = k - alpha` for concentration `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationParams {
    pub t_min: f64,
    pub t_exp: f64,
    pub t_max: f64,
    pub concentration: f64,
}

impl DurationParams {
    pub fn new(t_min: f64, t_exp: f64, t_max: f64, concentration: f64) -> Result<Self> {
        let params = DurationParams { t_min, t_exp, t_max, concentration };
        params.validate()?;
        Ok(params)
    }

    pub fn of(activity: &Activity, concentration: f64) -> Self {
        DurationParams {
            t_min: activity.t_min,
            t_exp: activity.t_exp,
            t_max: activity.t_max,
            concentration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min <= self.t_exp && self.t_exp <= self.t_max) {
            return Err(Error::invalid(format!(
                "duration order violated: {} <= {} <= {}",
                self.t_min, self.t_exp, self.t_max
            )));
        }
        if !(self.concentration > 0.0) {
            return Err(Error::invalid("concentration must be positive"));
        }
        Ok(())
    }

    pub fn shapes(&self) -> (f64, f64) {
        let span = self.t_max - self.t_min;
        let alpha = self.concentration * (self.t_exp - self.t_min) / span;
        (alpha, self.concentration - alpha)
    }
}

/// Draws one duration. Degenerate cases (zero span or a mean sitting on a
/// bound) still consume one uniform variate.
pub fn sample_duration<R: Rng + ?Sized>(params: &DurationParams, rng: &mut R) -> f64 {
    let span = params.t_max - params.t_min;
    if !(span > 0.0) {
        let _: f64 = rng.random();
        return params.t_min;
    }
    let (alpha, beta) = params.shapes();
    if !(alpha > 0.0) || !(beta > 0.0) {
        let _: f64 = rng.random();
        return if alpha > 0.0 { params.t_max } else { params.t_min };
    }
    let x = match Beta::new(alpha, beta) {
        Ok(dist) => dist.sample(rng),
        Err(_) => (params.t_exp - params.t_min) / span,
    };
    let x = if x.is_finite() { x.clamp(0.0, 1.0) } else { (params.t_exp - params.t_min) / span };
    (params.t_min + x * span).clamp(params.t_min, params.t_max)
}
