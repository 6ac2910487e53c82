use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;

use crate::error::{Error, Result};

pub const CUTOFF_THRESHOLDS: [f64; 4] = [0.5, 0.7, 0.9, 0.95];

/// Divisor applied to the sample standard deviation to get the standard
/// error of the mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemDivisor {
    /// sd / sqrt(S)
    #[default]
    SqrtS,
    /// sd / S
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

/// Two-sided normal quantile for an `x` percent interval.
pub fn z_score(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 100.0) {
        return Err(Error::invalid(format!("confidence percent must lie in (0, 100), got {x}")));
    }
    Ok(std::f64::consts::SQRT_2 * erf_inv(x / 100.0))
}

/// Mean of per-sample success rates with a normal band clamped to [0, 1].
pub fn confidence_band(rates: &[f64], x: f64, divisor: SemDivisor) -> Result<Band> {
    if rates.len() < 2 {
        return Err(Error::UndefinedVariance(rates.len()));
    }
    let z = z_score(x)?;
    let s = rates.len() as f64;
    // identical rates give their exact value instead of a rounded sum
    let mean = if rates.iter().all(|&r| r == rates[0]) {
        rates[0]
    } else {
        rates.iter().sum::<f64>() / s
    };
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (s - 1.0);
    let sem = match divisor {
        SemDivisor::SqrtS => var.sqrt() / s.sqrt(),
        SemDivisor::S => var.sqrt() / s,
    };
    Ok(Band {
        mean,
        low: (mean - z * sem).clamp(0.0, 1.0),
        high: (mean + z * sem).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub lengths: Vec<usize>,
    pub mean: Vec<f64>,
    pub band_low: Vec<f64>,
    pub band_high: Vec<f64>,
    pub sample_count: usize,
}

impl SuccessCurve {
    /// Aggregates `rates[sample][k]`, the success rate of one sample at
    /// `lengths[k]`.
    pub fn from_rates(
        lengths: &[usize],
        rates: &[Vec<f64>],
        x: f64,
        divisor: SemDivisor,
    ) -> Result<Self> {
        let mut curve = SuccessCurve {
            lengths: lengths.to_vec(),
            mean: Vec::with_capacity(lengths.len()),
            band_low: Vec::with_capacity(lengths.len()),
            band_high: Vec::with_capacity(lengths.len()),
            sample_count: rates.len(),
        };
        let mut column = Vec::with_capacity(rates.len());
        for k in 0..lengths.len() {
            column.clear();
            column.extend(rates.iter().map(|r| r[k]));
            let band = confidence_band(&column, x, divisor)?;
            curve.mean.push(band.mean);
            curve.band_low.push(band.low);
            curve.band_high.push(band.high);
        }
        Ok(curve)
    }

    /// Mean success at observation length `len`, if that length is on the grid.
    pub fn at(&self, len: usize) -> Option<f64> {
        self.lengths.iter().position(|&l| l == len).map(|k| self.mean[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSummary {
    pub max_rate: f64,
    pub thresholds: Vec<f64>,
    pub required_lengths: Vec<usize>,
    pub achieved_rates: Vec<f64>,
}

/// Shortest observation length reaching each fraction of the best mean rate.
pub fn cutoff_statistics(curve: &SuccessCurve) -> Result<CutoffSummary> {
    if curve.lengths.is_empty() || curve.lengths.len() != curve.mean.len() {
        return Err(Error::invalid("cutoff statistics need a non-empty curve"));
    }
    let max_rate = curve.mean.iter().copied().fold(0.0, f64::max);
    let mut summary = CutoffSummary {
        max_rate,
        thresholds: CUTOFF_THRESHOLDS.to_vec(),
        required_lengths: Vec::new(),
        achieved_rates: Vec::new(),
    };
    for &theta in &CUTOFF_THRESHOLDS {
        let target = theta * max_rate;
        // the maximum itself always qualifies
        let k = curve.mean.iter().position(|&r| r >= target).unwrap_or(0);
        summary.required_lengths.push(curve.lengths[k]);
        summary.achieved_rates.push(curve.mean[k]);
    }
    Ok(summary)
}
