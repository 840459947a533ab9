//! Power-law fits `value ~ A x^p` by least squares on logarithms.

use crate::error::{config, Error, Result};

/// Points `(x, value)` with optional standard errors on `value`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatePoints {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub std_err: Option<Vec<f64>>,
}

impl RatePoints {
    pub fn new(x: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        let p = RatePoints {
            x,
            value,
            std_err: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_std_err(mut self, se: Vec<f64>) -> Result<Self> {
        self.std_err = Some(se);
        self.validate()?;
        Ok(self)
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.value.len() {
            return Err(Error::LengthMismatch {
                left: self.x.len(),
                right: self.value.len(),
            });
        }
        if self.x.len() < 3 {
            return Err(config(format!(
                "a rate fit needs >= 3 points, got {}",
                self.x.len()
            )));
        }
        if let Some(se) = &self.std_err {
            if se.len() != self.x.len() {
                return Err(Error::LengthMismatch {
                    left: self.x.len(),
                    right: se.len(),
                });
            }
        }
        for (&x, &v) in self.x.iter().zip(&self.value) {
            if !(x > 0.0) || !(v > 0.0) {
                return Err(Error::Domain(format!(
                    "power-law fit needs positive coordinates, got ({x}, {v})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub log_intercept: f64,
    pub r_squared: f64,
}

/// Weighted least squares of `log value` on `log x`. Weights are inverse
/// variances on the log scale, `(value / se)^2`, when standard errors are
/// given and positive; otherwise every point has weight one.
pub fn fit_power_law(points: &RatePoints) -> Result<PowerLawFit> {
    points.validate()?;
    let lx: Vec<f64> = points.x.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = points.value.iter().map(|v| v.ln()).collect();
    let w: Vec<f64> = match &points.std_err {
        Some(se) if se.iter().all(|&s| s > 0.0) => points
            .value
            .iter()
            .zip(se)
            .map(|(v, s)| (v / s).powi(2))
            .collect(),
        _ => vec![1.0; lx.len()],
    };
    let sw: f64 = w.iter().sum();
    let mx = lx.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = ly.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..lx.len() {
        let dx = lx[i] - mx;
        let dy = ly[i] - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Domain(
            "power-law fit needs at least two distinct x values".into(),
        ));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        exponent: slope,
        log_intercept: my - slope * mx,
        r_squared: r2,
    })
}

/// Inclusive range check on the fitted exponent.
pub fn exponent_in(fit: &PowerLawFit, lo: f64, hi: f64) -> bool {
    fit.exponent >= lo && fit.exponent <= hi
}
