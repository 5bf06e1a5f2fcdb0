//! Pearson correlation and simple least-squares regression with a
//! mean-response confidence band.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, StatsError};

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < min {
        return Err(StatsError::TooFewValues { need: min, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Running means and centred co-moments.
#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    n: f64,
    mx: f64,
    my: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    fn of(x: &[f64], y: &[f64]) -> Self {
        let mut m = Moments::default();
        for (&a, &b) in x.iter().zip(y) {
            m.n += 1.0;
            let dx = a - m.mx;
            let dy = b - m.my;
            m.mx += dx / m.n;
            m.my += dy / m.n;
            m.sxx += dx * (a - m.mx);
            m.syy += dy * (b - m.my);
            m.sxy += dx * (b - m.my);
        }
        m
    }
}

/// Pearson product-moment correlation, clamped to [-1, 1].
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    let m = Moments::of(x, y);
    if m.sxx <= 0.0 {
        return Err(StatsError::ZeroVariance("x"));
    }
    if m.syy <= 0.0 {
        return Err(StatsError::ZeroVariance("y"));
    }
    Ok((m.sxy / (m.sxx * m.syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
    /// Residual standard error, sqrt(SSE / (n - 2)).
    pub residual_std: f64,
    pub x_mean: f64,
    /// Sum of squared deviations of x.
    pub sxx: f64,
    /// Two-sided t quantile for the band, n - 2 degrees of freedom.
    pub t_quantile: f64,
    pub confidence: f64,
}

impl Regression {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Half-width of the confidence band for the mean response at `x`.
    pub fn half_width(&self, x: f64) -> f64 {
        let lev = 1.0 / self.n as f64 + (x - self.x_mean).powi(2) / self.sxx;
        self.t_quantile * self.residual_std * lev.sqrt()
    }

    /// (lower, upper) band at `x`.
    pub fn band(&self, x: f64) -> (f64, f64) {
        let y = self.predict(x);
        let h = self.half_width(x);
        (y - h, y + h)
    }
}

/// Least-squares line with a 95% band.
pub fn ols_regression(x: &[f64], y: &[f64]) -> Result<Regression> {
    ols_regression_with(x, y, 0.95)
}

pub fn ols_regression_with(x: &[f64], y: &[f64], confidence: f64) -> Result<Regression> {
    check_pair(x, y, 3)?;
    let m = Moments::of(x, y);
    if m.sxx <= 0.0 {
        return Err(StatsError::ZeroVariance("x"));
    }
    let slope = m.sxy / m.sxx;
    let intercept = m.my - slope * m.mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = (x.len() - 2) as f64;
    let t = StudentsT::new(0.0, 1.0, dof).expect("n >= 3 gives positive dof");
    Ok(Regression {
        slope,
        intercept,
        n: x.len(),
        residual_std: (sse / dof).sqrt(),
        x_mean: m.mx,
        sxx: m.sxx,
        t_quantile: t.inverse_cdf(0.5 + confidence / 2.0),
        confidence,
    })
}
