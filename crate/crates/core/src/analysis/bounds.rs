//! Bound polynomials and assembly of the mean-square tracking bound.

use crate::error::{Error, Result};

use super::decay::DecayFit;
use super::MomentEstimates;

/// Network and step-size constants of the bound polynomials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub rho: f64,
    /// Number of arcs.
    pub m: f64,
    /// Number of nodes.
    pub n: f64,
    pub gamma_l: f64,
}

impl BoundParams {
    fn check(&self, b_x: f64, b_lambda: f64) -> Result<()> {
        for (name, v) in [("rho", self.rho), ("m", self.m), ("n", self.n), ("gamma_L", self.gamma_l)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("B_x", b_x), ("B_lambda", b_lambda)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Degree-4 bound polynomial
///
/// ```text
/// (rho m/n)^2 Bx^4 + 4 rho m^{3/2} / (n^{3/2} sqrt(2 gL)) Bx^3 Bl
///   + 4 sqrt(rho m) / (sqrt(n) (2 rho gL)^{3/2}) Bl^3 Bx
///   + 6 m / (n gL) Bx^2 Bl^2 + Bl^4 / (4 rho^2 gL^2)
/// ```
pub fn bound_b1(b_x: f64, b_lambda: f64, p: &BoundParams) -> Result<f64> {
    p.check(b_x, b_lambda)?;
    let BoundParams { rho, m, n, gamma_l } = *p;
    let (x, l) = (b_x, b_lambda);
    let t1 = (rho * m / n).powi(2) * x.powi(4);
    let t2 = 4.0 * rho * m.powf(1.5) / (n.powf(1.5) * (2.0 * gamma_l).sqrt()) * x.powi(3) * l;
    let t3 = 4.0 * (rho * m).sqrt() / (n.sqrt() * (2.0 * rho * gamma_l).powf(1.5)) * l.powi(3) * x;
    let t4 = 6.0 * m / (n * gamma_l) * x * x * l * l;
    let t5 = l.powi(4) / (4.0 * rho * rho * gamma_l * gamma_l);
    Ok(t1 + t2 + t3 + t4 + t5)
}

/// Degree-2 companion `(rho m/n) Bx^2 + 2 sqrt(m/(n gL)) Bx Bl + Bl^2 / (2 rho gL)`.
pub fn bound_b2(b_x: f64, b_lambda: f64, p: &BoundParams) -> Result<f64> {
    p.check(b_x, b_lambda)?;
    let BoundParams { rho, m, n, gamma_l } = *p;
    Ok(rho * m / n * b_x * b_x + 2.0 * (m / (n * gamma_l)).sqrt() * b_x * b_lambda + b_lambda * b_lambda / (2.0 * rho * gamma_l))
}

/// Stabilisation of a mean-square curve: third-quarter vs last-quarter mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauCheck {
    pub third_quarter_mean: f64,
    pub last_quarter_mean: f64,
    /// `|last / third - 1|`.
    pub relative_change: f64,
}

impl PlateauCheck {
    pub fn is_stable(&self, tol: f64) -> bool {
        self.relative_change <= tol
    }
}

pub fn plateau_check(curve: &[f64]) -> Result<PlateauCheck> {
    let t = curve.len();
    if t < 4 {
        return Err(Error::InvalidArgument(format!("plateau needs at least 4 steps, got {t}")));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let q3 = mean(&curve[t / 2..3 * t / 4]);
    let q4 = mean(&curve[3 * t / 4..]);
    let relative_change = if q3 == 0.0 {
        if q4 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (q4 / q3 - 1.0).abs()
    };
    Ok(PlateauCheck {
        third_quarter_mean: q3,
        last_quarter_mean: q4,
        relative_change,
    })
}

/// Mean-square bound with empirically fitted decay constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub b1: f64,
    pub b2: f64,
    pub c_hat: f64,
    pub gamma_hat: f64,
    /// `2 C / (1 - sqrt(gamma))^2 * sqrt(B1)`.
    pub theorem1_rhs: f64,
    /// Last-quarter mean of the G-weighted mean-square curve.
    pub observed_plateau: f64,
    pub bound_satisfied: bool,
}

/// Assembles the bound from moment estimates and a decay fit and compares it
/// with the plateau of `mse_ug_mean`.
pub fn theorem1_rhs(est: &MomentEstimates, fit: &DecayFit, params: &BoundParams, mse_ug_mean: &[f64]) -> Result<BoundReport> {
    let (c_hat, gamma_hat) = (fit.c_hat, fit.gamma_hat);
    if !(gamma_hat > 0.0 && gamma_hat < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma_hat must lie in (0, 1), got {gamma_hat}")));
    }
    if !(c_hat >= 0.0 && c_hat.is_finite()) {
        return Err(Error::InvalidArgument(format!("C_hat must be nonnegative, got {c_hat}")));
    }
    let b1 = bound_b1(est.b_x, est.b_lambda, params)?;
    let b2 = bound_b2(est.b_x, est.b_lambda, params)?;
    let rhs = 2.0 * c_hat / (1.0 - gamma_hat.sqrt()).powi(2) * b1.sqrt();
    let observed_plateau = plateau_check(mse_ug_mean)?.last_quarter_mean;
    Ok(BoundReport {
        b1,
        b2,
        c_hat,
        gamma_hat,
        theorem1_rhs: rhs,
        observed_plateau,
        bound_satisfied: rhs >= observed_plateau,
    })
}
