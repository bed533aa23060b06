//! Scalar link functions `φ(a, y)` and the linear-model loss
//! `ℓ(w, (x, y)) = φ(⟨w, x⟩, y)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, invalid, Error, Result};
use crate::vecspace::{DenseVector, Exponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkFunction {
    /// `(a − y)²`
    Square,
    /// `log(1 + e^{−ya})`
    Logistic,
    /// `max(1 − ay, 0)`
    Hinge,
    /// `|a − y|`
    Absolute,
    /// `−y·a`
    Linear,
}

/// A labelled example `z = (x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: DenseVector,
    pub y: f64,
}

impl LinkFunction {
    pub fn value(self, a: f64, y: f64) -> f64 {
        match self {
            LinkFunction::Square => (a - y) * (a - y),
            LinkFunction::Logistic => {
                let m = -y * a;
                // log(1 + e^m) without overflow.
                if m > 0.0 {
                    m + (-m).exp().ln_1p()
                } else {
                    m.exp().ln_1p()
                }
            }
            LinkFunction::Hinge => (1.0 - a * y).max(0.0),
            LinkFunction::Absolute => (a - y).abs(),
            LinkFunction::Linear => -y * a,
        }
    }

    /// `∂φ/∂a`, taking 0 at the kinks of hinge and absolute.
    pub fn derivative(self, a: f64, y: f64) -> f64 {
        match self {
            LinkFunction::Square => 2.0 * (a - y),
            LinkFunction::Logistic => {
                let m = y * a;
                // −y / (1 + e^{ya})
                if m > 0.0 {
                    let e = (-m).exp();
                    -y * e / (1.0 + e)
                } else {
                    -y / (1.0 + m.exp())
                }
            }
            LinkFunction::Hinge => {
                if a * y < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            LinkFunction::Absolute => {
                let r = a - y;
                if r > 0.0 {
                    1.0
                } else if r < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LinkFunction::Linear => -y,
        }
    }

    /// Lipschitz constant of `a ↦ φ(a, y)` over `|a| ≤ a_bound`, `|y| ≤ y_bound`.
    pub fn lipschitz(self, a_bound: f64, y_bound: f64) -> f64 {
        match self {
            LinkFunction::Square => 2.0 * (a_bound + y_bound),
            LinkFunction::Absolute => 1.0,
            LinkFunction::Logistic | LinkFunction::Hinge | LinkFunction::Linear => y_bound,
        }
    }

    /// Smoothness `β` of `a ↦ φ(a, y)` for `|y| ≤ 1`; `None` when not smooth.
    pub fn smoothness(self) -> Option<f64> {
        match self {
            LinkFunction::Square => Some(2.0),
            LinkFunction::Logistic => Some(0.25),
            _ => None,
        }
    }

    pub fn is_nonnegative(self) -> bool {
        self != LinkFunction::Linear
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Square => "square",
            LinkFunction::Logistic => "logistic",
            LinkFunction::Hinge => "hinge",
            LinkFunction::Absolute => "absolute",
            LinkFunction::Linear => "linear",
        }
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(LinkFunction::Square),
            "logistic" => Ok(LinkFunction::Logistic),
            "hinge" => Ok(LinkFunction::Hinge),
            "absolute" => Ok(LinkFunction::Absolute),
            "linear" => Ok(LinkFunction::Linear),
            other => Err(invalid(format!("unknown link function '{other}'"))),
        }
    }
}

/// `φ(⟨w, x⟩, y)`.
pub fn loss(link: LinkFunction, w: &DenseVector, z: &Example) -> Result<f64> {
    Ok(link.value(w.dot(&z.x)?, z.y))
}

/// `φ′(⟨w, x⟩, y)·x`.
pub fn subgradient(link: LinkFunction, w: &DenseVector, z: &Example) -> Result<DenseVector> {
    let g = link.derivative(w.dot(&z.x)?, z.y);
    Ok(z.x.scaled(g))
}

/// `β_q = β_φ · R_q²` for the composite loss when `‖x‖_q ≤ R_q`.
pub fn beta_q(link: LinkFunction, r_q: f64) -> Result<f64> {
    link.smoothness()
        .map(|b| b * r_q * r_q)
        .ok_or_else(|| invalid(format!("{link} link is not smooth")))
}

/// Whether `‖∇ℓ(w, z)‖_q² ≤ 4 β_q ℓ(w, z)` holds at `(w, z)`.
pub fn smoothness_selfbound_check(
    link: LinkFunction,
    w: &DenseVector,
    z: &Example,
    q: f64,
    r_q: f64,
) -> Result<bool> {
    let beta = beta_q(link, r_q)?;
    check_dim(w.dim(), z.x.dim())?;
    let g = subgradient(link, w, z)?.norm(Exponent::new(q)?);
    Ok(g * g <= 4.0 * beta * loss(link, w, z)? * (1.0 + 1e-12))
}
