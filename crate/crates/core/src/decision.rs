//! Signal alphabet, priors and the likelihood-ratio threshold.

use std::f64::consts::SQRT_2;

use libm::erfc;

use crate::error::{Error, Result};

/// Which of the two BPSK symbols `|±α⟩` was sent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Truth {
    Plus,
    Minus,
}

impl Truth {
    pub fn sign(self) -> f64 {
        match self {
            Truth::Plus => 1.0,
            Truth::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Truth {
        match self {
            Truth::Plus => Truth::Minus,
            Truth::Minus => Truth::Plus,
        }
    }
}

/// Real signal amplitude `α > 0` and priors `p(+α)`, `p(−α)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignalSpec {
    alpha: f64,
    prior_plus: f64,
    prior_minus: f64,
}

impl SignalSpec {
    pub fn new(alpha: f64, prior_plus: f64, prior_minus: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("alpha", format!("must be finite and > 0, got {alpha}")));
        }
        let ok = |p: f64| p.is_finite() && p > 0.0 && p < 1.0;
        if !ok(prior_plus) || !ok(prior_minus) || (prior_plus + prior_minus - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "priors",
                format!("must lie in (0, 1) and sum to 1, got ({prior_plus}, {prior_minus})"),
            ));
        }
        Ok(SignalSpec { alpha, prior_plus, prior_minus })
    }

    pub fn equal_priors(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.5, 0.5)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn prior(&self, truth: Truth) -> f64 {
        match truth {
            Truth::Plus => self.prior_plus,
            Truth::Minus => self.prior_minus,
        }
    }

    /// Signed amplitude `s = ±α`.
    pub fn amplitude(&self, truth: Truth) -> f64 {
        truth.sign() * self.alpha
    }
}

/// Decide `+α` iff the decision variable is `≥ x_th`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionRule {
    pub x_th: f64,
}

impl DecisionRule {
    pub fn decide(&self, x0: f64) -> Truth {
        if x0 >= self.x_th {
            Truth::Plus
        } else {
            Truth::Minus
        }
    }

    /// Region of the decision variable in which `truth` is misclassified.
    pub fn wrong_region(&self, truth: Truth) -> Region {
        match truth {
            Truth::Plus => Region::Below(self.x_th),
            Truth::Minus => Region::AtOrAbove(self.x_th),
        }
    }

    /// Wrong-decision region in terms of `x`, when the decision variable is
    /// the affine function `x₀ = slope·x + offset`.
    pub fn wrong_region_affine(&self, truth: Truth, slope: f64, offset: f64) -> Region {
        let region = self.wrong_region(truth);
        if slope == 0.0 {
            return if region.contains(offset) { Region::Everything } else { Region::Nothing };
        }
        let t = (self.x_th - offset) / slope;
        match (region, slope > 0.0) {
            (Region::Below(_), true) => Region::Below(t),
            (Region::AtOrAbove(_), true) => Region::AtOrAbove(t),
            (Region::Below(_), false) => Region::AtOrAbove(t),
            (Region::AtOrAbove(_), false) => Region::Below(t),
            _ => unreachable!(),
        }
    }
}

/// A half-line (or trivial) subset of the real quadrature axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Below(f64),
    AtOrAbove(f64),
    Everything,
    Nothing,
}

impl Region {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Region::Below(t) => x < t,
            Region::AtOrAbove(t) => x >= t,
            Region::Everything => true,
            Region::Nothing => false,
        }
    }
}

/// `x_th = ln(p(−α)/p(+α)) / (4√2 α)`.
pub fn threshold(spec: &SignalSpec) -> DecisionRule {
    let x_th = (spec.prior_minus / spec.prior_plus).ln() / (4.0 * SQRT_2 * spec.alpha);
    DecisionRule { x_th }
}

/// Homodyne outcome density of `|s⟩` at phase 0: `e^{−(x−√2 s)²}/√π`.
pub fn coherent_quadrature_density(s: f64, x: f64) -> f64 {
    (-(x - SQRT_2 * s).powi(2)).exp() / std::f64::consts::PI.sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}
