//! Penalty functions for the smoothness term.

use crate::{Error, Result};

/// Pointwise penalty `ρ` applied independently to each flow component in the
/// regularizer `ρ_S(f) = min(ρ(f¹) + ρ(f²), τ)`.
///
/// All three kinds are convex on the integers, which is what the SMAWK-based
/// min-convolution requires. The Charbonnier penalty is used exactly as
/// written, `ρ(x) = √(x² + ε²)`, so `ρ(0) = ε` rather than zero; the constant
/// per-edge offset does not change minimizers, it only shifts energies and
/// lower bounds uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `ρ(x) = |x|`
    L1,
    /// `ρ(x) = x²`
    SquaredL2,
    /// `ρ(x) = √(x² + ε²)`
    Charbonnier { epsilon: f64 },
}

impl Penalty {
    /// Evaluates `ρ(x)` at an integer offset.
    #[inline]
    pub fn eval(&self, x: i32) -> f64 {
        let xf = x as f64;
        match *self {
            Penalty::L1 => xf.abs(),
            Penalty::SquaredL2 => xf * xf,
            Penalty::Charbonnier { epsilon } => (xf * xf + epsilon * epsilon).sqrt(),
        }
    }

    /// Checks discrete convexity, `ρ(x+1) - 2ρ(x) + ρ(x-1) ≥ 0`, for all
    /// interior `x` in `[-max_offset, max_offset]`.
    pub fn is_convex_on(&self, max_offset: i32) -> bool {
        (-max_offset + 1..max_offset)
            .all(|x| self.eval(x + 1) - 2.0 * self.eval(x) + self.eval(x - 1) >= -1e-12)
    }

    pub fn validate(&self) -> Result<()> {
        if let Penalty::Charbonnier { epsilon } = *self {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::Config(format!(
                    "charbonnier epsilon must be a positive finite number, got {epsilon}"
                )));
            }
        }
        Ok(())
    }
}

/// Precomputed `ρ` values over `[-max_offset, max_offset]`, used by greedy
/// decoding, energy evaluation, and the brute-force oracles.
#[derive(Debug, Clone)]
pub struct PenaltyTable {
    values: Vec<f64>,
    max_offset: i32,
}

impl PenaltyTable {
    pub fn new(penalty: Penalty, max_offset: i32) -> Self {
        let values = (-max_offset..=max_offset).map(|x| penalty.eval(x)).collect();
        PenaltyTable { values, max_offset }
    }

    #[inline]
    pub fn rho(&self, offset: i32) -> f64 {
        self.values[(offset + self.max_offset) as usize]
    }

    /// The coupled smoothness term `ρ_S(d) = min(ρ(d¹) + ρ(d²), τ)`.
    /// `τ = ∞` disables truncation.
    #[inline]
    pub fn rho_s(&self, d: (i32, i32), tau: f64) -> f64 {
        let sum = self.rho(d.0) + self.rho(d.1);
        if sum > tau {
            tau
        } else {
            sum
        }
    }
}
