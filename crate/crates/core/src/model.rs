use crate::error::{Error, Result};
use crate::potentials::AlphaSpec;
use crate::scalar::Real;

/// How the reaction term `α σ` enters the implicit nutrient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReactionSplit {
    /// Negative part of `α` implicit, positive part explicit.
    #[default]
    SignSplit,
    /// All of `α` implicit; requires `τ α₊ < 1`.
    Implicit,
}

/// Physical coefficients of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// Chemotactic coupling `χ ≥ 0`.
    pub chi: T,
    /// Expansive (concave) coefficient `λ ≥ 0` of the potential.
    pub lambda: T,
    /// Mobility regularization `ε ≥ 0`; `0` is the limit system.
    pub epsilon: T,
    pub alpha: AlphaSpec<T>,
    /// Distance from `±1` that every phase value must keep.
    pub delta_safe: T,
    pub reaction: ReactionSplit,
}

impl<T: Real> ModelParams<T> {
    pub fn new(chi: T, lambda: T, alpha: AlphaSpec<T>) -> Self {
        Self {
            chi,
            lambda,
            epsilon: T::zero(),
            alpha,
            delta_safe: T::lit(1e-6),
            reaction: ReactionSplit::SignSplit,
        }
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_reaction(mut self, reaction: ReactionSplit) -> Self {
        self.reaction = reaction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: T| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !(self.chi >= T::zero()) || !self.chi.is_finite() {
            return bad("chi must be finite and nonnegative, got chi", self.chi);
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return bad("lambda must be finite and nonnegative, got lambda", self.lambda);
        }
        if !(self.epsilon >= T::zero()) || !self.epsilon.is_finite() {
            return bad("epsilon must be finite and nonnegative, got epsilon", self.epsilon);
        }
        if !(self.delta_safe > T::zero() && self.delta_safe < T::half()) {
            return bad("delta_safe must lie in (0, 0.5), got delta_safe", self.delta_safe);
        }
        if let AlphaSpec::Constant(c) = self.alpha {
            if !c.is_finite() {
                return bad("constant reaction rate must be finite, got", c);
            }
        }
        Ok(())
    }
}
