use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MisspecVariant {
    None,
    PriorLocation,
    PriorScale,
    PriorBoth,
    SimulatorScale,
    NoiseMixture,
    StudentTSim,
    BetaNoise,
    Necrosis,
}

/// Which simulation gap to induce and how severe it is.
///
/// Parameters that do not belong to `variant` stay at their anchors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MisspecConfig {
    pub variant: MisspecVariant,
    /// Prior location; a single value is broadcast to every dimension.
    pub mu0: Vec<f64>,
    /// Prior scale (covariance multiplier).
    pub tau0: f64,
    /// Likelihood covariance multiplier.
    pub tau: f64,
    /// Beta(2, 5) contamination probability per observation.
    pub lambda: f64,
    /// Student-t degrees of freedom; `None` keeps the Gaussian likelihood.
    pub df: Option<f64>,
    /// Necrosis probability per parent cell.
    pub pi: f64,
}

impl Default for MisspecConfig {
    fn default() -> Self {
        Self::none()
    }
}

impl MisspecConfig {
    pub fn none() -> Self {
        Self {
            variant: MisspecVariant::None,
            mu0: vec![0.0],
            tau0: 1.0,
            tau: 1.0,
            lambda: 0.0,
            df: None,
            pi: 0.0,
        }
    }

    pub fn prior_location(mu0: f64) -> Self {
        Self { variant: MisspecVariant::PriorLocation, mu0: vec![mu0], ..Self::none() }
    }

    pub fn prior_scale(tau0: f64) -> Self {
        Self { variant: MisspecVariant::PriorScale, tau0, ..Self::none() }
    }

    pub fn prior_both(mu0: f64, tau0: f64) -> Self {
        Self { variant: MisspecVariant::PriorBoth, mu0: vec![mu0], tau0, ..Self::none() }
    }

    pub fn simulator_scale(tau: f64) -> Self {
        Self { variant: MisspecVariant::SimulatorScale, tau, ..Self::none() }
    }

    pub fn noise_mixture(lambda: f64) -> Self {
        Self { variant: MisspecVariant::NoiseMixture, lambda, ..Self::none() }
    }

    pub fn student_t(df: f64) -> Self {
        Self { variant: MisspecVariant::StudentTSim, df: Some(df), ..Self::none() }
    }

    pub fn beta_noise(lambda: f64) -> Self {
        Self { variant: MisspecVariant::BetaNoise, lambda, ..Self::none() }
    }

    pub fn necrosis(pi: f64) -> Self {
        Self { variant: MisspecVariant::Necrosis, pi, ..Self::none() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("invalid misspecification: {}", what)));
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return bad("tau0 must be positive");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return bad("pi must lie in [0, 1]");
        }
        if self.df.is_some_and(|df| !(df >= 1.0)) {
            return bad("df must be at least 1");
        }
        if self.mu0.is_empty() || self.mu0.iter().any(|m| !m.is_finite()) {
            return bad("mu0 must be finite and non-empty");
        }
        if self.variant == MisspecVariant::None && !self.at_anchor() {
            return bad("variant none requires anchor parameters");
        }
        Ok(())
    }

    fn at_anchor(&self) -> bool {
        self.mu0.iter().all(|&m| m == 0.0)
            && self.tau0 == 1.0
            && self.tau == 1.0
            && self.lambda == 0.0
            && self.pi == 0.0
            && self.df.is_none()
    }

    /// The variant actually in force: anchored parameters collapse to `None`
    /// so the well-specified code path (and random stream) is reused.
    pub fn effective(&self) -> MisspecVariant {
        use MisspecVariant::*;
        let loc = self.mu0.iter().any(|&m| m != 0.0);
        let scale = self.tau0 != 1.0;
        let active = match self.variant {
            None => false,
            PriorLocation => loc,
            PriorScale => scale,
            PriorBoth => loc || scale,
            SimulatorScale => self.tau != 1.0,
            NoiseMixture | BetaNoise => self.lambda > 0.0,
            StudentTSim => self.df.is_some(),
            Necrosis => self.pi > 0.0,
        };
        if active {
            self.variant
        } else {
            None
        }
    }

    pub fn mu0_at(&self, i: usize) -> f64 {
        if self.mu0.len() == 1 {
            self.mu0[0]
        } else {
            self.mu0.get(i).copied().unwrap_or(0.0)
        }
    }

    pub(crate) fn prior_location_active(&self) -> bool {
        matches!(self.effective(), MisspecVariant::PriorLocation | MisspecVariant::PriorBoth)
    }

    pub(crate) fn prior_scale_active(&self) -> bool {
        matches!(self.effective(), MisspecVariant::PriorScale | MisspecVariant::PriorBoth)
    }
}
