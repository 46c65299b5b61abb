//! Model parameters of the lossy two-mode junction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three two-body loss channels: both atoms from mode 1, both from
/// mode 2, or one from each mode.  Every channel removes exactly two atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    One,
    Two,
    Twelve,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::One, Channel::Two, Channel::Twelve];

    /// How much the mode-1 occupation index shifts under this channel's jump.
    pub fn index_shift(self) -> usize {
        match self {
            Channel::One => 2,
            Channel::Two => 0,
            Channel::Twelve => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::One => "1",
            Channel::Two => "2",
            Channel::Twelve => "12",
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Physical rates and energies of the junction, with the derived constants
/// used throughout the conditional-state analysis cached at construction.
///
/// All energies are angular frequencies (hbar = 1), rates are inverse times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub e1: f64,
    pub e2: f64,
    pub u1: f64,
    pub u2: f64,
    pub u12: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma12: f64,
    // Derived, cached by `new`.
    chi: f64,
    chi1: f64,
    chi2: f64,
    chi12: f64,
    delta1: f64,
    delta2: f64,
    delta12: f64,
}

impl ModelParams {
    /// Build a parameter set, checking rate nonnegativity and caching the
    /// derived interaction and rate-difference constants.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        e1: f64,
        e2: f64,
        u1: f64,
        u2: f64,
        u12: f64,
        gamma1: f64,
        gamma2: f64,
        gamma12: f64,
    ) -> Result<Self> {
        for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2), ("gamma12", gamma12)] {
            if g.is_nan() || g < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative, got {g}"
                )));
            }
        }
        for (name, v) in [("e1", e1), ("e2", e2), ("u1", u1), ("u2", u2), ("u12", u12)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        let chi1 = u1 - u12;
        let chi2 = -(u2 - u12);
        let delta1 = 2.0 * gamma1 - gamma12;
        let delta2 = -(2.0 * gamma2 - gamma12);
        Ok(Self {
            e1,
            e2,
            u1,
            u2,
            u12,
            gamma1,
            gamma2,
            gamma12,
            // chi = (U1 + U2 - 2 U12)/2 and delta12 = gamma1 - gamma2, computed
            // through the channel constants so that chi1 - chi2 = 2 chi and
            // delta1 + delta2 = 2 delta12 hold bitwise, not just algebraically.
            chi: 0.5 * (chi1 - chi2),
            chi1,
            chi2,
            chi12: (u1 - u2) / 2.0,
            delta1,
            delta2,
            delta12: 0.5 * (delta1 + delta2),
        })
    }

    /// Lossless junction with interaction energies only.
    pub fn lossless(u1: f64, u2: f64, u12: f64) -> Result<Self> {
        Self::new(0.0, 0.0, u1, u2, u12, 0.0, 0.0, 0.0)
    }

    /// Parameters given directly in terms of the per-channel interaction
    /// constants `chi1 = U1 - U12` and `chi2 = -(U2 - U12)` with `U12 = 0`
    /// and `E_i = 0`, the parameterization used by all figure captions.
    pub fn from_chis(chi1: f64, chi2: f64, gamma1: f64, gamma2: f64, gamma12: f64) -> Result<Self> {
        Self::new(0.0, 0.0, chi1, -chi2, 0.0, gamma1, gamma2, gamma12)
    }

    /// Nonlinear strength `chi = (U1 + U2 - 2 U12) / 2`; the interactions in
    /// a fixed-N sector sum to `chi * n1^2` plus terms linear in `n1`.
    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Cat formation time `t_q = pi / |chi q|` for a q-component superposition.
    pub fn t_q(&self, q: u32) -> f64 {
        std::f64::consts::PI / (self.chi.abs() * f64::from(q))
    }

    /// Phase-rotation constant `chi_m` of a loss channel.
    pub fn chi_m(&self, m: Channel) -> f64 {
        match m {
            Channel::One => self.chi1,
            Channel::Two => self.chi2,
            Channel::Twelve => self.chi12,
        }
    }

    /// Rate-difference constant `delta_m` of a loss channel.
    pub fn delta_m(&self, m: Channel) -> f64 {
        match m {
            Channel::One => self.delta1,
            Channel::Two => self.delta2,
            Channel::Twelve => self.delta12,
        }
    }

    /// Loss rate `gamma_m` of a channel.
    pub fn gamma_m(&self, m: Channel) -> f64 {
        match m {
            Channel::One => self.gamma1,
            Channel::Two => self.gamma2,
            Channel::Twelve => self.gamma12,
        }
    }

    /// Envelope decay constant `G_m` of a channel for initial atom number `n0`.
    pub fn big_g(&self, m: Channel, n0: usize) -> f64 {
        let n0 = n0 as f64;
        match m {
            Channel::One => (2.0 * self.gamma1 + self.gamma12) * n0 - 2.0 * self.gamma1 - 2.0 * self.gamma12,
            Channel::Two => (2.0 * self.gamma2 + self.gamma12) * n0 - 2.0 * self.gamma2 - 2.0 * self.gamma12,
            Channel::Twelve => {
                (self.gamma1 + self.gamma2 + self.gamma12) * n0
                    - 2.0 * self.gamma1
                    - 2.0 * self.gamma2
                    - self.gamma12
            }
        }
    }

    /// True when every loss rate vanishes.
    pub fn is_lossless(&self) -> bool {
        self.gamma1 == 0.0 && self.gamma2 == 0.0 && self.gamma12 == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derived_constants_identities() {
        let p = ModelParams::new(0.1, -0.2, 1.3, 0.7, 0.25, 0.01, 0.02, 0.005).unwrap();
        // chi_1 - chi_2 = 2 chi and delta_1 + delta_2 = 2 delta_12 hold exactly.
        assert_eq!(p.chi_m(Channel::One) - p.chi_m(Channel::Two), 2.0 * p.chi());
        assert_eq!(
            p.delta_m(Channel::One) + p.delta_m(Channel::Two),
            2.0 * p.delta_m(Channel::Twelve)
        );
        assert_relative_eq!(p.chi(), (1.3 + 0.7 - 0.5) / 2.0);
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(ModelParams::new(0.0, 0.0, 1.0, 1.0, 0.0, -1e-3, 0.0, 0.0).is_err());
    }

    #[test]
    fn from_chis_round_trip() {
        let p = ModelParams::from_chis(0.0, -2.0, 0.01, 0.0, 0.0).unwrap();
        assert_eq!(p.chi_m(Channel::One), 0.0);
        assert_eq!(p.chi_m(Channel::Two), -2.0);
        assert_eq!(p.chi(), 1.0);
    }

    #[test]
    fn big_g_matches_definitions() {
        let p = ModelParams::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.3, 0.2, 0.1).unwrap();
        let n0 = 50usize;
        assert_relative_eq!(p.big_g(Channel::One, n0), (0.6 + 0.1) * 50.0 - 0.6 - 0.2);
        assert_relative_eq!(p.big_g(Channel::Two, n0), (0.4 + 0.1) * 50.0 - 0.4 - 0.2);
        assert_relative_eq!(p.big_g(Channel::Twelve, n0), 0.6 * 50.0 - 0.6 - 0.4 - 0.1);
    }
}
