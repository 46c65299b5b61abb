//! Fixed-N Fock sector representation and the operators that act on it.
//!
//! A sector holds all states with total atom number `N`; the basis is
//! `|n1, N - n1>` with `n1` from 0 to N, stored in ascending `n1`.  The
//! Hamiltonian and the damping operator are diagonal in this basis, which
//! is what makes exact between-jump propagation and the block cascade
//! integration cheap.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{Channel, ModelParams};

/// Pure state in the fixed-N sector: amplitude vector indexed by `n1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    n_total: usize,
    amps: DVector<Complex64>,
}

impl SectorState {
    /// Wrap an amplitude vector; its length must be `n_total + 1`.
    pub fn new(n_total: usize, amps: DVector<Complex64>) -> Result<Self> {
        if amps.len() != n_total + 1 {
            return Err(Error::InvalidParameter(format!(
                "amplitude vector has length {}, sector N = {} needs {}",
                amps.len(),
                n_total,
                n_total + 1
            )));
        }
        Ok(Self { n_total, amps })
    }

    /// The zero vector of the sector.
    pub fn zero(n_total: usize) -> Self {
        Self {
            n_total,
            amps: DVector::zeros(n_total + 1),
        }
    }

    /// Basis Fock state `|n1, N - n1>`.
    pub fn fock(n_total: usize, n1: usize) -> Result<Self> {
        if n1 > n_total {
            return Err(Error::InvalidParameter(format!(
                "n1 = {n1} exceeds sector total N = {n_total}"
            )));
        }
        let mut amps = DVector::zeros(n_total + 1);
        amps[n1] = Complex64::new(1.0, 0.0);
        Ok(Self { n_total, amps })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn amps(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// In-place normalization; errors on the zero vector.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize state with norm {n}"
            )));
        }
        self.amps /= Complex64::new(n, 0.0);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.n_total, other.n_total, "inner product across sectors");
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Pure-state fidelity `|<self|other>|^2` (both states assumed normalized).
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// Natural log of the binomial coefficient C(n, k), via a log-factorial sum.
///
/// Amplitudes for N up to a few hundred overflow naive integer binomials;
/// everything downstream works with logs and exponentiates per amplitude.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Spin coherent state `|N; theta, phi>` with every atom in the same
/// superposition of the two modes:
///
/// `amps[n1] = sqrt(C(N, n1)) sin(theta/2)^n1 cos(theta/2)^(N-n1) e^{-i phi n1}`.
///
/// `theta = pi` is the limit state with all atoms in mode 1.
pub fn coherent_state(n_total: usize, theta: f64, phi: f64) -> Result<SectorState> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in [0, pi], got {theta}"
        )));
    }
    // theta = pi is taken as the explicit limit state (all atoms in mode 1);
    // cos(pi/2) is not exactly zero in floating point.
    if theta == std::f64::consts::PI {
        return SectorState::fock(n_total, n_total);
    }
    let half = 0.5 * theta;
    let (s, c) = (half.sin(), half.cos());
    let n = n_total;
    let mut amps = DVector::zeros(n + 1);
    for n1 in 0..=n {
        if (s == 0.0 && n1 > 0) || (c == 0.0 && n1 < n) {
            continue;
        }
        let mut log_mag = 0.5 * ln_binomial(n, n1);
        if n1 > 0 {
            log_mag += n1 as f64 * s.ln();
        }
        if n1 < n {
            log_mag += (n - n1) as f64 * c.ln();
        }
        amps[n1] = Complex64::from_polar(log_mag.exp(), -phi * n1 as f64);
    }
    SectorState::new(n_total, amps)?.normalized()
}

/// Eigenvalue of the Bose-Hubbard Hamiltonian on the Fock state
/// `|n1, N - n1>`:
/// `E1 n1 + E2 n2 + (U1/2) n1(n1-1) + (U2/2) n2(n2-1) + U12 n1 n2`.
pub fn h0_eigenvalue(n1: usize, n_total: usize, p: &ModelParams) -> f64 {
    debug_assert!(n1 <= n_total);
    let x1 = n1 as f64;
    let x2 = (n_total - n1) as f64;
    p.e1 * x1
        + p.e2 * x2
        + 0.5 * p.u1 * x1 * (x1 - 1.0)
        + 0.5 * p.u2 * x2 * (x2 - 1.0)
        + p.u12 * x1 * x2
}

/// Eigenvalue of the damping operator on `|n1, N - n1>`:
/// `D(n1) = [gamma1 n1(n1-1) + gamma2 n2(n2-1) + gamma12 n1 n2] / 2`.
///
/// The effective Hamiltonian generating the no-loss evolution is
/// `H_eff = H0 - i D`.
pub fn damping_eigenvalue(n1: usize, n_total: usize, p: &ModelParams) -> f64 {
    debug_assert!(n1 <= n_total);
    let x1 = n1 as f64;
    let x2 = (n_total - n1) as f64;
    0.5 * (p.gamma1 * x1 * (x1 - 1.0) + p.gamma2 * x2 * (x2 - 1.0) + p.gamma12 * x1 * x2)
}

/// Complex eigenvalue of `H_eff = H0 - i D` on `|n1, N - n1>`.
pub fn heff_eigenvalue(n1: usize, n_total: usize, p: &ModelParams) -> Complex64 {
    Complex64::new(
        h0_eigenvalue(n1, n_total, p),
        -damping_eigenvalue(n1, n_total, p),
    )
}

/// Apply the jump operator of channel `m` (`a1^2`, `a2^2` or `a1 a2`).
///
/// The output lives in the sector with two atoms fewer and is NOT
/// renormalized: its squared norm is the relative jump weight.
pub fn apply_jump(state: &SectorState, m: Channel) -> Result<SectorState> {
    let n = state.n_total();
    if n < 2 {
        return Err(Error::SectorTooSmall { needed: 2, have: n });
    }
    let src = state.amps();
    let mut out = DVector::zeros(n - 1);
    match m {
        Channel::One => {
            for n1 in 0..=n - 2 {
                let f = ((n1 + 2) * (n1 + 1)) as f64;
                out[n1] = f.sqrt() * src[n1 + 2];
            }
        }
        Channel::Two => {
            for n1 in 0..=n - 2 {
                let f = ((n - n1) * (n - n1 - 1)) as f64;
                out[n1] = f.sqrt() * src[n1];
            }
        }
        Channel::Twelve => {
            for n1 in 0..=n - 2 {
                let f = ((n1 + 1) * (n - n1 - 1)) as f64;
                out[n1] = f.sqrt() * src[n1 + 1];
            }
        }
    }
    SectorState::new(n - 2, out)
}

/// Squared norm of `M_m |state>`, i.e. the relative weight of channel `m`.
pub fn jump_weight(state: &SectorState, m: Channel) -> f64 {
    let n = state.n_total();
    if n < 2 {
        return 0.0;
    }
    let src = state.amps();
    let mut w = 0.0;
    for n1 in 0..=n - 2 {
        let f = match m {
            Channel::One => ((n1 + 2) * (n1 + 1)) as f64,
            Channel::Two => ((n - n1) * (n - n1 - 1)) as f64,
            Channel::Twelve => ((n1 + 1) * (n - n1 - 1)) as f64,
        };
        let a = match m {
            Channel::One => src[n1 + 2],
            Channel::Two => src[n1],
            Channel::Twelve => src[n1 + 1],
        };
        w += f * a.norm_sqr();
    }
    w
}

/// Cartesian axis for collective angular momentum operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Apply the collective spin operator `J_x`, `J_y` or `J_z` for `j = N/2`.
///
/// `J_z` is diagonal with eigenvalue `n1 - N/2 = (n1 - n2)/2`; the ladder
/// operators shift `n1` by one with the standard matrix elements
/// `sqrt((N - n1)(n1 + 1))` (raising) and `sqrt(n1 (N - n1 + 1))` (lowering).
pub fn angular_momentum_apply(state: &SectorState, axis: Axis) -> SectorState {
    let n = state.n_total();
    let src = state.amps();
    let mut out = DVector::zeros(n + 1);
    match axis {
        Axis::Z => {
            let half_n = n as f64 / 2.0;
            for n1 in 0..=n {
                out[n1] = (n1 as f64 - half_n) * src[n1];
            }
        }
        Axis::X | Axis::Y => {
            // J_x = (J+ + J-)/2, J_y = (J+ - J-)/(2i).
            let (cp, cm) = match axis {
                Axis::X => (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)),
                _ => (Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)),
            };
            for n1 in 0..=n {
                if n1 < n {
                    // raising: |n1> -> |n1+1>
                    let f = (((n - n1) * (n1 + 1)) as f64).sqrt();
                    out[n1 + 1] += cp * f * src[n1];
                }
                if n1 >= 1 {
                    // lowering: |n1> -> |n1-1>
                    let f = ((n1 * (n - n1 + 1)) as f64).sqrt();
                    out[n1 - 1] += cm * f * src[n1];
                }
            }
        }
    }
    SectorState { n_total: n, amps: out }
}

/// Expectation value `<state|J_axis|state>` for a normalized state.
pub fn angular_momentum_mean(state: &SectorState, axis: Axis) -> f64 {
    state.inner(&angular_momentum_apply(state, axis)).re
}
