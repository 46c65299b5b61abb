//! Closed-form conditional states and jump-time statistics.
//!
//! Conditioning on a measured atom number N picks one block of the density
//! matrix.  For N = N0 the block is the no-loss state: the lossless state
//! multiplied by a Gaussian damping profile in (n1, n1').  For N = N0 - 2
//! the block is an average over the random loss time and channel; the
//! average has a closed form — the no-loss state of N0 - 2 atoms modulated
//! elementwise by the envelope `sum_m gamma_m C_m(t; n, n')`.  The envelope
//! exponents are exactly the eigenvalue mismatches accumulated across the
//! jump, so for a single loss the form is exact at any rate.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exact::SectorDensity;
use crate::fock::coherent_state;
use crate::params::{Channel, ModelParams};
use crate::quad::adaptive_simpson;
use crate::trajectory::{jump_angles, propagate_no_jump};

/// Parameter bundle of one channel's envelope: decay constant `G_m` plus the
/// channel's `delta_m` and `chi_m`.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeSpec {
    pub channel: Channel,
    pub g_m: f64,
    pub delta_m: f64,
    pub chi_m: f64,
}

impl EnvelopeSpec {
    pub fn new(p: &ModelParams, n0: usize, channel: Channel) -> Self {
        Self {
            channel,
            g_m: p.big_g(channel, n0),
            delta_m: p.delta_m(channel),
            chi_m: p.chi_m(channel),
        }
    }
}

/// Center `n1_bar` of the quadratic no-loss damping profile
/// `d(n1) = (gamma1 + gamma2 - gamma12)(n1 - n1_bar)^2 / 2`.
pub fn damping_center(p: &ModelParams, n0: usize) -> Result<f64> {
    let den = p.gamma1 + p.gamma2 - p.gamma12;
    if den == 0.0 {
        return Err(Error::DegenerateDamping);
    }
    let num = p.gamma1 - p.gamma2 + n0 as f64 * (2.0 * p.gamma2 - p.gamma12);
    Ok(num / (2.0 * den))
}

/// Unnormalized conditional state with no loss up to `t`, for the initial
/// coherent state `|n0; pi/2, 0>`: `exp(-i t H_eff) |psi0><psi0| exp(i t H_eff^+)`.
///
/// Its trace is the no-loss probability `w_{N0}(t)`; the ratio to the
/// lossless state is the Gaussian damping profile around [`damping_center`].
pub fn no_loss_conditional(t: f64, p: &ModelParams, n0: usize) -> Result<SectorDensity> {
    let cs = coherent_state(n0, std::f64::consts::FRAC_PI_2, 0.0)?;
    let damped = propagate_no_jump(&cs, t, p);
    Ok(SectorDensity::from_pure(&damped))
}

/// Density of the loss time `s` for trajectories with exactly one loss in
/// channel `m` during `[0, t]`:
///
/// `p_m(s; 1) = gamma_m e^{-s G_m} cosh(s delta_m)^{N0-2}
///              ||e^{-i t H_eff} |N0-2; theta_m(s), 0>||^2 N0(N0-1)/4`.
pub fn jump_time_distribution(m: Channel, s: f64, t: f64, p: &ModelParams, n0: usize) -> f64 {
    debug_assert!(n0 >= 2);
    let gamma = p.gamma_m(m);
    if gamma == 0.0 {
        return 0.0;
    }
    let spec = EnvelopeSpec::new(p, n0, m);
    let n0f = n0 as f64;
    // log-space prefactor: cosh^(N0-2) alone overflows at modest s*delta*N0
    let log_pref =
        gamma.ln() - s * spec.g_m + (n0f - 2.0) * ln_cosh(s * spec.delta_m) + (n0f * (n0f - 1.0) / 4.0).ln();
    let (theta, _) = jump_angles(m, s, p);
    let cs = coherent_state(n0 - 2, theta, 0.0).expect("theta in range by construction");
    let norm_sq = propagate_no_jump(&cs, t, p).norm_sqr();
    log_pref.exp() * norm_sq
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (1.0 + (-2.0 * a).exp()).ln() - std::f64::consts::LN_2
}

/// Standard deviation of the loss time under [`jump_time_distribution`],
/// by adaptive quadrature at relative tolerance 1e-8.
pub fn loss_time_std(m: Channel, t: f64, p: &ModelParams, n0: usize) -> Result<f64> {
    if p.gamma_m(m) == 0.0 {
        return Err(Error::ZeroJumpWeight);
    }
    let rel = 1e-8;
    let m0 = adaptive_simpson(|s| jump_time_distribution(m, s, t, p, n0), 0.0, t, rel);
    if m0 <= 0.0 {
        return Err(Error::ZeroJumpWeight);
    }
    let m1 = adaptive_simpson(|s| s * jump_time_distribution(m, s, t, p, n0), 0.0, t, rel);
    let m2 = adaptive_simpson(|s| s * s * jump_time_distribution(m, s, t, p, n0), 0.0, t, rel);
    let mean = m1 / m0;
    Ok((m2 / m0 - mean * mean).max(0.0).sqrt())
}

/// Envelope factor of channel `m` for the single-loss conditional state:
///
/// `C_m(t; n, n') = (1 - e^{-t z}) / z` with
/// `z = G_m + delta_m (n + n' - N0 + 2) + 2 i chi_m (n - n')`.
///
/// Near the removable singularity (`|z t| < 1e-6`) the series
/// `t (1 - z t/2 + (z t)^2 / 6)` avoids the cancellation in `1 - e^{-tz}`.
pub fn envelope_c(m: Channel, t: f64, n: usize, n_prime: usize, p: &ModelParams, n0: usize) -> Complex64 {
    let spec = EnvelopeSpec::new(p, n0, m);
    let sum_shift = n as f64 + n_prime as f64 - n0 as f64 + 2.0;
    let diff = n as f64 - n_prime as f64;
    let z = Complex64::new(
        spec.g_m + spec.delta_m * sum_shift,
        2.0 * spec.chi_m * diff,
    );
    let zt = z * t;
    if zt.norm() < 1e-6 {
        t * (Complex64::new(1.0, 0.0) - zt / 2.0 + zt * zt / 6.0)
    } else {
        (1.0 - (-zt).exp()) / z
    }
}

/// `sum_m gamma_m C_m(t; n, n')`, the full single-loss envelope.
pub fn envelope_sum(t: f64, n: usize, n_prime: usize, p: &ModelParams, n0: usize) -> Complex64 {
    Channel::ALL
        .iter()
        .filter(|&&m| p.gamma_m(m) > 0.0)
        .map(|&m| p.gamma_m(m) * envelope_c(m, t, n, n_prime, p, n0))
        .sum()
}

/// Conditional state after exactly one loss, with its absolute weight.
#[derive(Debug, Clone)]
pub struct SingleLossConditional {
    /// Normalized density matrix in the sector with `n0 - 2` atoms.
    pub state: SectorDensity,
    /// `w_{N0-2}(t)`, from integrating the jump-time distribution.
    pub weight: f64,
}

/// Closed-form conditional state in the sector with `n0 - 2` atoms:
/// the no-loss state of an (n0 - 2)-atom coherent state, modulated
/// elementwise by the channel envelope and normalized; the absolute weight
/// is integrated separately from the jump-time density.
pub fn single_loss_conditional(t: f64, p: &ModelParams, n0: usize) -> Result<SingleLossConditional> {
    if n0 < 2 {
        return Err(Error::SectorTooSmall { needed: 2, have: n0 });
    }
    let unnorm = single_loss_unnormalized(t, p, n0)?;
    let weight: f64 = Channel::ALL
        .iter()
        .filter(|&&m| p.gamma_m(m) > 0.0)
        .map(|&m| adaptive_simpson(|s| jump_time_distribution(m, s, t, p, n0), 0.0, t, 1e-8))
        .sum();
    Ok(SingleLossConditional {
        state: unnorm.normalized()?,
        weight,
    })
}

/// The unnormalized single-loss block `w_{N0-2} rho_{N0-2}`, including the
/// `N0 (N0 - 1) / 4` constant that the proportionality form drops; its trace
/// independently reproduces the integrated jump-time weight.
pub fn single_loss_unnormalized(t: f64, p: &ModelParams, n0: usize) -> Result<SectorDensity> {
    if n0 < 2 {
        return Err(Error::SectorTooSmall { needed: 2, have: n0 });
    }
    let base = no_loss_conditional(t, p, n0 - 2)?;
    let n0f = n0 as f64;
    let constant = n0f * (n0f - 1.0) / 4.0;
    let n = n0 - 2;
    let mut mat = base.mat().clone();
    for j in 0..=n {
        for i in 0..=n {
            mat[(i, j)] *= constant * envelope_sum(t, i, j, p, n0);
        }
    }
    SectorDensity::new(n, mat)
}

/// Weak-loss approximation for the sector with `n0 - 2J` atoms: the
/// envelope raised to the J-th power applied to the (n0 - 2J)-atom no-loss
/// state.  Valid for `gamma_m t << 1` and `J << N0`; violations are logged
/// as warnings, not errors.
pub fn multi_loss_conditional_approx(
    t: f64,
    j_losses: usize,
    p: &ModelParams,
    n0: usize,
) -> Result<SectorDensity> {
    if j_losses == 0 {
        return Err(Error::InvalidParameter("J must be at least 1".into()));
    }
    if n0 < 2 * j_losses {
        return Err(Error::SectorTooSmall { needed: 2 * j_losses, have: n0 });
    }
    let max_gt = Channel::ALL
        .iter()
        .map(|&m| p.gamma_m(m) * t)
        .fold(0.0f64, f64::max);
    if max_gt > 0.1 {
        log::warn!("multi-loss approximation outside its domain: max gamma_m * t = {max_gt:.3}");
    }
    if 10 * j_losses > n0 {
        log::warn!("multi-loss approximation outside its domain: J = {j_losses} not small against N0 = {n0}");
    }
    let n = n0 - 2 * j_losses;
    let base = no_loss_conditional(t, p, n)?;
    let mut mat = base.mat().clone();
    for col in 0..=n {
        for row in 0..=n {
            mat[(row, col)] *= envelope_sum(t, row, col, p, n0).powu(j_losses as u32);
        }
    }
    SectorDensity::new(n, mat)?.normalized()
}

/// Weak-loss magnitude of the envelope at the q-component formation time:
/// `|C_m(t_q; n, n')| ~ (pi / |chi| q) |sinc(pi (n - n') / q)|`.
pub fn weak_loss_envelope(q: u32, n: usize, n_prime: usize, chi: f64) -> Result<f64> {
    if q < 2 {
        return Err(Error::InvalidParameter(format!("q must be at least 2, got {q}")));
    }
    let x = std::f64::consts::PI * (n as f64 - n_prime as f64) / f64::from(q);
    Ok(std::f64::consts::PI / (chi.abs() * f64::from(q)) * sinc(x).abs())
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}
