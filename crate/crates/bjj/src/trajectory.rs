//! Monte Carlo wavefunction unraveling of the lossy dynamics.
//!
//! Between jumps the state evolves under the diagonal non-Hermitian
//! `H_eff = H0 - iD`, so no-jump propagation is exact and waiting times can
//! be sampled by inverting the survival norm directly (a monotone sum of
//! exponentials) instead of accumulating small-step jump probabilities.
//! A jump applies one of the three pair-loss operators and moves the state
//! two atoms down.
//!
//! The closed-form counterpart: a loss in channel `m` at time `s` maps the
//! equatorial coherent state onto another coherent state whose Bloch angles
//! are `theta_m(s) = 2 arctan(exp(-s delta_m))`, `phi_m(s) = 2 s chi_m`, and
//! the full trajectory state is that coherent state propagated by `H_eff`
//! for the whole interval.  `trajectory_state_analytic` builds it;
//! `trajectory_state_piecewise` is the definitional product of propagators
//! and jumps the analytic form is checked against.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{BlockDensity, SectorDensity};
use crate::fock::{
    apply_jump, coherent_state, damping_eigenvalue, h0_eigenvalue, heff_eigenvalue, jump_weight,
    SectorState,
};
use crate::params::{Channel, ModelParams};

/// One recorded loss event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub channel: Channel,
    pub time: f64,
}

/// One Monte Carlo realization.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub seed: u64,
    /// Counter used to derive this realization's RNG stream.
    pub index: u64,
    pub jumps: Vec<JumpRecord>,
    pub t_final: f64,
    pub final_state: SectorState,
}

/// Serializable per-trajectory log line for post-hoc analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryLogRecord {
    pub seed: u64,
    pub index: u64,
    pub jumps: Vec<JumpRecord>,
    pub t_final: f64,
    pub final_sector: usize,
}

impl Trajectory {
    pub fn log_record(&self) -> TrajectoryLogRecord {
        TrajectoryLogRecord {
            seed: self.seed,
            index: self.index,
            jumps: self.jumps.clone(),
            t_final: self.t_final,
            final_sector: self.final_state.n_total(),
        }
    }
}

/// Propagate a pure sector state under `H_eff = H0 - iD` for time `dt`.
///
/// The propagator is diagonal, so this is exact; the output is unnormalized
/// and its squared norm is the no-jump survival probability over `dt`.
pub fn propagate_no_jump(state: &SectorState, dt: f64, p: &ModelParams) -> SectorState {
    let n = state.n_total();
    let mut out = state.clone();
    for n1 in 0..=n {
        let factor = Complex64::from_polar(
            (-dt * damping_eigenvalue(n1, n, p)).exp(),
            -dt * h0_eigenvalue(n1, n, p),
        );
        out.amps_mut()[n1] *= factor;
    }
    out
}

/// Solve `||exp(-i s H_eff) psi||^2 = r` for the waiting time `s`.
///
/// Returns `None` when no jump occurs before `t_max` (the survival
/// probability at `t_max` still exceeds `r`).  The squared norm is a
/// strictly decreasing sum of exponentials whenever the state touches
/// damped Fock components, so the root is found by safeguarded
/// Newton/bisection to relative precision 1e-12.
pub fn sample_waiting_time(
    state: &SectorState,
    r: f64,
    t_max: f64,
    p: &ModelParams,
) -> Option<f64> {
    let n = state.n_total();
    let probs: Vec<(f64, f64)> = state
        .amps()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(n1, a)| (a.norm_sqr(), 2.0 * damping_eigenvalue(n1, n, p)))
        .collect();
    let survival = |s: f64| -> f64 { probs.iter().map(|&(p, d)| p * (-d * s).exp()).sum() };
    let survival_rate = |s: f64| -> f64 { probs.iter().map(|&(p, d)| p * d * (-d * s).exp()).sum() };

    if r >= 1.0 {
        return Some(0.0);
    }
    if survival(t_max) > r {
        return None;
    }

    // Safeguarded Newton on the log would also work; plain bracketing is
    // ample for a monotone C^inf function.
    let (mut lo, mut hi) = (0.0f64, t_max);
    let mut s = t_max * 0.5;
    for _ in 0..200 {
        let f = survival(s) - r;
        if f > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let df = survival_rate(s);
        let newton = if df > 0.0 { s + f / df } else { f64::NAN };
        s = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Some(s)
}

/// Pick the loss channel at a jump, with probability proportional to
/// `gamma_m ||M_m psi||^2`.
pub fn sample_channel(state_at_jump: &SectorState, r: f64, p: &ModelParams) -> Result<Channel> {
    let weights: Vec<f64> = Channel::ALL
        .iter()
        .map(|&m| p.gamma_m(m) * jump_weight(state_at_jump, m))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroJumpWeight);
    }
    let target = r * total;
    let mut acc = 0.0;
    for (&m, &w) in Channel::ALL.iter().zip(&weights) {
        acc += w;
        if target < acc {
            return Ok(m);
        }
    }
    Ok(Channel::Twelve)
}

/// One realization starting from the coherent state `|n0; theta, phi>`,
/// deterministic in `(seed, index)`.
pub fn run_trajectory_indexed(
    n0: usize,
    theta: f64,
    phi: f64,
    t_final: f64,
    p: &ModelParams,
    seed: u64,
    index: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut state = coherent_state(n0, theta, phi)?;
    let mut jumps = Vec::new();
    let mut t = 0.0;
    loop {
        let r: f64 = rng.gen();
        match sample_waiting_time(&state, r, t_final - t, p) {
            None => {
                state = propagate_no_jump(&state, t_final - t, p).normalized()?;
                break;
            }
            Some(s) => {
                state = propagate_no_jump(&state, s, p).normalized()?;
                let r2: f64 = rng.gen();
                let channel = sample_channel(&state, r2, p)?;
                state = apply_jump(&state, channel)?.normalized()?;
                t += s;
                jumps.push(JumpRecord { channel, time: t });
            }
        }
    }
    Ok(Trajectory {
        seed,
        index,
        jumps,
        t_final,
        final_state: state,
    })
}

/// One realization with the default stream (index 0).
pub fn run_trajectory(
    n0: usize,
    theta: f64,
    phi: f64,
    t_final: f64,
    p: &ModelParams,
    seed: u64,
) -> Result<Trajectory> {
    run_trajectory_indexed(n0, theta, phi, t_final, p, seed, 0)
}

/// Bloch angles imprinted by a single loss in channel `m` at time `s`:
/// `theta_m(s) = 2 arctan(exp(-s delta_m))`, `phi_m(s) = 2 s chi_m`.
pub fn jump_angles(m: Channel, s: f64, p: &ModelParams) -> (f64, f64) {
    let theta = 2.0 * (-s * p.delta_m(m)).exp().atan();
    let phi = 2.0 * s * p.chi_m(m);
    (theta, phi)
}

/// Accumulated angles after several losses: the phases add and the
/// half-angle tangents multiply, i.e. the exponents `s delta_m` add.
pub fn multi_jump_angles(jumps: &[JumpRecord], p: &ModelParams) -> (f64, f64) {
    let mut exponent = 0.0;
    let mut phi = 0.0;
    for j in jumps {
        exponent += j.time * p.delta_m(j.channel);
        phi += 2.0 * j.time * p.chi_m(j.channel);
    }
    let theta = 2.0 * (-exponent).exp().atan();
    (theta, phi)
}

/// Complex dynamical phase accumulated by the Fock component `|n1, n2>` of
/// a trajectory with one loss in channel `m` at time `s` within `[0, t]`:
/// `(t - s) H_eff(shifted) + s H_eff(n1, n2)`, with the index shift of the
/// channel (`H_eff` eigenvalues are complex, `h0 - i D`).
pub fn dynamical_phase(
    t: f64,
    s: f64,
    n1: usize,
    n_total: usize,
    m: Channel,
    p: &ModelParams,
) -> Result<Complex64> {
    if s < 0.0 || s > t {
        return Err(Error::InvalidParameter(format!(
            "jump time s = {s} outside [0, {t}]"
        )));
    }
    let n2 = n_total
        .checked_sub(n1)
        .ok_or_else(|| Error::InvalidParameter(format!("n1 = {n1} exceeds N = {n_total}")))?;
    let (need1, need2) = match m {
        Channel::One => (2, 0),
        Channel::Two => (0, 2),
        Channel::Twelve => (1, 1),
    };
    if n1 < need1 || n2 < need2 {
        return Err(Error::InvalidParameter(format!(
            "Fock state |{n1},{n2}> cannot lose through channel {m}"
        )));
    }
    let shifted = heff_eigenvalue(n1 - need1, n_total - 2, p);
    let unshifted = heff_eigenvalue(n1, n_total, p);
    Ok(shifted * (t - s) + unshifted * s)
}

/// Closed-form state of a trajectory with the given loss record, for the
/// standard initial state `|n0; pi/2, 0>`: the coherent state with the
/// accumulated angles in the reduced sector, propagated under `H_eff` for
/// the full interval and normalized.
pub fn trajectory_state_analytic(
    jumps: &[JumpRecord],
    t: f64,
    n0: usize,
    p: &ModelParams,
) -> Result<SectorState> {
    let n_final = n0
        .checked_sub(2 * jumps.len())
        .ok_or(Error::SectorTooSmall { needed: 2 * jumps.len(), have: n0 })?;
    let (theta, phi) = multi_jump_angles(jumps, p);
    let cs = coherent_state(n_final, theta, phi)?;
    propagate_no_jump(&cs, t, p).normalized()
}

/// Definitional product of no-jump propagators and jump operators for a
/// given loss record, starting from `|n0; pi/2, 0>`.  This is the route the
/// analytic coherent-state form is validated against.
pub fn trajectory_state_piecewise(
    jumps: &[JumpRecord],
    t: f64,
    n0: usize,
    p: &ModelParams,
) -> Result<SectorState> {
    if jumps.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::InvalidParameter("jump times must be nondecreasing".into()));
    }
    if let Some(last) = jumps.last() {
        if last.time > t {
            return Err(Error::InvalidParameter("jump after the final time".into()));
        }
    }
    let mut state = coherent_state(n0, std::f64::consts::FRAC_PI_2, 0.0)?;
    let mut t_prev = 0.0;
    for j in jumps {
        state = propagate_no_jump(&state, j.time - t_prev, p);
        state = apply_jump(&state, j.channel)?;
        t_prev = j.time;
    }
    state = propagate_no_jump(&state, t - t_prev, p);
    state.normalized()
}

/// Monte Carlo estimate of the block density matrix with per-element
/// standard errors.
#[derive(Debug, Clone)]
pub struct EnsembleDensity {
    /// Mean of |psi><psi| sorted into sectors (an unnormalized block state
    /// whose sector traces estimate the weights w_N).
    pub mean: BlockDensity,
    /// Standard error of each matrix element (same block layout).
    pub elem_stderr: Vec<DMatrix<f64>>,
    /// Standard error of each sector weight.
    pub weight_stderr: Vec<f64>,
    pub n_traj: u64,
}

impl EnsembleDensity {
    /// Fraction of matrix elements of `exact` lying within `k_sigma`
    /// standard errors of the ensemble mean, and the worst sector-weight
    /// deviation in sigma units.  Elements whose standard error is zero are
    /// compared with the absolute floor `atol`.
    pub fn agreement(&self, exact: &BlockDensity, k_sigma: f64, atol: f64) -> (f64, f64) {
        assert_eq!(self.mean.n0(), exact.n0(), "ensemble and exact state sizes differ");
        let mut total = 0usize;
        let mut within = 0usize;
        for (b, blk) in self.mean.blocks().iter().enumerate() {
            let ex = exact.blocks()[b].mat();
            let se = &self.elem_stderr[b];
            for j in 0..blk.mat().ncols() {
                for i in 0..blk.mat().nrows() {
                    let dev = (blk.mat()[(i, j)] - ex[(i, j)]).norm();
                    total += 1;
                    if dev <= k_sigma * se[(i, j)] + atol {
                        within += 1;
                    }
                }
            }
        }
        let mut worst_weight_sigma = 0.0f64;
        for (b, blk) in self.mean.blocks().iter().enumerate() {
            let w_exact = exact.blocks()[b].weight();
            let se = self.weight_stderr[b].max(atol);
            worst_weight_sigma = worst_weight_sigma.max((blk.weight() - w_exact).abs() / se);
        }
        (within as f64 / total as f64, worst_weight_sigma)
    }
}

/// Welford accumulator over block-shaped data.
struct BlockAccumulator {
    count: u64,
    mean: Vec<DMatrix<Complex64>>,
    m2: Vec<DMatrix<f64>>,
    weight_mean: Vec<f64>,
    weight_m2: Vec<f64>,
}

impl BlockAccumulator {
    fn new(n0: usize) -> Self {
        let sizes: Vec<usize> = (0..=n0 / 2).map(|k| n0 - 2 * k + 1).collect();
        Self {
            count: 0,
            mean: sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect(),
            m2: sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect(),
            weight_mean: vec![0.0; sizes.len()],
            weight_m2: vec![0.0; sizes.len()],
        }
    }

    /// Add one trajectory: |psi><psi| in its sector, zero elsewhere.
    fn push(&mut self, state: &SectorState, n0: usize) {
        self.count += 1;
        let inv_n = 1.0 / self.count as f64;
        let hit = (n0 - state.n_total()) / 2;
        for b in 0..self.mean.len() {
            let (mean, m2) = (&mut self.mean[b], &mut self.m2[b]);
            if b == hit {
                let a = state.amps();
                for j in 0..mean.ncols() {
                    for i in 0..mean.nrows() {
                        let x = a[i] * a[j].conj();
                        let delta = x - mean[(i, j)];
                        mean[(i, j)] += delta * inv_n;
                        m2[(i, j)] += (delta * (x - mean[(i, j)]).conj()).re;
                    }
                }
            } else {
                // x = 0 for sectors the trajectory did not land in.
                for j in 0..mean.ncols() {
                    for i in 0..mean.nrows() {
                        let delta = -mean[(i, j)];
                        mean[(i, j)] += delta * inv_n;
                        m2[(i, j)] += (delta * (-mean[(i, j)]).conj()).re;
                    }
                }
            }
            let x = if b == hit { 1.0 } else { 0.0 };
            let delta = x - self.weight_mean[b];
            self.weight_mean[b] += delta * inv_n;
            self.weight_m2[b] += delta * (x - self.weight_mean[b]);
        }
    }

    /// Chan et al. pairwise merge; applied in a fixed batch order so the
    /// result does not depend on thread scheduling.
    fn merge(mut self, other: Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let nab = na + nb;
        for b in 0..self.mean.len() {
            for j in 0..self.mean[b].ncols() {
                for i in 0..self.mean[b].nrows() {
                    let delta = other.mean[b][(i, j)] - self.mean[b][(i, j)];
                    self.mean[b][(i, j)] += delta * (nb / nab);
                    self.m2[b][(i, j)] +=
                        other.m2[b][(i, j)] + delta.norm_sqr() * na * nb / nab;
                }
            }
            let delta = other.weight_mean[b] - self.weight_mean[b];
            self.weight_mean[b] += delta * (nb / nab);
            self.weight_m2[b] += other.weight_m2[b] + delta * delta * na * nb / nab;
        }
        self.count += other.count;
        self
    }

    fn finish(self, n0: usize, t_final: f64) -> EnsembleDensity {
        let n = self.count as f64;
        let sem_factor = if self.count > 1 { 1.0 / (n * (n - 1.0)) } else { 0.0 };
        let blocks: Vec<SectorDensity> = self
            .mean
            .iter()
            .enumerate()
            .map(|(b, m)| SectorDensity::new(n0 - 2 * b, m.clone()).expect("ladder sizes"))
            .collect();
        let mut mean = BlockDensity::from_blocks(blocks, t_final).expect("ladder order");
        mean.set_time(t_final);
        EnsembleDensity {
            mean,
            elem_stderr: self
                .m2
                .iter()
                .map(|m2| m2.map(|v| (v * sem_factor).max(0.0).sqrt()))
                .collect(),
            weight_stderr: self
                .weight_m2
                .iter()
                .map(|v| (v * sem_factor).max(0.0).sqrt())
                .collect(),
            n_traj: self.count,
        }
    }
}

/// Average `n_traj` trajectories into a block-density estimate.
///
/// Trajectories are independent given their derived streams, so batches run
/// in parallel; batches are merged in index order, making the result
/// deterministic in `(seed, n_traj)` regardless of thread count.
pub fn ensemble_average(
    n0: usize,
    theta: f64,
    phi: f64,
    t_final: f64,
    p: &ModelParams,
    n_traj: u64,
    seed: u64,
) -> Result<EnsembleDensity> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
    }
    const BATCH: u64 = 64;
    let n_batches = n_traj.div_ceil(BATCH);
    let batch_accs: Vec<Result<BlockAccumulator>> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let lo = batch * BATCH;
            let hi = ((batch + 1) * BATCH).min(n_traj);
            let mut acc = BlockAccumulator::new(n0);
            for index in lo..hi {
                let traj = run_trajectory_indexed(n0, theta, phi, t_final, p, seed, index)?;
                acc.push(&traj.final_state, n0);
            }
            Ok(acc)
        })
        .collect();
    let mut merged = BlockAccumulator::new(n0);
    for acc in batch_accs {
        merged = merged.merge(acc?);
    }
    Ok(merged.finish(n0, t_final))
}

/// Run an ensemble and collect the per-trajectory logs alongside the
/// density estimate (used by the CLI's trajectory command).
pub fn ensemble_with_logs(
    n0: usize,
    theta: f64,
    phi: f64,
    t_final: f64,
    p: &ModelParams,
    n_traj: u64,
    seed: u64,
) -> Result<(EnsembleDensity, Vec<TrajectoryLogRecord>)> {
    let est = ensemble_average(n0, theta, phi, t_final, p, n_traj, seed)?;
    let logs: Vec<Result<TrajectoryLogRecord>> = (0..n_traj)
        .into_par_iter()
        .map(|index| {
            run_trajectory_indexed(n0, theta, phi, t_final, p, seed, index)
                .map(|t| t.log_record())
        })
        .collect();
    let logs = logs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((est, logs))
}
