//! Exact lossless propagation and direct integration of the block master
//! equation.
//!
//! Two-body losses never mix sectors with different total atom number; they
//! only feed population from sector N+2 into sector N.  The density matrix
//! therefore stays block diagonal, and within each block the Hamiltonian and
//! damping act diagonally.  The integrator below exploits both facts: each
//! block's diagonal part is propagated exactly, and the one-directional feed
//! is integrated with exponential quadrature against a cubic Hermite model
//! of the (slowly varying) source block, processed top-down through the
//! cascade.  Step size is adaptive with an embedded lower-order error
//! estimate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{damping_eigenvalue, h0_eigenvalue, SectorState};
use crate::params::{Channel, ModelParams};

/// One fixed-N block of the density matrix, stored unnormalized: the matrix
/// is `w_N * rho_N`, so its trace is the sector probability `w_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDensity {
    n_total: usize,
    mat: DMatrix<Complex64>,
}

impl SectorDensity {
    pub fn new(n_total: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != n_total + 1 || mat.ncols() != n_total + 1 {
            return Err(Error::InvalidParameter(format!(
                "sector N = {} needs a {}x{} matrix, got {}x{}",
                n_total,
                n_total + 1,
                n_total + 1,
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { n_total, mat })
    }

    pub fn zeros(n_total: usize) -> Self {
        Self {
            n_total,
            mat: DMatrix::zeros(n_total + 1, n_total + 1),
        }
    }

    /// Outer product |psi><psi| of a pure sector state.
    pub fn from_pure(state: &SectorState) -> Self {
        let n = state.n_total();
        let a = state.amps();
        let mat = DMatrix::from_fn(n + 1, n + 1, |i, j| a[i] * a[j].conj());
        Self { n_total: n, mat }
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn mat(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn mat_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.mat
    }

    /// Sector probability `w_N` (the trace of the stored matrix).
    pub fn weight(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    /// Unit-trace copy; errors when the block carries no weight.
    pub fn normalized(&self) -> Result<Self> {
        let w = self.weight();
        if w <= 0.0 || !w.is_finite() {
            return Err(Error::ZeroJumpWeight);
        }
        Ok(Self {
            n_total: self.n_total,
            mat: self.mat.map(|z| z / w),
        })
    }

    /// Largest elementwise deviation from Hermiticity, `max |A - A^H|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let m = &self.mat;
        let mut dev: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in 0..=j {
                dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Replace the matrix by its Hermitian part `(A + A^H)/2`.
    pub fn resymmetrize(&mut self) {
        let n = self.mat.nrows();
        for j in 0..n {
            for i in 0..=j {
                let avg = 0.5 * (self.mat[(i, j)] + self.mat[(j, i)].conj());
                self.mat[(i, j)] = avg;
                self.mat[(j, i)] = avg.conj();
            }
        }
    }
}

/// The full state of the lossy junction at one time: the ordered cascade of
/// sector blocks N0, N0-2, ..., down to 1 or 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDensity {
    blocks: Vec<SectorDensity>,
    time: f64,
}

impl BlockDensity {
    /// All-zero cascade topped by sector `n0`.
    pub fn zeros(n0: usize) -> Self {
        let blocks = sector_ladder(n0).map(SectorDensity::zeros).collect();
        Self { blocks, time: 0.0 }
    }

    /// Cascade with the top block set to |psi><psi| for a pure state.
    pub fn from_pure(state: &SectorState) -> Self {
        let mut bd = Self::zeros(state.n_total());
        bd.blocks[0] = SectorDensity::from_pure(state);
        bd
    }

    pub fn from_blocks(blocks: Vec<SectorDensity>, time: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("empty block list".into()));
        }
        for w in blocks.windows(2) {
            if w[0].n_total() != w[1].n_total() + 2 {
                return Err(Error::InvalidParameter(
                    "block sectors must decrease by exactly 2".into(),
                ));
            }
        }
        Ok(Self { blocks, time })
    }

    pub fn n0(&self) -> usize {
        self.blocks[0].n_total()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn blocks(&self) -> &[SectorDensity] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [SectorDensity] {
        &mut self.blocks
    }

    /// Block with total atom number `n`, if the cascade contains it.
    pub fn block(&self, n: usize) -> Option<&SectorDensity> {
        let n0 = self.n0();
        if n > n0 || !(n0 - n).is_multiple_of(2) {
            return None;
        }
        self.blocks.get((n0 - n) / 2)
    }

    pub fn block_mut(&mut self, n: usize) -> Option<&mut SectorDensity> {
        let n0 = self.n0();
        if n > n0 || !(n0 - n).is_multiple_of(2) {
            return None;
        }
        self.blocks.get_mut((n0 - n) / 2)
    }

    /// Probability `w_N` of holding `N` atoms; 0 for absent sectors.
    pub fn sector_weight(&self, n: usize) -> f64 {
        self.block(n).map_or(0.0, SectorDensity::weight)
    }

    /// Sum of all sector probabilities (1 up to integration error).
    pub fn total_trace(&self) -> f64 {
        self.blocks.iter().map(SectorDensity::weight).sum()
    }

    /// Mean atom number `sum_N N w_N / sum_N w_N`.
    pub fn mean_atom_number(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for b in &self.blocks {
            let w = b.weight();
            num += b.n_total() as f64 * w;
            den += w;
        }
        num / den
    }
}

/// Sector sizes N0, N0-2, ... down to parity.
fn sector_ladder(n0: usize) -> impl Iterator<Item = usize> {
    (0..=n0 / 2).map(move |k| n0 - 2 * k)
}

/// Propagate a pure sector state under the lossless Hamiltonian for time `t`:
/// each amplitude picks up the phase `exp(-i t h0(n1))`.  Norm preserving.
pub fn lossless_evolve(state: &SectorState, t: f64, p: &ModelParams) -> SectorState {
    let n = state.n_total();
    let mut out = state.clone();
    for n1 in 0..=n {
        let phase = Complex64::from_polar(1.0, -t * h0_eigenvalue(n1, n, p));
        out.amps_mut()[n1] *= phase;
    }
    out
}

/// Time derivative of the block master equation.
///
/// Per block N: `d rho_N/dt = -i[H0, rho_N] - {D, rho_N} + feed`, where the
/// commutator and anticommutator act diagonally and the feed collects
/// `gamma_m M_m rho_{N+2} M_m^+` from the block two atoms up.  The global
/// trace of the output vanishes (trace preservation).
pub fn master_rhs(rho: &BlockDensity, p: &ModelParams) -> BlockDensity {
    let mut out = BlockDensity::zeros(rho.n0());
    out.time = rho.time;
    for (b, block) in rho.blocks.iter().enumerate() {
        let n = block.n_total();
        let lam = lam_half_vec(n, p);
        let dst = out.blocks[b].mat_mut();
        let src = block.mat();
        for j in 0..=n {
            for i in 0..=n {
                dst[(i, j)] = (lam[i] + lam[j].conj()) * src[(i, j)];
            }
        }
        if b > 0 {
            let parent = rho.blocks[b - 1].mat();
            let n_src = n + 2;
            for m in Channel::ALL {
                let gamma = p.gamma_m(m);
                if gamma == 0.0 {
                    continue;
                }
                let s = m.index_shift();
                let w = jump_coeff_vec(m, n_src);
                for j in 0..=n {
                    for i in 0..=n {
                        dst[(i, j)] += gamma * w[i] * w[j] * parent[(i + s, j + s)];
                    }
                }
            }
        }
    }
    out
}

/// `-i h0(n) - D(n)` for every `n` of a sector: the half eigenvalue such that
/// an element (n, n') of the block evolves with `lam[n] + conj(lam[n'])`.
fn lam_half_vec(n_total: usize, p: &ModelParams) -> Vec<Complex64> {
    (0..=n_total)
        .map(|n1| {
            Complex64::new(
                -damping_eigenvalue(n1, n_total, p),
                -h0_eigenvalue(n1, n_total, p),
            )
        })
        .collect()
}

/// Jump amplitude factors c_m(n) mapping sector `n_src` to `n_src - 2`:
/// `(M_m psi)[n] = c_m(n) psi[n + shift]`.
fn jump_coeff_vec(m: Channel, n_src: usize) -> Vec<f64> {
    let n_dst = n_src - 2;
    (0..=n_dst)
        .map(|n| match m {
            Channel::One => (((n + 2) * (n + 1)) as f64).sqrt(),
            Channel::Two => (((n_src - n) * (n_src - n - 1)) as f64).sqrt(),
            Channel::Twelve => (((n + 1) * (n_src - n - 1)) as f64).sqrt(),
        })
        .collect()
}

/// Controls for the adaptive cascade integrator.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    /// Relative tolerance of the local error test.
    pub rtol: f64,
    /// Absolute tolerance floor of the local error test.
    pub atol: f64,
    /// Hard cap on the step size (0 or negative disables the cap).
    pub max_step: f64,
    /// Drop blocks whose trace falls below this threshold from the cascade
    /// processing; `None` (the default) keeps every block.
    pub truncate_threshold: Option<f64>,
    /// Safety stop on the number of accepted steps.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: 0.0,
            truncate_threshold: None,
            max_steps: 5_000_000,
        }
    }
}

/// Integrate the master equation from `rho0` to `t_final`, returning the
/// state at `t_final`.
pub fn evolve_master(
    rho0: &BlockDensity,
    t_final: f64,
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<BlockDensity> {
    let mut path = evolve_master_path(rho0, &[t_final], p, cfg)?;
    Ok(path.pop().expect("one snapshot requested"))
}

/// Integrate the master equation and return snapshots at each requested time.
///
/// Times must be nondecreasing and not precede `rho0.time()`.
pub fn evolve_master_path(
    rho0: &BlockDensity,
    times: &[f64],
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<Vec<BlockDensity>> {
    if cfg.rtol < 1e-13 {
        return Err(Error::ToleranceNotAchievable(format!(
            "rtol = {:.1e} is below what f64 arithmetic can deliver",
            cfg.rtol
        )));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("snapshot times must be nondecreasing".into()));
    }
    if let Some(&first) = times.first() {
        if first < rho0.time() {
            return Err(Error::InvalidParameter(
                "snapshot time precedes the initial time".into(),
            ));
        }
    }
    let mut cascade = Cascade::new(rho0, p, cfg);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        cascade.advance_to(t)?;
        out.push(cascade.emit());
    }
    Ok(out)
}

/// Per-channel feed precomputation for one destination block.
struct FeedChannel {
    shift: usize,
    /// `sqrt(gamma_m) * c_m(n)`; the pair weight is `w[n] * w[n']`.
    w: Vec<f64>,
    /// `lam_src[n + shift] - lam_dst[n]`; the feed element (n, n') carries
    /// the exponential factor `exp((mu[n] + conj(mu[n'])) tau)`.
    mu: Vec<Complex64>,
}

struct BlockWork {
    n_total: usize,
    lam: Vec<Complex64>,
    feeds: Vec<FeedChannel>,
}

struct Cascade {
    work: Vec<BlockWork>,
    rho: Vec<DMatrix<Complex64>>,
    feed: Vec<DMatrix<Complex64>>,
    rho_new: Vec<DMatrix<Complex64>>,
    feed_new: Vec<DMatrix<Complex64>>,
    t: f64,
    h: f64,
    /// Cap on h so that intermediate `exp(+D h)` factors stay representable.
    stab_cap: f64,
    cfg: IntegratorConfig,
    steps: usize,
}

impl Cascade {
    fn new(rho0: &BlockDensity, p: &ModelParams, cfg: &IntegratorConfig) -> Self {
        let n0 = rho0.n0();
        let mut work = Vec::new();
        for n in sector_ladder(n0) {
            let lam = lam_half_vec(n, p);
            let mut feeds = Vec::new();
            if n + 2 <= n0 {
                let n_src = n + 2;
                let lam_src = lam_half_vec(n_src, p);
                for m in Channel::ALL {
                    let gamma = p.gamma_m(m);
                    if gamma == 0.0 {
                        continue;
                    }
                    let s = m.index_shift();
                    let sqrt_g = gamma.sqrt();
                    let w = jump_coeff_vec(m, n_src)
                        .into_iter()
                        .map(|c| sqrt_g * c)
                        .collect::<Vec<_>>();
                    let mu = (0..=n).map(|k| lam_src[k + s] - lam[k]).collect();
                    feeds.push(FeedChannel { shift: s, w, mu });
                }
            }
            work.push(BlockWork { n_total: n, lam, feeds });
        }

        // Largest damping rate anywhere in the cascade; exp(+2 D h) shows up
        // in intermediates, so keep 2 * D_max * h below ~50.
        let d_max = sector_ladder(n0)
            .flat_map(|n| (0..=n).map(move |n1| damping_eigenvalue(n1, n, p)))
            .fold(0.0f64, f64::max);
        let stab_cap = if d_max > 0.0 { 25.0 / d_max } else { f64::INFINITY };

        let rho: Vec<_> = rho0.blocks().iter().map(|b| b.mat().clone()).collect();
        let feed = compute_feeds(&work, &rho);
        let rho_new = rho.clone();
        let feed_new = feed.clone();

        // Initial step: resolve the fastest trace decay, within the caps.
        let rate = 2.0 * d_max;
        let mut h = if rate > 0.0 { 0.25 / rate } else { f64::INFINITY };
        h = h.min(stab_cap);
        if cfg.max_step > 0.0 {
            h = h.min(cfg.max_step);
        }
        if !h.is_finite() {
            h = 0.0; // replaced by the span clamp on the first step
        }

        Self {
            work,
            rho,
            feed,
            rho_new,
            feed_new,
            t: rho0.time(),
            h,
            stab_cap,
            cfg: cfg.clone(),
            steps: 0,
        }
    }

    fn advance_to(&mut self, t_stop: f64) -> Result<()> {
        if t_stop <= self.t {
            return Ok(());
        }
        if self.h == 0.0 {
            self.h = t_stop - self.t;
        }
        while self.t < t_stop {
            let remaining = t_stop - self.t;
            let mut h_try = self.h.min(self.stab_cap);
            if self.cfg.max_step > 0.0 {
                h_try = h_try.min(self.cfg.max_step);
            }
            let lands_on_stop = h_try >= remaining;
            if lands_on_stop {
                h_try = remaining;
            }

            let err = self.attempt_step(h_try);
            let min_h = 1e-14 * self.t.abs().max(1.0);
            if err <= 1.0 {
                self.accept(h_try);
                if lands_on_stop {
                    self.t = t_stop;
                }
                self.steps += 1;
                if self.steps > self.cfg.max_steps {
                    return Err(Error::ToleranceNotAchievable(format!(
                        "exceeded {} steps before t = {t_stop}",
                        self.cfg.max_steps
                    )));
                }
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.25)).min(5.0) };
                // A step truncated to land on the stop time says nothing
                // about the error-limited step; keep the controller value.
                if !lands_on_stop {
                    self.h = h_try * grow.max(0.2);
                }
            } else {
                let shrink = (0.9 * err.powf(-0.25)).clamp(0.1, 0.9);
                self.h = h_try * shrink;
                if self.h < min_h {
                    return Err(Error::StepSizeUnderflow { t: self.t, h: self.h });
                }
            }
        }
        Ok(())
    }

    /// Deepest block index that must be processed this step.
    fn active_depth(&self) -> usize {
        let last = self.work.len() - 1;
        match self.cfg.truncate_threshold {
            None => last,
            Some(thr) => {
                let mut deepest = 0;
                for (b, m) in self.rho.iter().enumerate() {
                    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
                    if tr > thr {
                        deepest = b;
                    }
                }
                (deepest + 1).min(last)
            }
        }
    }

    /// Try one step of size `h`; fills `rho_new`/`feed_new` and returns the
    /// weighted RMS error estimate (accept when <= 1).
    fn attempt_step(&mut self, h: f64) -> f64 {
        let depth = self.active_depth();
        let mut err_sq_sum = 0.0f64;
        let mut err_count = 0usize;
        for b in 0..=depth {
            let (err_sq, count) = step_block(
                b,
                h,
                &self.work[b],
                if b > 0 { Some(&self.work[b - 1]) } else { None },
                &self.rho,
                &self.feed,
                &mut self.rho_new,
                &self.feed_new,
                &self.cfg,
            );
            err_sq_sum += err_sq;
            err_count += count;
            // Feed at t+h into block b, used by block b+1 as its source
            // endpoint derivative, evaluated on the just-updated parent.
            if b < depth {
                compute_feed_into(
                    b + 1,
                    &self.work[b + 1],
                    &self.rho_new[b],
                    &mut self.feed_new[b + 1],
                );
            }
        }
        if err_count == 0 {
            0.0
        } else {
            (err_sq_sum / err_count as f64).sqrt()
        }
    }

    fn accept(&mut self, h: f64) {
        std::mem::swap(&mut self.rho, &mut self.rho_new);
        std::mem::swap(&mut self.feed, &mut self.feed_new);
        self.t += h;
    }

    /// Snapshot of the current state with mirrored lower triangles.
    fn emit(&self) -> BlockDensity {
        let blocks = self
            .work
            .iter()
            .zip(&self.rho)
            .map(|(w, m)| {
                let mut full = m.clone();
                for j in 0..full.ncols() {
                    for i in j + 1..full.nrows() {
                        full[(i, j)] = full[(j, i)].conj();
                    }
                }
                SectorDensity::new(w.n_total, full).expect("sizes agree by construction")
            })
            .collect();
        BlockDensity { blocks, time: self.t }
    }
}

/// Feed matrices (upper triangles) for every block given the block states.
fn compute_feeds(work: &[BlockWork], rho: &[DMatrix<Complex64>]) -> Vec<DMatrix<Complex64>> {
    let mut feeds: Vec<_> = work
        .iter()
        .map(|w| DMatrix::zeros(w.n_total + 1, w.n_total + 1))
        .collect();
    for b in 1..work.len() {
        let (parents, rest) = feeds.split_at_mut(b);
        let _ = parents;
        compute_feed_into(b, &work[b], &rho[b - 1], &mut rest[0]);
    }
    feeds
}

/// Upper triangle of `sum_m gamma_m M_m parent M_m^+` for block `b`.
fn compute_feed_into(
    _b: usize,
    work_b: &BlockWork,
    parent: &DMatrix<Complex64>,
    out: &mut DMatrix<Complex64>,
) {
    let n = work_b.n_total;
    out.fill(Complex64::default());
    for fc in &work_b.feeds {
        let s = fc.shift;
        for j in 0..=n {
            for i in 0..=j {
                out[(i, j)] += fc.w[i] * fc.w[j] * parent[(i + s, j + s)];
            }
        }
    }
}

/// Advance one block by `h` and return (sum of squared weighted errors,
/// element count).  Only upper triangles are touched.
#[allow(clippy::too_many_arguments)]
fn step_block(
    b: usize,
    h: f64,
    work_b: &BlockWork,
    work_src: Option<&BlockWork>,
    rho: &[DMatrix<Complex64>],
    feed: &[DMatrix<Complex64>],
    rho_new: &mut [DMatrix<Complex64>],
    feed_new: &[DMatrix<Complex64>],
    cfg: &IntegratorConfig,
) -> (f64, usize) {
    let n = work_b.n_total;
    let decay: Vec<Complex64> = work_b.lam.iter().map(|l| (l * h).exp()).collect();

    if b == 0 {
        let (old, new) = (&rho[0], &mut rho_new[0]);
        for j in 0..=n {
            for i in 0..=j {
                new[(i, j)] = decay[i] * decay[j].conj() * old[(i, j)];
            }
        }
        return (0.0, 0);
    }

    let src_work = work_src.expect("non-top block has a source");
    let inv_decay_src: Vec<Complex64> = src_work.lam.iter().map(|l| (-l * h).exp()).collect();

    let (earlier, later) = rho_new.split_at_mut(b);
    let src_new = &earlier[b - 1];
    let dst = &mut later[0];
    let src_old = &rho[b - 1];
    let src_feed_old = &feed[b - 1];
    let src_feed_new = &feed_new[b - 1];
    let dst_old = &rho[b];

    let h2 = h * h;
    let atol = cfg.atol;
    let rtol = cfg.rtol;

    // Column-parallel update of the upper triangle; each column of the
    // destination is an independent slice.
    let ncols = n + 1;
    let col_results: Vec<(f64, usize)> = dst
        .as_mut_slice()
        .par_chunks_mut(ncols)
        .enumerate()
        .map(|(j, col)| {
            let mut err_sq = 0.0f64;
            let mut count = 0usize;
            for i in 0..=j {
                let mut acc = Complex64::default();
                let mut err_acc = Complex64::default();
                for fc in &work_b.feeds {
                    let s = fc.shift;
                    let (si, sj) = (i + s, j + s);
                    let y0 = src_old[(si, sj)];
                    let d0 = src_feed_old[(si, sj)];
                    let strip = inv_decay_src[si] * inv_decay_src[sj].conj();
                    let y1 = strip * src_new[(si, sj)];
                    let d1 = strip * src_feed_new[(si, sj)];
                    let dy = y1 - y0;
                    let a2 = ((dy * 3.0 / h) - d0 * 2.0 - d1) / h;
                    let a3 = ((dy * -2.0 / h) + d0 + d1) / h2;
                    let z = (fc.mu[i] + fc.mu[j].conj()) * h;
                    let psi = psi_funcs(z);
                    let integral =
                        h * (y0 * psi[0] + d0 * h * psi[1] + a2 * h2 * psi[2] + a3 * h2 * h * psi[3]);
                    let w = fc.w[i] * fc.w[j];
                    acc += w * integral;
                    err_acc += w * a3 * h2 * h2 * (psi[3] - psi[2]);
                }
                let damp = decay[i] * decay[j].conj();
                let old = dst_old[(i, j)];
                let new = damp * (old + acc);
                col[i] = new;
                let scale = atol + rtol * old.norm().max(new.norm());
                let e = (damp * err_acc).norm() / scale;
                err_sq += e * e;
                count += 1;
            }
            (err_sq, count)
        })
        .collect();

    let mut err_sq = 0.0;
    let mut count = 0;
    for (e, c) in col_results {
        err_sq += e;
        count += c;
    }
    (err_sq, count)
}

/// `psi_k(z) = int_0^1 e^{z x} x^k dx` for k = 0..3.
///
/// Small |z| uses the series `sum_j z^j / (j! (k+j+1))` to avoid the
/// cancellation in the closed form `psi_k = (e^z - k psi_{k-1}) / z`.
fn psi_funcs(z: Complex64) -> [Complex64; 4] {
    if z.norm_sqr() < 1.0 {
        let mut sums = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(1.0 / 3.0, 0.0),
            Complex64::new(0.25, 0.0),
        ];
        let mut term = Complex64::new(1.0, 0.0); // z^j / j!
        for j in 1..=24 {
            term *= z / j as f64;
            let base = (j + 1) as f64;
            sums[0] += term / base;
            sums[1] += term / (base + 1.0);
            sums[2] += term / (base + 2.0);
            sums[3] += term / (base + 3.0);
            if term.norm_sqr() < 1e-36 {
                break;
            }
        }
        sums
    } else {
        let e = z.exp();
        let psi0 = (e - 1.0) / z;
        let psi1 = (e - psi0) / z;
        let psi2 = (e - 2.0 * psi1) / z;
        let psi3 = (e - 3.0 * psi2) / z;
        [psi0, psi1, psi2, psi3]
    }
}
