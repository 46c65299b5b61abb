//! Shared oracle machinery for the integration tests: a dense brute-force
//! Lindblad integrator over the full two-mode Fock space (no block
//! shortcut), plus small comparison helpers.  Everything here is
//! deliberately independent of the block-cascade implementation it checks.

#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use bjj::exact::BlockDensity;
use bjj::fock::{coherent_state, SectorState};
use bjj::params::ModelParams;

/// Dense representation of the lossy junction on the full space of
/// occupations with n1 + n2 <= n0.
pub struct DenseLindblad {
    pub n0: usize,
    pub states: Vec<(usize, usize)>,
    pub index: HashMap<(usize, usize), usize>,
    h: DMatrix<Complex64>,
    jumps: Vec<(f64, DMatrix<Complex64>)>,
}

impl DenseLindblad {
    pub fn new(n0: usize, p: &ModelParams) -> Self {
        let mut states = Vec::new();
        for total in 0..=n0 {
            for n1 in 0..=total {
                states.push((n1, total - n1));
            }
        }
        let index: HashMap<(usize, usize), usize> =
            states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let dim = states.len();

        let mut h = DMatrix::zeros(dim, dim);
        for (i, &(n1, n2)) in states.iter().enumerate() {
            let (x1, x2) = (n1 as f64, n2 as f64);
            h[(i, i)] = Complex64::new(
                p.e1 * x1
                    + p.e2 * x2
                    + 0.5 * p.u1 * x1 * (x1 - 1.0)
                    + 0.5 * p.u2 * x2 * (x2 - 1.0)
                    + p.u12 * x1 * x2,
                0.0,
            );
        }

        // a1^2, a2^2, a1 a2 as dense matrices
        let mut m1 = DMatrix::zeros(dim, dim);
        let mut m2 = DMatrix::zeros(dim, dim);
        let mut m12 = DMatrix::zeros(dim, dim);
        for (i, &(n1, n2)) in states.iter().enumerate() {
            if n1 >= 2 {
                let j = index[&(n1 - 2, n2)];
                m1[(j, i)] = Complex64::new((n1 as f64 * (n1 as f64 - 1.0)).sqrt(), 0.0);
            }
            if n2 >= 2 {
                let j = index[&(n1, n2 - 2)];
                m2[(j, i)] = Complex64::new((n2 as f64 * (n2 as f64 - 1.0)).sqrt(), 0.0);
            }
            if n1 >= 1 && n2 >= 1 {
                let j = index[&(n1 - 1, n2 - 1)];
                m12[(j, i)] = Complex64::new((n1 as f64 * n2 as f64).sqrt(), 0.0);
            }
        }

        Self {
            n0,
            states,
            index,
            h,
            jumps: vec![(p.gamma1, m1), (p.gamma2, m2), (p.gamma12, m12)],
        }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    fn rhs(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let minus_i = Complex64::new(0.0, -1.0);
        let mut out = (&self.h * rho - rho * &self.h) * minus_i;
        for (gamma, m) in &self.jumps {
            if *gamma == 0.0 {
                continue;
            }
            let g = Complex64::new(*gamma, 0.0);
            let half_g = Complex64::new(0.5 * gamma, 0.0);
            let m_dag_m = m.adjoint() * m;
            out += (m * rho * m.adjoint()) * g - (&m_dag_m * rho + rho * &m_dag_m) * half_g;
        }
        out
    }

    /// Plain fixed-step RK4 on the full Lindblad equation.
    pub fn evolve_rk4(&self, rho0: &DMatrix<Complex64>, t: f64, steps: usize) -> DMatrix<Complex64> {
        let h = t / steps as f64;
        let half_h = Complex64::new(0.5 * h, 0.0);
        let full_h = Complex64::new(h, 0.0);
        let sixth_h = Complex64::new(h / 6.0, 0.0);
        let two = Complex64::new(2.0, 0.0);
        let mut rho = rho0.clone();
        for _ in 0..steps {
            let k1 = self.rhs(&rho);
            let k2 = self.rhs(&(&rho + &k1 * half_h));
            let k3 = self.rhs(&(&rho + &k2 * half_h));
            let k4 = self.rhs(&(&rho + &k3 * full_h));
            rho += (k1 + k2 * two + k3 * two + k4) * sixth_h;
        }
        rho
    }

    /// Dense density matrix of the pure coherent state in the top sector.
    pub fn coherent_density(&self, theta: f64, phi: f64) -> DMatrix<Complex64> {
        let cs = coherent_state(self.n0, theta, phi).expect("valid angles");
        let dim = self.dim();
        let mut psi = DMatrix::zeros(dim, 1);
        for n1 in 0..=self.n0 {
            psi[(self.index[&(n1, self.n0 - n1)], 0)] = cs.amps()[n1];
        }
        &psi * psi.adjoint()
    }

    /// Embed a block state into the dense basis.
    pub fn embed(&self, bd: &BlockDensity) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for blk in bd.blocks() {
            let n = blk.n_total();
            for n1 in 0..=n {
                for n1p in 0..=n {
                    let i = self.index[&(n1, n - n1)];
                    let j = self.index[&(n1p, n - n1p)];
                    out[(i, j)] = blk.mat()[(n1, n1p)];
                }
            }
        }
        out
    }
}

/// Largest elementwise modulus of the difference.
pub fn max_elem_dev(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a normalized Hermitian block.
pub fn min_eigenvalue(mat: &DMatrix<Complex64>) -> f64 {
    let sym = (mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Pure-state fidelity |<a|b>|^2 between two sector states.
pub fn fidelity(a: &SectorState, b: &SectorState) -> f64 {
    a.inner(b).norm_sqr()
}

/// Locate `count` local maxima of `|<N; pi/2, phi | psi>|` over phi, each
/// refined by ternary search; returns (phi, magnitude) sorted by phi.
pub fn overlap_peaks(psi: &SectorState, count: usize) -> Vec<(f64, f64)> {
    let n = psi.n_total();
    let overlap = |phi: f64| -> f64 {
        coherent_state(n, std::f64::consts::FRAC_PI_2, phi)
            .expect("pi/2 valid")
            .inner(psi)
            .norm()
    };
    let grid = 4096;
    let values: Vec<f64> = (0..grid)
        .map(|k| overlap(-std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / grid as f64))
        .collect();
    let mut peaks = Vec::new();
    for k in 0..grid {
        let prev = values[(k + grid - 1) % grid];
        let next = values[(k + 1) % grid];
        if values[k] > prev && values[k] >= next {
            peaks.push((k, values[k]));
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.truncate(count);

    let step = 2.0 * std::f64::consts::PI / grid as f64;
    let mut refined: Vec<(f64, f64)> = peaks
        .into_iter()
        .map(|(k, _)| {
            let center = -std::f64::consts::PI + step * k as f64;
            let (mut lo, mut hi) = (center - step, center + step);
            for _ in 0..80 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if overlap(m1) < overlap(m2) {
                    lo = m1;
                } else {
                    hi = m2;
                }
            }
            let phi = 0.5 * (lo + hi);
            (phi, overlap(phi))
        })
        .collect();
    refined.sort_by(|a, b| a.0.total_cmp(&b.0));
    refined
}
