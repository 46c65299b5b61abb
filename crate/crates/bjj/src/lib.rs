//! Dissipative dynamics of a two-mode Bose-Josephson junction with two-body
//! atom losses.
//!
//! The library simulates the quenched dynamics of `N0` bosons distributed
//! over two modes, evolving under the two-mode Bose-Hubbard Hamiltonian
//! while two-body loss channels (both atoms from mode 1, both from mode 2,
//! or one from each) remove pairs of atoms.  Because losses always remove
//! pairs, the density matrix stays block diagonal over fixed-atom-number
//! sectors and the blocks form a one-directional cascade N0 -> N0-2 -> ...
//!
//! Main entry points:
//!
//! * [`fock`] — fixed-N sector states, spin coherent states, jump operators
//!   and the diagonal Hamiltonian/damping eigenvalues;
//! * [`exact`] — block master-equation integration (exact lossless
//!   propagation plus an adaptive cascade integrator);
//! * [`trajectory`] — Monte Carlo wavefunction unraveling with exact
//!   between-jump propagation, and the closed-form coherent-state
//!   trajectory after J loss events;
//! * [`conditional`] — closed-form conditional density matrices and
//!   jump-time statistics for states conditioned on a measured atom number;
//! * [`metrics`] — quantum Fisher information (direction optimized),
//!   Husimi distributions and shot-noise comparisons;
//! * [`scenario`] — configuration parsing and named scenario runners
//!   backing the `bjj` command-line tool.

pub mod conditional;
pub mod error;
pub mod exact;
pub mod fock;
pub mod metrics;
pub mod params;
pub mod quad;
pub mod scenario;
pub mod trajectory;

pub use error::{Error, Result};
pub use params::{Channel, ModelParams};
