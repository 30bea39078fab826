//! Small-vibration analysis about an equilibrium state: consistent mass
//! matrix, tangent stiffness, and the generalized eigenproblem
//! `K_T·φ = λ·M·φ` on the free degrees of freedom.
//!
//! Eigenvalues are reported raw and sorted ascending. A mode counts as a zero
//! (rigid-body or unstiffened mechanism) mode when `|λ|` falls below
//! [`ZERO_MODE_REL_THRESHOLD`] times the largest `|λ|`. Frequencies are
//! `√|λ|`, so an unstable mode (negative `λ`, e.g. the out-of-plane fold of a
//! prestressed planar assembly) reports the magnitude of its imaginary
//! frequency rather than zero.

use nalgebra::{DMatrix, DVector};

use crate::numerics::gen_sym_eig;
use crate::statics::EquilibriumState;
pub use crate::statics::tangent_stiffness;
use crate::topology::Structure;
use crate::{Error, Result};

/// Relative `|λ|` cutoff separating zero modes from elastic ones.
pub const ZERO_MODE_REL_THRESHOLD: f64 = 1e-6;

/// Output of [`modal_analysis`]; all arrays are aligned and sorted by
/// ascending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalResult {
    /// Generalized eigenvalues λ (rad²/s²), ascending, one per free DOF.
    pub eigenvalues: DVector<f64>,
    /// Mode frequencies `√|λ|` (rad/s).
    pub frequencies: DVector<f64>,
    /// Mode frequencies in Hz.
    pub hz_frequencies: DVector<f64>,
    /// Number of modes classified as zero modes.
    pub zero_mode_count: usize,
    /// M-orthonormal mode shapes, one column per mode (free DOFs only).
    pub mode_shapes: DMatrix<f64>,
}

impl ModalResult {
    /// True when mode `i` is a rigid-body/mechanism mode.
    pub fn is_zero_mode(&self, i: usize) -> bool {
        let scale = self.eigenvalues.amax();
        self.eigenvalues[i].abs() < ZERO_MODE_REL_THRESHOLD * scale
    }

    /// Frequencies of the non-zero modes, sorted ascending. This is the
    /// spectrum datasets record: its length is fixed by the structure's
    /// topology and support conditions as long as no mode crosses the zero
    /// threshold.
    pub fn sorted_nonzero_frequencies(&self) -> DVector<f64> {
        let mut freqs: Vec<f64> = (0..self.eigenvalues.len())
            .filter(|&i| !self.is_zero_mode(i))
            .map(|i| self.frequencies[i])
            .collect();
        freqs.sort_by(f64::total_cmp);
        DVector::from_vec(freqs)
    }
}

/// Consistent mass matrix over all degrees of freedom: each member
/// distributes `m/3` to each endpoint and couples them with `m/6`, per axis.
/// Member masses come from the as-built rest lengths, so actuation does not
/// change them.
pub fn mass_matrix(s: &Structure) -> DMatrix<f64> {
    let n = s.n_nodes();
    let mut m = DMatrix::zeros(3 * n, 3 * n);
    for k in 0..s.n_members() {
        let [i, j] = s.connectivity.endpoints(k);
        let mass = s.members[k].mass();
        for axis in 0..3 {
            m[(3 * i + axis, 3 * i + axis)] += mass / 3.0;
            m[(3 * j + axis, 3 * j + axis)] += mass / 3.0;
            m[(3 * i + axis, 3 * j + axis)] += mass / 6.0;
            m[(3 * j + axis, 3 * i + axis)] += mass / 6.0;
        }
    }
    m
}

/// Natural modes of small vibration about an equilibrium state.
pub fn modal_analysis(s: &Structure, state: &EquilibriumState) -> Result<ModalResult> {
    let kt = tangent_stiffness(s, &state.nodes, &state.force_densities, &state.rest_lengths)?;
    let kt_aa = s.free_map.select_matrix(&kt);
    let m_aa = s.free_map.select_matrix(&mass_matrix(s));
    let (eigenvalues, mode_shapes) = gen_sym_eig(&kt_aa, &m_aa).map_err(|e| match e {
        Error::NotPositiveDefinite => Error::MassNotPositiveDefinite,
        other => other,
    })?;
    let scale = eigenvalues.amax();
    let zero_mode_count = eigenvalues
        .iter()
        .filter(|&&l| l.abs() < ZERO_MODE_REL_THRESHOLD * scale)
        .count();
    let frequencies = eigenvalues.map(|l| l.abs().sqrt());
    let hz_frequencies = frequencies.map(|w| w / (2.0 * std::f64::consts::PI));
    Ok(ModalResult {
        eigenvalues,
        frequencies,
        hz_frequencies,
        zero_mode_count,
        mode_shapes,
    })
}
