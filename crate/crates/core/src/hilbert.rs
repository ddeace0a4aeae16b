//! Truncated composite Hilbert space (qubit ⊗ cavity) and elementary
//! operators.
//!
//! Basis ordering is fixed repo-wide as qubit ⊗ cavity: composite index
//! `q·(n_photon_max+1) + n` with qubit index `q = 0` for |g⟩, `q = 1` for
//! |e⟩, and cavity Fock index `n = 0…n_photon_max`. All matrices are dense
//! complex; the dimensions in play (≤ ~50) never justify sparsity.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Max |trace(ρ) − 1| accepted on construction.
pub const TRACE_TOL: f64 = 1e-10;
/// Max |ρ − ρ†| entry accepted on construction.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated as numerical noise.
pub const EIGENVALUE_FLOOR: f64 = -1e-8;

/// Truncated qubit ⊗ cavity space: cavity Fock levels 0…`n_photon_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceConfig {
    n_photon_max: usize,
}

impl SpaceConfig {
    pub fn new(n_photon_max: usize) -> Result<Self> {
        if n_photon_max < 1 {
            return Err(Error::Argument(format!(
                "n_photon_max must be >= 1, got {n_photon_max}"
            )));
        }
        Ok(Self { n_photon_max })
    }

    pub fn n_photon_max(&self) -> usize {
        self.n_photon_max
    }

    /// Cavity factor dimension, n_photon_max + 1.
    pub fn cavity_dim(&self) -> usize {
        self.n_photon_max + 1
    }

    /// Composite dimension, 2·(n_photon_max + 1).
    pub fn dim(&self) -> usize {
        2 * self.cavity_dim()
    }

    /// Composite basis index of |q, n⟩ with `excited = (q == e)`.
    pub fn basis_index(&self, excited: bool, n: usize) -> usize {
        debug_assert!(n < self.cavity_dim());
        usize::from(excited) * self.cavity_dim() + n
    }

    /// Cavity annihilation a embedded in the composite space, I₂ ⊗ a.
    pub fn cavity_annihilation(&self) -> Operator {
        kron(&Operator::identity(2), &annihilation(self.n_photon_max).unwrap())
    }

    /// Qubit lowering σ₋ embedded in the composite space, σ₋ ⊗ I.
    pub fn qubit_lowering(&self) -> Operator {
        kron(&pauli_lowering(), &Operator::identity(self.cavity_dim()))
    }

    /// Qubit σ_z embedded in the composite space, σ_z ⊗ I.
    pub fn qubit_z(&self) -> Operator {
        kron(&pauli_z(), &Operator::identity(self.cavity_dim()))
    }

    /// Truncation with `extra` more Fock levels, used for adequacy re-solves.
    pub fn enlarged(&self, extra: usize) -> Self {
        Self { n_photon_max: self.n_photon_max + extra }
    }
}

/// Dense complex square matrix acting on a truncated Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    entries: Array2<C64>,
}

impl Operator {
    /// Wraps a square matrix.
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: Array2::eye(dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: Array2::zeros((dim, dim)) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.entries
    }

    /// Conjugate transpose A†.
    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.t().mapv(|z| z.conj()) }
    }

    /// Matrix product A·B.
    pub fn matmul(&self, other: &Self) -> Self {
        Self { entries: self.entries.dot(&other.entries) }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { entries: self.entries.mapv(|z| z * factor) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { entries: &self.entries + &other.entries }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { entries: &self.entries - &other.entries }
    }

    /// Largest |A − A†| entry; 0 for exactly Hermitian matrices.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        self.entries
            .iter()
            .zip(adj.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Applies the operator to a state vector.
    pub fn apply(&self, state: &Array1<C64>) -> Array1<C64> {
        self.entries.dot(state)
    }
}

/// Truncated annihilation operator on the cavity factor alone:
/// a[m−1, m] = √m, all other entries zero.
pub fn annihilation(n_photon_max: usize) -> Result<Operator> {
    if n_photon_max < 1 {
        return Err(Error::Argument(format!(
            "annihilation requires n_photon_max >= 1, got {n_photon_max}"
        )));
    }
    let dim = n_photon_max + 1;
    let mut a = Array2::zeros((dim, dim));
    for m in 1..dim {
        a[(m - 1, m)] = C64::new((m as f64).sqrt(), 0.0);
    }
    Ok(Operator { entries: a })
}

/// σ₋ = |g⟩⟨e| in the {|g⟩, |e⟩} basis.
pub fn pauli_lowering() -> Operator {
    let mut m = Array2::zeros((2, 2));
    m[(0, 1)] = C64::new(1.0, 0.0);
    Operator { entries: m }
}

/// σ₊ = |e⟩⟨g|.
pub fn pauli_raising() -> Operator {
    pauli_lowering().adjoint()
}

/// σ_z with σ_z|e⟩ = +|e⟩, σ_z|g⟩ = −|g⟩.
pub fn pauli_z() -> Operator {
    let mut m = Array2::zeros((2, 2));
    m[(0, 0)] = C64::new(-1.0, 0.0);
    m[(1, 1)] = C64::new(1.0, 0.0);
    Operator { entries: m }
}

/// Kronecker product A ⊗ B. The left factor varies slowest, matching the
/// qubit ⊗ cavity ordering convention.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    Operator { entries: ndarray::linalg::kron(&a.entries, &b.entries) }
}

/// Hermitian, unit-trace, positive-semidefinite state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: Array2<C64>,
}

impl DensityMatrix {
    /// Validates all three invariants: trace 1 within [`TRACE_TOL`],
    /// Hermitian within [`HERMITICITY_TOL`], eigenvalues ≥ [`EIGENVALUE_FLOOR`].
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidState(format!(
                "density matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let trace: C64 = entries.diag().iter().sum();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} != 1")));
        }
        let defect = Operator { entries: entries.clone() }.hermiticity_defect();
        if defect > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian, max |rho - rho^dag| = {defect:.3e}"
            )));
        }
        let (eigvals, _) = entries.eigh(UPLO::Lower)?;
        if let Some(lambda) = eigvals.iter().find(|&&l| l < EIGENVALUE_FLOOR) {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {lambda:.3e}"
            )));
        }
        Ok(Self { entries })
    }

    /// |ψ⟩⟨ψ| from a (not necessarily normalized) state vector.
    pub fn pure(state: &Array1<C64>) -> Result<Self> {
        let norm_sq: f64 = state.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let dim = state.len();
        let mut entries = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                entries[(i, j)] = state[i] * state[j].conj() / norm_sq;
            }
        }
        Ok(Self { entries })
    }

    /// Basis projector |k⟩⟨k|.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Argument(format!("basis index {k} >= dim {dim}")));
        }
        let mut state = Array1::zeros(dim);
        state[k] = C64::new(1.0, 0.0);
        Self::pure(&state)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.entries
    }

    /// Diagonal population ⟨k|ρ|k⟩.
    pub fn population(&self, k: usize) -> f64 {
        self.entries[(k, k)].re
    }

    /// Fock populations of the reduced cavity state, traced over the qubit.
    ///
    /// Requires the repo-wide qubit ⊗ cavity layout, so the composite
    /// dimension must be even.
    pub fn cavity_populations(&self) -> Result<Vec<f64>> {
        let dim = self.dim();
        if dim % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "composite dimension {dim} is not 2x(n_photon_max+1)"
            )));
        }
        let nc = dim / 2;
        Ok((0..nc)
            .map(|n| self.population(n) + self.population(nc + n))
            .collect())
    }
}

/// Coherent-state amplitudes cₙ = e^(−|α|²/2)·αⁿ/√n! on the truncated
/// cavity factor, renormalized so the truncation tail does not bias the
/// norm. Pick `n_photon_max` ≫ |α|² so that tail is negligible.
pub fn coherent_state(alpha: C64, n_photon_max: usize) -> Result<Array1<C64>> {
    if n_photon_max < 1 {
        return Err(Error::Argument("coherent state needs n_photon_max >= 1".into()));
    }
    let dim = n_photon_max + 1;
    let mut amps = Array1::zeros(dim);
    let mut current = C64::new(1.0, 0.0);
    amps[0] = current;
    for n in 1..dim {
        current *= alpha / C64::new((n as f64).sqrt(), 0.0);
        amps[n] = current;
    }
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(amps.mapv(|z| z / norm))
}

/// Thermal cavity state with mean occupation n̄: pₙ ∝ (n̄/(n̄+1))ⁿ,
/// renormalized on the truncated space.
pub fn thermal_state(n_bar: f64, n_photon_max: usize) -> Result<DensityMatrix> {
    if !(n_bar >= 0.0) {
        return Err(Error::Argument(format!("mean occupation must be >= 0, got {n_bar}")));
    }
    let dim = n_photon_max + 1;
    let ratio = n_bar / (n_bar + 1.0);
    let mut entries = Array2::zeros((dim, dim));
    let mut weight = 1.0;
    let mut total = 0.0;
    for n in 0..dim {
        entries[(n, n)] = C64::new(weight, 0.0);
        total += weight;
        weight *= ratio;
    }
    DensityMatrix::new(entries.mapv(|z| z / total))
}

/// Embeds a cavity-only state into the composite space with the qubit in
/// its ground state: |g⟩⟨g| ⊗ ρ_c.
pub fn embed_cavity(rho_cavity: &DensityMatrix) -> DensityMatrix {
    let nc = rho_cavity.dim();
    let mut entries = Array2::zeros((2 * nc, 2 * nc));
    for i in 0..nc {
        for j in 0..nc {
            entries[(i, j)] = rho_cavity.entries[(i, j)];
        }
    }
    DensityMatrix { entries }
}

/// Expectation value trace(ρ·O).
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs operator dim {}",
            rho.dim(),
            op.dim()
        )));
    }
    // trace(rho O) = sum_{i,j} rho[i,j] O[j,i]
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            acc += rho.entries[(i, j)] * op.entries[(j, i)];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn annihilation_entries() {
        let a1 = annihilation(1).unwrap();
        assert_eq!(a1.dim(), 2);
        assert_abs_diff_eq!(a1.matrix()[(0, 1)].re, 1.0, epsilon = 0.0);

        let a2 = annihilation(2).unwrap();
        assert_abs_diff_eq!(a2.matrix()[(1, 2)].re, 2f64.sqrt(), epsilon = 1e-15);
        assert!(annihilation(0).is_err());
    }

    #[test]
    fn number_operator_on_fock_two() {
        let a = annihilation(4).unwrap();
        let n = a.adjoint().matmul(&a);
        let mut fock2 = Array1::zeros(5);
        fock2[2] = c(1.0, 0.0);
        let out = n.apply(&fock2);
        assert_abs_diff_eq!(out[2].re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out[2].im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn commutator_holds_below_truncation_boundary() {
        let a = annihilation(8).unwrap();
        let comm = a.matmul(&a.adjoint()).sub(&a.adjoint().matmul(&a));
        // [a, a†] = 1 except on the top two Fock levels
        for i in 0..7 {
            assert_abs_diff_eq!(comm.matrix()[(i, i)].re, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn pauli_algebra() {
        let sp = pauli_raising();
        let sm = pauli_lowering();
        let proj_e = sp.matmul(&sm);
        assert_abs_diff_eq!(proj_e.matrix()[(1, 1)].re, 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(proj_e.matrix()[(0, 0)].re, 0.0, epsilon = 0.0);

        let sum = sm.matmul(&sp).add(&sp.matmul(&sm));
        assert_eq!(sum.matrix(), Operator::identity(2).matrix());

        let comm = sp.matmul(&sm).sub(&sm.matmul(&sp));
        assert_eq!(comm.matrix(), pauli_z().matrix());
    }

    #[test]
    fn kron_identities() {
        let i6 = kron(&Operator::identity(2), &Operator::identity(3));
        assert_eq!(i6.matrix(), Operator::identity(6).matrix());

        // kron(sz, I) commutes with kron(I, n)
        let space = SpaceConfig::new(3).unwrap();
        let sz = space.qubit_z();
        let a = space.cavity_annihilation();
        let n = a.adjoint().matmul(&a);
        let lhs = sz.matmul(&n);
        let rhs = n.matmul(&sz);
        assert_eq!(lhs.matrix(), rhs.matrix());
    }

    #[test]
    fn kron_trace_is_product_of_traces() {
        let a = Operator::new(array![
            [c(1.0, 0.5), c(0.2, -0.1)],
            [c(0.0, 2.0), c(-1.0, 0.3)]
        ])
        .unwrap();
        let b = Operator::new(array![
            [c(0.7, 0.0), c(0.1, 0.4), c(0.0, 0.0)],
            [c(0.3, -0.2), c(1.5, 1.0), c(0.2, 0.0)],
            [c(0.0, 0.1), c(0.0, 0.0), c(-0.4, 0.6)]
        ])
        .unwrap();
        let tr = |op: &Operator| -> C64 { op.matrix().diag().iter().sum() };
        let lhs = tr(&kron(&a, &b));
        let rhs = tr(&a) * tr(&b);
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-14);
        assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-14);
    }

    #[test]
    fn tensor_ordering_is_qubit_first() {
        // Eigenvalue pattern of sz (x) I: first cavity block -1, second +1.
        let space = SpaceConfig::new(2).unwrap();
        let sz = space.qubit_z();
        for n in 0..3 {
            assert_abs_diff_eq!(
                sz.matrix()[(space.basis_index(false, n), space.basis_index(false, n))].re,
                -1.0,
                epsilon = 0.0
            );
            assert_abs_diff_eq!(
                sz.matrix()[(space.basis_index(true, n), space.basis_index(true, n))].re,
                1.0,
                epsilon = 0.0
            );
        }
    }

    #[test]
    fn expectation_values_on_fock_states() {
        let a = annihilation(4).unwrap();
        let n = a.adjoint().matmul(&a);

        let vac = DensityMatrix::basis_state(5, 0).unwrap();
        assert_abs_diff_eq!(expectation(&vac, &n).unwrap().re, 0.0, epsilon = 1e-15);

        let two = DensityMatrix::basis_state(5, 2).unwrap();
        let val = expectation(&two, &n).unwrap();
        assert_abs_diff_eq!(val.re, 2.0, epsilon = 1e-14);
        assert!(val.im.abs() < 1e-12);
    }

    #[test]
    fn expectation_rejects_dimension_mismatch() {
        let rho = DensityMatrix::basis_state(4, 0).unwrap();
        let op = Operator::identity(6);
        assert!(matches!(
            expectation(&rho, &op),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn expectation_conjugate_symmetry() {
        let mut state = Array1::zeros(4);
        state[0] = c(0.6, 0.1);
        state[1] = c(0.3, -0.4);
        state[3] = c(0.2, 0.5);
        let rho = DensityMatrix::pure(&state).unwrap();
        let a = annihilation(3).unwrap();
        let lhs = expectation(&rho, &a.adjoint()).unwrap();
        let rhs = expectation(&rho, &a).unwrap().conj();
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-14);
        assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-14);
    }

    #[test]
    fn density_matrix_rejects_bad_states() {
        // trace != 1
        let m = array![[c(0.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.4, 0.0)]];
        assert!(DensityMatrix::new(m).is_err());
        // non-Hermitian
        let m = array![[c(0.5, 0.0), c(0.3, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]];
        assert!(DensityMatrix::new(m).is_err());
        // negative eigenvalue
        let m = array![[c(1.2, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.2, 0.0)]];
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn adjoint_is_involutive() {
        let m = Operator::new(array![
            [c(1.0, 2.0), c(-0.5, 0.25)],
            [c(0.0, -1.0), c(3.0, 0.125)]
        ])
        .unwrap();
        assert_eq!(m.adjoint().adjoint().matrix(), m.matrix());
    }
}
