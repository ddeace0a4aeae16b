//! Liouvillian superoperator of the driven Jaynes–Cummings master equation
//! and its steady state.
//!
//! The master equation is
//!
//! ```text
//! ρ̇ = −i[H, ρ] + γ(σ₋ρσ₊ − ½σ₊σ₋ρ − ½ρσ₊σ₋) + κ(2aρa† − a†aρ − ρa†a)
//! ```
//!
//! so the qubit loses energy at rate γ and the cavity at rate 2κ; the two
//! decay-rate unit tests below pin this convention permanently.
//!
//! Vectorization is column-stacking, vec(ρ)[i + d·j] = ρ[i,j], under which
//! vec(AXB) = (Bᵀ ⊗ A)·vec(X). The steady state is found by a direct dense
//! LU solve of L·vec(ρ) = 0 with one redundant row replaced by the trace
//! constraint; an independent eigendecomposition route exists as a test
//! oracle for that path.

use ndarray::{Array1, Array2};
use ndarray_linalg::solve::{FactorizeInto, ReciprocalConditionNum};
use ndarray_linalg::{Eig, Eigh, Solve, SVD, UPLO};
use num_complex::Complex64 as C64;

use crate::hilbert::{DensityMatrix, Operator, SpaceConfig};
use crate::jc::JCParams;
use crate::{Error, Result};

/// Residual bound ‖L·vec(ρ)‖∞ accepted for a converged steady state.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Relative singular-value cutoff for counting null vectors.
const NULL_SPACE_CUTOFF: f64 = 1e-10;
/// Reciprocal condition number below which the solve is treated as suspect.
const RCOND_FLOOR: f64 = 1e-12;

/// Superoperator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    matrix: Array2<C64>,
    /// Diagonal basis indices whose populations make up the truncation tail.
    tail_indices: Vec<usize>,
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    /// Max |vec(I)†·L| entry, normalized by the largest |L| entry. Zero for
    /// exactly trace-preserving generators.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for col in 0..d * d {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d {
                acc += self.matrix[(i + d * i, col)];
            }
            worst = worst.max(acc.norm());
        }
        let scale = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale > 0.0 { worst / scale } else { worst }
    }

    /// Applies L to a density matrix, returning ρ̇.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let v = vec_col(rho);
        let out = self.matrix.dot(&v);
        unvec_col(&out, self.dim)
    }
}

/// Column-stacking vectorization, vec(M)[i + d·j] = M[i,j].
pub fn vec_col(m: &Array2<C64>) -> Array1<C64> {
    let d = m.nrows();
    let mut v = Array1::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            v[i + d * j] = m[(i, j)];
        }
    }
    v
}

/// Inverse of [`vec_col`].
pub fn unvec_col(v: &Array1<C64>, dim: usize) -> Array2<C64> {
    let mut m = Array2::zeros((dim, dim));
    for j in 0..dim {
        for i in 0..dim {
            m[(i, j)] = v[i + dim * j];
        }
    }
    m
}

/// Generic Lindblad generator −i[H,·] + Σ rᵢ(CᵢρCᵢ† − ½{Cᵢ†Cᵢ, ρ}) for
/// jump operators Cᵢ with rates rᵢ.
///
/// `tail_indices` names the diagonal entries reported as truncation tail by
/// the steady-state solver; builders that know the space layout fill it.
pub fn build_liouvillian_from_parts(
    h: &Operator,
    channels: &[(Operator, f64)],
    tail_indices: Vec<usize>,
) -> Result<Superoperator> {
    let d = h.dim();
    if h.hermiticity_defect() > 1e-10 {
        return Err(Error::Argument(
            "Hamiltonian passed to build_liouvillian is not Hermitian".into(),
        ));
    }
    for (c, rate) in channels {
        if c.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "jump operator dim {} vs Hamiltonian dim {}",
                c.dim(),
                d
            )));
        }
        if !(*rate >= 0.0) {
            return Err(Error::Argument(format!("negative dissipation rate {rate}")));
        }
    }

    let eye = Array2::<C64>::eye(d);
    let hm = h.matrix();
    // −i[H, ρ] → −i(I ⊗ H − Hᵀ ⊗ I)
    let mut l = ndarray::linalg::kron(&eye, hm) - ndarray::linalg::kron(&hm.t().to_owned(), &eye);
    l.mapv_inplace(|z| z * C64::new(0.0, -1.0));

    for (c, rate) in channels {
        if *rate == 0.0 {
            continue;
        }
        let cm = c.matrix();
        let cdc = c.adjoint().matmul(c);
        let cdc_m = cdc.matrix();
        // CρC† → conj(C) ⊗ C;  {C†C, ρ} → I ⊗ C†C + (C†C)ᵀ ⊗ I
        let sandwich = ndarray::linalg::kron(&cm.mapv(|z| z.conj()), cm);
        let anti = ndarray::linalg::kron(&eye, cdc_m)
            + ndarray::linalg::kron(&cdc_m.t().to_owned(), &eye);
        l = l + sandwich.mapv(|z| z * C64::new(*rate, 0.0))
            - anti.mapv(|z| z * C64::new(0.5 * rate, 0.0));
    }

    Ok(Superoperator { dim: d, matrix: l, tail_indices })
}

/// Liouvillian of the §-form master equation on the composite space:
/// qubit channel σ₋ at rate γ, cavity channel a at rate 2κ.
pub fn build_liouvillian(
    h: &Operator,
    p: &JCParams,
    space: &SpaceConfig,
) -> Result<Superoperator> {
    if h.dim() != space.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian dim {} vs space dim {}",
            h.dim(),
            space.dim()
        )));
    }
    let channels = vec![
        (space.qubit_lowering(), p.gamma),
        (space.cavity_annihilation(), 2.0 * p.kappa),
    ];
    let nmax = space.n_photon_max();
    let tail = vec![
        space.basis_index(false, nmax - 1),
        space.basis_index(false, nmax),
        space.basis_index(true, nmax - 1),
        space.basis_index(true, nmax),
    ];
    build_liouvillian_from_parts(h, &channels, tail)
}

/// Liouvillian of a driven, damped cavity with no qubit:
/// H = δ·a†a + i𝓔(a† − a), cavity channel a at rate 2κ.
///
/// This system has the closed-form steady state |α⟩ with α = 𝓔/(κ + iδ)
/// and serves as the analytic oracle for the solver.
pub fn driven_cavity_liouvillian(
    kappa: f64,
    drive: f64,
    delta: f64,
    n_photon_max: usize,
) -> Result<Superoperator> {
    if !(kappa > 0.0) {
        return Err(Error::Argument(format!("kappa must be > 0, got {kappa}")));
    }
    let a = crate::hilbert::annihilation(n_photon_max)?;
    let a_dag = a.adjoint();
    let h = a_dag
        .matmul(&a)
        .scaled(C64::new(delta, 0.0))
        .add(&a_dag.sub(&a).scaled(C64::new(0.0, drive)));
    let dim = n_photon_max + 1;
    build_liouvillian_from_parts(&h, &[(a, 2.0 * kappa)], vec![dim - 2, dim - 1])
}

/// Steady state together with solve diagnostics.
#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    pub rho: DensityMatrix,
    /// ‖L·vec(ρ)‖∞ of the returned (conditioned) state.
    pub residual: f64,
    /// Total population of the top two Fock levels.
    pub truncation_tail: f64,
}

/// Solves L·vec(ρ) = 0 with trace(ρ) = 1 by dense LU with partial pivoting.
///
/// One row of L indexed by a diagonal entry is redundant by trace
/// preservation and is replaced by the trace constraint. The solution is
/// Hermitized, eigenvalue-clipped, renormalized, and validated; the reported
/// residual is measured against the original L.
pub fn steady_state(l: &Superoperator) -> Result<SteadyStateResult> {
    let d = l.dim;
    let n = d * d;

    let mut m = l.matrix.clone();
    for col in 0..n {
        m[(0, col)] = C64::new(0.0, 0.0);
    }
    for i in 0..d {
        m[(0, i + d * i)] = C64::new(1.0, 0.0);
    }
    let mut b = Array1::zeros(n);
    b[0] = C64::new(1.0, 0.0);

    let factorization = match m.factorize_into() {
        Ok(f) => f,
        Err(_) => return Err(degeneracy_diagnosis(l, f64::INFINITY)),
    };
    let rcond = factorization.rcond().unwrap_or(0.0);
    if rcond < RCOND_FLOOR {
        return Err(degeneracy_diagnosis(l, rcond));
    }
    let x = factorization.solve_into(b)?;

    let raw = unvec_col(&x, d);
    let herm = (&raw + &raw.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);

    // Clip round-off negatives; anything genuinely negative is a failure.
    let (eigvals, eigvecs) = herm.eigh(UPLO::Lower)?;
    if let Some(lambda) = eigvals.iter().find(|&&v| v < crate::hilbert::EIGENVALUE_FLOOR) {
        return Err(Error::InvalidState(format!(
            "steady-state solution has eigenvalue {lambda:.3e} below the clip floor"
        )));
    }
    let clipped = eigvals.mapv(|v| v.max(0.0));
    let total: f64 = clipped.sum();
    if total <= 0.0 {
        return Err(Error::InvalidState("steady-state solution has zero trace".into()));
    }
    let mut rho_m = Array2::<C64>::zeros((d, d));
    for (k, lambda) in clipped.iter().enumerate() {
        let col = eigvecs.column(k);
        let w = C64::new(lambda / total, 0.0);
        for i in 0..d {
            for j in 0..d {
                rho_m[(i, j)] += w * col[i] * col[j].conj();
            }
        }
    }

    let residual = residual_matrix_norm(l, &rho_m);
    if residual >= RESIDUAL_TOL {
        return Err(degeneracy_diagnosis(l, rcond));
    }

    let truncation_tail = l
        .tail_indices
        .iter()
        .map(|&idx| rho_m[(idx, idx)].re)
        .sum();

    let rho = DensityMatrix::new(rho_m)?;
    Ok(SteadyStateResult { rho, residual, truncation_tail })
}

fn degeneracy_diagnosis(l: &Superoperator, residual_or_rcond: f64) -> Error {
    match null_space_dimension(l) {
        Ok(n) if n > 1 => Error::DegenerateSteadyState { null_dim: n },
        _ => Error::SteadyStateNotConverged { residual: residual_or_rcond },
    }
}

/// ‖L·vec(ρ)‖∞.
pub fn residual_norm(l: &Superoperator, rho: &DensityMatrix) -> f64 {
    residual_matrix_norm(l, rho.matrix())
}

fn residual_matrix_norm(l: &Superoperator, rho: &Array2<C64>) -> f64 {
    let v = vec_col(rho);
    l.matrix.dot(&v).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Number of singular values below 1e−10·σ_max; the steady state is unique
/// exactly when this is 1.
pub fn null_space_dimension(l: &Superoperator) -> Result<usize> {
    let (_, sigma, _) = l.matrix.svd(false, false)?;
    let max = sigma.iter().cloned().fold(0.0, f64::max);
    Ok(sigma.iter().filter(|&&s| s < NULL_SPACE_CUTOFF * max).count())
}

/// Steady state via full eigendecomposition of L: the eigenvector of the
/// eigenvalue nearest zero. Slower and less accurate than the linear solve;
/// kept as the independent oracle for regression tests.
pub fn steady_state_via_eig(l: &Superoperator) -> Result<DensityMatrix> {
    let (eigvals, eigvecs) = l.matrix.eig()?;
    let (idx, _) = eigvals
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.norm().partial_cmp(&b.norm()).unwrap())
        .ok_or_else(|| Error::Argument("empty Liouvillian".into()))?;
    let v = eigvecs.column(idx).to_owned();
    let raw = unvec_col(&v, l.dim);
    let herm = (&raw + &raw.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let trace: C64 = herm.diag().iter().sum();
    if trace.norm() < 1e-12 {
        return Err(Error::SteadyStateNotConverged { residual: trace.norm() });
    }
    let normalized = herm.mapv(|z| z / trace);
    // Scrub eigensolver round-off the same way the solve path does.
    let (eigvals, eigvecs) = normalized.eigh(UPLO::Lower)?;
    let clipped = eigvals.mapv(|x| x.max(0.0));
    let total: f64 = clipped.sum();
    let d = l.dim;
    let mut rho_m = Array2::<C64>::zeros((d, d));
    for (k, lambda) in clipped.iter().enumerate() {
        let col = eigvecs.column(k);
        let w = C64::new(lambda / total, 0.0);
        for i in 0..d {
            for j in 0..d {
                rho_m[(i, j)] += w * col[i] * col[j].conj();
            }
        }
    }
    DensityMatrix::new(rho_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilation, expectation, SpaceConfig};
    use crate::jc::interaction_hamiltonian;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fig2_params(delta: f64) -> JCParams {
        JCParams { g: 1.0, kappa: 0.05, gamma: 0.1, drive: 0.005, delta }
    }

    fn random_density(dim: usize, rng: &mut ChaCha12Rng) -> Array2<C64> {
        let mut a = Array2::<C64>::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                a[(i, j)] = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let rho = a.dot(&a.t().mapv(|z| z.conj()));
        let trace: C64 = rho.diag().iter().sum();
        rho.mapv(|z| z / trace)
    }

    #[test]
    fn vectorization_convention_is_column_stacking() {
        let m = array![[c(1.0, 0.0), c(2.0, 0.0)], [c(3.0, 0.0), c(4.0, 0.0)]];
        let v = vec_col(&m);
        assert_eq!(v[0], c(1.0, 0.0));
        assert_eq!(v[1], c(3.0, 0.0));
        assert_eq!(v[2], c(2.0, 0.0));
        assert_eq!(v[3], c(4.0, 0.0));
        assert_eq!(unvec_col(&v, 2), m);
    }

    #[test]
    fn vacuum_is_dark_under_cavity_decay() {
        let space = SpaceConfig::new(3).unwrap();
        let h = Operator::zeros(space.dim());
        let l = build_liouvillian_from_parts(
            &h,
            &[(space.cavity_annihilation(), 2.0 * 0.4)],
            vec![],
        )
        .unwrap();
        let vac = DensityMatrix::basis_state(space.dim(), space.basis_index(false, 0)).unwrap();
        assert!(residual_norm(&l, &vac) < 1e-15);
    }

    #[test]
    fn qubit_energy_decays_at_gamma() {
        // d<σ₊σ₋>/dt = −γ for ρ = |0,e⟩⟨0,e| under the γ dissipator alone.
        let space = SpaceConfig::new(3).unwrap();
        let gamma = 0.7;
        let h = Operator::zeros(space.dim());
        let l =
            build_liouvillian_from_parts(&h, &[(space.qubit_lowering(), gamma)], vec![]).unwrap();
        let excited =
            DensityMatrix::basis_state(space.dim(), space.basis_index(true, 0)).unwrap();
        let rho_dot = l.apply(excited.matrix());
        let sm = space.qubit_lowering();
        let proj = sm.adjoint().matmul(&sm);
        let mut rate = c(0.0, 0.0);
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                rate += rho_dot[(i, j)] * proj.matrix()[(j, i)];
            }
        }
        assert_abs_diff_eq!(rate.re, -gamma, epsilon = 1e-13);
        assert_abs_diff_eq!(rate.im, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn cavity_energy_decays_at_two_kappa() {
        // d<a†a>/dt = −2κ for ρ = |1,g⟩⟨1,g| under the κ dissipator alone.
        let space = SpaceConfig::new(3).unwrap();
        let kappa = 0.3;
        let h = Operator::zeros(space.dim());
        let l = build_liouvillian_from_parts(
            &h,
            &[(space.cavity_annihilation(), 2.0 * kappa)],
            vec![],
        )
        .unwrap();
        let one_photon =
            DensityMatrix::basis_state(space.dim(), space.basis_index(false, 1)).unwrap();
        let rho_dot = l.apply(one_photon.matrix());
        let a = space.cavity_annihilation();
        let num = a.adjoint().matmul(&a);
        let mut rate = c(0.0, 0.0);
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                rate += rho_dot[(i, j)] * num.matrix()[(j, i)];
            }
        }
        assert_abs_diff_eq!(rate.re, -2.0 * kappa, epsilon = 1e-13);
    }

    #[test]
    fn trace_preservation_on_random_states() {
        let space = SpaceConfig::new(4).unwrap();
        let p = fig2_params(0.31);
        let h = interaction_hamiltonian(&p, &space).unwrap();
        let l = build_liouvillian(&h, &p, &space).unwrap();
        assert!(l.trace_preservation_defect() < 1e-14);

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let rho = random_density(space.dim(), &mut rng);
            let rho_dot = l.apply(&rho);
            let tr: C64 = rho_dot.diag().iter().sum();
            assert!(tr.norm() < 1e-10, "trace derivative {tr}");
        }
    }

    #[test]
    fn hermiticity_preserved_by_generator() {
        let space = SpaceConfig::new(4).unwrap();
        let p = fig2_params(-0.62);
        let h = interaction_hamiltonian(&p, &space).unwrap();
        let l = build_liouvillian(&h, &p, &space).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let rho = random_density(space.dim(), &mut rng);
            let rho_dot = l.apply(&rho);
            let defect = Operator::new(rho_dot).unwrap().hermiticity_defect();
            assert!(defect < 1e-12);
        }
    }

    #[test]
    fn driven_cavity_matches_coherent_state() {
        // 𝓔 = 0.1κ, δ = 0:  <a> = 0.1, <a†a> = 0.01
        let kappa = 0.5;
        let l = driven_cavity_liouvillian(kappa, 0.1 * kappa, 0.0, 8).unwrap();
        let result = steady_state(&l).unwrap();
        let a = annihilation(8).unwrap();
        let mean_a = expectation(&result.rho, &a).unwrap();
        assert_abs_diff_eq!(mean_a.re, 0.1, epsilon = 1e-10);
        assert_abs_diff_eq!(mean_a.im, 0.0, epsilon = 1e-10);
        let n = a.adjoint().matmul(&a);
        let mean_n = expectation(&result.rho, &n).unwrap();
        assert_abs_diff_eq!(mean_n.re, 0.01, epsilon = 1e-10);
        assert!(result.residual < RESIDUAL_TOL);
    }

    #[test]
    fn driven_cavity_moments_for_nonzero_detuning() {
        let kappa = 0.5;
        let delta = 0.8 * kappa;
        let drive = 0.3 * kappa;
        let l = driven_cavity_liouvillian(kappa, drive, delta, 10).unwrap();
        let result = steady_state(&l).unwrap();
        let alpha_sq = (drive / C64::new(kappa, delta).norm()).powi(2);
        let a = annihilation(10).unwrap();
        let mut ak = Operator::identity(11);
        for k in 1..=4 {
            ak = ak.matmul(&a);
            let moment = expectation(&result.rho, &ak.adjoint().matmul(&ak)).unwrap().re;
            let expected = alpha_sq.powi(k);
            assert!(
                (moment - expected).abs() / expected < 1e-8,
                "k={k}: {moment} vs {expected}"
            );
        }
    }

    #[test]
    fn undriven_system_relaxes_to_ground() {
        let space = SpaceConfig::new(5).unwrap();
        let p = JCParams { drive: 0.0, ..fig2_params(0.4) };
        let h = interaction_hamiltonian(&p, &space).unwrap();
        let l = build_liouvillian(&h, &p, &space).unwrap();
        let result = steady_state(&l).unwrap();
        assert_abs_diff_eq!(
            result.rho.population(space.basis_index(false, 0)),
            1.0,
            epsilon = 1e-10
        );
        assert!(result.truncation_tail < 1e-12);
    }

    #[test]
    fn steady_state_residual_behaviour() {
        let space = SpaceConfig::new(8).unwrap();
        let p = fig2_params(0.0);
        let h = interaction_hamiltonian(&p, &space).unwrap();
        let l = build_liouvillian(&h, &p, &space).unwrap();
        let result = steady_state(&l).unwrap();
        assert!(result.residual < RESIDUAL_TOL);
        assert!(residual_norm(&l, &result.rho) < RESIDUAL_TOL);

        // The maximally mixed state is not a fixed point of the driven system.
        let d = space.dim();
        let mixed =
            DensityMatrix::new(Array2::eye(d).mapv(|z: C64| z / d as f64)).unwrap();
        assert!(residual_norm(&l, &mixed) > 1e-4);
    }

    #[test]
    fn unique_steady_state_in_paper_regime() {
        let space = SpaceConfig::new(6).unwrap();
        let p = fig2_params(0.7);
        let h = interaction_hamiltonian(&p, &space).unwrap();
        let l = build_liouvillian(&h, &p, &space).unwrap();
        assert_eq!(null_space_dimension(&l).unwrap(), 1);
    }

    #[test]
    fn decoupled_undamped_qubit_is_reported_degenerate() {
        // g → 0, γ = 0 leaves every diagonal qubit state steady; the solver
        // must refuse rather than return an arbitrary one.
        let space = SpaceConfig::new(4).unwrap();
        let p = JCParams { g: 1e-300, gamma: 0.0, ..fig2_params(0.2) };
        let h = interaction_hamiltonian(&p, &space).unwrap();
        let l = build_liouvillian(&h, &p, &space).unwrap();
        match steady_state(&l) {
            Err(Error::DegenerateSteadyState { null_dim }) => assert!(null_dim >= 2),
            other => panic!("expected degenerate-steady-state error, got {other:?}"),
        }
    }

    #[test]
    fn eig_oracle_agrees_with_linear_solve() {
        let space = SpaceConfig::new(6).unwrap();
        let p = fig2_params(0.45);
        let h = interaction_hamiltonian(&p, &space).unwrap();
        let l = build_liouvillian(&h, &p, &space).unwrap();
        let solve = steady_state(&l).unwrap();
        let eig = steady_state_via_eig(&l).unwrap();
        let a = space.cavity_annihilation();
        let n = a.adjoint().matmul(&a);
        let n_solve = expectation(&solve.rho, &n).unwrap().re;
        let n_eig = expectation(&eig, &n).unwrap().re;
        assert!(
            (n_solve - n_eig).abs() / n_solve.abs() < 1e-7,
            "{n_solve} vs {n_eig}"
        );
    }
}
