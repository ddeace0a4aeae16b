//! Driven Jaynes–Cummings model in the frame rotating at the drive
//! frequency.
//!
//! The interaction Hamiltonian (divided by ħ) is
//!
//! ```text
//! H = δ(a†a + ½σ_z) + i·g(a†σ₋ − aσ₊) + i·𝓔(a† − a)
//! ```
//!
//! with detuning δ = ω₀ − ω_L, coupling g, and driving strength 𝓔. On
//! resonance (δ = 0, no drive) the n-excitation manifold splits into the
//! polaritonic doublet |Ψ±ⁿ⟩ with rotating-frame energies ±g√n, so n-photon
//! absorption is resonant at δ = ±g/√n.

use num_complex::Complex64 as C64;

use crate::hilbert::{Operator, SpaceConfig};
use crate::{Error, Result};

/// Rates of the driven Jaynes–Cummings master equation, all in angular
/// frequency units. `kappa` is the cavity *field* decay rate, so cavity
/// energy decays at 2κ; `gamma` is the qubit energy decay rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JCParams {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub drive: f64,
    pub delta: f64,
}

impl JCParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) {
            return Err(Error::Argument(format!("coupling g must be > 0, got {}", self.g)));
        }
        for (name, v) in [("kappa", self.kappa), ("gamma", self.gamma), ("drive", self.drive)] {
            if !(v >= 0.0) {
                return Err(Error::Argument(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::Argument(format!("delta must be finite, got {}", self.delta)));
        }
        Ok(())
    }

    /// Same parameters at a different detuning.
    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..*self }
    }

    /// Rotating-frame dressed energy of the n-excitation manifold,
    /// E/ħ − nω₀ = ±g√n.
    pub fn dressed_energy(&self, n: usize, branch: Branch) -> Result<f64> {
        if n < 1 {
            return Err(Error::Argument(format!("manifold index must be >= 1, got {n}")));
        }
        let magnitude = self.g * (n as f64).sqrt();
        Ok(match branch {
            Branch::Upper => magnitude,
            Branch::Lower => -magnitude,
        })
    }

    /// The two detunings δ = ±g/√n at which n-photon absorption is resonant.
    pub fn resonance_detunings(&self, n: usize) -> Result<(f64, f64)> {
        if n < 1 {
            return Err(Error::Argument(format!("resonance order must be >= 1, got {n}")));
        }
        let magnitude = self.g / (n as f64).sqrt();
        Ok((magnitude, -magnitude))
    }
}

/// Upper (+) or lower (−) polariton branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Upper,
    Lower,
}

/// Interaction Hamiltonian H/ħ on the composite space.
pub fn interaction_hamiltonian(p: &JCParams, space: &SpaceConfig) -> Result<Operator> {
    p.validate()?;
    let a = space.cavity_annihilation();
    let a_dag = a.adjoint();
    let sm = space.qubit_lowering();
    let sp = sm.adjoint();
    let sz = space.qubit_z();

    let number_like = a_dag.matmul(&a).add(&sz.scaled(C64::new(0.5, 0.0)));
    let coupling = a_dag.matmul(&sm).sub(&a.matmul(&sp));
    let drive = a_dag.sub(&a);

    let h = number_like
        .scaled(C64::new(p.delta, 0.0))
        .add(&coupling.scaled(C64::new(0.0, p.g)))
        .add(&drive.scaled(C64::new(0.0, p.drive)));
    debug_assert!(h.hermiticity_defect() < 1e-12);
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;
    use ndarray_linalg::Eigh;

    fn params(delta: f64, drive: f64) -> JCParams {
        JCParams { g: 1.0, kappa: 0.05, gamma: 0.1, drive, delta }
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let space = SpaceConfig::new(6).unwrap();
        let h = interaction_hamiltonian(&params(0.37, 0.02), &space).unwrap();
        assert!(h.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn ground_state_is_annihilated_at_zero_detuning() {
        let space = SpaceConfig::new(4).unwrap();
        let h = interaction_hamiltonian(&params(0.0, 0.0), &space).unwrap();
        let mut ground = Array1::zeros(space.dim());
        ground[space.basis_index(false, 0)] = C64::new(1.0, 0.0);
        let out = h.apply(&ground);
        let norm: f64 = out.iter().map(|z| z.norm()).sum();
        assert!(norm < 1e-14, "H|0,g> should vanish, got norm {norm}");
    }

    #[test]
    fn undriven_uncoupled_hamiltonian_commutes_with_photon_number() {
        let space = SpaceConfig::new(5).unwrap();
        let p = JCParams { g: 1e-300, ..params(0.8, 0.0) };
        // g must be positive by contract; use a negligible coupling and
        // verify the commutator scales with it.
        let h = interaction_hamiltonian(&p, &space).unwrap();
        let a = space.cavity_annihilation();
        let n = a.adjoint().matmul(&a);
        let comm = h.matmul(&n).sub(&n.matmul(&h));
        let max = comm.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max < 1e-290);
    }

    #[test]
    fn single_excitation_doublet_at_plus_minus_g() {
        let space = SpaceConfig::new(6).unwrap();
        let h = interaction_hamiltonian(&params(0.0, 0.0), &space).unwrap();
        let (eigvals, _) = h.matrix().eigh(ndarray_linalg::UPLO::Lower).unwrap();
        let has = |target: f64| eigvals.iter().any(|&e| (e - target).abs() < 1e-9);
        assert!(has(1.0) && has(-1.0), "eigenvalues {eigvals:?} miss the ±g doublet");
    }

    #[test]
    fn spectrum_contains_all_dressed_manifolds() {
        // At delta = 0 and no drive the eigenvalues are ±g√n for every
        // manifold that fits the truncation.
        let n_photon_max = 8;
        let space = SpaceConfig::new(n_photon_max).unwrap();
        let p = params(0.0, 0.0);
        let h = interaction_hamiltonian(&p, &space).unwrap();
        let (eigvals, _) = h.matrix().eigh(ndarray_linalg::UPLO::Lower).unwrap();
        for n in 1..=n_photon_max {
            for branch in [Branch::Upper, Branch::Lower] {
                let target = p.dressed_energy(n, branch).unwrap();
                let hit = eigvals.iter().any(|&e| (e - target).abs() < 1e-9 * p.g);
                assert!(hit, "missing dressed level {target} for n={n}");
            }
        }
    }

    #[test]
    fn dressed_energies() {
        let p = params(0.0, 0.0);
        assert_abs_diff_eq!(p.dressed_energy(1, Branch::Upper).unwrap(), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(p.dressed_energy(4, Branch::Lower).unwrap(), -2.0, epsilon = 0.0);
        assert_abs_diff_eq!(
            p.dressed_energy(2, Branch::Upper).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        assert!(p.dressed_energy(0, Branch::Upper).is_err());
    }

    #[test]
    fn resonance_locations() {
        let p = params(0.0, 0.0);
        assert_eq!(p.resonance_detunings(1).unwrap(), (1.0, -1.0));
        let (plus, minus) = p.resonance_detunings(2).unwrap();
        assert_abs_diff_eq!(plus, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(minus, -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(p.resonance_detunings(4).unwrap(), (0.5, -0.5));
        assert!(p.resonance_detunings(0).is_err());
    }

    #[test]
    fn resonance_matches_dressed_energy_per_photon() {
        // n·δ_res = ±(dressed energy), so |δ_res| = g√n/n = g/√n.
        let p = params(0.0, 0.0);
        for n in 1..=6 {
            let (plus, _) = p.resonance_detunings(n).unwrap();
            let e_upper = p.dressed_energy(n, Branch::Upper).unwrap();
            assert_abs_diff_eq!(plus * n as f64, e_upper, epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(JCParams { g: 0.0, ..params(0.0, 0.0) }.validate().is_err());
        assert!(JCParams { kappa: -0.1, ..params(0.0, 0.0) }.validate().is_err());
        assert!(JCParams { drive: -1e-9, ..params(0.0, 0.0) }.validate().is_err());
        assert!(JCParams { delta: f64::NAN, ..params(0.0, 0.0) }.validate().is_err());
    }
}
