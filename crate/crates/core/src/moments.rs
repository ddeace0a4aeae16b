//! Photon-statistics quantities derived from a steady state: normally
//! ordered moments, Glauber coherence functions, differential correlations,
//! conditional-rate ratios, and the n-photon correlation measure.
//!
//! All quantities depend on the state only through the reduced cavity Fock
//! populations p_n. The conditional detection-rate ratio
//!
//! ```text
//! R_{k,k−1} = ⟨a†ᵏaᵏ⟩⟨a†ᵏ⁻²aᵏ⁻²⟩ / ⟨a†ᵏ⁻¹aᵏ⁻¹⟩²
//! ```
//!
//! compares the rate of the k-th detection (conditioned on k−1 prior ones)
//! with that of the previous detection. R > 1 is a surge, R < 1 a blockade,
//! and R < 1 also violates the Cauchy–Schwarz bound obeyed by every state
//! with a positive Glauber-P function. The measure
//!
//! ```text
//! 𝓜ₙ = Π_{k=2..n} max(R_{k,k−1} − 1, 0) · Π_{k=n+1..N_tr} max(R_{k,k−1}⁻¹ − 1, 0)
//! ```
//!
//! is positive exactly when all surge conditions up to n and all blockade
//! conditions up to the truncation order N_tr hold simultaneously. Because
//! each R is a ratio of same-order products of moments, uniform attenuation
//! m_k → ηᵏ·m_k cancels out, which is why the criterion is insensitive to
//! detector efficiency.

use crate::hilbert::DensityMatrix;
use crate::{Error, Result};

/// Relative floor below which a moment counts as degenerate (zero).
pub const MOMENT_FLOOR_FACTOR: f64 = 1e-12;
/// Conditional ratios are clamped into this range so that δ-scans survive
/// near-dark points.
pub const RATIO_CLAMP: (f64, f64) = (1e-12, 1e12);
/// Margin used when testing R < 1 as a Cauchy–Schwarz violation.
pub const CLASSICAL_BOUND_TOL: f64 = 1e-10;

/// The sequence m_k = ⟨a†ᵏaᵏ⟩ for k = 0…k_max, with m₀ = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    values: Vec<f64>,
}

impl MomentVector {
    /// Wraps raw values; index k holds m_k and entry 0 must be 1. Moments in
    /// [−1e−12, 0) are clipped to zero, anything lower is rejected.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Argument("moment vector needs k_max >= 1".into()));
        }
        if values[0] != 1.0 {
            return Err(Error::Argument(format!("m_0 must be 1, got {}", values[0])));
        }
        for (k, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::Argument(format!("m_{k} is not finite")));
            }
            if *v < -1e-12 {
                return Err(Error::Argument(format!("m_{k} = {v} is negative")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self { values })
    }

    pub fn k_max(&self) -> usize {
        self.values.len() - 1
    }

    /// m_k. Panics if k > k_max.
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Uniform attenuation m_k → ηᵏ·m_k, the action of an η-efficient
    /// detector on coincidence rates.
    pub fn attenuated(&self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Argument(format!("efficiency must be in (0,1], got {eta}")));
        }
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| eta.powi(k as i32) * v)
            .collect();
        Ok(Self { values })
    }

    /// Degeneracy floor for m_k: relative to max(m₁ᵏ, m₁) so the test works
    /// across the several-decade drive range of the presets.
    fn floor(&self, k: usize) -> f64 {
        let m1 = self.values[1];
        MOMENT_FLOOR_FACTOR * m1.powi(k as i32).max(m1)
    }

    /// True when m_k sits below the degeneracy floor.
    pub fn is_degenerate(&self, k: usize) -> bool {
        if k == 0 {
            return false;
        }
        self.values[k] < self.floor(k)
    }
}

/// m_k = Σ_n p_n·n(n−1)…(n−k+1) over the reduced cavity populations p_n.
/// The falling-factorial form is exact and avoids building a†ᵏaᵏ.
pub fn normally_ordered_moments(rho: &DensityMatrix, k_max: usize) -> Result<MomentVector> {
    if k_max < 1 {
        return Err(Error::Argument(format!("k_max must be >= 1, got {k_max}")));
    }
    let populations = rho.cavity_populations()?;
    let n_photon_max = populations.len() - 1;
    if k_max >= n_photon_max {
        return Err(Error::Truncation(format!(
            "k_max = {k_max} needs n_photon_max > k_max, got {n_photon_max}"
        )));
    }
    let mut values = Vec::with_capacity(k_max + 1);
    values.push(1.0);
    for k in 1..=k_max {
        let mut m_k = 0.0;
        for (n, p) in populations.iter().enumerate() {
            if n < k {
                continue;
            }
            let mut ff = 1.0;
            for j in 0..k {
                ff *= (n - j) as f64;
            }
            m_k += p * ff;
        }
        values.push(m_k);
    }
    MomentVector::from_values(values)
}

/// Glauber g⁽ⁿ⁾(0) = m_n / m₁ⁿ. `None` when the intensity m₁ is degenerate,
/// so a scan records an undefined value instead of aborting.
pub fn glauber_g(m: &MomentVector, n: usize) -> Result<Option<f64>> {
    if n < 2 || n > m.k_max() {
        return Err(Error::Argument(format!(
            "glauber order must satisfy 2 <= n <= k_max = {}, got {n}",
            m.k_max()
        )));
    }
    if m.is_degenerate(1) {
        return Ok(None);
    }
    Ok(Some(m.get(n) / m.get(1).powi(n as i32)))
}

/// Differential correlation C⁽ⁿ⁾(0) = m_n − m₁ⁿ.
pub fn differential_c(m: &MomentVector, n: usize) -> Result<f64> {
    if n < 2 || n > m.k_max() {
        return Err(Error::Argument(format!(
            "differential order must satisfy 2 <= n <= k_max = {}, got {n}",
            m.k_max()
        )));
    }
    Ok(m.get(n) - m.get(1).powi(n as i32))
}

/// A conditional-rate ratio with its validity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioValue {
    pub value: f64,
    /// False when the denominator moment was degenerate; the value is then a
    /// clamp boundary and must not be interpreted.
    pub valid: bool,
}

/// R_{k,k−1} = m_k·m_{k−2}/m_{k−1}², clamped into [`RATIO_CLAMP`]. Flagged
/// invalid (never an error) when m_{k−1} is degenerate, so one dark grid
/// point cannot abort a scan.
pub fn conditional_ratio(m: &MomentVector, k: usize) -> Result<RatioValue> {
    if k < 2 || k > m.k_max() {
        return Err(Error::Argument(format!(
            "ratio index must satisfy 2 <= k <= k_max = {}, got {k}",
            m.k_max()
        )));
    }
    let raw = m.get(k) * m.get(k - 2) / (m.get(k - 1) * m.get(k - 1));
    let valid = !m.is_degenerate(k - 1);
    let value = if raw.is_nan() {
        RATIO_CLAMP.1
    } else {
        raw.clamp(RATIO_CLAMP.0, RATIO_CLAMP.1)
    };
    Ok(RatioValue { value, valid })
}

/// The measure 𝓜ₙ with truncation order `n_tr`. Returns 0 whenever any
/// surge factor (k ≤ n) fails to exceed 1, any blockade factor
/// (n < k ≤ n_tr) fails to stay below 1, or any contributing ratio is
/// degenerate: absent evidence means "not detected".
pub fn correlation_measure(m: &MomentVector, n: usize, n_tr: usize) -> Result<f64> {
    if !(2 <= n && n < n_tr && n_tr <= m.k_max()) {
        return Err(Error::Argument(format!(
            "measure orders must satisfy 2 <= n < n_tr <= k_max = {}, got n={n}, n_tr={n_tr}",
            m.k_max()
        )));
    }
    let mut product = 1.0;
    for k in 2..=n_tr {
        let ratio = conditional_ratio(m, k)?;
        if !ratio.valid {
            return Ok(0.0);
        }
        let factor = if k <= n {
            (ratio.value - 1.0).max(0.0)
        } else {
            (1.0 / ratio.value - 1.0).max(0.0)
        };
        if factor == 0.0 {
            return Ok(0.0);
        }
        product *= factor;
    }
    Ok(product)
}

/// Per-k Cauchy–Schwarz violation witnesses: entry k−2 is true iff
/// R_{k,k−1} < 1 − [`CLASSICAL_BOUND_TOL`] with a valid ratio, a state of
/// affairs impossible for any positive-P (classical) source.
pub fn classical_bound_check(m: &MomentVector) -> Result<Vec<bool>> {
    if m.k_max() < 2 {
        return Err(Error::Argument("classical bound check needs k_max >= 2".into()));
    }
    (2..=m.k_max())
        .map(|k| {
            let r = conditional_ratio(m, k)?;
            Ok(r.valid && r.value < 1.0 - CLASSICAL_BOUND_TOL)
        })
        .collect()
}

/// P_n = population of the n-excitation manifold {|n,g⟩, |n−1,e⟩} of the
/// composite state (P₀ is the ground-state population).
pub fn excitation_probabilities(rho: &DensityMatrix, n_max: usize) -> Result<Vec<f64>> {
    let dim = rho.dim();
    if dim % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "composite dimension {dim} is not 2x(n_photon_max+1)"
        )));
    }
    let nc = dim / 2;
    if n_max > nc - 1 {
        return Err(Error::Truncation(format!(
            "n_max = {n_max} exceeds the Fock truncation {}",
            nc - 1
        )));
    }
    let mut probs = Vec::with_capacity(n_max + 1);
    probs.push(rho.population(0));
    for n in 1..=n_max {
        probs.push(rho.population(n) + rho.population(nc + n - 1));
    }
    Ok(probs)
}

/// Photon-number probabilities p_n of the reduced cavity state. In the
/// weak-excitation limit m_n ≈ n!·p_n, which is what makes the bare
/// coincidence spectrum readable as level spectroscopy.
pub fn photon_number_probabilities(rho: &DensityMatrix, n_max: usize) -> Result<Vec<f64>> {
    let populations = rho.cavity_populations()?;
    if n_max >= populations.len() {
        return Err(Error::Truncation(format!(
            "n_max = {n_max} exceeds the Fock truncation {}",
            populations.len() - 1
        )));
    }
    Ok(populations[..=n_max].to_vec())
}

/// A requested measure order: 𝓜ₙ evaluated with truncation order `n_tr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MeasureRequest {
    pub n: usize,
    pub n_tr: usize,
}

/// One evaluated measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureValue {
    pub n: usize,
    pub n_tr: usize,
    pub value: f64,
    /// True when a degenerate ratio forced the value to zero.
    pub degenerate: bool,
}

/// All correlation quantities of one state at one parameter point.
#[derive(Debug, Clone)]
pub struct CorrelationReport {
    /// g⁽ⁿ⁾(0) for n = 2…k_max; `None` marks an undefined value.
    pub glauber: Vec<Option<f64>>,
    /// C⁽ⁿ⁾(0) for n = 2…k_max.
    pub differential: Vec<f64>,
    /// R_{k,k−1} for k = 2…k_max with validity flags.
    pub ratios: Vec<RatioValue>,
    pub measures: Vec<MeasureValue>,
    pub k_max: usize,
}

/// Evaluates every correlation quantity from one moment vector.
pub fn correlation_report(
    m: &MomentVector,
    measures: &[MeasureRequest],
) -> Result<CorrelationReport> {
    let k_max = m.k_max();
    let mut glauber = Vec::with_capacity(k_max - 1);
    let mut differential = Vec::with_capacity(k_max - 1);
    let mut ratios = Vec::with_capacity(k_max - 1);
    for order in 2..=k_max {
        glauber.push(glauber_g(m, order)?);
        differential.push(differential_c(m, order)?);
        ratios.push(conditional_ratio(m, order)?);
    }
    let measures = measures
        .iter()
        .map(|req| {
            let value = correlation_measure(m, req.n, req.n_tr)?;
            let degenerate = (2..=req.n_tr).any(|k| ratios[k - 2].valid == false);
            Ok(MeasureValue { n: req.n, n_tr: req.n_tr, value, degenerate })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationReport { glauber, differential, ratios, measures, k_max })
}
