//! Quantum-jump (Monte Carlo wavefunction) unraveling of the master
//! equation, photodetection click records, and coincidence estimators.
//!
//! Between detections the unnormalized state evolves under
//! H_eff = H − i(κ·a†a + (γ/2)·σ₊σ₋); its squared norm is the no-click
//! survival probability. Jump times use the waiting-time algorithm: draw
//! u ~ U(0,1), find ‖ψ(t)‖² = u, collapse through √(2κ)·a (cavity channel)
//! or √γ·σ₋ (qubit channel) with probability proportional to the channel
//! rates, renormalize, repeat. This is exact in distribution.
//!
//! H_eff is time independent, so the no-click evolution is propagated
//! through its eigendecomposition instead of timestepping. At the weak
//! drives of interest waiting times reach ~10⁵–10⁸ coupling periods;
//! stepping through them with an ODE integrator would cost ~10⁶ steps per
//! emitted photon, while the spectral propagator answers a norm query in
//! O(dim²) regardless of the interval. An adaptive Runge–Kutta integrator
//! validates the propagator in the test suite.
//!
//! Click records serialize to a line-oriented text format: `#` header lines
//! for seed, duration and trajectory count, then one
//! `trajectory<TAB>time<TAB>channel` row per click, times in units of 1/g
//! with 12 significant digits.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Inverse};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::hilbert::{Operator, SpaceConfig};
use crate::jc::{interaction_hamiltonian, JCParams};
use crate::{Error, Result};

/// Relative time accuracy of the jump-time bisection.
const JUMP_TIME_REL_TOL: f64 = 1e-10;
/// Squared-norm floor treated as underflow.
const NORM_UNDERFLOW: f64 = 1e-280;
/// Transient discarded from each trajectory, in units of the slowest
/// positive relaxation rate.
const TRANSIENT_RELAXATION_MULTIPLE: f64 = 10.0;
/// Minimum number of counting bins for any statistical estimate.
const MIN_BINS: u64 = 1000;

/// Detection channel of a click.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Cavity,
    Qubit,
}

impl Channel {
    fn as_str(self) -> &'static str {
        match self {
            Channel::Cavity => "cavity",
            Channel::Qubit => "qubit",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "cavity" => Ok(Channel::Cavity),
            "qubit" => Ok(Channel::Qubit),
            other => Err(Error::Argument(format!("unknown channel {other:?}"))),
        }
    }
}

/// One photodetection event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Click {
    pub trajectory: u32,
    /// Time since the end of the transient, in units of 1/g; within
    /// [0, duration].
    pub time: f64,
    pub channel: Channel,
}

/// Merged click record of a trajectory ensemble, ordered by trajectory then
/// time (strictly increasing within a trajectory).
#[derive(Debug, Clone, PartialEq)]
pub struct ClickRecord {
    pub clicks: Vec<Click>,
    /// Post-transient observation window per trajectory.
    pub duration: f64,
    pub n_trajectories: usize,
    pub seed: u64,
}

impl ClickRecord {
    /// Writes the line-oriented text form.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# duration={:.11e}", self.duration)?;
        writeln!(out, "# n_traj={}", self.n_trajectories)?;
        for click in &self.clicks {
            writeln!(
                out,
                "{}\t{:.11e}\t{}",
                click.trajectory,
                click.time,
                click.channel.as_str()
            )?;
        }
        Ok(())
    }

    /// Parses the text form produced by [`ClickRecord::write_to`].
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut seed = None;
        let mut duration = None;
        let mut n_trajectories = None;
        let mut clicks = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("seed=") {
                    seed = Some(v.parse::<u64>().map_err(|e| {
                        Error::Argument(format!("bad seed header: {e}"))
                    })?);
                } else if let Some(v) = rest.strip_prefix("duration=") {
                    duration = Some(v.parse::<f64>().map_err(|e| {
                        Error::Argument(format!("bad duration header: {e}"))
                    })?);
                } else if let Some(v) = rest.strip_prefix("n_traj=") {
                    n_trajectories = Some(v.parse::<usize>().map_err(|e| {
                        Error::Argument(format!("bad n_traj header: {e}"))
                    })?);
                }
                continue;
            }
            let mut fields = line.split('\t');
            let (traj, time, channel) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::Argument(format!("malformed click row {line:?}"))),
            };
            clicks.push(Click {
                trajectory: traj
                    .parse()
                    .map_err(|e| Error::Argument(format!("bad trajectory index: {e}")))?,
                time: time
                    .parse()
                    .map_err(|e| Error::Argument(format!("bad click time: {e}")))?,
                channel: Channel::parse(channel)?,
            });
        }
        match (seed, duration, n_trajectories) {
            (Some(seed), Some(duration), Some(n_trajectories)) => Ok(Self {
                clicks,
                duration,
                n_trajectories,
                seed,
            }),
            _ => Err(Error::Argument("missing click-record header".into())),
        }
    }

    /// Number of clicks on one channel.
    pub fn channel_count(&self, channel: Channel) -> usize {
        self.clicks.iter().filter(|c| c.channel == channel).count()
    }
}

/// Spectral propagator for the time-independent effective Hamiltonian:
/// ψ(t) = V·exp(−iΛt)·V⁻¹·ψ(0).
struct Propagator {
    dim: usize,
    eigvals: Array1<C64>,
    basis: Array2<C64>,
    inv_basis: Array2<C64>,
}

impl Propagator {
    fn new(h_eff: &Array2<C64>) -> Result<Self> {
        let dim = h_eff.nrows();
        let (mut eigvals, basis) = h_eff.eig()?;
        let inv_basis = basis.inv().map_err(|_| {
            Error::Simulation("effective Hamiltonian eigenbasis is singular".into())
        })?;
        // Decay rates are −2·Im(λ); tiny positive imaginary parts are
        // eigensolver round-off and would make the norm grow over the very
        // long no-jump stretches, so clamp them.
        eigvals.mapv_inplace(|l| C64::new(l.re, l.im.min(0.0)));

        // Reject ill-conditioned (near-defective) decompositions outright.
        let scale = h_eff.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let recon = basis.dot(&Array2::from_diag(&eigvals)).dot(&inv_basis);
        let defect = recon
            .iter()
            .zip(h_eff.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if defect > 1e-8 * scale.max(1.0) {
            return Err(Error::Simulation(format!(
                "effective Hamiltonian eigendecomposition defect {defect:.3e} \
                 (near-degenerate spectrum); cannot propagate reliably"
            )));
        }
        Ok(Self { dim, eigvals, basis, inv_basis })
    }

    fn to_eigenbasis(&self, psi: &Array1<C64>) -> Array1<C64> {
        self.inv_basis.dot(psi)
    }

    fn state_at(&self, coeffs: &Array1<C64>, dt: f64) -> Array1<C64> {
        let mut evolved = Array1::zeros(self.dim);
        for (k, c) in coeffs.iter().enumerate() {
            let l = self.eigvals[k];
            // exp(−iλt) = exp(Im(λ)·t)·exp(−i·Re(λ)·t)
            let amp = (l.im * dt).exp();
            let phase = -l.re * dt;
            evolved[k] = c * C64::new(amp * phase.cos(), amp * phase.sin());
        }
        self.basis.dot(&evolved)
    }

    fn norm_sq_at(&self, coeffs: &Array1<C64>, dt: f64) -> f64 {
        self.state_at(coeffs, dt).iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Runs `n_traj` quantum-jump trajectories from the ground state, discards
/// the transient, and merges the post-transient clicks by trajectory index.
/// Identical seeds give bit-identical records regardless of thread count:
/// each trajectory draws from its own counter-based substream.
pub fn mcwf_ensemble(
    p: &JCParams,
    space: &SpaceConfig,
    duration: f64,
    n_traj: usize,
    seed: u64,
) -> Result<ClickRecord> {
    p.validate()?;
    if !(duration > 0.0) {
        return Err(Error::Argument(format!("duration must be > 0, got {duration}")));
    }
    if n_traj == 0 {
        return Err(Error::Argument("n_traj must be >= 1".into()));
    }

    let h = interaction_hamiltonian(p, space)?;
    let a = space.cavity_annihilation();
    let sm = space.qubit_lowering();
    let h_eff = effective_hamiltonian(&h, p, &a, &sm);
    let propagator = Propagator::new(&h_eff)?;
    let transient = transient_time(p);

    let per_traj: Vec<Vec<Click>> = (0..n_traj)
        .into_par_iter()
        .map(|idx| {
            simulate_trajectory(
                &propagator,
                a.matrix(),
                sm.matrix(),
                p,
                space,
                transient,
                duration,
                seed,
                idx as u32,
            )
        })
        .collect::<Result<_>>()?;

    let clicks = per_traj.into_iter().flatten().collect();
    Ok(ClickRecord { clicks, duration, n_trajectories: n_traj, seed })
}

/// H − i(κ·a†a + (γ/2)·σ₊σ₋), the no-jump generator.
fn effective_hamiltonian(h: &Operator, p: &JCParams, a: &Operator, sm: &Operator) -> Array2<C64> {
    let a_num = a.adjoint().matmul(a);
    let q_num = sm.adjoint().matmul(sm);
    let mut h_eff = h.matrix().clone();
    h_eff = h_eff
        + a_num.matrix().mapv(|z| z * C64::new(0.0, -p.kappa))
        + q_num.matrix().mapv(|z| z * C64::new(0.0, -0.5 * p.gamma));
    h_eff
}

/// 10 relaxation times of the slowest positive decay rate; zero when the
/// system has no dissipation at all.
fn transient_time(p: &JCParams) -> f64 {
    let mut slowest = f64::INFINITY;
    if p.gamma > 0.0 {
        slowest = slowest.min(p.gamma);
    }
    if p.kappa > 0.0 {
        slowest = slowest.min(2.0 * p.kappa);
    }
    if slowest.is_finite() {
        TRANSIENT_RELAXATION_MULTIPLE / slowest
    } else {
        0.0
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_trajectory(
    propagator: &Propagator,
    a: &Array2<C64>,
    sm: &Array2<C64>,
    p: &JCParams,
    space: &SpaceConfig,
    transient: f64,
    duration: f64,
    seed: u64,
    trajectory: u32,
) -> Result<Vec<Click>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(trajectory));

    let dim = space.dim();
    let mut psi: Array1<C64> = Array1::zeros(dim);
    psi[space.basis_index(false, 0)] = C64::new(1.0, 0.0);

    let t_end = transient + duration;
    let mut t = 0.0;
    let mut clicks = Vec::new();

    loop {
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let coeffs = propagator.to_eigenbasis(&psi);

        let Some(dt) = find_jump_time(propagator, &coeffs, u, t_end - t, t) else {
            break;
        };
        psi = propagator.state_at(&coeffs, dt);
        t += dt;

        let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq < NORM_UNDERFLOW {
            return Err(Error::Simulation(format!(
                "state norm underflow at t = {t:.3e} (trajectory {trajectory})"
            )));
        }

        let cavity_out = a.dot(&psi);
        let qubit_out = sm.dot(&psi);
        let w_cavity = 2.0 * p.kappa * cavity_out.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let w_qubit = p.gamma * qubit_out.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let total = w_cavity + w_qubit;
        if !(total > 0.0) {
            return Err(Error::Simulation(format!(
                "vanishing jump rate at a crossing, t = {t:.3e} (trajectory {trajectory})"
            )));
        }

        let channel = if rng.random::<f64>() * total < w_cavity {
            psi = cavity_out;
            Channel::Cavity
        } else {
            psi = qubit_out;
            Channel::Qubit
        };
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm * norm < NORM_UNDERFLOW {
            return Err(Error::Simulation(format!(
                "collapsed state underflow at t = {t:.3e} (trajectory {trajectory})"
            )));
        }
        psi.mapv_inplace(|z| z / norm);
        debug_assert!(
            (psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs() < 1e-9
        );

        if t > transient {
            clicks.push(Click { trajectory, time: t - transient, channel });
        }
    }
    Ok(clicks)
}

/// Smallest dt with ‖ψ(dt)‖² ≤ u, or `None` if the norm stays above u for
/// the whole remaining window. Doubling search for a bracket, then bisection
/// to [`JUMP_TIME_REL_TOL`] relative accuracy; the survival norm is
/// monotonically decreasing, so the bracket is always valid.
fn find_jump_time(
    propagator: &Propagator,
    coeffs: &Array1<C64>,
    u: f64,
    window: f64,
    t_now: f64,
) -> Option<f64> {
    if window <= 0.0 {
        return None;
    }
    let mut lo = 0.0;
    let mut hi = window.min(1.0);
    while propagator.norm_sq_at(coeffs, hi) > u {
        if hi >= window {
            return None;
        }
        lo = hi;
        hi = (hi * 2.0).min(window);
    }
    let tol = JUMP_TIME_REL_TOL * hi.max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if propagator.norm_sq_at(coeffs, mid) > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Keep successive click times strictly increasing in f64.
    let floor = 4.0 * f64::EPSILON * t_now.max(1.0);
    Some(hi.max(floor))
}

/// Bernoulli thinning of the cavity channel: each cavity click survives with
/// probability `efficiency`, drawn from a per-trajectory substream so the
/// outcome does not depend on ensemble size or ordering. Qubit clicks are
/// untouched.
pub fn thin_record(record: &ClickRecord, efficiency: f64, seed: u64) -> Result<ClickRecord> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Argument(format!(
            "efficiency must be in (0, 1], got {efficiency}"
        )));
    }
    let mut clicks = Vec::with_capacity(record.clicks.len());
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut current_stream = u64::MAX;
    for click in &record.clicks {
        match click.channel {
            Channel::Qubit => clicks.push(*click),
            Channel::Cavity => {
                let stream = u64::from(click.trajectory);
                if stream != current_stream {
                    rng = ChaCha12Rng::seed_from_u64(seed);
                    rng.set_stream(stream);
                    current_stream = stream;
                }
                if rng.random::<f64>() < efficiency {
                    clicks.push(*click);
                }
            }
        }
    }
    Ok(ClickRecord {
        clicks,
        duration: record.duration,
        n_trajectories: record.n_trajectories,
        seed: record.seed,
    })
}

/// Per-trajectory sums of falling factorials of binned cavity counts; the
/// sufficient statistics for factorial moments and their bootstrap.
struct BinnedStats {
    /// sums[traj][k−1] = Σ_bins m(m−1)…(m−k+1)
    sums: Vec<Vec<f64>>,
    bins_per_trajectory: u64,
}

fn binned_statistics(record: &ClickRecord, bin_width: f64, k_max: usize) -> Result<BinnedStats> {
    if !(bin_width > 0.0) {
        return Err(Error::Argument(format!("bin width must be > 0, got {bin_width}")));
    }
    if k_max < 1 {
        return Err(Error::Argument("k_max must be >= 1".into()));
    }
    let bins_per_trajectory = (record.duration / bin_width).floor() as u64;
    if bins_per_trajectory == 0 {
        return Err(Error::Statistics("bin width exceeds the record duration".into()));
    }
    let total_bins = bins_per_trajectory * record.n_trajectories as u64;
    if total_bins < MIN_BINS {
        return Err(Error::Statistics(format!(
            "{total_bins} bins < {MIN_BINS}; lengthen the record or shrink the bins"
        )));
    }

    let mut sums = vec![vec![0.0; k_max]; record.n_trajectories];
    let mut current: Option<(u32, u64, u64)> = None; // (traj, bin, count)
    let flush = |entry: Option<(u32, u64, u64)>, sums: &mut Vec<Vec<f64>>| {
        if let Some((traj, _, m)) = entry {
            let row = &mut sums[traj as usize];
            let mut ff = 1.0;
            for (k, slot) in row.iter_mut().enumerate() {
                if m as usize <= k {
                    break;
                }
                ff *= (m - k as u64) as f64;
                *slot += ff;
            }
        }
    };
    for click in &record.clicks {
        if click.channel != Channel::Cavity {
            continue;
        }
        if click.trajectory as usize >= record.n_trajectories {
            return Err(Error::Argument(format!(
                "click references trajectory {} outside the ensemble",
                click.trajectory
            )));
        }
        let bin = (click.time / bin_width).floor() as u64;
        if bin >= bins_per_trajectory {
            // Clicks past the last complete bin are dropped rather than
            // counted in a short bin.
            continue;
        }
        match current {
            Some((traj, b, m)) if traj == click.trajectory && b == bin => {
                current = Some((traj, b, m + 1));
            }
            other => {
                flush(other, &mut sums);
                current = Some((click.trajectory, bin, 1));
            }
        }
    }
    flush(current, &mut sums);
    Ok(BinnedStats { sums, bins_per_trajectory })
}

/// Factorial moments F_k = ⟨m(m−1)…(m−k+1)⟩ of binned cavity counts for
/// k = 0…k_max (F₀ = 1). In the small-bin limit F_k/bin_widthᵏ estimates
/// (η·2κ)ᵏ·⟨a†ᵏaᵏ⟩.
pub fn factorial_moments(record: &ClickRecord, bin_width: f64, k_max: usize) -> Result<Vec<f64>> {
    let stats = binned_statistics(record, bin_width, k_max)?;
    let total_bins = (stats.bins_per_trajectory * record.n_trajectories as u64) as f64;
    let mut moments = vec![1.0];
    for k in 1..=k_max {
        let sum: f64 = stats.sums.iter().map(|row| row[k - 1]).sum();
        moments.push(sum / total_bins);
    }
    Ok(moments)
}

/// A conditional-ratio estimate from click data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub k: usize,
    pub value: f64,
    /// Bootstrap standard error over trajectories.
    pub std_error: f64,
    pub n_bins: u64,
    pub bin_width: f64,
    /// False when a denominator factorial moment vanished.
    pub valid: bool,
}

/// Estimates R̂_{k,k−1} = F_k·F_{k−2}/F_{k−1}² for k = 2…k_max with block
/// bootstrap (over trajectories) standard errors. Bin width and detector
/// efficiency cancel between numerator and denominator. The bootstrap is
/// seeded from the record seed, so estimates are reproducible.
pub fn estimate_ratios(
    record: &ClickRecord,
    bin_width: f64,
    k_max: usize,
    n_bootstrap: usize,
) -> Result<Vec<RatioEstimate>> {
    if k_max < 2 {
        return Err(Error::Argument("ratio estimation needs k_max >= 2".into()));
    }
    if n_bootstrap < 2 {
        return Err(Error::Argument("need at least 2 bootstrap replicates".into()));
    }
    let stats = binned_statistics(record, bin_width, k_max)?;
    let n_traj = record.n_trajectories;
    let total_bins = stats.bins_per_trajectory * n_traj as u64;

    let ratios_from = |sums: &[f64], bins: f64| -> Vec<Option<f64>> {
        // sums[k−1] holds Σ ff_k; F_0 = 1.
        let f = |k: usize| -> f64 {
            if k == 0 {
                1.0
            } else {
                sums[k - 1] / bins
            }
        };
        (2..=k_max)
            .map(|k| {
                let denom = f(k - 1);
                if denom > 0.0 {
                    Some(f(k) * f(k - 2) / (denom * denom))
                } else {
                    None
                }
            })
            .collect()
    };

    let totals: Vec<f64> = (1..=k_max)
        .map(|k| stats.sums.iter().map(|row| row[k - 1]).sum())
        .collect();
    let point = ratios_from(&totals, total_bins as f64);

    let mut rng = ChaCha12Rng::seed_from_u64(record.seed ^ 0x626f_6f74_7374_7261);
    let mut replicates: Vec<Vec<f64>> = vec![Vec::with_capacity(n_bootstrap); k_max - 1];
    let mut resampled = vec![0.0; k_max];
    for _ in 0..n_bootstrap {
        resampled.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..n_traj {
            let pick = rng.random_range(0..n_traj);
            for (k, slot) in resampled.iter_mut().enumerate() {
                *slot += stats.sums[pick][k];
            }
        }
        for (slot, ratio) in replicates.iter_mut().zip(ratios_from(&resampled, total_bins as f64))
        {
            if let Some(r) = ratio {
                slot.push(r);
            }
        }
    }

    Ok((2..=k_max)
        .zip(point)
        .zip(replicates)
        .map(|((k, value), samples)| {
            let valid = value.is_some() && samples.len() >= 2;
            let std_error = if samples.len() >= 2 {
                let mean = samples.iter().sum::<f64>() / samples.len() as f64;
                let var = samples.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
                    / (samples.len() - 1) as f64;
                var.sqrt()
            } else {
                f64::INFINITY
            };
            RatioEstimate {
                k,
                value: value.unwrap_or(0.0),
                std_error,
                n_bins: total_bins,
                bin_width,
                valid,
            }
        })
        .collect())
}

/// Mean click rate of one channel with a bootstrap standard error over
/// trajectories. For the cavity channel rate/2κ estimates ⟨a†a⟩ and for the
/// qubit channel rate/γ estimates ⟨σ₊σ₋⟩.
pub fn channel_rate_estimate(
    record: &ClickRecord,
    channel: Channel,
    n_bootstrap: usize,
) -> Result<(f64, f64)> {
    if n_bootstrap < 2 {
        return Err(Error::Argument("need at least 2 bootstrap replicates".into()));
    }
    let n_traj = record.n_trajectories;
    if n_traj == 0 || !(record.duration > 0.0) {
        return Err(Error::Statistics("empty click record".into()));
    }
    let mut counts = vec![0.0f64; n_traj];
    for click in &record.clicks {
        if click.channel == channel {
            counts[click.trajectory as usize] += 1.0;
        }
    }
    let rate_of = |total: f64, m: usize| total / (m as f64 * record.duration);
    let point = rate_of(counts.iter().sum(), n_traj);

    let mut rng = ChaCha12Rng::seed_from_u64(record.seed ^ 0x7261_7465_7365_6564);
    let mut samples = Vec::with_capacity(n_bootstrap);
    for _ in 0..n_bootstrap {
        let mut total = 0.0;
        for _ in 0..n_traj {
            total += counts[rng.random_range(0..n_traj)];
        }
        samples.push(rate_of(total, n_traj));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
        / (samples.len() - 1) as f64;
    Ok((point, var.sqrt()))
}
