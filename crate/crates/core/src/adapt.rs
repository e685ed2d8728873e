//! Activation-probability estimation and adaptive FOV control.
//!
//! The throughput-maximizing FOV depends on how many devices contend per
//! frame. [`optimize_fov`] sweeps a `(p_a, FOV)` grid and tabulates the
//! argmax per activation probability. [`adaptive_run`] closes the loop: at
//! the start of each frame the active devices transmit a preamble, the
//! central entity estimates `p_a` from it, looks up the FOV for that
//! estimate, reconfigures coverage, and decodes the frame.
//!
//! Two estimators are provided: a ground-truth oracle (`|active| / N`) for
//! isolating the control behavior, and a method-of-moments estimator on
//! total received preamble power, unbiased in the noiseless model.

use crate::geometry::{Coverage, GainMatrix, GeometryError, Scenario};
use crate::protocol::DegreeDistribution;
use crate::sim::{run_sampled_frame, sweep, SeedPolicy, SimError};
use crate::protocol::FrameInstance;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no covered device: total channel gain is zero")]
    NoCoveredDevices,
    #[error("adaptation: {0}")]
    Invalid(String),
}

/// One optimized row: the best FOV found for an activation probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovEntry {
    pub activation_probability: f64,
    pub fov_opt_deg: f64,
    pub r_avg_max: f64,
    pub p_rec_at_opt: f64,
}

/// Lookup table mapping activation probability to its optimal FOV,
/// sorted by strictly increasing probability.
#[derive(Debug, Clone, PartialEq)]
pub struct FovLookupTable {
    entries: Vec<FovEntry>,
}

impl FovLookupTable {
    pub fn new(entries: Vec<FovEntry>) -> Result<Self, AdaptError> {
        if entries.is_empty() {
            return Err(AdaptError::Invalid("lookup table must not be empty".into()));
        }
        for pair in entries.windows(2) {
            if pair[1].activation_probability <= pair[0].activation_probability {
                return Err(AdaptError::Invalid(
                    "lookup activation probabilities must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[FovEntry] {
        &self.entries
    }

    /// Nearest grid point; clamps outside the tabulated range, prefers the
    /// larger probability on exact midpoints.
    pub fn lookup(&self, activation_probability: f64) -> &FovEntry {
        let mut best = &self.entries[0];
        let mut best_dist = f64::INFINITY;
        for entry in &self.entries {
            let dist = (entry.activation_probability - activation_probability).abs();
            if dist <= best_dist {
                best = entry;
                best_dist = dist;
            }
        }
        best
    }
}

/// Sweep the grid and tabulate the throughput-maximizing FOV per
/// activation probability. Ties break toward the larger FOV, so a flat
/// band resolves to its widest angle.
pub fn optimize_fov(
    scenario: &Scenario,
    activation_probabilities: &[f64],
    fovs_deg: &[f64],
    degrees: &DegreeDistribution,
    slots_per_frame: usize,
    n_frames: u64,
    seed: u64,
) -> Result<FovLookupTable, AdaptError> {
    for pair in activation_probabilities.windows(2) {
        if pair[1] <= pair[0] {
            return Err(AdaptError::Invalid(
                "activation probability grid must be strictly increasing".into(),
            ));
        }
    }
    let cells = sweep(
        scenario,
        activation_probabilities,
        fovs_deg,
        degrees,
        slots_per_frame,
        n_frames,
        seed,
    )?;
    let fov_count = fovs_deg.len();
    let entries = activation_probabilities
        .iter()
        .enumerate()
        .map(|(p, &pa)| {
            let row = &cells[p * fov_count..(p + 1) * fov_count];
            let mut best = &row[0];
            for cell in row {
                let better = cell.metrics.r_avg > best.metrics.r_avg
                    || (cell.metrics.r_avg == best.metrics.r_avg
                        && cell.fov_deg >= best.fov_deg);
                if better {
                    best = cell;
                }
            }
            FovEntry {
                activation_probability: pa,
                fov_opt_deg: best.fov_deg,
                r_avg_max: best.metrics.r_avg,
                p_rec_at_opt: best.metrics.p_rec,
            }
        })
        .collect();
    FovLookupTable::new(entries)
}

/// Per-AP received preamble power (W).
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleObservation {
    pub powers_w: Vec<f64>,
}

/// Ground-truth activation estimate from the realized active set.
pub fn estimate_pa_oracle(active_count: usize, device_count: usize) -> f64 {
    if device_count == 0 {
        return 0.0;
    }
    active_count as f64 / device_count as f64
}

/// Noiseless-or-noisy preamble observation: every active device transmits
/// simultaneously, each AP accumulates `P_tx * h_ij` plus optional additive
/// Gaussian noise, floored at zero power.
pub fn observe_preamble<R: rand::Rng + ?Sized>(
    active: &[u32],
    coverage: &Coverage,
    tx_power_w: f64,
    noise_std_w: f64,
    noise_rng: &mut R,
) -> PreambleObservation {
    let mut powers = vec![0.0f64; coverage.rx_count()];
    for &i in active {
        for &j in coverage.tx_rxs(i as usize) {
            powers[j as usize] += tx_power_w * coverage.gains().get(i as usize, j as usize);
        }
    }
    if noise_std_w > 0.0 {
        let normal = Normal::new(0.0, noise_std_w).expect("validated noise std");
        for p in &mut powers {
            *p = (*p + normal.sample(noise_rng)).max(0.0);
        }
    }
    PreambleObservation { powers_w: powers }
}

/// Method-of-moments activation estimate from total preamble power:
/// `clamp(sum_j obs_j / (P_tx * sum_ij h_ij), 0, 1)`. Each AP's expected
/// power is `p_a * P_tx * sum_i h_ij`, so the ratio is unbiased for `p_a`
/// in the noiseless model.
pub fn estimate_pa_power(
    observation: &PreambleObservation,
    gains: &GainMatrix,
    tx_power_w: f64,
) -> Result<f64, AdaptError> {
    let total_gain = gains.total();
    if total_gain <= 0.0 {
        return Err(AdaptError::NoCoveredDevices);
    }
    let total_power: f64 = observation.powers_w.iter().sum();
    Ok((total_power / (tx_power_w * total_gain)).clamp(0.0, 1.0))
}

/// Which activation estimator drives the control loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Oracle,
    Power,
}

/// Preamble observation settings for the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreambleConfig {
    /// Additive Gaussian noise std per AP (W); zero disables noise draws.
    pub noise_std_w: f64,
    /// Observe the preamble at this fixed FOV instead of the FOV currently
    /// configured on the receivers.
    pub fixed_fov_deg: Option<f64>,
}

impl Default for PreambleConfig {
    fn default() -> Self {
        Self { noise_std_w: 0.0, fixed_fov_deg: None }
    }
}

/// One closed-loop frame: truth, estimate, chosen FOV, decode outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveFrameRecord {
    pub frame: u64,
    pub pa_true: f64,
    /// None when the estimator failed this frame.
    pub pa_estimate: Option<f64>,
    pub fov_deg: f64,
    pub active: u32,
    pub sent: u32,
    pub decoded: u32,
    pub estimator_error: bool,
}

/// Closed-loop adaptive run over a per-frame activation trajectory.
///
/// Per frame: sample activity at the true `p_a`, observe the preamble,
/// estimate `p_a`, set the FOV to the lookup entry nearest the estimate,
/// rebuild coverage, then place replicas and decode at the new FOV. On
/// estimator failure the frame is flagged and simulated at the previous
/// FOV. Frame randomness comes from the same per-frame streams as
/// [`crate::sim::run_frames`], so a constant trajectory with the oracle
/// estimator reproduces the open-loop run exactly.
pub fn adaptive_run(
    scenario: &Scenario,
    pa_trajectory: &[f64],
    lookup: &FovLookupTable,
    estimator: EstimatorKind,
    degrees: &DegreeDistribution,
    slots_per_frame: usize,
    seed: u64,
    preamble: &PreambleConfig,
) -> Result<Vec<AdaptiveFrameRecord>, AdaptError> {
    scenario.validate()?;
    if pa_trajectory.is_empty() {
        return Err(AdaptError::Invalid("activation trajectory must not be empty".into()));
    }
    for &pa in pa_trajectory {
        if !(0.0..=1.0).contains(&pa) {
            return Err(AdaptError::Invalid(format!(
                "trajectory activation probability must lie in [0, 1], got {pa}"
            )));
        }
    }
    if !(preamble.noise_std_w >= 0.0 && preamble.noise_std_w.is_finite()) {
        return Err(AdaptError::Invalid(format!(
            "preamble noise std must be nonnegative, got {}",
            preamble.noise_std_w
        )));
    }

    let mut coverage_cache: HashMap<u64, Coverage> = HashMap::new();
    let mut coverage_for = |fov: f64| -> Result<Coverage, AdaptError> {
        if let Some(cov) = coverage_cache.get(&fov.to_bits()) {
            return Ok(cov.clone());
        }
        let cov = Coverage::from_scenario(&scenario.with_fov(fov))?;
        coverage_cache.insert(fov.to_bits(), cov.clone());
        Ok(cov)
    };

    let policy = SeedPolicy::new(seed);
    let device_count = scenario.device_count();
    let tx_power = scenario.lambertian.tx_power_w;
    let mut current_fov = scenario.fov_deg;
    let mut records = Vec::with_capacity(pa_trajectory.len());

    for (f, &pa_true) in pa_trajectory.iter().enumerate() {
        let mut frame_rng = policy.frame_rng(f as u64);
        let active = crate::protocol::sample_activity(device_count, pa_true, &mut frame_rng);

        let estimate = match estimator {
            EstimatorKind::Oracle => Ok(estimate_pa_oracle(active.len(), device_count)),
            EstimatorKind::Power => {
                let preamble_fov = preamble.fixed_fov_deg.unwrap_or(current_fov);
                coverage_for(preamble_fov).and_then(|cov| {
                    let mut noise_rng = policy.noise_rng(f as u64);
                    let obs = observe_preamble(
                        &active,
                        &cov,
                        tx_power,
                        preamble.noise_std_w,
                        &mut noise_rng,
                    );
                    estimate_pa_power(&obs, cov.gains(), tx_power)
                })
            }
        };

        let (pa_estimate, estimator_error) = match estimate {
            Ok(est) => {
                current_fov = lookup.lookup(est).fov_opt_deg;
                (Some(est), false)
            }
            Err(_) => (None, true),
        };

        let coverage = coverage_for(current_fov)?;
        let mut replica_slots = Vec::with_capacity(active.len());
        for _ in &active {
            let d = degrees.sample(&mut frame_rng);
            replica_slots.push(
                crate::protocol::place_replicas(d, slots_per_frame, &mut frame_rng)
                    .map_err(SimError::Protocol)?,
            );
        }
        let frame = FrameInstance { active, replica_slots, slots_per_frame };
        let outcome = run_sampled_frame(&frame, &coverage, pa_true);
        records.push(AdaptiveFrameRecord {
            frame: f as u64,
            pa_true,
            pa_estimate,
            fov_deg: current_fov,
            active: outcome.active,
            sent: outcome.sent,
            decoded: outcome.decoded,
            estimator_error,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
