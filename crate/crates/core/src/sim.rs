//! Seeded Monte Carlo engine: frames, metric aggregation, grid sweeps.
//!
//! Frames are independent trials. Frame `f` draws its randomness from a
//! counter-based stream derived from `(master seed, f)` alone, so results
//! are bit-identical regardless of scheduling, worker count or which grid
//! cell is being evaluated; cells whose coverage support coincides produce
//! identical decoded counts by construction. All accumulation is integer
//! arithmetic, making the parallel reduction exactly associative.
//!
//! Metrics follow the ratio-of-sums convention: `p_rec` is total decoded
//! over total sent (1.0 with a zero-weight flag when nothing was sent) and
//! `r_avg` is decoded packets per available slot per frame.

use crate::decoder::peel_decode;
use crate::geometry::{Coverage, GeometryError, Scenario};
use crate::protocol::{CsaGraph, DegreeDistribution, FrameInstance, ProtocolError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("simulation: {0}")]
    Invalid(String),
}

/// Frame-stream derivation from a 64-bit master seed.
///
/// Frame `f` owns two ChaCha8 streams: `2f` for protocol randomness
/// (activity, degrees, replica slots) and `2f + 1` for observation noise.
/// Streams are independent of grid cell and evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPolicy {
    pub master_seed: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// Protocol randomness stream for one frame.
    pub fn frame_rng(&self, frame: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(2 * frame);
        rng
    }

    /// Observation-noise stream for one frame.
    pub fn noise_rng(&self, frame: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(2 * frame + 1);
        rng
    }
}

/// Per-frame counts feeding the metric accumulators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub active: u32,
    /// Packets sent this frame; one per active device.
    pub sent: u32,
    pub decoded: u32,
    pub activation_probability: f64,
}

/// Aggregated recovery probability and throughput with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Total decoded / total sent; 1.0 by convention on zero-sent runs.
    pub p_rec: f64,
    pub p_rec_se: f64,
    /// Decoded packets per slot per frame.
    pub r_avg: f64,
    pub r_avg_se: f64,
    pub frames: u64,
    pub sent_total: u64,
    pub decoded_total: u64,
}

impl Metrics {
    /// True when no packet was sent over the whole run, i.e. `p_rec`
    /// carries no weight.
    pub fn zero_weight(&self) -> bool {
        self.sent_total == 0
    }
}

/// Exact integer accumulator for the metric moments; addition is
/// associative and commutative, so any reduction tree gives the same sums.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    frames: u64,
    sent: u64,
    decoded: u64,
    sent_sq: u64,
    decoded_sq: u64,
    cross: u64,
}

impl Accumulator {
    fn push(&mut self, outcome: &TrialOutcome) {
        let s = outcome.sent as u64;
        let d = outcome.decoded as u64;
        self.frames += 1;
        self.sent += s;
        self.decoded += d;
        self.sent_sq += s * s;
        self.decoded_sq += d * d;
        self.cross += d * s;
    }

    fn merge(mut self, other: Accumulator) -> Accumulator {
        self.frames += other.frames;
        self.sent += other.sent;
        self.decoded += other.decoded;
        self.sent_sq += other.sent_sq;
        self.decoded_sq += other.decoded_sq;
        self.cross += other.cross;
        self
    }

    fn metrics(&self, slots_per_frame_total: usize) -> Metrics {
        let n = self.frames as f64;
        let slots = slots_per_frame_total as f64;
        let r_avg = self.decoded as f64 / (n * slots);
        let (p_rec, p_rec_se) = if self.sent == 0 {
            (1.0, 0.0)
        } else {
            let mean_d = self.decoded as f64 / n;
            let mean_s = self.sent as f64 / n;
            let ratio = self.decoded as f64 / self.sent as f64;
            let se = if self.frames >= 2 {
                // Delta method for the ratio-of-sums estimator.
                let var_d = (self.decoded_sq as f64 - n * mean_d * mean_d) / (n - 1.0);
                let var_s = (self.sent_sq as f64 - n * mean_s * mean_s) / (n - 1.0);
                let cov = (self.cross as f64 - n * mean_d * mean_s) / (n - 1.0);
                let var_ratio =
                    (var_d - 2.0 * ratio * cov + ratio * ratio * var_s) / (n * mean_s * mean_s);
                var_ratio.max(0.0).sqrt()
            } else {
                0.0
            };
            (ratio, se)
        };
        let r_avg_se = if self.frames >= 2 {
            let mean_d = self.decoded as f64 / n;
            let var_d = (self.decoded_sq as f64 - n * mean_d * mean_d) / (n - 1.0);
            (var_d.max(0.0) / n).sqrt() / slots
        } else {
            0.0
        };
        Metrics {
            p_rec,
            p_rec_se,
            r_avg,
            r_avg_se,
            frames: self.frames,
            sent_total: self.sent,
            decoded_total: self.decoded,
        }
    }
}

/// Run one frame end to end on a precomputed coverage: activity, replica
/// placement, graph assembly, peeling.
pub fn run_frame<R: rand::Rng + ?Sized>(
    coverage: &Coverage,
    activation_probability: f64,
    degrees: &DegreeDistribution,
    slots_per_frame: usize,
    rng: &mut R,
) -> Result<TrialOutcome, SimError> {
    let frame = FrameInstance::sample(
        coverage.tx_count(),
        activation_probability,
        degrees,
        slots_per_frame,
        rng,
    )?;
    Ok(run_sampled_frame(&frame, coverage, activation_probability))
}

/// Decode an already-sampled frame.
pub fn run_sampled_frame(
    frame: &FrameInstance,
    coverage: &Coverage,
    activation_probability: f64,
) -> TrialOutcome {
    let graph = CsaGraph::build(frame, coverage);
    let result = peel_decode(&graph);
    TrialOutcome {
        active: frame.active.len() as u32,
        sent: frame.active.len() as u32,
        decoded: result.decoded_count() as u32,
        activation_probability,
    }
}

/// Monte Carlo run of `n_frames` frames at one `(p_a, FOV)` point.
pub fn run_frames(
    scenario: &Scenario,
    activation_probability: f64,
    fov_deg: f64,
    degrees: &DegreeDistribution,
    slots_per_frame: usize,
    n_frames: u64,
    seed: u64,
) -> Result<Metrics, SimError> {
    let coverage = Coverage::from_scenario(&scenario.with_fov(fov_deg))?;
    run_frames_with_coverage(
        &coverage,
        activation_probability,
        degrees,
        slots_per_frame,
        n_frames,
        seed,
    )
}

/// Core parallel frame loop against a fixed coverage.
pub fn run_frames_with_coverage(
    coverage: &Coverage,
    activation_probability: f64,
    degrees: &DegreeDistribution,
    slots_per_frame: usize,
    n_frames: u64,
    seed: u64,
) -> Result<Metrics, SimError> {
    if n_frames == 0 {
        return Err(SimError::Invalid("frame count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&activation_probability) {
        return Err(SimError::Invalid(format!(
            "activation probability must lie in [0, 1], got {activation_probability}"
        )));
    }
    if degrees.max_degree() > slots_per_frame {
        return Err(SimError::Protocol(ProtocolError::DegreeExceedsSlots {
            degree: degrees.max_degree(),
            slots: slots_per_frame,
        }));
    }
    let policy = SeedPolicy::new(seed);
    let accumulator = (0..n_frames)
        .into_par_iter()
        .fold(Accumulator::default, |mut acc, f| {
            let mut rng = policy.frame_rng(f);
            let outcome =
                run_frame(coverage, activation_probability, degrees, slots_per_frame, &mut rng)
                    .expect("preconditions validated before the frame loop");
            acc.push(&outcome);
            acc
        })
        .reduce(Accumulator::default, Accumulator::merge);
    Ok(accumulator.metrics(coverage.rx_count() * slots_per_frame))
}

/// Sequential variant of [`run_frames_with_coverage`] invoking `on_frame`
/// with each frame's decode result; serves the per-frame trace output.
/// Aggregates the exact sums the parallel path produces.
pub fn run_frames_traced(
    coverage: &Coverage,
    activation_probability: f64,
    degrees: &DegreeDistribution,
    slots_per_frame: usize,
    n_frames: u64,
    seed: u64,
    mut on_frame: impl FnMut(u64, &crate::decoder::DecodeResult),
) -> Result<Metrics, SimError> {
    if n_frames == 0 {
        return Err(SimError::Invalid("frame count must be at least 1".into()));
    }
    let policy = SeedPolicy::new(seed);
    let mut acc = Accumulator::default();
    for f in 0..n_frames {
        let mut rng = policy.frame_rng(f);
        let frame = FrameInstance::sample(
            coverage.tx_count(),
            activation_probability,
            degrees,
            slots_per_frame,
            &mut rng,
        )?;
        let graph = CsaGraph::build(&frame, coverage);
        let result = peel_decode(&graph);
        on_frame(f, &result);
        acc.push(&TrialOutcome {
            active: frame.active.len() as u32,
            sent: frame.active.len() as u32,
            decoded: result.decoded_count() as u32,
            activation_probability,
        });
    }
    Ok(acc.metrics(coverage.rx_count() * slots_per_frame))
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub activation_probability: f64,
    pub fov_deg: f64,
    pub metrics: Metrics,
}

/// Full `(p_a, FOV)` grid sweep, in `p_a`-major, FOV-minor order.
///
/// The FOV only enters through the coverage support, which is a step
/// function of the angle; cells inside the same support band share one
/// simulation since their outcomes are identical frame by frame.
pub fn sweep(
    scenario: &Scenario,
    activation_probabilities: &[f64],
    fovs_deg: &[f64],
    degrees: &DegreeDistribution,
    slots_per_frame: usize,
    n_frames: u64,
    seed: u64,
) -> Result<Vec<SweepCell>, SimError> {
    if activation_probabilities.is_empty() || fovs_deg.is_empty() {
        return Err(SimError::Invalid("sweep grids must be non-empty".into()));
    }
    let coverages: Vec<Coverage> = fovs_deg
        .iter()
        .map(|&fov| Coverage::from_scenario(&scenario.with_fov(fov)))
        .collect::<Result<_, _>>()?;

    // Group FOV indices by coverage support.
    let mut groups: HashMap<&Vec<Vec<u32>>, Vec<usize>> = HashMap::new();
    for (idx, cov) in coverages.iter().enumerate() {
        groups.entry(cov.support()).or_default().push(idx);
    }
    let mut group_list: Vec<(usize, Vec<usize>)> = groups
        .into_values()
        .map(|members| (members[0], members))
        .collect();
    group_list.sort_by_key(|(rep, _)| *rep);

    // One task per (support band, p_a); frames parallelize inside.
    let tasks: Vec<(usize, usize)> = group_list
        .iter()
        .enumerate()
        .flat_map(|(g, _)| (0..activation_probabilities.len()).map(move |p| (g, p)))
        .collect();
    let task_metrics: Vec<Metrics> = tasks
        .par_iter()
        .map(|&(g, p)| {
            let rep = group_list[g].0;
            run_frames_with_coverage(
                &coverages[rep],
                activation_probabilities[p],
                degrees,
                slots_per_frame,
                n_frames,
                seed,
            )
        })
        .collect::<Result<_, _>>()?;

    let mut by_cell: Vec<Option<Metrics>> =
        vec![None; activation_probabilities.len() * fovs_deg.len()];
    for (t, &(g, p)) in tasks.iter().enumerate() {
        for &fov_idx in &group_list[g].1 {
            by_cell[p * fovs_deg.len() + fov_idx] = Some(task_metrics[t]);
        }
    }

    Ok(activation_probabilities
        .iter()
        .enumerate()
        .flat_map(|(p, &pa)| {
            let by_cell = &by_cell;
            fovs_deg.iter().enumerate().map(move |(f, &fov)| SweepCell {
                activation_probability: pa,
                fov_deg: fov,
                metrics: by_cell[p * fovs_deg.len() + f].expect("every cell assigned"),
            })
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GainMatrix;

    fn single_link_coverage() -> Coverage {
        Coverage::from_gains(GainMatrix::from_rows(&[vec![1e-6]]))
    }

    #[test]
    fn zero_activity_frame() {
        let cov = single_link_coverage();
        let mut rng = SeedPolicy::new(1).frame_rng(0);
        let out = run_frame(&cov, 0.0, &DegreeDistribution::single(1), 1, &mut rng).unwrap();
        assert_eq!(out.sent, 0);
        assert_eq!(out.decoded, 0);
    }

    #[test]
    fn guaranteed_singleton_frame() {
        let cov = single_link_coverage();
        let mut rng = SeedPolicy::new(1).frame_rng(0);
        let out = run_frame(&cov, 1.0, &DegreeDistribution::single(1), 1, &mut rng).unwrap();
        assert_eq!(out.sent, 1);
        assert_eq!(out.decoded, 1);
    }

    #[test]
    fn zero_sent_run_reports_convention() {
        let cov = single_link_coverage();
        let m =
            run_frames_with_coverage(&cov, 0.0, &DegreeDistribution::single(1), 1, 100, 3).unwrap();
        assert_eq!(m.p_rec, 1.0);
        assert!(m.zero_weight());
        assert_eq!(m.r_avg, 0.0);
        assert_eq!(m.frames, 100);
    }

    #[test]
    fn single_frame_full_decode() {
        let cov = single_link_coverage();
        let m =
            run_frames_with_coverage(&cov, 1.0, &DegreeDistribution::single(1), 1, 1, 3).unwrap();
        assert_eq!(m.p_rec, 1.0);
        assert!(!m.zero_weight());
        assert_eq!(m.r_avg, 1.0);
    }

    #[test]
    fn accumulator_identity_between_metrics() {
        // r_avg equals p_rec * mean(sent) / slots by construction.
        let cov = Coverage::from_gains(GainMatrix::from_rows(&[
            vec![1e-6, 0.0],
            vec![1e-6, 2e-6],
            vec![0.0, 2e-6],
            vec![0.0, 0.0],
        ]));
        let dist = DegreeDistribution::from_weights(
            &[(1usize, 0.5), (2usize, 0.5)].into_iter().collect(),
        )
        .unwrap();
        let m = run_frames_with_coverage(&cov, 0.6, &dist, 3, 5000, 17).unwrap();
        let slots = (cov.rx_count() * 3) as f64;
        let mean_sent = m.sent_total as f64 / m.frames as f64;
        let identity = m.p_rec * mean_sent / slots;
        assert!((m.r_avg - identity).abs() < 1e-12);
    }

    #[test]
    fn deterministic_across_runs() {
        let cov = Coverage::from_gains(GainMatrix::from_rows(&[
            vec![1e-6, 1e-6],
            vec![1e-6, 0.0],
            vec![0.0, 1e-6],
        ]));
        let dist = DegreeDistribution::single(2);
        let a = run_frames_with_coverage(&cov, 0.5, &dist, 4, 2000, 99).unwrap();
        let b = run_frames_with_coverage(&cov, 0.5, &dist, 4, 2000, 99).unwrap();
        assert_eq!(a, b);
        let c = run_frames_with_coverage(&cov, 0.5, &dist, 4, 2000, 100).unwrap();
        assert_ne!(a.decoded_total, c.decoded_total);
    }

    #[test]
    fn classical_slotted_aloha_mean() {
        // Single AP, single slot, one replica, full coverage: the decoded
        // count per frame is Bernoulli with mean N p (1-p)^(N-1).
        let scenario = Scenario::open_hall(1, 86.0);
        let pa = 0.002;
        let n = scenario.device_count() as f64;
        let expect = n * pa * (1.0 - pa).powi(675);
        let m = run_frames(&scenario, pa, 86.0, &DegreeDistribution::single(1), 1, 20_000, 5)
            .unwrap();
        let mean = m.decoded_total as f64 / m.frames as f64;
        let se = (expect * (1.0 - expect) / m.frames as f64).sqrt();
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "mean {mean}, expected {expect}, se {se}"
        );
    }

    #[test]
    fn crdsa_beats_slotted_aloha_at_their_best_loads() {
        let scenario = Scenario::open_hall(1, 86.0);
        let l = 100;
        // Loads near each protocol's throughput maximum: G = 1 for SA,
        // G ~ 0.65 for two-replica CSA.
        let sa = run_frames(
            &scenario,
            100.0 / 676.0,
            86.0,
            &DegreeDistribution::single(1),
            l,
            2000,
            7,
        )
        .unwrap();
        let crdsa = run_frames(
            &scenario,
            65.0 / 676.0,
            86.0,
            &DegreeDistribution::single(2),
            l,
            2000,
            7,
        )
        .unwrap();
        assert!(
            crdsa.r_avg > sa.r_avg,
            "crdsa {} should beat sa {}",
            crdsa.r_avg,
            sa.r_avg
        );
    }

    #[test]
    fn metrics_bounds_hold_over_a_sweep() {
        let scenario = Scenario::open_hall(3, 40.0);
        let cells = sweep(
            &scenario,
            &[0.0, 0.1, 0.9],
            &[20.0, 30.0, 50.0, 80.0],
            &DegreeDistribution::single(1),
            1,
            300,
            11,
        )
        .unwrap();
        assert_eq!(cells.len(), 12);
        let slots = scenario.receiver_count() as f64;
        for cell in &cells {
            let m = &cell.metrics;
            assert!((0.0..=1.0).contains(&m.p_rec));
            assert!(m.r_avg >= 0.0);
            let cap = (cell.activation_probability * 676.0).min(slots) / slots;
            assert!(m.r_avg <= cap + 3.0 * m.r_avg_se + 1e-12);
        }
    }

    #[test]
    fn sweep_cells_identical_inside_a_coverage_band() {
        // Between the four-device band edges every FOV yields the same
        // support, hence bitwise-identical metrics.
        let scenario = Scenario::open_hall(3, 30.0);
        let cells = sweep(
            &scenario,
            &[0.3],
            &[26.0, 33.0, 40.0, 46.0],
            &DegreeDistribution::single(1),
            1,
            500,
            23,
        )
        .unwrap();
        for pair in cells.windows(2) {
            assert_eq!(pair[0].metrics, pair[1].metrics);
        }
    }

    #[test]
    fn sweep_single_cell_matches_run_frames() {
        let scenario = Scenario::open_hall(3, 40.0);
        let dist = DegreeDistribution::single(1);
        let cells = sweep(&scenario, &[0.25], &[40.0], &dist, 1, 400, 31).unwrap();
        let direct = run_frames(&scenario, 0.25, 40.0, &dist, 1, 400, 31).unwrap();
        assert_eq!(cells[0].metrics, direct);
    }

    #[test]
    fn sweep_rejects_empty_grids() {
        let scenario = Scenario::open_hall(3, 40.0);
        let dist = DegreeDistribution::single(1);
        assert!(sweep(&scenario, &[], &[40.0], &dist, 1, 10, 1).is_err());
        assert!(sweep(&scenario, &[0.5], &[], &dist, 1, 10, 1).is_err());
    }
}
