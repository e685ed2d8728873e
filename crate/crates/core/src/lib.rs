//! Monte Carlo simulator for multi-receiver coded slotted ALOHA random
//! access over indoor optical wireless links.
//!
//! A square grid of upward-facing IoT transmitters contends in framed
//! slotted ALOHA towards ceiling-mounted optical access points whose field
//! of view (FOV) is adjustable. Replicas land on a bipartite frame graph
//! and a central peeling decoder cancels interference across slots and
//! receivers. Shrinking the FOV trades coverage for collision isolation,
//! so the throughput-maximizing FOV depends on the device activation
//! probability; the `adapt` module estimates that probability per frame
//! and retunes the FOV on the fly.
//!
//! Module map:
//! - [`geometry`] — Lambertian LOS gains, grid placement, coverage sets
//! - [`protocol`] — degree distributions, frame sampling, the CSA graph
//! - [`decoder`] — iterative interference-cancellation (peeling) decoding
//! - [`sim`] — deterministic seeded parallel Monte Carlo and grid sweeps
//! - [`adapt`] — activation estimation, FOV lookup tables, closed loop
//! - [`config`] / [`output`] — TOML run configuration, CSV/JSON emission
//!
//! Every run is reproducible: frame `f` draws from a counter-based stream
//! keyed by `(master seed, f)`, so results are independent of worker
//! count and scheduling.
//!
//! See the crate examples for runnable walkthroughs of each capability,
//! and the `owcsim` binary for the config-driven command line.

pub mod adapt;
pub mod config;
pub mod decoder;
pub mod geometry;
pub mod output;
pub mod protocol;
pub mod sim;

pub use adapt::{
    adaptive_run, estimate_pa_oracle, estimate_pa_power, optimize_fov, AdaptiveFrameRecord,
    EstimatorKind, FovEntry, FovLookupTable, PreambleConfig, PreambleObservation,
};
pub use decoder::{classify_slots, peel_decode, reference_decode, DecodeResult, SlotClass, SlotState};
pub use geometry::{
    concentrator_gain, grid_positions, incidence_angle_deg, lambertian_gain, lambertian_order,
    Coverage, GainMatrix, GeometryError, LambertianParams, Scenario,
};
pub use protocol::{
    measure_degree_distributions, place_replicas, sample_activity, CsaGraph, DegreeDistribution,
    DegreeHistogram, FrameInstance,
};
pub use sim::{run_frame, run_frames, sweep, Metrics, SeedPolicy, SimError, SweepCell, TrialOutcome};
