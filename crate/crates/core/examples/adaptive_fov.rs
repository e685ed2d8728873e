//! Close the loop: estimate the activation probability from the frame
//! preamble and retune the FOV on the fly.
//!
//! The trajectory steps from light to heavy load halfway through. The
//! oracle estimator reads the true active count; the power estimator only
//! sees total received preamble power, yet tracks the same FOV schedule
//! almost perfectly in the noiseless model.
//!
//! ```bash
//! cargo run --release --example adaptive_fov
//! ```

use owcsim::adapt::{adaptive_run, optimize_fov, AdaptiveFrameRecord, EstimatorKind, PreambleConfig};
use owcsim::config::float_grid;
use owcsim::geometry::Scenario;
use owcsim::protocol::DegreeDistribution;

fn main() {
    let scenario = Scenario::open_hall(3, 60.0);
    let degrees = DegreeDistribution::single(2);
    let slots = 5;

    let lookup = optimize_fov(
        &scenario,
        &[0.05, 0.2, 0.5, 0.8],
        &float_grid(20.0, 86.0, 6.0),
        &degrees,
        slots,
        2_000,
        11,
    )
    .unwrap();
    println!("lookup table:");
    for e in lookup.entries() {
        println!("  pa {:>4.2} -> fov {:>4.1} deg", e.activation_probability, e.fov_opt_deg);
    }

    let mut trajectory = vec![0.05; 2_000];
    trajectory.extend(vec![0.5; 2_000]);

    let run = |estimator: EstimatorKind| {
        adaptive_run(
            &scenario,
            &trajectory,
            &lookup,
            estimator,
            &degrees,
            slots,
            31,
            &PreambleConfig::default(),
        )
        .unwrap()
    };
    let oracle = run(EstimatorKind::Oracle);
    let power = run(EstimatorKind::Power);

    let mean_decoded = |records: &[AdaptiveFrameRecord]| {
        records.iter().map(|r| r.decoded as f64).sum::<f64>() / records.len() as f64
    };
    let switches = |records: &[AdaptiveFrameRecord]| {
        records.windows(2).filter(|w| w[0].fov_deg != w[1].fov_deg).count()
    };

    println!();
    println!(
        "oracle estimator: mean decoded/frame = {:.3}, fov switches = {}",
        mean_decoded(&oracle),
        switches(&oracle)
    );
    println!(
        "power  estimator: mean decoded/frame = {:.3}, fov switches = {}",
        mean_decoded(&power),
        switches(&power)
    );
    println!(
        "frame 2000 crossing: fov {} -> {} (oracle)",
        oracle[1999].fov_deg, oracle[2000].fov_deg
    );
}
