//! Measure empirical node degree distributions of sampled frame graphs.
//!
//! Device node degrees mix the replication distribution with the number of
//! APs covering each device; slot node degrees reflect the offered load.
//!
//! ```bash
//! cargo run --release --example degree_census
//! ```

use owcsim::geometry::{Coverage, Scenario};
use owcsim::protocol::{measure_degree_distributions, CsaGraph, DegreeDistribution, FrameInstance};
use owcsim::sim::SeedPolicy;

fn main() {
    let scenario = Scenario::open_hall(3, 70.0);
    let coverage = Coverage::from_scenario(&scenario).unwrap();
    let degrees = DegreeDistribution::optimized_d16();
    let slots = 50;
    let policy = SeedPolicy::new(5);

    // Average the histograms over a few frames.
    let frames = 200u64;
    let mut device_acc = vec![0.0f64; 64];
    let mut slot_acc = vec![0.0f64; 64];
    for f in 0..frames {
        let mut rng = policy.frame_rng(f);
        let frame =
            FrameInstance::sample(coverage.tx_count(), 0.3, &degrees, slots, &mut rng).unwrap();
        let graph = CsaGraph::build(&frame, &coverage);
        let (device, slot) = measure_degree_distributions(&graph);
        for (d, frac) in device.fractions.iter().enumerate() {
            device_acc[d] += frac / frames as f64;
        }
        for (d, frac) in slot.fractions.iter().enumerate() {
            slot_acc[d] += frac / frames as f64;
        }
    }

    println!("mean replication degree: {:.3}", degrees.mean());
    println!();
    println!("{:>7} {:>14} {:>14}", "degree", "device_nodes", "slot_nodes");
    for d in 0..40 {
        if device_acc[d] > 5e-4 || slot_acc[d] > 5e-4 {
            println!("{:>7} {:>14.4} {:>14.4}", d, device_acc[d], slot_acc[d]);
        }
    }
    println!();
    println!("device fractions sum to 1 per frame; degree 0 marks covered");
    println!("devices whose replicas all missed, or uncovered active devices");
}
