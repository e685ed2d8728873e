//! Sweep the receiver FOV and watch coverage change in discrete bands.
//!
//! Coverage per AP is a step function of the FOV because device incidence
//! angles are quantized by the grid. In the 50 m hall the first band with
//! nonzero coverage holds exactly the 4 devices nearest each AP; its edges
//! sit at atan(sqrt(2)/3) and atan(sqrt(10)/3).
//!
//! ```bash
//! cargo run --release --example coverage_bands
//! ```

use owcsim::geometry::{Coverage, Scenario};

fn main() {
    let scenario = Scenario::open_hall(3, 45.0);

    println!("closed-form band edges:");
    println!("  4-device band opens : {:.4} deg", (2.0f64.sqrt() / 3.0).atan().to_degrees());
    println!("  4-device band closes: {:.4} deg", (10.0f64.sqrt() / 3.0).atan().to_degrees());
    println!();
    println!("{:>8} {:>14} {:>14} {:>11}", "fov_deg", "devices_per_ap", "total_covered", "uncovered");

    let mut last_total = usize::MAX;
    for fov_step in 1..90 {
        let fov = fov_step as f64;
        let coverage = Coverage::from_scenario(&scenario.with_fov(fov)).unwrap();
        let per_ap: Vec<usize> = (0..coverage.rx_count())
            .map(|j| coverage.rx_devices(j).len())
            .collect();
        let covered = scenario.device_count() - coverage.uncovered().len();
        let total: usize = per_ap.iter().sum();
        if total != last_total {
            println!(
                "{:>8} {:>14} {:>14} {:>11}",
                fov,
                format!("{}..{}", per_ap.iter().min().unwrap(), per_ap.iter().max().unwrap()),
                covered,
                coverage.uncovered().len()
            );
            last_total = total;
        }
    }

    let gain = Coverage::from_scenario(&scenario).unwrap();
    println!();
    println!(
        "sample gains at fov = {} deg: h[0][0] = {:.3e}, h[351][4] = {:.3e}",
        scenario.fov_deg,
        gain.gains().get(0, 0),
        gain.gains().get(351, 4)
    );
}
