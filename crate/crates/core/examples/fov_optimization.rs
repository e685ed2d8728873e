//! Tabulate the throughput-maximizing FOV as the activation probability
//! grows.
//!
//! At low load a wide FOV wins: coverage is everything and collisions are
//! rare. As load grows, the optimum shrinks until each AP sees only its
//! four nearest devices and the APs decouple into independent cells.
//!
//! ```bash
//! cargo run --release --example fov_optimization
//! ```

use owcsim::adapt::optimize_fov;
use owcsim::config::float_grid;
use owcsim::geometry::Scenario;
use owcsim::protocol::DegreeDistribution;

fn main() {
    let scenario = Scenario::open_hall(3, 40.0);
    let table = optimize_fov(
        &scenario,
        &float_grid(0.05, 0.95, 0.1),
        &float_grid(16.0, 88.0, 2.0),
        &DegreeDistribution::single(2),
        5,
        4_000,
        99,
    )
    .unwrap();

    let band = (2.0f64.sqrt() / 3.0).atan().to_degrees()
        ..=(10.0f64.sqrt() / 3.0).atan().to_degrees();
    println!(
        "{:>6} {:>9} {:>10} {:>10} {:>14}",
        "pa", "fov_opt", "r_avg_max", "p_rec", "4-device band"
    );
    for e in table.entries() {
        println!(
            "{:>6.2} {:>9.1} {:>10.4} {:>10.4} {:>14}",
            e.activation_probability,
            e.fov_opt_deg,
            e.r_avg_max,
            e.p_rec_at_opt,
            if band.contains(&e.fov_opt_deg) { "inside" } else { "-" }
        );
    }
}
