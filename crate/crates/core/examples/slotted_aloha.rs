//! Classical slotted ALOHA as a degenerate case, checked against its
//! closed form.
//!
//! With one AP, one slot per frame and one replica per active device, the
//! expected decoded count per frame is N p (1-p)^(N-1). The Monte Carlo
//! estimate should sit within a few standard errors of it.
//!
//! ```bash
//! cargo run --release --example slotted_aloha
//! ```

use owcsim::geometry::Scenario;
use owcsim::protocol::DegreeDistribution;
use owcsim::sim::run_frames;

fn main() {
    // Single centered AP with the whole hall in view.
    let scenario = Scenario::open_hall(1, 86.0);
    let n = scenario.device_count() as f64;
    let frames = 20_000;

    println!(
        "{:>8} {:>12} {:>12} {:>10} {:>8}",
        "pa", "mc_decoded", "analytic", "z_score", "p_rec"
    );
    for pa in [0.0005, 0.001, 0.002, 0.005, 0.01] {
        let metrics = run_frames(
            &scenario,
            pa,
            scenario.fov_deg,
            &DegreeDistribution::single(1),
            1,
            frames,
            42,
        )
        .unwrap();
        let mc = metrics.decoded_total as f64 / metrics.frames as f64;
        let analytic = n * pa * (1.0 - pa).powi(675);
        let se = (analytic * (1.0 - analytic) / frames as f64).sqrt();
        println!(
            "{:>8} {:>12.5} {:>12.5} {:>10.2} {:>8.4}",
            pa,
            mc,
            analytic,
            (mc - analytic) / se,
            metrics.p_rec
        );
    }
}
