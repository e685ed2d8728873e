//! Sweep a (p_a, FOV) grid and print the result table as CSV.
//!
//! Cells whose FOV falls in the same coverage band are bitwise identical:
//! decoding only sees the coverage support, and frame randomness is keyed
//! by frame index alone.
//!
//! ```bash
//! cargo run --release --example throughput_sweep
//! ```

use owcsim::config::float_grid;
use owcsim::geometry::Scenario;
use owcsim::output::{write_records, OutputFormat, SweepRecord};
use owcsim::protocol::DegreeDistribution;
use owcsim::sim::sweep;

fn main() {
    let scenario = Scenario::open_hall(3, 40.0);
    let seed = 7;
    let cells = sweep(
        &scenario,
        &[0.05, 0.1, 0.2, 0.4],
        &float_grid(20.0, 86.0, 6.0),
        &DegreeDistribution::single(2),
        5,
        2_000,
        seed,
    )
    .unwrap();

    let records: Vec<SweepRecord> =
        cells.into_iter().map(|cell| SweepRecord { cell, seed }).collect();
    let stdout = std::io::stdout();
    write_records(&mut stdout.lock(), OutputFormat::Csv, &records).unwrap();
}
