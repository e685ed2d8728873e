//! Acceptance suite: every check prints one PASS/FAIL line with its
//! measured values (run with `--nocapture` to see them) and then asserts.
//!
//! Statistical checks run at desk scale (2e4 frames per grid cell unless
//! the check states otherwise) with fixed seeds, so outcomes are exactly
//! reproducible.

use owcsim::adapt::{estimate_pa_oracle, estimate_pa_power, observe_preamble, optimize_fov};
use owcsim::config::float_grid;
use owcsim::decoder::{peel_decode, reference_decode};
use owcsim::geometry::{Coverage, GainMatrix, Scenario};
use owcsim::protocol::{sample_activity, CsaGraph, DegreeDistribution, FrameInstance};
use owcsim::sim::{sweep, SeedPolicy, SweepCell};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::Command;

const FOUR_DEVICE_BAND: std::ops::RangeInclusive<f64> = 25.3..=46.5;

fn report(name: &str, pass: bool, detail: &str) -> bool {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

/// Argmax over the FOV axis for one activation probability, ties toward
/// the larger FOV; returns the winning cell.
fn best_over_fov(cells: &[SweepCell]) -> &SweepCell {
    let mut best = &cells[0];
    for cell in cells {
        if cell.metrics.r_avg > best.metrics.r_avg
            || (cell.metrics.r_avg == best.metrics.r_avg && cell.fov_deg >= best.fov_deg)
        {
            best = cell;
        }
    }
    best
}

#[test]
fn geometry_regime_bands() {
    let scenario = Scenario::open_hall(3, 40.0);
    let lower = (2.0f64.sqrt() / 3.0).atan().to_degrees();
    let upper = (10.0f64.sqrt() / 3.0).atan().to_degrees();
    let per_ap_counts = |fov: f64| -> Vec<usize> {
        let cov = Coverage::from_scenario(&scenario.with_fov(fov)).unwrap();
        (0..cov.rx_count()).map(|j| cov.rx_devices(j).len()).collect()
    };

    let mut all_four = true;
    for fov in 26..=46 {
        all_four &= per_ap_counts(fov as f64).iter().all(|&c| c == 4);
    }
    let below = per_ap_counts(25.0).iter().all(|&c| c < 4);
    let above = per_ap_counts(47.0).iter().all(|&c| c > 4);
    let edges_bracketed = (25.0..26.0).contains(&lower) && (46.0..47.0).contains(&upper);

    let pass = all_four && below && above && edges_bracketed;
    assert!(report(
        "geometry_regime_bands",
        pass,
        &format!(
            "4 devices/AP over [26, 46] deg = {all_four}, <4 at 25 = {below}, >4 at 47 = {above}, \
             closed-form edges {lower:.4}/{upper:.4} deg"
        ),
    ));
}

#[test]
fn slotted_aloha_analytic_oracle() {
    let scenario = Scenario::open_hall(1, 86.0);
    let n = scenario.device_count() as f64;
    let frames = 20_000u64;
    let degrees = DegreeDistribution::single(1);

    let mut pass = true;
    let mut details = Vec::new();
    for pa in [0.001, 0.002, 0.005] {
        let metrics =
            owcsim::sim::run_frames(&scenario, pa, 86.0, &degrees, 1, frames, 4242).unwrap();
        let mc = metrics.decoded_total as f64 / metrics.frames as f64;
        let analytic = n * pa * (1.0 - pa).powi(675);
        let se = (analytic * (1.0 - analytic) / frames as f64).sqrt();
        let z = (mc - analytic) / se;
        pass &= z.abs() <= 3.0;
        details.push(format!("pa={pa}: mc={mc:.5} vs {analytic:.5} (z={z:+.2})"));
    }
    assert!(report("slotted_aloha_analytic_oracle", pass, &details.join(", ")));
}

/// Random small-world instance for the decoder cross-checks.
fn random_instance(seed: u64) -> CsaGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1 + (seed % 10) as usize;
    let m = 1 + (seed % 2) as usize;
    let l = 1 + (seed % 4) as usize;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| if rng.random::<f64>() < 0.6 { 1e-6 } else { 0.0 })
                .collect()
        })
        .collect();
    let coverage = Coverage::from_gains(GainMatrix::from_rows(&rows));
    let degrees = DegreeDistribution::from_weights(
        &[(1usize, 0.4), (1 + (seed as usize % l), 0.6)].into_iter().collect(),
    )
    .unwrap();
    let frame = FrameInstance::sample(n, 0.6, &degrees, l, &mut rng).unwrap();
    CsaGraph::build(&frame, &coverage)
}

/// Independent oracle: asynchronous peeling in random singleton order.
fn async_random_order_decode(graph: &CsaGraph, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut decoded = vec![false; graph.device_count()];
    loop {
        let singles: Vec<u32> = (0..graph.slot_count())
            .filter_map(|s| {
                let residual: Vec<u32> = graph
                    .slot_devices(s)
                    .iter()
                    .copied()
                    .filter(|&u| !decoded[u as usize])
                    .collect();
                (residual.len() == 1).then(|| residual[0])
            })
            .collect();
        if singles.is_empty() {
            break;
        }
        let pick = singles[rng.random_range(0..singles.len())];
        decoded[pick as usize] = true;
    }
    let mut ids: Vec<u32> = decoded
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d)
        .map(|(u, _)| graph.device_id(u))
        .collect();
    ids.sort_unstable();
    ids
}

#[test]
fn decoder_fixed_point_equivalence() {
    let mut mismatches = 0usize;
    for seed in 0..10_000u64 {
        let graph = random_instance(seed);
        if peel_decode(&graph) != reference_decode(&graph) {
            mismatches += 1;
        }
    }
    let mut order_mismatches = 0usize;
    for seed in 0..1_000u64 {
        let graph = random_instance(seed.wrapping_mul(31).wrapping_add(5));
        let sync = peel_decode(&graph).decoded;
        if sync != async_random_order_decode(&graph, seed ^ 0xfeed) {
            order_mismatches += 1;
        }
    }
    let pass = mismatches == 0 && order_mismatches == 0;
    assert!(report(
        "decoder_fixed_point_equivalence",
        pass,
        &format!(
            "0 of 10000 reference mismatches required (got {mismatches}), \
             0 of 1000 order mismatches required (got {order_mismatches})"
        ),
    ));
}

#[test]
fn spatial_throughput_plateau() {
    let scenario = Scenario::open_hall(3, 40.0);
    let pa_grid = [0.2, 0.4, 0.8];
    let fov_grid = float_grid(15.0, 89.0, 1.0);
    let cells = sweep(
        &scenario,
        &pa_grid,
        &fov_grid,
        &DegreeDistribution::single(1),
        1,
        20_000,
        1001,
    )
    .unwrap();

    let best: Vec<&SweepCell> = pa_grid
        .iter()
        .enumerate()
        .map(|(p, _)| best_over_fov(&cells[p * fov_grid.len()..(p + 1) * fov_grid.len()]))
        .collect();

    let in_band = best.iter().all(|cell| FOUR_DEVICE_BAND.contains(&cell.fov_deg));
    let mut plateau = true;
    for i in 0..best.len() {
        for j in i + 1..best.len() {
            let (a, b) = (&best[i].metrics, &best[j].metrics);
            let combined = (a.r_avg_se.powi(2) + b.r_avg_se.powi(2)).sqrt();
            plateau &= (a.r_avg - b.r_avg).abs() <= 3.0 * combined;
        }
    }
    let detail = best
        .iter()
        .zip(pa_grid)
        .map(|(cell, pa)| {
            format!(
                "pa={pa}: max r_avg={:.4}+/-{:.4} at {} deg",
                cell.metrics.r_avg, cell.metrics.r_avg_se, cell.fov_deg
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    let pass = in_band && plateau;
    assert!(report(
        "spatial_throughput_plateau",
        pass,
        &format!("{detail}; optima in 4-device band = {in_band}, pairwise within 3 se = {plateau}"),
    ));
}

#[test]
fn spatial_diversity_low_load() {
    let fov_grid = float_grid(15.0, 89.0, 1.0);
    let degrees = DegreeDistribution::single(1);
    let run = |rx: usize| {
        let scenario = Scenario::open_hall(rx, 60.0);
        let cells = sweep(&scenario, &[0.02], &fov_grid, &degrees, 1, 100_000, 77).unwrap();
        *best_over_fov(&cells)
    };
    let single = run(1);
    let multi = run(3);
    let combined =
        (single.metrics.r_avg_se.powi(2) + multi.metrics.r_avg_se.powi(2)).sqrt();
    let pass = multi.metrics.r_avg >= single.metrics.r_avg - 2.0 * combined;
    assert!(report(
        "spatial_diversity_low_load",
        pass,
        &format!(
            "pa=0.02: max r_avg 3x3 = {:.5} (fov {}) vs 1x1 = {:.5} (fov {}), 2 combined se = {:.5}",
            multi.metrics.r_avg,
            multi.fov_deg,
            single.metrics.r_avg,
            single.fov_deg,
            2.0 * combined
        ),
    ));
}

fn four_device_onset(slots: usize, pa_grid: &[f64]) -> Option<f64> {
    let scenario = Scenario::open_hall(3, 40.0);
    let table = optimize_fov(
        &scenario,
        pa_grid,
        &float_grid(16.0, 88.0, 2.0),
        &DegreeDistribution::single(2),
        slots,
        20_000,
        2719,
    )
    .unwrap();
    table
        .entries()
        .iter()
        .find(|e| FOUR_DEVICE_BAND.contains(&e.fov_opt_deg))
        .map(|e| e.activation_probability)
}

#[test]
fn four_device_onset_two_replica_l5() {
    let onset = four_device_onset(5, &float_grid(0.36, 0.52, 0.02));
    let pass = onset.is_some_and(|pa| (pa - 0.44).abs() <= 0.06 + 1e-9);
    assert!(report(
        "four_device_onset_two_replica_l5",
        pass,
        &format!("first pa with optimum in the 4-device band = {onset:?}, target 0.44 +/- 0.06"),
    ));
}

#[test]
fn four_device_onset_two_replica_l10() {
    let onset = four_device_onset(10, &float_grid(0.81, 0.97, 0.02));
    let pass = onset.is_some_and(|pa| (pa - 0.89).abs() <= 0.06 + 1e-9);
    assert!(report(
        "four_device_onset_two_replica_l10",
        pass,
        &format!("first pa with optimum in the 4-device band = {onset:?}, target 0.89 +/- 0.06"),
    ));
}

#[test]
fn long_frame_near_full_recovery() {
    let scenario = Scenario::open_hall(3, 76.0);
    let pa_grid = [0.2, 0.4, 0.6, 0.8];
    let fov_grid = float_grid(16.0, 88.0, 2.0);
    let cells = sweep(
        &scenario,
        &pa_grid,
        &fov_grid,
        &DegreeDistribution::optimized_d16(),
        100,
        5_000,
        909,
    )
    .unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for (p, pa) in pa_grid.iter().enumerate() {
        let best = best_over_fov(&cells[p * fov_grid.len()..(p + 1) * fov_grid.len()]);
        pass &= best.metrics.p_rec >= 0.95;
        details.push(format!(
            "pa={pa}: p_rec={:.4} at {} deg",
            best.metrics.p_rec, best.fov_deg
        ));
    }
    assert!(report(
        "long_frame_near_full_recovery",
        pass,
        &format!("{} (threshold 0.95)", details.join(", ")),
    ));
}

#[test]
fn two_replica_high_load_ordering() {
    let scenario = Scenario::open_hall(3, 76.0);
    let fov_grid = float_grid(16.0, 88.0, 2.0);
    let run = |degrees: &DegreeDistribution| {
        let cells = sweep(&scenario, &[0.98], &fov_grid, degrees, 100, 20_000, 313).unwrap();
        *best_over_fov(&cells)
    };
    let crdsa = run(&DegreeDistribution::single(2));
    let d16 = run(&DegreeDistribution::optimized_d16());
    let combined = (crdsa.metrics.r_avg_se.powi(2) + d16.metrics.r_avg_se.powi(2)).sqrt();
    let pass = crdsa.metrics.r_avg >= d16.metrics.r_avg - 2.0 * combined;
    assert!(report(
        "two_replica_high_load_ordering",
        pass,
        &format!(
            "pa=0.98: r_avg two-replica = {:.4} vs 16-degree = {:.4}, 2 combined se = {:.4}",
            crdsa.metrics.r_avg,
            d16.metrics.r_avg,
            2.0 * combined
        ),
    ));
}

#[test]
fn thread_count_invariance() {
    let exe = env!("CARGO_BIN_EXE_owcsim");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/spatial.toml");
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, out: &std::path::Path| {
        let status = Command::new(exe)
            .args(["sweep", "--config", config, "--frames", "300", "--seed", "99"])
            .args(["--threads", threads, "--out"])
            .arg(out)
            .env_remove("OWCSIM_SEED")
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let one = run("1", &dir.path().join("one.csv"));
    let two = run("2", &dir.path().join("two.csv"));
    let four = run("4", &dir.path().join("four.csv"));
    let pass = one == two && two == four && !one.is_empty();
    assert!(report(
        "thread_count_invariance",
        pass,
        &format!(
            "sweep CSV bytes identical across --threads 1/2/4 = {pass} ({} bytes)",
            one.len()
        ),
    ));
}

#[test]
fn activation_estimator_accuracy() {
    let coverage = Coverage::from_scenario(&Scenario::open_hall(3, 60.0)).unwrap();
    let policy = SeedPolicy::new(606);
    let mut pass = true;
    let mut details = Vec::new();

    for pa in [0.1, 0.3, 0.7] {
        let trials = 10_000u64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for f in 0..trials {
            let mut rng = policy.frame_rng(f);
            let active = sample_activity(coverage.tx_count(), pa, &mut rng);
            let mut noise_rng = policy.noise_rng(f);
            let obs = observe_preamble(&active, &coverage, 1.0, 0.0, &mut noise_rng);
            let est = estimate_pa_power(&obs, coverage.gains(), 1.0).unwrap();
            sum += est;
            sum_sq += est * est;
        }
        let mean = sum / trials as f64;
        let var = (sum_sq - trials as f64 * mean * mean) / (trials as f64 - 1.0);
        let se = (var / trials as f64).sqrt();
        let z = (mean - pa) / se;
        pass &= z.abs() <= 3.0;
        details.push(format!("pa={pa}: mean={mean:.5} (z={z:+.2})"));
    }

    // Exact at the extremes, and the oracle is exact everywhere.
    let mut noise_rng = policy.noise_rng(0);
    let none = observe_preamble(&[], &coverage, 1.0, 0.0, &mut noise_rng);
    let all: Vec<u32> = (0..coverage.tx_count() as u32).collect();
    let every = observe_preamble(&all, &coverage, 1.0, 0.0, &mut noise_rng);
    let at_zero = estimate_pa_power(&none, coverage.gains(), 1.0).unwrap();
    let at_one = estimate_pa_power(&every, coverage.gains(), 1.0).unwrap();
    pass &= at_zero == 0.0 && (at_one - 1.0).abs() < 1e-12;
    pass &= estimate_pa_oracle(169, 676) == 0.25;

    assert!(report(
        "activation_estimator_accuracy",
        pass,
        &format!("{}; extremes: est(0)={at_zero}, est(1)={at_one:.12}", details.join(", ")),
    ));
}
