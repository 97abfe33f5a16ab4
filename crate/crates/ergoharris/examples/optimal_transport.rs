//! Exact transport between two measures on a line, and the distance-like lift.
//!
//! Run with `cargo run --example optimal_transport`.

use ergoharris::markov::transport::solve_transport;
use ergoharris::markov::{
    lift_distance, total_variation, wasserstein1, DistanceLike, Measure, Metric,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 8;
    let mu = Measure::new(vec![0.3, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.0])?;
    let nu = Measure::new(vec![0.0, 0.05, 0.05, 0.1, 0.1, 0.2, 0.2, 0.3])?;

    let t = solve_transport(mu.weights(), nu.weights(), |i, j| {
        (i as f64 - j as f64).abs()
    })?;
    println!(
        "W1 on the line: primal {:.12}, dual {:.12}, {} pivots",
        t.value, t.dual_value, t.pivots
    );
    println!(
        "via wasserstein1: {:.12}",
        wasserstein1(&Metric::line(n), &mu, &nu)?
    );

    // the discrete metric recovers total variation
    let (tv_lift, _) = lift_distance(&DistanceLike::trivial(n), &mu, &nu)?;
    println!(
        "lifted trivial distance {:.12}, total variation {:.12}",
        tv_lift,
        total_variation(&mu, &nu)?
    );

    let d = DistanceLike::truncated_line(n, 3.0)?;
    let (w, plan) = lift_distance(&d, &mu, &nu)?;
    println!("truncated line distance lifted: {w:.6}");
    for (x, y, p) in plan.support().into_iter().filter(|e| e.2 > 1e-12) {
        println!("  {x} -> {y}: {p:.3}");
    }
    Ok(())
}
