//! Independent moves until both copies reach a set `U`, then the pair kernel.
//!
//! Run with `cargo run --release --example hit_then_bind`.

use ergoharris::coupling::{
    build_contracting_coupling_kernel, hit_then_bind_alpha, hit_then_bind_samples,
};
use ergoharris::markov::{DistanceLike, FiniteKernel, Measure};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 20;
    let k = FiniteKernel::reflected_walk(n, 0.6)?;
    let d = DistanceLike::trivial(n);
    let ck = build_contracting_coupling_kernel(&k, &d, 0.5)?;
    let b: Vec<usize> = (0..n).collect();
    let u = [0, 1, 2];
    let t_u = 30;

    let alpha = hit_then_bind_alpha(&k, &b, &u, t_u);
    println!("alpha = inf_B P^{t_u}(y, U) = {alpha:.4}");

    let mu = Measure::dirac(n, n - 1);
    let runs = hit_then_bind_samples(&k, &ck, &d, &b, &u, n / 2, &mu, t_u, 600, 2000, 11)?;
    let hit = runs.iter().filter(|r| r.tau.is_some()).count();
    let tau_mean = runs.iter().filter_map(|r| r.tau).sum::<usize>() as f64 / hit.max(1) as f64;
    println!("reached U in {hit}/2000 runs, mean tau {tau_mean:.1}");
    for j in 0..4 {
        let frac = runs.iter().filter(|r| r.failed_trials >= j).count() as f64 / 2000.0;
        println!("P(failed trials >= {j}) = {frac:.4}");
    }
    Ok(())
}
