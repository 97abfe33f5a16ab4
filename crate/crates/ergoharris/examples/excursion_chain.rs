//! Excursions away from a rate envelope and the resulting tail bound.
//!
//! Run with `cargo run --release --example excursion_chain`.

use ergoharris::coupling::{
    build_contracting_coupling_kernel, excursion_alpha, excursion_traces, rate_bound_check,
    RateFunction,
};
use ergoharris::markov::{make_finite_kernel, DistanceLike};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]])?;
    let d = DistanceLike::new(&[vec![0.0, 0.5], vec![0.5, 0.0]])?;
    let ck = build_contracting_coupling_kernel(&k, &d, 0.8)?;
    let rho = RateFunction::parse("0.9*0.8^n")?;
    let b = [(0, 0), (0, 1), (1, 0), (1, 1)];

    let alpha = excursion_alpha(&ck, &d, &b, &rho, 1000)?;
    println!("alpha = {alpha:.6} for rho(n) = {}", rho.label());

    let traces = excursion_traces(&ck, &d, &b, &rho, (0, 1), 1000, 2000, 5000, 7)?;
    let mut counts = [0usize; 6];
    for t in &traces {
        counts[t.n_star.unwrap_or(5).min(5)] += 1;
    }
    for (j, c) in counts.iter().enumerate() {
        let exact = alpha * (1.0 - alpha).powi(j as i32);
        println!(
            "n* = {j}{}: {:.4} (geometric {:.4})",
            if j == 5 { "+" } else { "" },
            *c as f64 / 5000.0,
            exact
        );
    }

    let grid = [1, 2, 5, 10, 20, 50];
    let report = rate_bound_check(&traces, &rho, &k, &d, (0, 1), &grid)?;
    println!("   n   d(P^n)   bound");
    for r in &report.rows {
        println!("{:>4}  {:.2e}  {:.2e}", r.n, r.lhs, r.bound);
    }
    println!("mean 1/rho(t*) = {:.3}", report.phi_hat);
    Ok(())
}
