//! Certify the weighted-distance contraction for a reflected random walk.
//!
//! Run with `cargo run --release --example weak_harris`.

use ergoharris::harris::{weak_harris_certify, HarrisError};
use ergoharris::markov::{lyapunov_check, DistanceLike, FiniteKernel};

fn main() -> Result<(), HarrisError> {
    let n = 100;
    let k = FiniteKernel::reflected_walk(n, 0.7)?;
    let d = DistanceLike::truncated_line(n, 5.0)?;
    let v: Vec<f64> = (0..n).map(|x| x as f64).collect();

    let cert = lyapunov_check(&k, &v, 400)?;
    println!(
        "Lyapunov: C_V = {}, gamma = {:.6}, K_V = {:.6}",
        cert.c_v, cert.gamma, cert.k_v
    );

    let t_star = 250;
    let start = std::time::Instant::now();
    let report = weak_harris_certify(&k, &d, &v, &cert, t_star)?;
    println!(
        "t* = {t_star}: epsilon = {:.6}, alpha = {:.3e}",
        report.epsilon, report.alpha
    );
    println!(
        "beta = {:.6}, factor = {:.6} (close {:.4}, far {:.4}, origin {:.4})",
        report.beta,
        report.factor,
        report.regime_factors.alpha1,
        report.regime_factors.alpha2,
        report.regime_factors.alpha_origin
    );
    println!(
        "largest observed ratio {:.3e} at {:?}; verified over all pairs in {:.1?}",
        report.max_ratio,
        report.worst_pair,
        start.elapsed()
    );
    Ok(())
}
