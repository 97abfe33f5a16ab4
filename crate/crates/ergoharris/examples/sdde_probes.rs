//! Monte Carlo probes: stochastic convolution decay, the support lower bound
//! and the a-priori separation exponent.
//!
//! Run with `cargo run --release --example sdde_probes`.

use ergoharris::sdde::{
    apriori_separation_test, stochastic_convolution_test, support_probe, SddeSystem, Segment,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let conv =
        stochastic_convolution_test(&[1.0, 4.0, 16.0, 64.0], &|_| 1.0, 4.0, 1.0, 1e-3, 5000, 31)?;
    for row in &conv.rows {
        println!(
            "lambda {:>4}: E sup |Y|^4 / sup |h|^4 = {:.4} +- {:.4}",
            row.lambda, row.ratio, row.se
        );
    }
    println!("decreasing: {}", conv.decreasing);

    let sys = SddeSystem::linear(1.0, 1.0);
    let eta = Segment::constant(1.0, 0.1, &[5.0])?;
    let s = support_probe(&sys, &eta, 2.0, 0.5, 0.01, 50_000, 32)?;
    println!(
        "support: {} of {} paths in the ball, 99% lower bound {:.2e}",
        s.hits, s.samples, s.lower
    );

    let cubic = SddeSystem::cubic(1.0, 0.5)?;
    let seg = |v: f64| Segment::constant(1.0, 0.1, &[v]);
    let pairs = [(seg(1.0)?, seg(0.0)?), (seg(-1.0)?, seg(0.5)?)];
    let a = apriori_separation_test(&cubic, &pairs, 2.0, 1e-3, 10, 300, 33)?;
    println!(
        "kappa = {:.4} (dt), {:.4} (dt/2), stable {}",
        a.kappa, a.kappa_halved, a.stable
    );
    Ok(())
}
