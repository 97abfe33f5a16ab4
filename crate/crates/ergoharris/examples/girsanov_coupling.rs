//! The Girsanov coupling with a state-dependent noise coefficient. The second
//! copy must keep the law of a direct solve; the regimes show how each pair ended.
//!
//! Run with `cargo run --release --example girsanov_coupling`.

use ergoharris::rng::derive_seed;
use ergoharris::sdde::{girsanov_coupling_batch, integrate, Regime, SddeSystem, Segment};
use ergoharris::stats::MeanSe;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = SddeSystem::motivating(1.0, 0.5, 1.0)?;
    let eta = Segment::constant(1.0, 0.1, &[0.3])?;
    let eta_tilde = Segment::constant(1.0, 0.1, &[0.0])?;
    let (t_end, dt, m) = (2.0, 0.01, 20_000);

    let batch = girsanov_coupling_batch(&sys, 5.0, 0.1, &eta, &eta_tilde, t_end, dt, m, 21)?;
    for regime in [
        Regime::BoundForever,
        Regime::ShiftExhausted,
        Regime::IndependentResidual,
    ] {
        let c = batch.iter().filter(|s| s.regime == regime).count();
        println!("{regime:?}: {:.4}", c as f64 / m as f64);
    }

    let coupled: Vec<f64> = batch.iter().map(|s| s.x_tilde_end[0]).collect();
    let direct: Vec<f64> = (0..m as u64)
        .map(|i| {
            integrate(&sys, &eta_tilde, t_end, dt, derive_seed(22, i)).map(|p| p.terminal()[0])
        })
        .collect::<Result<_, _>>()?;
    let (a, b) = (MeanSe::of(&coupled), MeanSe::of(&direct));
    println!(
        "coupled X~(T): mean {:.4} +- {:.4}, var {:.4}",
        a.mean, a.se, a.var
    );
    println!(
        "direct  X~(T): mean {:.4} +- {:.4}, var {:.4}",
        b.mean, b.se, b.var
    );
    Ok(())
}
