//! Ergodic classes of a reducible kernel and the classical Harris rate of an
//! irreducible one.
//!
//! Run with `cargo run --example invariant_measures`.

use ergoharris::harris::classical_harris_rate;
use ergoharris::markov::{invariant_measures, make_finite_kernel, FiniteKernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]])?;
    for class in invariant_measures(&k) {
        println!("class {:?}: {:?}", class.states, class.measure.weights());
    }
    let rate = classical_harris_rate(&k, &[0.0, 0.0], 200)?;
    println!(
        "gamma = {:.9} (-ln 0.7 = {:.9}), C = {:.4}",
        rate.gamma,
        -(0.7f64).ln(),
        rate.c_tilde
    );

    // two closed blocks give two invariant measures
    let walk = FiniteKernel::reflected_walk(4, 0.6)?;
    let blocks = FiniteKernel::block_diagonal(&[k, walk]);
    for class in invariant_measures(&blocks) {
        let w: Vec<String> = class
            .measure
            .weights()
            .iter()
            .map(|p| format!("{p:.4}"))
            .collect();
        println!("class {:?}: [{}]", class.states, w.join(", "));
    }
    Ok(())
}
