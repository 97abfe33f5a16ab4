//! The binding coupling for a linear delay equation, its Girsanov shift and
//! the stopping time where the shift budget runs out.
//!
//! Run with `cargo run --release --example sdde_binding`.

use ergoharris::sdde::{
    girsanov_shift, integrate_pair_binding, shift_stopping_time, SddeSystem, Segment,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = SddeSystem::linear(1.0, 0.5);
    let (lambda, dt) = (9.0, 1e-4);
    let x0 = Segment::constant(0.0, dt, &[1.0])?;
    let y0 = Segment::constant(0.0, dt, &[0.0])?;
    let (x, y) = integrate_pair_binding(&sys, lambda, &x0, &y0, 2.0, dt, 5)?;

    for t in [0.0, 0.25, 0.5, 1.0] {
        let n = (t / dt).round() as usize;
        let z = x.point(n)[0] - y.point(n)[0];
        println!(
            "t = {t:.2}: Z = {z:.6e}, e^(-10t) = {:.6e}",
            (-10.0 * t).exp()
        );
    }

    let shift = girsanov_shift(&sys, lambda, &x, &y)?;
    println!("int |v|^2 dt = {:.4} (closed form 16.2)", shift.total());
    for eps in [0.1, 0.05, 0.02] {
        let tau = shift_stopping_time(&shift.cumulative, dt, eps, 1.0)?;
        if tau.is_sentinel() {
            println!("eps = {eps}: budget never exhausted");
        } else {
            println!("eps = {eps}: tau = {:.5}", tau.time);
        }
    }
    Ok(())
}
