//! Couplings, weak Harris certificates and delay-equation coupling experiments.
//!
//! The crate is organised bottom-up:
//!
//! - [`markov`]: finite kernels, probability vectors, invariant measures, exact
//!   optimal transport and Lyapunov fitting.
//! - [`harris`]: d-smallness, contraction and weighted-distance certificates.
//! - [`coupling`]: pair kernels, coupled path simulation and the excursion chain.
//! - [`sdde`]: Euler–Maruyama on segment space, binding and Girsanov couplings.
//! - [`experiment`]: config-driven runner behind the `ergoharris` binary.
//!
//! ```
//! use ergoharris::markov::{make_finite_kernel, total_variation};
//!
//! let k = make_finite_kernel(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
//! let tv = total_variation(&k.row_measure(0), &k.row_measure(1)).unwrap();
//! assert!((tv - 0.7).abs() < 1e-12);
//! ```

pub mod coupling;
pub mod experiment;
pub mod harris;
pub mod markov;
pub mod rng;
pub mod sdde;
pub mod stats;
