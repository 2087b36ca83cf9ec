//! Shared fixtures and reporting for the acceptance run.

use lgeo::{Builtin, SimplexPoint};
use rand::Rng;

/// The four regular built-in families on n assets, with random parameters.
pub fn generators<R: Rng>(rng: &mut R, n: usize) -> Vec<Builtin> {
    let cw = Builtin::constant_weighted(&point(rng, n, 1.0));
    let dw = Builtin::diversity(rng.random_range(0.2..0.8)).unwrap();
    let weights = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let gdw = Builtin::generalized_diversity(weights, rng.random_range(0.2..0.8)).unwrap();
    let mix = Builtin::combination(vec![
        (0.5, Builtin::diversity(rng.random_range(0.2..0.8)).unwrap()),
        (0.5, Builtin::constant_weighted(&point(rng, n, 1.0))),
    ])
    .unwrap();
    vec![cw, dw, gdw, mix]
}

/// Interior point with log-weights uniform in [−spread, spread].
pub fn point<R: Rng>(rng: &mut R, n: usize, spread: f64) -> SimplexPoint {
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-spread..spread).exp()).collect();
    SimplexPoint::from_positive(&x).unwrap()
}

pub fn family_name(g: &Builtin) -> &'static str {
    match g {
        Builtin::Market => "market",
        Builtin::Constant { .. } => "constant",
        Builtin::Diversity { .. } => "diversity",
        Builtin::GeneralizedDiversity { .. } => "generalized",
        Builtin::Combination { .. } => "combination",
    }
}

/// Prints the one-line verdict and panics when `ok` is false.
pub fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    println!("criterion {id:>2} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed");
}
