//! Example configurations compiled into the binary.

pub const EXAMPLE_1: &str = include_str!("../../configs/example1.json");
pub const EXAMPLE_2: &str = include_str!("../../configs/example2.json");
pub const EXAMPLE_3: &str = include_str!("../../configs/example3.json");

/// γ values of the Example 1 sweep; `0` is the linear observer.
pub const EXAMPLE_1_GAMMAS: [f64; 6] = [0.0, 0.01, 0.1, 1.0, 2.0, 5.0];
/// γ values of the Example 2 sweep.
pub const EXAMPLE_2_GAMMAS: [f64; 6] = [0.0, 0.01, 0.05, 0.1, 0.5, 1.0];
/// `ε` of the perturbed Example 2 runs.
pub const EXAMPLE_2_EPS: f64 = 0.02;

pub fn config(n: u8) -> Option<&'static str> {
    match n {
        1 => Some(EXAMPLE_1),
        2 => Some(EXAMPLE_2),
        3 => Some(EXAMPLE_3),
        _ => None,
    }
}
