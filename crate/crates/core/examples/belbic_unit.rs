//! Drives a single emotional-learning unit with a fixed sensory input and a
//! constant reward, printing how the two weight sets settle.

use belbic_grid::belbic::{self, BelbicState, LearningRates};

fn main() {
    let rates = LearningRates::new(0.2, 0.1, false).unwrap();
    let mut state = BelbicState::zeros(2).unwrap();
    let si = [1.0, 0.5];
    let es = 0.8;
    for k in 0..=40 {
        let (mo, next) = belbic::step(&state, &si, es, &rates).unwrap();
        if k % 5 == 0 {
            println!(
                "step {k:2}  MO {mo:+.4}  V {:?}  W {:?}",
                fmt(&state.v),
                fmt(&state.w)
            );
        }
        state = next;
    }
}

fn fmt(x: &[f64]) -> Vec<String> {
    x.iter().map(|v| format!("{v:+.4}")).collect()
}
