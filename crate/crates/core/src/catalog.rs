//! Small hand-specified models used by the tests, examples and CLI demos.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::PlrnnModel;

/// Two-unit network that integrates a gated input stream:
/// `A = diag(1, 0.01)`, `W = [[0, 1], [0, 0]]`, `h = (0, -0.995)`, `dt = 1`.
pub fn addition_problem() -> PlrnnModel {
    PlrnnModel::new(
        DVector::from_vec(vec![1.0, 0.01]),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, -0.995]),
        1.0,
        None,
    )
    .expect("valid model")
}

/// The same network with both input streams (value, indicator) added to `z2`.
pub fn addition_problem_with_inputs() -> PlrnnModel {
    let m = addition_problem();
    PlrnnModel::new(
        m.a_diag().clone(),
        m.w().clone(),
        m.h().clone(),
        m.dt(),
        Some(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0])),
    )
    .expect("valid model")
}

pub const ADDITION_STEPS: usize = 500;
pub const ADDITION_WINDOWS: [usize; 2] = [100, 400];
pub const ADDITION_WINDOW_LEN: usize = 6;

/// `2 x ADDITION_STEPS` inputs: row 0 uniform on `[0, 1]`, row 1 an
/// indicator that is 1 on two 6-step windows.
pub fn addition_inputs(seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(2, ADDITION_STEPS, |i, t| {
        if i == 0 {
            rng.gen_range(0.0..1.0)
        } else {
            let on = ADDITION_WINDOWS.iter().any(|&w| t >= w && t < w + ADDITION_WINDOW_LEN);
            f64::from(u8::from(on))
        }
    })
}

/// Sum of the value stream over the steps where the indicator is on.
pub fn gated_sum(inputs: &DMatrix<f64>) -> f64 {
    (0..inputs.ncols())
        .filter(|&t| inputs[(1, t)] != 0.0)
        .map(|t| inputs[(0, t)])
        .sum()
}

/// Planar network with an attracting period-14 cycle that visits all four
/// regions. The fully gated region is a stable rotation (`|lambda| ~ 0.95`),
/// the region gating only `z2` is expanding.
pub fn planar_cycle() -> PlrnnModel {
    PlrnnModel::new(
        DVector::from_vec(vec![1.219_094_29, 0.361_607_84]),
        DMatrix::from_row_slice(2, 2, &[-0.953_288_95, 1.422_214_92, -0.417_398_2, 0.811_231_33]),
        DVector::from_vec(vec![-0.909_294_17, 0.271_814_73]),
        1.0,
        None,
    )
    .expect("valid model")
}

pub const PLANAR_CYCLE_PERIOD: usize = 14;

/// A state in the basin of the planar cycle.
pub fn planar_cycle_start() -> DVector<f64> {
    DVector::from_vec(vec![0.3, -0.2])
}
