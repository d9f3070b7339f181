//! Append columns to a matrix and update its pseudoinverse without a new
//! SVD, checking the result against a direct one.
//!
//!     cargo run --example pinv_update

use broadlearn::linalg::{self, pinv, relative_diff, Matrix, PinvState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn main() -> broadlearn::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random(&mut rng, 60, 20);
    let state = PinvState::new(a.clone())?;

    let fresh = random(&mut rng, 60, 6);
    // columns already inside span(A)
    let inside = &a * &random(&mut rng, 20, 4);
    // two fresh directions and two copies of old columns
    let mut mixed = random(&mut rng, 60, 4);
    for i in 0..60 {
        mixed[(i, 2)] = a[(i, 0)];
        mixed[(i, 3)] = a[(i, 5)] - a[(i, 7)];
    }

    for (name, cols) in [("independent", fresh), ("inside span", inside), ("mixed", mixed)] {
        let (next, factors) = linalg::append_columns(&state, &cols)?;
        let oracle = pinv(&next.a)?;
        let mp = next.moore_penrose_residuals();
        println!(
            "{name:>12}: {:?} branch, error vs SVD {:.2e}, worst Moore-Penrose residual {:.2e}",
            factors.branch,
            relative_diff(&next.a_pinv, &oracle),
            mp.iter().cloned().fold(0.0, f64::max)
        );
    }
    Ok(())
}
