//! Grow a trained model by appending nodes and compare the cost and result
//! with retraining from scratch.
//!
//!     cargo run --release --example incremental_growth

use std::time::Instant;

use broadlearn::bls::{self, BlsModel, GrowthStep, HyperParams};
use broadlearn::linalg::relative_diff;
use broadlearn::synth;

fn main() -> broadlearn::error::Result<()> {
    let data = synth::blobs(700, 3, 16, 3.0, 1)?;
    let (x, y) = (&data.x, &data.one_hot());
    let hyper = HyperParams {
        lambda: 0.0,
        ..HyperParams::with_nodes(10, 10, 900)
    };

    let mut model = BlsModel::train(x, y, &hyper, true)?;
    println!("start: {} columns, SSE {:.4}", model.width(), model.training_sse(y).unwrap());

    let step = GrowthStep::new(0, 500);
    let t = Instant::now();
    let branch = model.grow(step, x, y)?;
    let grow_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let batch = BlsModel::train_with_schedule(x, y, &hyper, &[step], true)?;
    let batch_s = t.elapsed().as_secs_f64();

    println!(
        "grown to {} columns ({branch:?} branch) in {grow_s:.3} s, retraining took {batch_s:.3} s ({:.1}x)",
        model.width(),
        batch_s / grow_s
    );
    println!("weight difference to the batch solution: {:.2e}", relative_diff(model.w_out(), batch.w_out()));
    println!("SSE after growth {:.4}", model.training_sse(y).unwrap());

    // Grow until a target training accuracy is reached.
    let small = HyperParams::with_nodes(2, 2, 5);
    let (_, log) = bls::train_until(x, y, &small, 0.92, GrowthStep::new(4, 60), 20)?;
    for r in &log.records {
        println!(
            "step {:>2}: {:>3} feature + {:>4} enhancement nodes, train AC {:.4}",
            r.step, r.feature_nodes, r.enhancement_nodes, r.train_accuracy
        );
    }
    println!("{}", log.note());
    Ok(())
}
