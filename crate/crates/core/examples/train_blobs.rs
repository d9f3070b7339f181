//! Train the default E-BLS model on the built-in blobs fixture, evaluate it
//! and round-trip it through the model file format.
//!
//!     cargo run --example train_blobs

use broadlearn::bls::HyperParams;
use broadlearn::persist;
use broadlearn::pipeline::Pipeline;
use broadlearn::synth;

fn main() -> broadlearn::error::Result<()> {
    let (train, test) = synth::blobs_fixture(0)?;
    println!("{} training and {} test samples, {} classes", train.len(), test.len(), train.classes);

    let hyper = HyperParams::default();
    let start = std::time::Instant::now();
    let model = Pipeline::fit(&train, &hyper, None, false)?;
    let metrics = model.evaluate(&test)?;
    println!(
        "n1={} n2={} n3={}: test AC {:.4}, PC {:.4}, trained in {:.3} s",
        hyper.n1,
        hyper.n2,
        hyper.n3,
        metrics.accuracy,
        metrics.pearson.unwrap_or(f64::NAN),
        start.elapsed().as_secs_f64()
    );

    let bytes = persist::encode_model(&model)?;
    let restored = persist::decode_model(&bytes)?;
    assert_eq!(restored.predict_labels(&test.x)?, model.predict_labels(&test.x)?);
    println!("model file is {} bytes and restores identical predictions", bytes.len());
    Ok(())
}
