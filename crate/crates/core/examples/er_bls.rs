//! The ER-BLS path: a random connection layer (pooling, batch norm, RBF)
//! between the backbone features and the BLS.
//!
//!     cargo run --example er_bls

use broadlearn::bls::HyperParams;
use broadlearn::data::LabeledFeatures;
use broadlearn::frontend::{BiasPlacement, RbfKind};
use broadlearn::linalg::Matrix;
use broadlearn::pipeline::{ErConfig, Pipeline};
use broadlearn::synth;

fn main() -> broadlearn::error::Result<()> {
    let (train, test) = synth::blobs_fixture(0)?;
    let hyper = HyperParams::default();

    for (rbf, bias) in [
        (RbfKind::Gaussian, BiasPlacement::Shift),
        (RbfKind::Laplacian, BiasPlacement::Shift),
        (RbfKind::Gaussian, BiasPlacement::Inside),
    ] {
        let er = ErConfig {
            rbf,
            bias,
            ..ErConfig::default()
        };
        let model = Pipeline::fit(&train, &hyper, Some(er), false)?;
        println!("{rbf:?} RBF, bias {bias:?}: test AC {:.4}", model.evaluate(&test)?.accuracy);
    }
    // With the bias inside the normalization the layer cannot tell a point
    // from its mirror image through the training mean, which costs accuracy.

    // Backbone maps arrive flattened as H x W x C rows and are pooled first.
    let spread = |d: &LabeledFeatures| {
        let x = Matrix::from_fn(d.len(), 9 * d.dims(), |i, j| d.x[(i, j % d.dims())] + 0.1 * ((j / d.dims()) as f64 - 4.0));
        LabeledFeatures::new(x, d.labels.clone(), Some(d.classes))
    };
    let er = ErConfig {
        spatial: Some((3, 3)),
        ..ErConfig::default()
    };
    let model = Pipeline::fit(&spread(&train)?, &hyper, Some(er), false)?;
    println!("3x3 maps, pooled: test AC {:.4}", model.evaluate(&spread(&test)?)?.accuracy);
    Ok(())
}
