//! Fix the feature layer and sweep the number of enhancement nodes,
//! printing training time and test accuracy per row.
//!
//!     cargo run --release --example node_sweep

use std::time::Instant;

use broadlearn::bls::HyperParams;
use broadlearn::pipeline::Pipeline;
use broadlearn::synth;

fn main() -> broadlearn::error::Result<()> {
    let (train, test) = synth::blobs_fixture(4)?;
    println!("{:>14} {:>18} {:>9} {:>8}", "feature nodes", "enhancement nodes", "seconds", "test AC");
    for n3 in (250..=2000).step_by(250) {
        let hyper = HyperParams::with_nodes(12, 5, n3);
        let t = Instant::now();
        let model = Pipeline::fit(&train, &hyper, None, false)?;
        let secs = t.elapsed().as_secs_f64();
        let ac = model.evaluate(&test)?.accuracy;
        println!("{:>14} {n3:>18} {secs:>9.3} {ac:>8.4}", "12x5");
    }
    Ok(())
}
