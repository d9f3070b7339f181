//! Write features to CSV and FMX, read them back and train on the FMX
//! copy, the way externally extracted backbone features come in.
//!
//!     cargo run --example feature_files

use broadlearn::bls::HyperParams;
use broadlearn::data::{self, FileFormat};
use broadlearn::pipeline::Pipeline;
use broadlearn::synth;

fn main() -> broadlearn::error::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let data = synth::blobs_fixture_data(2)?;

    let csv = dir.path().join("features.csv");
    let fmx = dir.path().join("features.fmx");
    data::save_features(&csv, &data, FileFormat::Csv)?;
    data::save_features(&fmx, &data, FileFormat::Fmx)?;
    for p in [&csv, &fmx] {
        println!("{}: {} bytes", p.file_name().unwrap().to_string_lossy(), std::fs::metadata(p).unwrap().len());
    }

    let from_csv = data::load_features(&csv, FileFormat::Csv)?;
    let from_fmx = data::load_features(&fmx, FileFormat::Fmx)?;
    assert_eq!(from_csv.x, data.x);
    assert_eq!(from_fmx.x, data.x);
    println!("both formats reproduce the matrix bit for bit");

    let split = data::split_8_2(from_fmx.len(), 0)?;
    let (train, test) = (from_fmx.subset(&split.train), from_fmx.subset(&split.test));
    let model = Pipeline::fit(&train, &HyperParams::default(), None, false)?;
    println!("trained on the FMX copy: test AC {:.4}", model.evaluate(&test)?.accuracy);
    Ok(())
}
