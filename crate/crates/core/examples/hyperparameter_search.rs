//! Random search and successive halving over (n1, n2, n3) on the planted
//! problem, where only wide enhancement layers fit every cluster.
//!
//!     cargo run --release --example hyperparameter_search

use broadlearn::hypersearch::{halving_search, random_search, Range, SearchSpace};
use broadlearn::synth;

fn main() -> broadlearn::error::Result<()> {
    let data = synth::planted_fixture(3)?;
    let space = SearchSpace::new(Range::new(1, 4), Range::new(1, 4), Range::new(50, 1000), vec![1e-8]);

    let rs = random_search(&space, &data, 30, 0.2, 3)?;
    let b = &rs.best;
    println!(
        "random search:   trial {:>2} n1={} n2={} n3={:>4} val AC {:.4} ({} training rows in total)",
        b.index,
        b.hyper.n1,
        b.hyper.n2,
        b.hyper.n3,
        b.val_accuracy,
        rs.work()
    );

    let hs = halving_search(&space, &data, 30, 3.0, 0.2, 3)?;
    let b = &hs.best;
    println!(
        "halving search:  trial {:>2} n1={} n2={} n3={:>4} val AC {:.4} ({} training rows in total)",
        b.index,
        b.hyper.n1,
        b.hyper.n2,
        b.hyper.n3,
        b.val_accuracy,
        hs.work()
    );

    let mut log = Vec::new();
    rs.write_log(&mut log)?;
    print!("first trial record: {}", String::from_utf8_lossy(&log).lines().next().unwrap_or_default());
    println!();
    Ok(())
}
