//! Depth, width and resolution multipliers of the compound scaling rule
//! for the usual coefficients and a range of resource exponents.
//!
//!     cargo run --example compound_scaling

use broadlearn::frontend::{compound_scaling, ScalingConfig};

fn main() -> broadlearn::error::Result<()> {
    println!("{:>4} {:>7} {:>7} {:>7} {:>8}", "lam", "depth", "width", "res", "flops");
    for lam in 0..=7 {
        let s = compound_scaling(&ScalingConfig::new(1.2, 1.1, 1.15, lam as f64)?)?;
        println!(
            "{lam:>4} {:>7.3} {:>7.3} {:>7.3} {:>8.3}",
            s.depth, s.width, s.resolution, s.flops_multiplier
        );
    }
    let s = compound_scaling(&ScalingConfig::new(1.2, 1.1, 1.15, 1.0)?)?;
    println!("alpha*beta^2*gamma^2 misses 2 by {:.5}", s.constraint_residual);
    Ok(())
}
