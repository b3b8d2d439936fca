//! Doi reaction rates that reproduce a well-mixed rate constant.
//!
//! ```text
//! cargo run --example calibrate_doi
//! ```

use pbsrd::model::{ball_volume, calibrate_doi_lambda};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k_wm = 1.0;
    println!("{:>4} {:>8} {:>6} {:>14} {:>14}", "dim", "gamma", "eps", "lambda", "gamma*lambda*|B|");
    for dim in 1..=3 {
        for gamma in [1.0, 100.0] {
            for eps in [0.01, 0.1] {
                let lambda = calibrate_doi_lambda(k_wm, gamma, eps, dim)?;
                let back = gamma * lambda * ball_volume(dim, eps);
                println!("{dim:>4} {gamma:>8} {eps:>6} {lambda:>14.6} {back:>14.6}");
            }
        }
    }
    Ok(())
}
