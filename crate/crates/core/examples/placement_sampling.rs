//! Product placement for binding and unbinding, with a KS check of the
//! sampled separations.
//!
//! ```text
//! cargo run --example placement_sampling
//! ```

use pbsrd::analysis::ks_test;
use pbsrd::model::{Boundary, Domain, Mollifier, PlacementSpec, SeparationDensity, WeightedAlpha};
use pbsrd::rng::sim_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let domain = Domain::new(2, 10.0, Boundary::Periodic)?;
    let moll = Mollifier::new(2, 0.05);
    let mut rng = sim_rng(42);

    let bind = PlacementSpec::TwoToOne { choices: vec![WeightedAlpha { p: 1.0, alpha: 0.25 }] };
    let (x, y) = ([0.0, 0.0], [1.0, 0.0]);
    let mut mean = [0.0; 2];
    let n = 10_000;
    for _ in 0..n {
        let z = bind.sample(&[&x, &y], &moll, &domain, &mut rng)?.remove(0);
        mean[0] += z[0] / n as f64;
        mean[1] += z[1] / n as f64;
    }
    println!("binding product mean {mean:?} (expected [0.75, 0])");

    let sep = SeparationDensity::TruncatedGaussian { sigma: 0.1, cutoff: 0.3 };
    let unbind = PlacementSpec::OneToTwo { separation: sep.clone(), choices: vec![WeightedAlpha { p: 1.0, alpha: 0.5 }] };
    let r: Vec<f64> = (0..n)
        .map(|_| {
            let p = unbind.sample(&[&[0.0, 0.0]], &moll, &domain, &mut rng).unwrap();
            ((p[0][0] - p[1][0]).powi(2) + (p[0][1] - p[1][1]).powi(2)).sqrt()
        })
        .collect();
    println!("separation KS p-value {:.3}", ks_test(&r, |v| sep.radial_cdf(2, v))?);
    Ok(())
}
