//! Birth-death with localized births: particle ensemble against the
//! mean-field density.
//!
//! ```text
//! cargo run --release --example birth_death
//! ```

use pbsrd::field::Grid;
use pbsrd::model::parse_network;
use pbsrd::pide::{grid_for, initial_fields, pide_solve, PideConfig};
use pbsrd::sim::{run_ensemble, EnsembleOptions, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/models/birth_death.toml"))?;
    let net = parse_network(&text)?;
    let n = 64;
    let grid: Grid = grid_for(&net, n)?;
    let times = vec![0.0, 0.5, 1.0, 2.0];

    let sim = SimConfig { dt: 0.01, t_end: 2.0, seed: 1, sample_interval: Some(0.5), ..Default::default() };
    let opts = EnsembleOptions { field_grid: Some(grid), ..Default::default() };
    let ens = run_ensemble(&net, &sim, 100, &opts)?;

    let pcfg = PideConfig { grid: n, dt: 1e-3, t_end: 2.0, record_times: times.clone(), ..Default::default() };
    let fields = pide_solve(&net, initial_fields(&net, grid), &pcfg)?;

    println!("{:>5} {:>12} {:>12} {:>12}", "t", "particles", "mean field", "L1 density gap");
    for f in &fields {
        let t = ens.times.iter().position(|&s| (s - f.time).abs() < 1e-9).unwrap();
        let particles = ens.mean_counts[t][0] / net.gamma;
        let gap: f64 = ens.mean_fields[t].data[0].iter().zip(&f.data[0]).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.h();
        println!("{:>5} {:>12.4} {:>12.4} {:>12.4}", f.time, particles, f.mass(0), gap);
    }
    // steady amount K2 / k
    println!("steady state amount {}", 2.0 / 1.0);
    Ok(())
}
