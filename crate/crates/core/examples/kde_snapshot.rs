//! Kernel density estimate of one particle snapshot next to the mean-field
//! density, written as CSV to stdout.
//!
//! ```text
//! cargo run --release --example kde_snapshot > kde.csv
//! ```

use std::io::Write;

use pbsrd::model::parse_network;
use pbsrd::particles::kde_density;
use pbsrd::pide::{grid_for, initial_fields, pide_solve, PideConfig};
use pbsrd::sim::{initial_state, simulate, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/models/reversible_binding.toml"))?;
    let mut net = parse_network(&text)?;
    net.gamma = 2000.0;
    let cfg = SimConfig { dt: 0.005, t_end: 1.0, seed: 5, record_snapshots: true, sample_interval: Some(1.0), ..Default::default() };
    let traj = simulate(&net, initial_state(&net, cfg.seed), &cfg)?;
    let last = traj.snapshots.last().unwrap();

    let grid = grid_for(&net, 200)?;
    let pcfg = PideConfig { grid: 200, dt: 1e-3, t_end: 1.0, record_times: vec![1.0], ..Default::default() };
    let mf = pide_solve(&net, initial_fields(&net, grid), &pcfg)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "x,species,kde,mean_field")?;
    for (j, name) in ["A", "B", "C"].iter().enumerate() {
        let kde = kde_density(&last.measure(j, net.gamma), 0.05, &grid, &net.domain)?;
        for (k, (a, b)) in kde.iter().zip(&mf[0].data[j]).enumerate() {
            writeln!(out, "{},{name},{a},{b}", grid.node(k)[0])?;
        }
    }
    Ok(())
}
