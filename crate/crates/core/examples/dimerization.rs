//! Dimerization A + A <-> B in 2D: homogeneous mean-field solution against
//! mass-action kinetics with the 1/2 pair factor.
//!
//! ```text
//! cargo run --release --example dimerization
//! ```

use pbsrd::analysis::{ode_solve, MassActionSystem};
use pbsrd::model::parse_network;
use pbsrd::pide::{grid_for, initial_fields, pide_solve, PideConfig};
use pbsrd::sim::{run_ensemble, EnsembleOptions, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/models/dimerization.toml"))?;
    let net = parse_network(&text)?;
    let times = vec![0.0, 1.0, 2.0, 4.0];
    let n = 32;
    let cfg = PideConfig { grid: n, dt: 2e-3, t_end: 4.0, record_times: times.clone(), ..Default::default() };
    let fields = pide_solve(&net, initial_fields(&net, grid_for(&net, n)?), &cfg)?;
    let sys = MassActionSystem::from_network(&net)?;
    let ode = ode_solve(&sys, &MassActionSystem::initial_concentrations(&net), &times)?;

    let sim = SimConfig { dt: 0.01, t_end: 4.0, seed: 3, sample_interval: Some(1.0), ..Default::default() };
    let ens = run_ensemble(&net, &sim, 50, &EnsembleOptions::default())?;
    let vol = net.domain.volume();

    println!("{:>4} {:>10} {:>10} {:>10}", "t", "ODE a", "PIDE a", "particles a");
    for (k, &t) in times.iter().enumerate() {
        let s = ens.times.iter().position(|&x| (x - t).abs() < 1e-9).unwrap();
        let particles = ens.mean_counts[s][0] / (net.gamma * vol);
        println!("{t:>4} {:>10.5} {:>10.5} {:>10.5}", ode[k][0], fields[k].mass(0) / vol, particles);
    }
    Ok(())
}
