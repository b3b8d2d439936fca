//! Reversible binding A + B <-> C: conserved totals along one trajectory and
//! the well-mixed equilibrium.
//!
//! ```text
//! cargo run --release --example reversible_binding
//! ```

use pbsrd::analysis::{ode_solve, MassActionSystem};
use pbsrd::model::parse_network;
use pbsrd::sim::{initial_state, simulate, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/models/reversible_binding.toml"))?;
    let net = parse_network(&text)?;
    println!("conservation laws: {:?}", net.conservation_laws());

    let cfg = SimConfig { dt: 0.005, t_end: 5.0, seed: 7, sample_interval: Some(0.5), record_events: true, ..Default::default() };
    let traj = simulate(&net, initial_state(&net, cfg.seed), &cfg)?;
    let sys = MassActionSystem::from_network(&net)?;
    let ode = ode_solve(&sys, &MassActionSystem::initial_concentrations(&net), &traj.times)?;
    let vol = net.domain.volume();

    println!("{:>5} {:>5} {:>5} {:>5} {:>8} {:>10}", "t", "A", "B", "C", "A+B+2C", "ODE C");
    for ((t, c), o) in traj.times.iter().zip(&traj.counts).zip(&ode) {
        println!("{t:>5} {:>5} {:>5} {:>5} {:>8} {:>10.2}", c[0], c[1], c[2], c[0] + c[1] + 2 * c[2], o[2] * vol * net.gamma);
    }
    println!("{} reaction events", traj.events.events.len());
    Ok(())
}
