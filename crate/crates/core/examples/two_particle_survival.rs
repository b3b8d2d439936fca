//! Survival of a single A-B pair from the forward equation and from
//! Monte Carlo.
//!
//! ```text
//! cargo run --release --example two_particle_survival
//! ```

use pbsrd::kolmogorov::{pair_correlation, solve_forward, KolmogorovModel};
use pbsrd::model::parse_network;
use pbsrd::sim::{run_ensemble, EnsembleOptions, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/models/two_particle.toml"))?;
    let net = parse_network(&text)?;
    let dt = 1e-3;
    let model = KolmogorovModel::from_network(&net, 128)?;
    let traj = solve_forward(&model, model.initial_state(), dt, 1.0, 100, true)?;
    let pair = traj.sectors.iter().position(|&s| s == (1, 1, 0)).unwrap();

    let replicas = 5000;
    let cfg = SimConfig { dt, t_end: 1.0, seed: 9, sample_interval: Some(0.1), ..Default::default() };
    let opts = EnsembleOptions { keep_replica_counts: true, ..Default::default() };
    let ens = run_ensemble(&net, &cfg, replicas, &opts)?;

    println!("{:>5} {:>10} {:>10} {:>8}", "t", "forward", "MC", "MC se");
    for (k, t) in traj.times.iter().enumerate() {
        let alive = ens.replica_counts.iter().filter(|c| c[k][0] == 1).count() as f64 / replicas as f64;
        let se = (alive * (1.0 - alive) / replicas as f64).sqrt();
        println!("{t:>5.1} {:>10.4} {alive:>10.4} {se:>8.4}", traj.masses[k][pair]);
    }
    // fold the joint density of (A, B) positions into the separation y - x
    let joint = pair_correlation(traj.states.last().unwrap());
    let m = model.grid.len();
    let h = model.grid.h();
    let mut sep = vec![0.0; m];
    for x in 0..m {
        for y in 0..m {
            sep[(y + m - x) % m] += joint[x * m + y] * h;
        }
    }
    let near: f64 = (0..m).filter(|&k| k.min(m - k) as f64 * h <= 0.1).map(|k| sep[k] * h).sum();
    println!("P(pair unbound and within reaction radius at t = 1) = {near:.4}");
    Ok(())
}
