//! Distance between particle ensembles and the mean-field solution as the
//! system size grows.
//!
//! ```text
//! cargo run --release --example mean_field_convergence
//! ```

use pbsrd::analysis::convergence_study;
use pbsrd::model::parse_network;
use pbsrd::particles::TestFunctionDictionary;
use pbsrd::pide::PideConfig;
use pbsrd::sim::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/models/reversible_binding.toml"))?;
    let net = parse_network(&text)?;
    let sim = SimConfig { dt: 0.005, t_end: 1.0, seed: 1, sample_interval: Some(0.25), ..Default::default() };
    let pide = PideConfig { grid: 400, dt: 1e-3, ..Default::default() };
    let dict = TestFunctionDictionary::standard(net.domain, 4, 2);
    let report = convergence_study(&net, &[25.0, 100.0, 400.0], 100, &sim, &pide, &dict)?;
    report.write_summary(&mut std::io::stdout())?;
    println!("strictly decreasing: {}", report.strictly_decreasing());
    Ok(())
}
