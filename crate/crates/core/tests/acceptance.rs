//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use pbsrd::analysis::{ks_test, ode_solve, MassActionSystem};
use pbsrd::field::{Convolver, Grid, Stencil};
use pbsrd::kolmogorov::{solve_forward, KolmogorovModel};
use pbsrd::model::{parse_network, Boundary, Domain, Mollifier, PlacementSpec, RateKernel, SeparationDensity, WeightedAlpha};
use pbsrd::particles::TestFunctionDictionary;
use pbsrd::pide::terms::{binding_gain, unbinding_stencils, unbinding_terms};
use pbsrd::pide::{grid_for, initial_fields, pide_solve, PideConfig};
use pbsrd::rng::sim_rng;
use pbsrd::sim::{run_ensemble, EnsembleOptions, SimConfig};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn binding_config(dim: usize, gamma: f64, box_length: f64, extra: &str) -> String {
    format!(
        r#"
[system]
dim = {dim}
gamma = {gamma}
box_length = {box_length}
{extra}
"#
    )
}

const REVERSIBLE_REACTIONS: &str = r#"
[[reaction]]
name = "bind"
reactants = ["A", "B"]
products = ["C"]
kernel = { type = "doi", rate = 5.0, radius = 0.1 }
placement = { type = "two_to_one", choices = [{ p = 1.0, alpha = 0.5 }] }

[[reaction]]
name = "unbind"
reactants = ["C"]
products = ["A", "B"]
kernel = { type = "constant", rate = 0.5 }
placement = { type = "one_to_two", separation = { type = "point", radius = 0.1 }, choices = [{ p = 1.0, alpha = 0.5 }] }
"#;

fn conservation() -> Outcome {
    let mut checked = 0usize;
    let mut events = 0usize;
    for gamma in [1.0, 10.0] {
        let text = binding_config(2, gamma, 1.0, "")
            + r#"
[species.A]
D = 0.1
initial = { amount = 20 }
[species.B]
D = 0.1
initial = { amount = 30 }
[species.C]
D = 0.05
initial = { amount = 10 }
"# + REVERSIBLE_REACTIONS;
        let net = parse_network(&text).unwrap();
        let cfg = SimConfig { dt: 1e-3, t_end: 1.0, seed: 11, record_events: true, ..Default::default() };
        let opts = EnsembleOptions { keep_replica_counts: true, ..Default::default() };
        let ens = run_ensemble(&net, &cfg, 20, &opts).unwrap();
        let expect = (20.0 * gamma + 30.0 * gamma + 20.0 * gamma) as usize;
        events += ens.first.events.events.len();
        for rep in &ens.replica_counts {
            for c in rep {
                if c[0] + c[1] + 2 * c[2] != expect {
                    return outcome(false, format!("gamma {gamma}: a + b + 2c = {} != {expect}", c[0] + c[1] + 2 * c[2]));
                }
                checked += 1;
            }
        }
    }
    outcome(events > 0, format!("a + b + 2c exact on {checked} recorded states, {events} events in replica 0"))
}

fn two_particle() -> Outcome {
    let text = binding_config(1, 1.0, 1.0, "")
        + r#"
[species.A]
D = 1.0
initial = { amount = 1, shape = { type = "gaussian", center = [-0.2], sigma = 0.05 } }
[species.B]
D = 1.0
initial = { amount = 1, shape = { type = "gaussian", center = [0.2], sigma = 0.05 } }
[species.C]
D = 1.0
[[reaction]]
name = "bind"
reactants = ["A", "B"]
products = ["C"]
kernel = { type = "doi", rate = 5.0, radius = 0.1 }
placement = { type = "two_to_one", choices = [{ p = 1.0, alpha = 0.5 }] }
"#;
    let net = parse_network(&text).unwrap();
    let dt = 1e-3;
    let model = KolmogorovModel::from_network(&net, 200).unwrap();
    let traj = solve_forward(&model, model.initial_state(), dt, 1.0, 100, false).unwrap();
    let start = traj.sectors.iter().position(|&s| s == (1, 1, 0)).unwrap();

    let replicas = 10_000;
    let cfg = SimConfig { dt, t_end: 1.0, seed: 2024, sample_interval: Some(0.1), ..Default::default() };
    let opts = EnsembleOptions { keep_replica_counts: true, ..Default::default() };
    let ens = run_ensemble(&net, &cfg, replicas, &opts).unwrap();

    let mut pass = true;
    let mut parts = Vec::new();
    for t in [0.1, 0.5, 1.0] {
        let ki = traj.times.iter().position(|&x| (x - t).abs() < 1e-9).unwrap();
        let si = ens.times.iter().position(|&x| (x - t).abs() < 1e-9).unwrap();
        let s_k = traj.masses[ki][start];
        let alive = ens.replica_counts.iter().filter(|c| c[si][0] == 1).count();
        let s_mc = alive as f64 / replicas as f64;
        let se = (s_mc * (1.0 - s_mc) / replicas as f64).sqrt();
        let tol = (3.0 * se).max(0.01);
        let diff = (s_k - s_mc).abs();
        pass &= diff <= tol;
        parts.push(format!("t={t}: S_kolm={s_k:.4} S_mc={s_mc:.4} |dS|={diff:.4} tol={tol:.4}"));
    }
    outcome(pass, parts.join("; "))
}

fn well_mixed() -> Outcome {
    let text = binding_config(1, 100.0, 1.0, "")
        + r#"
[species.A]
D = 450.0
initial = { amount = 1 }
[species.B]
D = 450.0
initial = { amount = 1 }
[species.C]
D = 450.0
[[reaction]]
name = "bind"
reactants = ["A", "B"]
products = ["C"]
kernel = { type = "doi", rate = 10.0, radius = 0.05 }
placement = { type = "two_to_one", choices = [{ p = 1.0, alpha = 0.5 }] }
"#;
    let net = parse_network(&text).unwrap();
    // sqrt(2 D dt) = 3 box lengths
    let cfg = SimConfig { dt: 0.01, t_end: 1.0, seed: 77, sample_interval: Some(0.2), ..Default::default() };
    let ens = run_ensemble(&net, &cfg, 200, &EnsembleOptions::default()).unwrap();
    let sys = MassActionSystem::from_network(&net).unwrap();
    let c0 = MassActionSystem::initial_concentrations(&net);
    let ode = ode_solve(&sys, &c0, &ens.times).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (t, time) in ens.times.iter().enumerate().skip(1) {
        let mean = ens.mean_counts[t][0] / 100.0;
        let se = ens.se_counts[t][0] / 100.0;
        let diff = (mean - ode[t][0]).abs();
        pass &= diff <= 3.0 * se;
        parts.push(format!("t={time:.1}: a={mean:.4} ode={:.4} |d|/se={:.2}", ode[t][0], diff / se));
    }
    outcome(pass, parts.join("; "))
}

fn homogeneous_pide() -> Outcome {
    let reversible = binding_config(1, 1.0, 2.0, "")
        + r#"
[species.A]
D = 0.1
initial = { amount = 2 }
[species.B]
D = 0.1
initial = { amount = 3 }
[species.C]
D = 0.05
initial = { amount = 1 }
"# + REVERSIBLE_REACTIONS;
    let dimer = binding_config(2, 1.0, 2.0, "eta = 0.05")
        + r#"
[species.A]
D = 0.1
initial = { amount = 8 }
[species.B]
D = 0.05
[[reaction]]
reactants = ["A", "A"]
products = ["B"]
kernel = { type = "doi", rate = 20.0, radius = 0.2 }
placement = { type = "two_to_one", choices = [{ p = 1.0, alpha = 0.5 }] }
[[reaction]]
reactants = ["B"]
products = ["A", "A"]
kernel = { type = "constant", rate = 0.3 }
placement = { type = "one_to_two", separation = { type = "point", radius = 0.1 }, choices = [{ p = 1.0, alpha = 0.5 }] }
"#;
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, text, n) in [("A+B<->C", reversible, 64), ("A+A<->B", dimer, 32)] {
        let net = parse_network(&text).unwrap();
        let grid = grid_for(&net, n).unwrap();
        let cfg = PideConfig { grid: n, dt: 1e-3, t_end: 1.0, record_times: vec![1.0], ..Default::default() };
        let fields = pide_solve(&net, initial_fields(&net, grid), &cfg).unwrap();
        let vol = net.domain.volume();
        let sys = MassActionSystem::from_network(&net).unwrap();
        let c0 = MassActionSystem::initial_concentrations(&net);
        let ode = ode_solve(&sys, &c0, &[1.0]).unwrap();
        let mut worst = 0.0f64;
        for (j, &exact) in ode[0].iter().enumerate() {
            for &v in &fields[0].data[j] {
                worst = worst.max((v - exact).abs() / exact.abs().max(1e-12));
            }
        }
        // the same model without the 1/2 pair factor
        let mut wrong_sys = sys.clone();
        for r in &mut wrong_sys.reactions {
            r.factorial = 1.0;
        }
        let wrong = ode_solve(&wrong_sys, &c0, &[1.0]).unwrap();
        let wrong_err = wrong[0].iter().zip(&ode[0]).map(|(w, e)| (w - e).abs() / e.abs()).fold(0.0, f64::max);
        pass &= worst <= 1e-3;
        parts.push(format!(
            "{label}: max rel err {worst:.2e} (mean {:.4} per volume {vol}), unhalved pair rate {wrong_err:.2e}",
            fields[0].mass(0) / vol
        ));
    }
    outcome(pass, parts.join("; "))
}

fn mean_field_convergence() -> Outcome {
    let text = binding_config(1, 1.0, 4.0, "eta = 0.025")
        + r#"
[species.A]
D = 0.1
initial = { amount = 1, shape = { type = "gaussian", center = [-0.5], sigma = 0.5 } }
[species.B]
D = 0.1
initial = { amount = 1, shape = { type = "gaussian", center = [0.5], sigma = 0.5 } }
[species.C]
D = 0.05
"# + REVERSIBLE_REACTIONS;
    let net = parse_network(&text).unwrap();
    let sim = SimConfig { dt: 0.005, t_end: 1.0, seed: 404, sample_interval: Some(0.25), ..Default::default() };
    let pide = PideConfig { grid: 400, dt: 1e-3, ..Default::default() };
    let dict = TestFunctionDictionary::standard(net.domain, 4, 2);
    let report = pbsrd::analysis::convergence_study(&net, &[25.0, 100.0, 400.0], 200, &sim, &pide, &dict).unwrap();
    let d = &report.distances;
    let pass = report.strictly_decreasing() && d[2] <= 0.6 * d[0];
    outcome(
        pass,
        format!(
            "D(25)={:.5} D(100)={:.5} D(400)={:.5} ratio={:.3} (se {:.5} {:.5} {:.5})",
            d[0],
            d[1],
            d[2],
            d[2] / d[0],
            report.se[0],
            report.se[1],
            report.se[2]
        ),
    )
}

fn placement_sampling() -> Outcome {
    let domain = Domain::new(2, 100.0, Boundary::Periodic).unwrap();
    let eta = 0.05;
    let moll = Mollifier::new(2, eta);
    let mut rng = sim_rng(6);
    let spec = PlacementSpec::TwoToOne {
        choices: vec![WeightedAlpha { p: 0.5, alpha: 0.3 }, WeightedAlpha { p: 0.5, alpha: 1.0 }],
    };
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z = spec.sample(&[&x, &y], &moll, &domain, &mut rng).unwrap().remove(0);
        // distance from z to the segment [x, y]
        let d: Vec<f64> = (0..2).map(|i| y[i] - x[i]).collect();
        let len2 = d[0] * d[0] + d[1] * d[1];
        let s = (((z[0] - x[0]) * d[0] + (z[1] - x[1]) * d[1]) / len2).clamp(0.0, 1.0);
        let dist = ((z[0] - x[0] - s * d[0]).powi(2) + (z[1] - x[1] - s * d[1]).powi(2)).sqrt();
        worst = worst.max(dist);
    }
    let mut pass = worst < eta;
    let mut parts = vec![format!("two_to_one max distance to segment {worst:.4} < {eta}")];
    for (dim, sep) in [
        (1, SeparationDensity::TruncatedGaussian { sigma: 0.1, cutoff: 0.3 }),
        (2, SeparationDensity::TruncatedGaussian { sigma: 0.1, cutoff: 0.3 }),
        (3, SeparationDensity::Tabulated { radii: vec![0.0, 0.1, 0.2, 0.4], cdf: vec![0.0, 0.2, 0.7, 1.0] }),
    ] {
        let domain = Domain::new(dim, 100.0, Boundary::Periodic).unwrap();
        let spec = PlacementSpec::OneToTwo {
            separation: sep.clone(),
            choices: vec![WeightedAlpha { p: 0.6, alpha: 0.5 }, WeightedAlpha { p: 0.4, alpha: 0.1 }],
        };
        let moll = Mollifier::new(dim, eta);
        let c = vec![0.3; dim];
        let r: Vec<f64> = (0..10_000)
            .map(|_| {
                let p = spec.sample(&[&c], &moll, &domain, &mut rng).unwrap();
                p[0].iter().zip(&p[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            })
            .collect();
        let p = ks_test(&r, |v| sep.radial_cdf(dim, v)).unwrap();
        pass &= p > 0.01;
        parts.push(format!("one_to_two {dim}D separation KS p={p:.3}"));
    }
    outcome(pass, parts.join("; "))
}

/// Scatter oracle: every pair of nodes reacts with the discrete kernel
/// weight and deposits its product by linear weights at the placement point.
fn scatter_binding(grid: &Grid, a: &[f64], b: &[f64], weights: &Stencil, choices: &[WeightedAlpha]) -> Vec<f64> {
    let n = grid.n as i64;
    let h = grid.h();
    let mut out = vec![0.0; grid.len()];
    for (m, s) in &weights.entries {
        for y in 0..n {
            let xi = (y + m[0]).rem_euclid(n);
            // reactant of the first slot at y + m h, second at y
            let rate = s * a[xi as usize] * b[y as usize] * h;
            for c in choices {
                let pos = y as f64 + c.alpha * m[0] as f64;
                let lo = pos.floor();
                let frac = pos - lo;
                let lo = (lo as i64).rem_euclid(n) as usize;
                let hi = (lo + 1) % n as usize;
                out[lo] += c.p * rate * (1.0 - frac) / h;
                out[hi] += c.p * rate * frac / h;
            }
        }
    }
    out
}

fn scatter_unbinding(grid: &Grid, rho: &[f64], k: f64, quad: &[(Vec<f64>, f64)], choices: &[WeightedAlpha]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n as i64;
    let h = grid.h();
    let mut gi = vec![0.0; grid.len()];
    let mut gk = vec![0.0; grid.len()];
    let put = |out: &mut Vec<f64>, pos: f64, mass: f64| {
        let lo = pos.floor();
        let frac = pos - lo;
        let lo = (lo as i64).rem_euclid(n) as usize;
        out[lo] += mass * (1.0 - frac);
        out[(lo + 1) % n as usize] += mass * frac;
    };
    for z in 0..n {
        for c in choices {
            for (w, om) in quad {
                let mass = k * rho[z as usize] * c.p * om;
                put(&mut gi, z as f64 + (1.0 - c.alpha) * w[0] / h, mass);
                put(&mut gk, z as f64 - c.alpha * w[0] / h, mass);
            }
        }
    }
    (gi, gk)
}

fn coordinate_change() -> Outcome {
    let grid = Grid::new(1, 64, 2.0).unwrap();
    let kernel = RateKernel::Doi { rate: 3.0, radius: 0.23 };
    let stencil = Stencil::for_kernel(&grid, &kernel).unwrap();
    let conv = Convolver::new(grid, stencil.clone());
    let a = grid.from_fn(|x| 1.0 + 0.8 * (std::f64::consts::PI * x[0]).sin());
    let b = grid.from_fn(|x| (-(x[0] - 0.3).powi(2) / 0.05).exp() + 0.1);
    let choices = [WeightedAlpha { p: 0.7, alpha: 0.3 }, WeightedAlpha { p: 0.3, alpha: 0.85 }];
    let gain = binding_gain(&grid, &a, &b, &conv, &choices);
    let oracle = scatter_binding(&grid, &a, &b, &stencil, &choices);
    let bind_err = gain.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let sep = SeparationDensity::TruncatedGaussian { sigma: 0.15, cutoff: 0.4 };
    let quad = sep.quadrature(1);
    let (s1, s2) = unbinding_stencils(&grid, &quad, &choices);
    let rho = grid.from_fn(|x| 2.0 + (3.0 * std::f64::consts::PI * x[0]).cos());
    let k2 = vec![0.7; grid.len()];
    let (gi, gk, _) = unbinding_terms(&rho, &k2, &Convolver::new(grid, s1), &Convolver::new(grid, s2));
    let (oi, ok) = scatter_unbinding(&grid, &rho, 0.7, &quad, &choices);
    let unbind_err = gi.iter().zip(&oi).chain(gk.iter().zip(&ok)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    outcome(
        bind_err <= 1e-8 && unbind_err <= 1e-8,
        format!("binding max |diff| {bind_err:.2e}, unbinding max |diff| {unbind_err:.2e} (tol 1e-8)"),
    )
}

fn mollifier_normalization() -> Outcome {
    use std::f64::consts::PI;
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut rng = sim_rng(8);
    for dim in 1..=3 {
        for eta in [0.01, 0.1, 1.0] {
            let g = Mollifier::new(dim, eta);
            let shell = |r: f64| match dim {
                1 => 2.0,
                2 => 2.0 * PI * r,
                _ => 4.0 * PI * r * r,
            };
            let m = 2000;
            let hs = eta / m as f64;
            let f = |i: usize| {
                let r = i as f64 * hs;
                g.radial_density(r) * shell(r)
            };
            let mut s = f(0) + f(m);
            for i in 1..m {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i);
            }
            let integral = s * hs / 3.0;
            worst = worst.max((integral - 1.0).abs());
            pass &= (integral - 1.0).abs() <= 1e-8;
            pass &= g.radial_density(eta) == 0.0 && g.radial_density(eta * (1.0 + 1e-12)) == 0.0;
            pass &= (0..2000).all(|_| g.sample(&mut rng).iter().map(|c| c * c).sum::<f64>().sqrt() < eta);
        }
    }
    outcome(pass, format!("max |integral - 1| = {worst:.2e} over d = 1..3, eta in {{0.01, 0.1, 1}}; support inside the open ball"))
}

fn dt_refinement() -> Outcome {
    let text = binding_config(1, 100.0, 4.0, "eta = 0.025")
        + r#"
[species.A]
D = 0.1
initial = { amount = 1, shape = { type = "gaussian", center = [-0.5], sigma = 0.5 } }
[species.B]
D = 0.1
initial = { amount = 1, shape = { type = "gaussian", center = [0.5], sigma = 0.5 } }
[species.C]
D = 0.05
"# + REVERSIBLE_REACTIONS;
    let net = parse_network(&text).unwrap();
    let run = |dt: f64, seed: u64| {
        let cfg = SimConfig { dt, t_end: 1.0, seed, sample_interval: Some(1.0), ..Default::default() };
        run_ensemble(&net, &cfg, 400, &EnsembleOptions::default()).unwrap()
    };
    let coarse = run(0.01, 1);
    let fine = run(0.005, 2);
    let mut pass = true;
    let mut parts = Vec::new();
    for (j, name) in ["A", "B", "C"].iter().enumerate() {
        let (m1, s1) = (coarse.mean_counts[1][j], coarse.se_counts[1][j]);
        let (m2, s2) = (fine.mean_counts[1][j], fine.se_counts[1][j]);
        let band = 3.0 * (s1 * s1 + s2 * s2).sqrt();
        pass &= (m1 - m2).abs() < band;
        parts.push(format!("{name}: {m1:.2} vs {m2:.2} (band {band:.2})"));
    }
    outcome(pass, parts.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 conservation of a + b + 2c", conservation),
        ("2 two-particle survival vs forward equation", two_particle),
        ("3 well-mixed limit vs mass-action ODE", well_mixed),
        ("4 homogeneous mean-field reduction", homogeneous_pide),
        ("5 mean-field convergence in gamma", mean_field_convergence),
        ("6 placement sampling", placement_sampling),
        ("7 coordinate-change reaction terms vs scatter", coordinate_change),
        ("8 mollifier normalization", mollifier_normalization),
        ("9 dt refinement", dt_refinement),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {name} [{secs:.1}s]: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
