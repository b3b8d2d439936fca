//! Well-mixed ODE oracle, distribution tests and convergence-in-γ metrics.

use std::io::Write;

use crate::field::Grid;
use crate::model::{ModelError, RateKernel, ReactionNetwork};
use crate::particles::TestFunctionDictionary;
use crate::pide::{grid_for, initial_fields, pide_solve, PideConfig, PideError};
use crate::sim::{run_ensemble, EnsembleOptions, SimConfig, SimError};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pide(#[from] PideError),
    #[error("reaction `{0}` has a position-dependent rate and no well-mixed limit")]
    NotWellMixed(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("step halving did not reach relative accuracy {0:e}")]
    NoConvergence(f64),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassActionReaction {
    pub name: String,
    pub reactants: Vec<u32>,
    pub net: Vec<i64>,
    /// Effective rate `k`; the propensity is `(k / α!) Π c^α`.
    pub rate: f64,
    pub factorial: f64,
}

/// Mass-action kinetics of the well-mixed limit, in concentrations
/// (amount per unit volume).
#[derive(Debug, Clone, PartialEq)]
pub struct MassActionSystem {
    pub species: Vec<String>,
    pub reactions: Vec<MassActionReaction>,
}

impl MassActionSystem {
    /// Effective rates: `∫ K` over the box for second order (`λ |B_ε|` for
    /// Doi), `k` for constant first order, `K / V` for sources.
    pub fn from_network(network: &ReactionNetwork) -> Result<Self, AnalysisError> {
        let vol = network.domain.volume();
        let mut reactions = Vec::new();
        for r in &network.reactions {
            let rate = match (r.order(), &r.kernel) {
                (2, k) => k.integral(network.dim()).unwrap_or(k.bound() * vol),
                (1, RateKernel::Constant { rate }) => *rate,
                (0, k) => k.bound() / vol,
                _ => return Err(AnalysisError::NotWellMixed(r.name.clone())),
            };
            reactions.push(MassActionReaction {
                name: r.name.clone(),
                reactants: r.stoichiometry.reactants.clone(),
                net: r.stoichiometry.net(),
                rate,
                factorial: r.stoichiometry.reactant_factorial(),
            });
        }
        Ok(Self { species: network.species.iter().map(|s| s.name.clone()).collect(), reactions })
    }

    /// Initial concentrations `amount / V`.
    pub fn initial_concentrations(network: &ReactionNetwork) -> Vec<f64> {
        let vol = network.domain.volume();
        network.species.iter().map(|s| s.initial.as_ref().map_or(0.0, |i| i.amount / vol)).collect()
    }

    pub fn rhs(&self, c: &[f64]) -> Vec<f64> {
        let mut dc = vec![0.0; c.len()];
        for r in &self.reactions {
            let mut prop = r.rate / r.factorial;
            for (&a, &x) in r.reactants.iter().zip(c) {
                prop *= x.powi(a as i32);
            }
            for (d, &nu) in dc.iter_mut().zip(&r.net) {
                *d += nu as f64 * prop;
            }
        }
        dc
    }
}

fn rk4_segment(sys: &MassActionSystem, c: &mut [f64], dt: f64, steps: usize) {
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for _ in 0..steps {
        let k1 = sys.rhs(c);
        let k2 = sys.rhs(&axpy(c, &k1, 0.5 * dt));
        let k3 = sys.rhs(&axpy(c, &k2, 0.5 * dt));
        let k4 = sys.rhs(&axpy(c, &k3, dt));
        for i in 0..c.len() {
            c[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

fn rk4_at(sys: &MassActionSystem, c0: &[f64], times: &[f64], per_unit: usize) -> Vec<Vec<f64>> {
    let mut c = c0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = ((span * per_unit as f64).ceil() as usize).max(1);
            rk4_segment(sys, &mut c, span / steps as f64, steps);
        }
        t = target;
        out.push(c.clone());
    }
    out
}

/// Target relative accuracy of [`ode_solve`].
pub const ODE_RTOL: f64 = 1e-8;

/// Concentrations at `times` (non-decreasing, from 0) by classical RK4,
/// halving the step until two successive solutions agree to [`ODE_RTOL`].
pub fn ode_solve(sys: &MassActionSystem, c0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>, AnalysisError> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(AnalysisError::Invalid("output times must be non-decreasing and >= 0".into()));
    }
    let mut per_unit = 64;
    let mut prev = rk4_at(sys, c0, times, per_unit);
    while per_unit < 1 << 24 {
        per_unit *= 2;
        let next = rk4_at(sys, c0, times, per_unit);
        let scale = next.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let diff = prev
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .map(|(a, b)| (a - b).abs() / b.abs().max(1e-6 * scale))
            .fold(0.0, f64::max);
        if diff <= ODE_RTOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(AnalysisError::NoConvergence(ODE_RTOL))
}

/// Minimum sample size for [`ks_test`].
pub const KS_MIN_SAMPLES: usize = 100;

/// Two-sided one-sample Kolmogorov–Smirnov test; returns the asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, AnalysisError> {
    let n = samples.len();
    if n < KS_MIN_SAMPLES {
        return Err(AnalysisError::TooFewSamples { needed: KS_MIN_SAMPLES, got: n });
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let sn = nf.sqrt();
    Ok(kolmogorov_q((sn + 0.12 + 0.11 / sn) * d))
}

/// `Q(λ) = 2 Σ_{j≥1} (-1)^{j-1} e^{-2 j² λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One `(γ, test function, time)` entry of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub gamma: f64,
    /// `species * dictionary.len() + function`.
    pub f_index: usize,
    pub time: f64,
    pub distance: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub gammas: Vec<f64>,
    /// `D(γ)`: largest distance over functions, species and times.
    pub distances: Vec<f64>,
    /// Standard error of the entry attaining `D(γ)`.
    pub se: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }

    pub fn write_rows<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "gamma,f_index,time,distance,se")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.gamma, r.f_index, r.time, r.distance, r.se)?;
        }
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "gamma,distance,se")?;
        for ((g, d), s) in self.gammas.iter().zip(&self.distances).zip(&self.se) {
            writeln!(w, "{g},{d},{s}")?;
        }
        Ok(())
    }
}

/// Compares ensemble means of `⟨f, μ^γ⟩` with the mean-field reference
/// `Σ f ρ h^d` at every recorded time after 0, for each `γ`.
///
/// The network's initial amounts are kept fixed, so particle counts scale
/// with `γ`. The reference is solved once with `pide` on the simulator's
/// sample times.
pub fn convergence_study(
    network: &ReactionNetwork,
    gammas: &[f64],
    replicas: usize,
    sim: &SimConfig,
    pide: &PideConfig,
    dictionary: &TestFunctionDictionary,
) -> Result<ConvergenceReport, AnalysisError> {
    let times: Vec<f64> = sim.sample_steps().into_iter().map(|s| sim.time_of(s)).collect();
    let grid: Grid = grid_for(network, pide.grid)?;
    let pcfg = PideConfig { record_times: times.clone(), t_end: *times.last().unwrap(), ..pide.clone() };
    let reference = pide_solve(network, initial_fields(network, grid), &pcfg)?;
    let n_species = network.species.len();
    let nf = dictionary.len();
    let expected: Vec<Vec<Vec<f64>>> = reference
        .iter()
        .map(|f| (0..n_species).map(|j| dictionary.integrate_all(&grid, &f.data[j])).collect())
        .collect();

    let mut report = ConvergenceReport { gammas: gammas.to_vec(), distances: vec![], se: vec![], rows: vec![] };
    let opts = EnsembleOptions { dictionary: Some(dictionary.clone()), ..Default::default() };
    for &gamma in gammas {
        let net = ReactionNetwork { gamma, ..network.clone() }.validated()?;
        let ens = run_ensemble(&net, sim, replicas, &opts)?;
        let (mut best, mut best_se) = (0.0f64, 0.0);
        for (t, &time) in ens.times.iter().enumerate().skip(1) {
            for j in 0..n_species {
                for f in 0..nf {
                    let distance = (ens.mean_pairings[t][j][f] - expected[t][j][f]).abs();
                    let se = ens.se_pairings[t][j][f];
                    if distance > best {
                        best = distance;
                        best_se = se;
                    }
                    report.rows.push(ConvergenceRow { gamma, f_index: j * nf + f, time, distance, se });
                }
            }
        }
        log::info!("gamma = {gamma}: D = {best:.5} (se {best_se:.5})");
        report.distances.push(best);
        report.se.push(best_se);
    }
    if !report.strictly_decreasing() {
        log::warn!("convergence distance is not strictly decreasing in gamma: {:?}", report.distances);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_network;
    use crate::rng::sim_rng;
    use rand::Rng;

    fn system(text: &str) -> MassActionSystem {
        MassActionSystem::from_network(&parse_network(text).unwrap()).unwrap()
    }

    const ABC: &str = r#"
[system]
dim = 1
gamma = 1
box_length = 1
[species.A]
D = 1
[species.B]
D = 1
[species.C]
D = 1
[[reaction]]
reactants = ["A", "B"]
products = ["C"]
kernel = { type = "doi", rate = 10, radius = 0.1 }
placement = { type = "two_to_one", choices = [{ p = 1, alpha = 0.5 }] }
[[reaction]]
reactants = ["C"]
products = ["A", "B"]
kernel = { type = "constant", rate = 0.0 }
placement = { type = "one_to_two", separation = { type = "point", radius = 0.05 }, choices = [{ p = 1, alpha = 0.5 }] }
"#;

    #[test]
    fn equal_concentration_binding() {
        let sys = system(ABC);
        assert!((sys.reactions[0].rate - 2.0).abs() < 1e-15);
        let times = [0.0, 0.5, 1.0, 3.0];
        let c = ode_solve(&sys, &[1.5, 1.5, 0.0], &times).unwrap();
        for (t, c) in times.iter().zip(&c) {
            let exact = 1.5 / (1.0 + 2.0 * 1.5 * t);
            assert!((c[0] - exact).abs() < 1e-9 * exact);
            // a + b + 2c is conserved
            assert!((c[0] + c[1] + 2.0 * c[2] - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rates_keep_constants() {
        let sys = MassActionSystem {
            species: vec!["A".into()],
            reactions: vec![MassActionReaction { name: "d".into(), reactants: vec![1], net: vec![-1], rate: 0.0, factorial: 1.0 }],
        };
        let c = ode_solve(&sys, &[0.7], &[0.0, 2.0]).unwrap();
        assert_eq!(c[1], vec![0.7]);
    }

    #[test]
    fn linear_isomerization_relaxes() {
        // A <-> C with rates 2 and 1: a(t) = 1/3 + (a0 - 1/3) e^{-3t} for a + c = 1
        let sys = MassActionSystem {
            species: vec!["A".into(), "C".into()],
            reactions: vec![
                MassActionReaction { name: "f".into(), reactants: vec![1, 0], net: vec![-1, 1], rate: 2.0, factorial: 1.0 },
                MassActionReaction { name: "r".into(), reactants: vec![0, 1], net: vec![1, -1], rate: 1.0, factorial: 1.0 },
            ],
        };
        let c = ode_solve(&sys, &[1.0, 0.0], &[0.4, 1.7]).unwrap();
        for (t, c) in [0.4f64, 1.7].iter().zip(&c) {
            let exact = 1.0 / 3.0 + (2.0 / 3.0) * (-3.0 * t).exp();
            assert!((c[0] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn dimerization_prefactor() {
        let text = r#"
[system]
dim = 1
gamma = 1
box_length = 1
[species.A]
D = 1
[species.B]
D = 1
[[reaction]]
reactants = ["A", "A"]
products = ["B"]
kernel = { type = "doi", rate = 5, radius = 0.1 }
placement = { type = "two_to_one", choices = [{ p = 1, alpha = 0.5 }] }
"#;
        let sys = system(text);
        let d = sys.rhs(&[2.0, 0.0]);
        // k = 1: da/dt = -k a², db/dt = k a² / 2
        assert!((d[0] + 4.0).abs() < 1e-14 && (d[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ks_behaviour() {
        assert!(matches!(ks_test(&[], |x| x), Err(AnalysisError::TooFewSamples { .. })));
        let constant = vec![0.5; 500];
        assert!(ks_test(&constant, |x: f64| x.clamp(0.0, 1.0)).unwrap() < 1e-10);
        // calibration: about 1% rejections at the 1% level
        let mut rng = sim_rng(17);
        let trials = 1000;
        let mut rejected = 0;
        for _ in 0..trials {
            let s: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
            if ks_test(&s, |x| x.clamp(0.0, 1.0)).unwrap() < 0.01 {
                rejected += 1;
            }
        }
        assert!(rejected <= 25, "rejected {rejected} of {trials}");
    }
}
