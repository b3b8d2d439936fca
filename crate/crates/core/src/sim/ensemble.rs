use rayon::prelude::*;

use crate::field::{Grid, GridField};
use crate::model::ReactionNetwork;
use crate::particles::{ParticleState, TestFunctionDictionary};
use crate::rng::{init_rng, replica_seed, SimRng};

use super::{simulate_with, SimConfig, SimError, Trajectory};

#[derive(Debug, Clone, Default)]
pub struct EnsembleOptions {
    /// Test functions paired with every species at every sample.
    pub dictionary: Option<TestFunctionDictionary>,
    /// Grid for mean cloud-in-cell density fields.
    pub field_grid: Option<Grid>,
    /// Keep every replica's count series.
    pub keep_replica_counts: bool,
}

/// Per-time ensemble statistics. Standard errors are sample standard
/// deviations over replicas divided by `sqrt(replicas)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub replicas: usize,
    pub times: Vec<f64>,
    /// `[time][species]`.
    pub mean_counts: Vec<Vec<f64>>,
    pub se_counts: Vec<Vec<f64>>,
    /// `[time][species][function]`.
    pub mean_pairings: Vec<Vec<Vec<f64>>>,
    pub se_pairings: Vec<Vec<Vec<f64>>>,
    /// Mean empirical densities per recorded time.
    pub mean_fields: Vec<GridField>,
    /// `[replica][time][species]` when requested.
    pub replica_counts: Vec<Vec<Vec<usize>>>,
    /// Replica 0 with events and snapshots as configured.
    pub first: Trajectory,
}

struct ReplicaResult {
    traj: Trajectory,
    pairings: Vec<Vec<Vec<f64>>>,
    fields: Vec<Vec<Vec<f64>>>,
}

fn mean_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs `replicas` independent trajectories. Replica `r` uses seed
/// `replica_seed(cfg.seed, r)` both for its initial condition and its dynamics;
/// results do not depend on the number of threads.
pub fn run_ensemble(
    network: &ReactionNetwork,
    cfg: &SimConfig,
    replicas: usize,
    opts: &EnsembleOptions,
) -> Result<EnsembleSummary, SimError> {
    run_ensemble_with(network, cfg, replicas, opts, |rng| ParticleState::sample_initial(network, rng))
}

/// [`run_ensemble`] with a custom initial-condition sampler.
pub fn run_ensemble_with(
    network: &ReactionNetwork,
    cfg: &SimConfig,
    replicas: usize,
    opts: &EnsembleOptions,
    init: impl Fn(&mut SimRng) -> ParticleState + Sync,
) -> Result<EnsembleSummary, SimError> {
    if replicas == 0 {
        return Err(SimError::InvalidConfig("replicas must be >= 1".into()));
    }
    cfg.validate()?;
    let n_species = network.species.len();
    let gamma = network.gamma;
    let results: Vec<Result<ReplicaResult, SimError>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let seed = replica_seed(cfg.seed, r as u64);
            let c = SimConfig {
                seed,
                record_events: cfg.record_events && r == 0,
                record_snapshots: cfg.record_snapshots && r == 0,
                ..cfg.clone()
            };
            let initial = init(&mut init_rng(seed));
            let mut pairings = Vec::new();
            let mut fields = Vec::new();
            let traj = simulate_with(network, initial, &c, |_, state| {
                if let Some(dict) = &opts.dictionary {
                    pairings.push((0..n_species).map(|j| dict.pair_all(&state.measure(j, gamma))).collect());
                }
                if let Some(g) = &opts.field_grid {
                    let per: Vec<Vec<f64>> = (0..n_species)
                        .map(|j| {
                            let mut f = vec![0.0; g.len()];
                            for x in state.measure(j, gamma).atoms() {
                                g.deposit(&mut f, x, 1.0 / gamma);
                            }
                            f
                        })
                        .collect();
                    fields.push(per);
                }
            })?;
            Ok(ReplicaResult { traj, pairings, fields })
        })
        .collect();
    let results: Vec<ReplicaResult> = results.into_iter().collect::<Result<_, _>>()?;

    let times = results[0].traj.times.clone();
    let nt = times.len();
    let n = replicas;
    let mut mean_counts = vec![vec![0.0; n_species]; nt];
    let mut se_counts = vec![vec![0.0; n_species]; nt];
    for t in 0..nt {
        for j in 0..n_species {
            let (m, s) = mean_se(results.iter().map(|r| r.traj.counts[t][j] as f64), n);
            mean_counts[t][j] = m;
            se_counts[t][j] = s;
        }
    }
    let (mut mean_pairings, mut se_pairings) = (Vec::new(), Vec::new());
    if let Some(dict) = &opts.dictionary {
        for t in 0..nt {
            let mut mt = vec![vec![0.0; dict.len()]; n_species];
            let mut st = mt.clone();
            for j in 0..n_species {
                for f in 0..dict.len() {
                    let (m, s) = mean_se(results.iter().map(|r| r.pairings[t][j][f]), n);
                    mt[j][f] = m;
                    st[j][f] = s;
                }
            }
            mean_pairings.push(mt);
            se_pairings.push(st);
        }
    }
    let mut mean_fields = Vec::new();
    if let Some(g) = &opts.field_grid {
        let names: Vec<String> = network.species.iter().map(|s| s.name.clone()).collect();
        for (t, &time) in times.iter().enumerate() {
            let mut f = GridField::zeros(*g, names.clone());
            f.time = time;
            for r in &results {
                for j in 0..n_species {
                    for (a, b) in f.data[j].iter_mut().zip(&r.fields[t][j]) {
                        *a += b / n as f64;
                    }
                }
            }
            mean_fields.push(f);
        }
    }
    let replica_counts =
        if opts.keep_replica_counts { results.iter().map(|r| r.traj.counts.clone()).collect() } else { Vec::new() };
    let first = results.into_iter().next().map(|r| r.traj).unwrap_or_default();
    Ok(EnsembleSummary {
        replicas,
        times,
        mean_counts,
        se_counts,
        mean_pairings,
        se_pairings,
        mean_fields,
        replica_counts,
        first,
    })
}
