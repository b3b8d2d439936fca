//! Fixed-step particle simulator: Brownian diffusion followed by a thinned
//! reaction sweep at the post-diffusion positions.

mod ensemble;
mod sweep;

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{ModelError, RateKernel, ReactionNetwork};
use crate::particles::{counts, ParticleState};
use crate::rng::{init_rng, sim_rng};

pub use ensemble::{run_ensemble, run_ensemble_with, EnsembleOptions, EnsembleSummary};
pub use sweep::{reaction_sweep, NeighborSearch};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation setting: {0}")]
    InvalidConfig(String),
    #[error("population {total} exceeds the cap {cap} at t = {time}")]
    PopulationCap { time: f64, total: usize, cap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Interval between recorded samples; every step when `None`.
    pub sample_interval: Option<f64>,
    pub neighbor_search: NeighborSearch,
    pub record_events: bool,
    pub record_snapshots: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            seed: 0,
            sample_interval: None,
            neighbor_search: NeighborSearch::Auto,
            record_events: false,
            record_snapshots: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(SimError::InvalidConfig(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if let Some(s) = self.sample_interval {
            if !(s > 0.0) {
                return Err(SimError::InvalidConfig(format!("sample interval must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Number of steps; `t_end / dt` rounded when it is within 1e-9 of an integer.
    pub fn steps(&self) -> u64 {
        let x = self.t_end / self.dt;
        if (x - x.round()).abs() < 1e-9 * x.max(1.0) {
            x.round() as u64
        } else {
            x.ceil() as u64
        }
    }

    /// Steps between samples.
    pub fn sample_stride(&self) -> u64 {
        self.sample_interval.map_or(1, |s| ((s / self.dt).round() as u64).max(1))
    }

    /// Step indices at which the state is recorded (always 0 and the last).
    pub fn sample_steps(&self) -> Vec<u64> {
        let n = self.steps();
        let stride = self.sample_stride();
        let mut v: Vec<u64> = (0..=n).step_by(stride as usize).collect();
        if *v.last().unwrap() != n {
            v.push(n);
        }
        v
    }

    pub fn time_of(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }
}

/// One fired reaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub reaction: usize,
    /// Ids of the consumed reactants, in reactant-slot order.
    pub consumed: Vec<u64>,
    /// Reactant positions at the time of firing.
    pub reactant_positions: Vec<Vec<f64>>,
    /// `(new id, position)` per product.
    pub products: Vec<(u64, Vec<f64>)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub const HEADER: &'static str = "time,reaction,ids,positions";

    /// Writes `time,reaction,ids,positions`: ids are space separated,
    /// product coordinates space separated and products `;` separated.
    pub fn write_csv<W: Write>(&self, w: &mut W, reaction_names: &[String]) -> std::io::Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for e in &self.events {
            let ids: Vec<String> = e.consumed.iter().map(u64::to_string).collect();
            let pos: Vec<String> = e
                .products
                .iter()
                .map(|(_, x)| x.iter().map(f64::to_string).collect::<Vec<_>>().join(" "))
                .collect();
            writeln!(w, "{},{},{},{}", e.time, reaction_names[e.reaction], ids.join(" "), pos.join(";"))?;
        }
        Ok(())
    }
}

/// Recorded output of one trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Per-species counts at each recorded time.
    pub counts: Vec<Vec<usize>>,
    pub snapshots: Vec<ParticleState>,
    pub events: EventLog,
}

/// Moves every particle by an independent Gaussian increment with
/// per-coordinate variance `2 D_j dt`, then applies the boundary.
pub fn brownian_step<R: Rng + ?Sized>(state: &mut ParticleState, diffusivities: &[f64], dt: f64, rng: &mut R) {
    let dom = state.domain;
    for (j, pos) in state.positions.iter_mut().enumerate() {
        let d = diffusivities[j];
        if d == 0.0 {
            continue;
        }
        let sigma = (2.0 * d * dt).sqrt();
        for c in pos.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *c = dom.fold(*c + sigma * z);
        }
    }
}

fn check_step_size(network: &ReactionNetwork, kernels: &[RateKernel], counts: &[usize], dt: f64) {
    let vol = network.domain.volume();
    for (l, r) in network.reactions.iter().enumerate() {
        let k = &kernels[l];
        let load = match r.order() {
            1 => k.bound() * dt,
            2 => {
                let partners = counts[r.reactant_slots[1]] as f64;
                let neighbours = match k.support() {
                    Some(eps) => partners * crate::model::ball_volume(network.dim(), eps) / vol,
                    None => partners,
                };
                k.bound() * dt * neighbours.max(1.0)
            }
            _ => 0.0,
        };
        if load > 0.1 {
            log::warn!(
                "reaction[{l}] ({}): dt * rate * expected neighbours = {load:.3} exceeds 0.1; reduce dt",
                r.name
            );
        }
    }
}

/// Runs one trajectory from `initial` with seed `cfg.seed`, calling
/// `observer(sample index, state)` at every recorded step.
pub fn simulate_with(
    network: &ReactionNetwork,
    initial: ParticleState,
    cfg: &SimConfig,
    mut observer: impl FnMut(usize, &ParticleState),
) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    if initial.n_species() != network.species.len() || initial.domain != network.domain {
        return Err(SimError::InvalidConfig("initial state does not match the network".into()));
    }
    let kernels: Vec<RateKernel> = (0..network.reactions.len()).map(|l| network.scaled_kernel(l)).collect();
    let diffusivities: Vec<f64> = network.species.iter().map(|s| s.diffusivity).collect();
    let cap = network.max_amount.map(|m| m * network.gamma);
    let mut rng = sim_rng(cfg.seed);
    let mut state = initial;
    state.time = 0.0;
    check_step_size(network, &kernels, &counts(&state), cfg.dt);

    let samples = cfg.sample_steps();
    let mut next_sample = 0;
    let mut traj = Trajectory::default();
    let mut record = |state: &ParticleState, traj: &mut Trajectory, idx: usize| {
        traj.times.push(state.time);
        traj.counts.push(counts(state));
        if cfg.record_snapshots {
            traj.snapshots.push(state.clone());
        }
        observer(idx, state);
    };
    record(&state, &mut traj, 0);
    next_sample += 1;

    for step in 1..=cfg.steps() {
        brownian_step(&mut state, &diffusivities, cfg.dt, &mut rng);
        state.time = cfg.time_of(step);
        let events =
            reaction_sweep(&mut state, network, &kernels, cfg.dt, step, cfg.seed, cfg.neighbor_search, &mut rng)?;
        if cfg.record_events {
            traj.events.events.extend(events);
        }
        if let Some(cap) = cap {
            let total = state.total();
            if total as f64 > cap {
                return Err(SimError::PopulationCap { time: state.time, total, cap });
            }
        }
        if next_sample < samples.len() && samples[next_sample] == step {
            record(&state, &mut traj, next_sample);
            next_sample += 1;
        }
    }
    Ok(traj)
}

/// [`simulate_with`] without an observer.
pub fn simulate(network: &ReactionNetwork, initial: ParticleState, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    simulate_with(network, initial, cfg, |_, _| {})
}

/// Initial state drawn from the network with the initial-condition stream of `seed`.
pub fn initial_state(network: &ReactionNetwork, seed: u64) -> ParticleState {
    ParticleState::sample_initial(network, &mut init_rng(seed))
}
