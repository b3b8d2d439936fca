//! Particle state, empirical measures, test functions and density estimates.

use std::io::Write;

use rand::Rng;

use crate::field::{Grid, GridField};
use crate::model::{Boundary, Domain, ModelError, ReactionNetwork};

/// Positions of every particle, stored per species as flat coordinate arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub domain: Domain,
    pub time: f64,
    /// `positions[j]` holds `dim` coordinates per particle of species `j`.
    pub positions: Vec<Vec<f64>>,
    pub ids: Vec<Vec<u64>>,
    next_id: u64,
}

impl ParticleState {
    pub fn new(domain: Domain, n_species: usize) -> Self {
        Self {
            domain,
            time: 0.0,
            positions: vec![Vec::new(); n_species],
            ids: vec![Vec::new(); n_species],
            next_id: 0,
        }
    }

    /// Draws the initial configuration of `network`.
    pub fn sample_initial<R: Rng + ?Sized>(network: &ReactionNetwork, rng: &mut R) -> Self {
        let mut state = Self::new(network.domain, network.species.len());
        for (j, (s, n)) in network.species.iter().zip(network.initial_counts()).enumerate() {
            if let Some(init) = &s.initial {
                for _ in 0..n {
                    let x = init.shape.sample(&network.domain, rng);
                    state.push(j, &x);
                }
            }
        }
        state
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn n_species(&self) -> usize {
        self.positions.len()
    }

    pub fn count(&self, species: usize) -> usize {
        self.ids[species].len()
    }

    pub fn total(&self) -> usize {
        self.ids.iter().map(Vec::len).sum()
    }

    /// Adds a particle (folded into the domain) and returns its id.
    pub fn push(&mut self, species: usize, x: &[f64]) -> u64 {
        assert_eq!(x.len(), self.dim());
        let id = self.next_id;
        self.next_id += 1;
        self.positions[species].extend(x.iter().map(|&c| self.domain.fold(c)));
        self.ids[species].push(id);
        id
    }

    pub fn position(&self, species: usize, i: usize) -> &[f64] {
        let d = self.dim();
        &self.positions[species][i * d..(i + 1) * d]
    }

    /// Removes the particles whose flags are set, keeping the order of the rest.
    pub fn remove_flagged(&mut self, species: usize, flags: &[bool]) {
        let d = self.dim();
        let mut k = 0;
        let ids = &mut self.ids[species];
        let pos = &mut self.positions[species];
        for i in 0..flags.len() {
            if !flags[i] {
                ids[k] = ids[i];
                pos.copy_within(i * d..(i + 1) * d, k * d);
                k += 1;
            }
        }
        ids.truncate(k);
        pos.truncate(k * d);
    }

    pub fn measure(&self, species: usize, gamma: f64) -> EmpiricalMeasure<'_> {
        EmpiricalMeasure { dim: self.dim(), positions: &self.positions[species], gamma }
    }
}

pub fn counts(state: &ParticleState) -> Vec<usize> {
    (0..state.n_species()).map(|j| state.count(j)).collect()
}

/// `μ = (1/γ) Σ δ_{x_i}` over one species.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalMeasure<'a> {
    pub dim: usize,
    pub positions: &'a [f64],
    pub gamma: f64,
}

impl<'a> EmpiricalMeasure<'a> {
    pub fn atoms(&self) -> impl Iterator<Item = &'a [f64]> {
        self.positions.chunks_exact(self.dim)
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.len() as f64 / self.gamma
    }
}

/// `⟨f, μ⟩ = (1/γ) Σ f(x_i)`.
pub fn pair(f: impl Fn(&[f64]) -> f64, mu: &EmpiricalMeasure) -> f64 {
    mu.atoms().map(f).sum::<f64>() / mu.gamma
}

/// Bounded smooth test functions on the box, each with sup-norm at most 1.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Constant,
    /// `exp(-|x - c|² / (2 w²))` with minimum-image distance.
    Bump { center: Vec<f64>, width: f64 },
    /// `cos(2π k·x / L)`.
    Cos { k: Vec<i32> },
    /// `sin(2π k·x / L)`.
    Sin { k: Vec<i32> },
}

impl TestFunction {
    pub fn eval(&self, domain: &Domain, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::Bump { center, width } => {
                (-domain.distance2(x, center) / (2.0 * width * width)).exp()
            }
            TestFunction::Cos { k } => phase(domain, k, x).cos(),
            TestFunction::Sin { k } => phase(domain, k, x).sin(),
        }
    }
}

fn phase(domain: &Domain, k: &[i32], x: &[f64]) -> f64 {
    let s: f64 = k.iter().zip(x).map(|(&k, &x)| k as f64 * x).sum();
    2.0 * std::f64::consts::PI * s / domain.length
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionDictionary {
    pub domain: Domain,
    pub functions: Vec<TestFunction>,
}

impl TestFunctionDictionary {
    /// The constant, `bumps` Gaussian bumps per axis on a regular lattice
    /// and the cos/sin modes with `|k|∞ <= max_mode` along each axis.
    pub fn standard(domain: Domain, bumps: usize, max_mode: i32) -> Self {
        let d = domain.dim;
        let mut functions = vec![TestFunction::Constant];
        if bumps > 0 {
            let spacing = domain.length / bumps as f64;
            let total = bumps.pow(d as u32);
            for k in 0..total {
                let mut rem = k;
                let mut center = vec![0.0; d];
                for c in center.iter_mut() {
                    *c = -0.5 * domain.length + (rem % bumps) as f64 * spacing + 0.5 * spacing;
                    rem /= bumps;
                }
                functions.push(TestFunction::Bump { center, width: 0.5 * spacing });
            }
        }
        for a in 0..d {
            for m in 1..=max_mode {
                let mut k = vec![0; d];
                k[a] = m;
                functions.push(TestFunction::Cos { k: k.clone() });
                functions.push(TestFunction::Sin { k });
            }
        }
        Self { domain, functions }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn pair_all(&self, mu: &EmpiricalMeasure) -> Vec<f64> {
        self.functions.iter().map(|f| pair(|x| f.eval(&self.domain, x), mu)).collect()
    }

    /// `Σ f ρ h^d` for every member against a grid density.
    pub fn integrate_all(&self, grid: &Grid, rho: &[f64]) -> Vec<f64> {
        let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|k| grid.node(k)).collect();
        self.functions
            .iter()
            .map(|f| {
                let vals: Vec<f64> = nodes.iter().zip(rho).map(|(x, r)| f.eval(&self.domain, x) * r).collect();
                grid.integrate(&vals)
            })
            .collect()
    }
}

/// Gaussian kernel density estimate of `mu` on `grid`.
///
/// The kernel is separable, wrapped on periodic boxes, and renormalized per
/// atom on the grid so the estimate integrates to the mass of `mu`.
pub fn kde_density(mu: &EmpiricalMeasure, bandwidth: f64, grid: &Grid, domain: &Domain) -> Result<Vec<f64>, ModelError> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(ModelError::InvalidParameter(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let d = grid.dim;
    let n = grid.n;
    let h = grid.h();
    let mut out = vec![0.0; grid.len()];
    let mut axis_w = vec![vec![0.0; n]; d];
    for x in mu.atoms() {
        for a in 0..d {
            let w = &mut axis_w[a];
            for (i, wi) in w.iter_mut().enumerate() {
                let dx = match domain.boundary {
                    Boundary::Periodic => domain.delta(x[a], grid.coord(i)),
                    Boundary::Reflecting => grid.coord(i) - x[a],
                };
                *wi = (-0.5 * dx * dx / (bandwidth * bandwidth)).exp();
            }
            let s: f64 = w.iter().sum::<f64>() * h;
            if s > 0.0 {
                w.iter_mut().for_each(|v| *v /= s);
            } else {
                // bandwidth far below the spacing: put the atom on its node
                w.iter_mut().for_each(|v| *v = 0.0);
                let k = ((x[a] + 0.5 * grid.length) / h).round() as i64;
                w[k.rem_euclid(n as i64) as usize] = 1.0 / h;
            }
        }
        let mass = 1.0 / mu.gamma;
        for (k, o) in out.iter_mut().enumerate() {
            let idx = grid.unflatten(k);
            let mut w = mass;
            for a in 0..d {
                w *= axis_w[a][idx[a]];
            }
            *o += w;
        }
    }
    Ok(out)
}

/// KDE for every species of a state, as a [`GridField`].
pub fn kde_field(
    state: &ParticleState,
    names: &[String],
    gamma: f64,
    bandwidth: f64,
    grid: Grid,
) -> Result<GridField, ModelError> {
    let mut f = GridField::zeros(grid, names.to_vec());
    f.time = state.time;
    for j in 0..state.n_species() {
        f.data[j] = kde_density(&state.measure(j, gamma), bandwidth, &grid, &state.domain)?;
    }
    Ok(f)
}

pub fn snapshot_header(dim: usize) -> String {
    format!("time,species,{}", ["x", "y", "z"][..dim].join(","))
}

/// Writes one row `time,species,x[,y[,z]]` per particle.
pub fn write_snapshot<W: Write>(w: &mut W, state: &ParticleState, names: &[String]) -> std::io::Result<()> {
    for (j, name) in names.iter().enumerate() {
        for i in 0..state.count(j) {
            write!(w, "{},{}", state.time, name)?;
            for c in state.position(j, i) {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
