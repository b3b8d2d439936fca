//! Mean-field reaction-diffusion integro-differential equations on a
//! periodic grid.
//!
//! Densities are molar concentrations (amount per unit volume) and kernels
//! are the unscaled `K_ℓ`. Each step is Strang split: half a diffusion step,
//! a Heun (RK2) reaction step, half a diffusion step.

pub mod terms;

use rustfft::num_complex::Complex64;

pub use crate::field::{Grid, GridField};
use crate::field::{laplacian_symbol, Convolver, FftNd, Stencil};
use crate::model::{Boundary, ModelError, PlacementSpec, RateKernel, ReactionNetwork, SpatialShape};
pub use terms::{bimolecular_loss, binding_gain, first_order_terms, unbinding_stencils, unbinding_terms};

#[derive(Debug, thiserror::Error)]
pub enum PideError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("explicit diffusion is unstable: dt = {dt} exceeds h^2/(2 d D) = {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-finite density at t = {time}")]
    NonFinite { time: f64 },
    #[error("invalid solver setting: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionScheme {
    /// Forward Euler; requires `dt <= h^2 / (2 d D)`.
    Explicit,
    /// Crank–Nicolson, solved exactly in Fourier space.
    #[default]
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PideConfig {
    /// Nodes per axis.
    pub grid: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Output times; each must be a multiple of `dt`.
    pub record_times: Vec<f64>,
    pub diffusion: DiffusionScheme,
    /// Convolve product gains with the placement mollifier `G_η`.
    pub mollify: bool,
}

impl Default for PideConfig {
    fn default() -> Self {
        Self {
            grid: 128,
            dt: 1e-3,
            t_end: 1.0,
            record_times: vec![0.0, 1.0],
            diffusion: DiffusionScheme::default(),
            mollify: true,
        }
    }
}

/// Periodic diffusion `ρ ← ρ + τ D Δ_h ρ` with the second-order central Laplacian.
pub struct Diffuser {
    grid: Grid,
    d: f64,
    scheme: DiffusionScheme,
    fft: Option<(FftNd, Vec<f64>)>,
}

impl Diffuser {
    pub fn new(grid: Grid, diffusivity: f64, scheme: DiffusionScheme) -> Self {
        let fft = (scheme == DiffusionScheme::CrankNicolson && diffusivity > 0.0).then(|| {
            let fft = FftNd::new(&grid.shape());
            let symbol = (0..grid.len())
                .map(|k| {
                    let idx = grid.unflatten(k);
                    (0..grid.dim).map(|a| laplacian_symbol(idx[a], grid.n, grid.h())).sum()
                })
                .collect();
            (fft, symbol)
        });
        Self { grid, d: diffusivity, scheme, fft }
    }

    /// Largest stable explicit step.
    pub fn cfl_limit(&self) -> f64 {
        let h = self.grid.h();
        h * h / (2.0 * self.grid.dim as f64 * self.d)
    }

    pub fn step(&self, field: &mut [f64], tau: f64) -> Result<(), PideError> {
        if self.d == 0.0 || tau == 0.0 {
            return Ok(());
        }
        match self.scheme {
            DiffusionScheme::Explicit => {
                let limit = self.cfl_limit();
                if tau > limit * (1.0 + 1e-12) {
                    return Err(PideError::Cfl { dt: tau, limit });
                }
                let lap = laplacian(&self.grid, field);
                for (f, l) in field.iter_mut().zip(lap) {
                    *f += tau * self.d * l;
                }
            }
            DiffusionScheme::CrankNicolson => {
                let (fft, symbol) = self.fft.as_ref().expect("built for positive diffusivity");
                let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft.forward(&mut buf);
                for (b, &s) in buf.iter_mut().zip(symbol) {
                    let a = 0.5 * tau * self.d * s;
                    *b *= (1.0 + a) / (1.0 - a);
                }
                fft.inverse(&mut buf);
                for (f, b) in field.iter_mut().zip(buf) {
                    *f = b.re;
                }
            }
        }
        Ok(())
    }
}

/// Periodic second-order central-difference Laplacian.
pub fn laplacian(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let h2 = grid.h() * grid.h();
    let mut out = vec![0.0; f.len()];
    let mut off = vec![0i64; grid.dim];
    for a in 0..grid.dim {
        for (k, o) in out.iter_mut().enumerate() {
            off[a] = 1;
            let p = f[grid.shifted(k, &off)];
            off[a] = -1;
            let m = f[grid.shifted(k, &off)];
            off[a] = 0;
            *o += (p - 2.0 * f[k] + m) / h2;
        }
    }
    out
}

/// One diffusion step of length `dt` for a single field.
pub fn diffusion_step(
    grid: &Grid,
    field: &mut [f64],
    diffusivity: f64,
    dt: f64,
    scheme: DiffusionScheme,
) -> Result<(), PideError> {
    if !(dt > 0.0) {
        return Err(PideError::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    Diffuser::new(*grid, diffusivity, scheme).step(field, dt)
}

enum Term {
    Bimolecular {
        slots: [usize; 2],
        products: Vec<usize>,
        prefactor: f64,
        kernel: Convolver,
        placement: PlacementSpec,
    },
    FirstOrder {
        reactant: usize,
        products: Vec<usize>,
        rate: Vec<f64>,
        split: Option<(Convolver, Convolver)>,
    },
    Source {
        product: usize,
        density: Vec<f64>,
    },
}

/// Precomputed stencils and rate fields for every reaction of a network.
pub struct ReactionTermPlan {
    grid: Grid,
    n_species: usize,
    terms: Vec<Term>,
    mollifier: Option<Convolver>,
}

impl ReactionTermPlan {
    pub fn new(network: &ReactionNetwork, grid: Grid, mollify: bool) -> Result<Self, PideError> {
        if network.domain.boundary != Boundary::Periodic {
            return Err(PideError::Unsupported("the mean-field solver needs a periodic box".into()));
        }
        let mut terms = Vec::new();
        for r in &network.reactions {
            let here = format!("reaction ({})", r.name);
            let products = r.product_slots.clone();
            match r.order() {
                2 => {
                    // every second-order kernel here is a radial function of x - y
                    let kernel = Convolver::new(grid, Stencil::for_kernel(&grid, &r.kernel).map_err(|e| e.located(&here))?);
                    terms.push(Term::Bimolecular {
                        slots: [r.reactant_slots[0], r.reactant_slots[1]],
                        products,
                        prefactor: 1.0 / r.stoichiometry.reactant_factorial(),
                        kernel,
                        placement: r.placement.clone(),
                    });
                }
                1 => {
                    let rate = grid.from_fn(|x| r.kernel.eval(&[x]).expect("first-order kernel"));
                    let split = match &r.placement {
                        PlacementSpec::OneToTwo { separation, choices } => {
                            let (a, b) = unbinding_stencils(&grid, &separation.quadrature(grid.dim), choices);
                            Some((Convolver::new(grid, a), Convolver::new(grid, b)))
                        }
                        _ => None,
                    };
                    terms.push(Term::FirstOrder { reactant: r.reactant_slots[0], products, rate, split });
                }
                _ => {
                    let rate = r.kernel.bound();
                    let shape = match &r.placement {
                        PlacementSpec::Birth { shape } => shape.clone(),
                        _ => SpatialShape::Uniform,
                    };
                    let density = shape_density(&grid, &network.domain, &shape, rate);
                    terms.push(Term::Source { product: products[0], density });
                }
            }
        }
        let m = network.mollifier();
        let mollifier = (mollify && m.eta >= 0.5 * grid.h())
            .then(|| Stencil::for_mollifier(&grid, &m).map(|s| Convolver::new(grid, s)))
            .transpose()?;
        Ok(Self { grid, n_species: network.species.len(), terms, mollifier })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn placed(&self, f: Vec<f64>) -> Vec<f64> {
        match &self.mollifier {
            Some(m) => m.apply(&f),
            None => f,
        }
    }

    /// Reaction contribution to `∂ρ/∂t` for every species.
    pub fn rhs(&self, rho: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.grid.len();
        let mut out = vec![vec![0.0; n]; self.n_species];
        let add = |out: &mut Vec<Vec<f64>>, s: usize, v: &[f64], c: f64| {
            for (o, x) in out[s].iter_mut().zip(v) {
                *o += c * x;
            }
        };
        for term in &self.terms {
            match term {
                Term::Bimolecular { slots, products, prefactor, kernel, placement } => {
                    let [i, k] = *slots;
                    let li = bimolecular_loss(&rho[i], &rho[k], kernel);
                    let lk = bimolecular_loss(&rho[k], &rho[i], kernel);
                    add(&mut out, i, &li, -prefactor);
                    add(&mut out, k, &lk, -prefactor);
                    match placement {
                        PlacementSpec::TwoToOne { choices } => {
                            let g = binding_gain(&self.grid, &rho[i], &rho[k], kernel, choices);
                            add(&mut out, products[0], &self.placed(g), *prefactor);
                        }
                        PlacementSpec::TwoToTwo { p_identity } => {
                            let p = *p_identity;
                            let first: Vec<f64> = li.iter().zip(&lk).map(|(a, b)| p * a + (1.0 - p) * b).collect();
                            let second: Vec<f64> = li.iter().zip(&lk).map(|(a, b)| (1.0 - p) * a + p * b).collect();
                            add(&mut out, products[0], &self.placed(first), *prefactor);
                            add(&mut out, products[1], &self.placed(second), *prefactor);
                        }
                        _ => {}
                    }
                }
                Term::FirstOrder { reactant, products, rate, split } => match split {
                    Some((a, b)) => {
                        let (gi, gk, loss) = unbinding_terms(&rho[*reactant], rate, a, b);
                        add(&mut out, *reactant, &loss, -1.0);
                        add(&mut out, products[0], &self.placed(gi), 1.0);
                        add(&mut out, products[1], &self.placed(gk), 1.0);
                    }
                    None => {
                        let loss = first_order_terms(&rho[*reactant], rate);
                        add(&mut out, *reactant, &loss, -1.0);
                        if let Some(&p) = products.first() {
                            add(&mut out, p, &self.placed(loss), 1.0);
                        }
                    }
                },
                Term::Source { product, density } => add(&mut out, *product, density, 1.0),
            }
        }
        out
    }
}

fn shape_density(grid: &Grid, domain: &crate::model::Domain, shape: &SpatialShape, amount: f64) -> Vec<f64> {
    match shape {
        SpatialShape::Point { at } => {
            let mut f = vec![0.0; grid.len()];
            grid.deposit(&mut f, at, amount);
            f
        }
        _ => grid.from_fn(|x| amount * shape.density(domain, x).unwrap_or(0.0)),
    }
}

/// Initial concentrations `amount · shape density` on a grid.
pub fn initial_fields(network: &ReactionNetwork, grid: Grid) -> GridField {
    let names = network.species.iter().map(|s| s.name.clone()).collect();
    let mut f = GridField::zeros(grid, names);
    for (j, s) in network.species.iter().enumerate() {
        if let Some(init) = &s.initial {
            f.data[j] = shape_density(&grid, &network.domain, &init.shape, init.amount);
        }
    }
    f
}

/// Grid matching the network box with `n` nodes per axis.
pub fn grid_for(network: &ReactionNetwork, n: usize) -> Result<Grid, PideError> {
    Ok(Grid::new(network.dim(), n, network.domain.length)?)
}

/// Clips negative entries; logs when they exceed `1e-12 · max`.
fn clip(field: &mut [f64], time: f64, species: &str) -> Result<(), PideError> {
    let mut max = 0.0f64;
    let mut min = 0.0f64;
    for &v in field.iter() {
        if !v.is_finite() {
            return Err(PideError::NonFinite { time });
        }
        max = max.max(v);
        min = min.min(v);
    }
    if min < 0.0 {
        if -min > 1e-12 * max {
            log::debug!("t = {time}: clipped negative density {min:e} in species {species}");
        }
        field.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Ok(())
}

/// Solves the mean-field system from `initial` and returns the fields at
/// `cfg.record_times`.
pub fn pide_solve(network: &ReactionNetwork, initial: GridField, cfg: &PideConfig) -> Result<Vec<GridField>, PideError> {
    if !(cfg.dt > 0.0 && cfg.t_end >= 0.0) {
        return Err(PideError::InvalidConfig(format!("need dt > 0 and t_end >= 0, got {} and {}", cfg.dt, cfg.t_end)));
    }
    let grid = initial.grid;
    if grid.dim != network.dim() || (grid.length - network.domain.length).abs() > 1e-12 * grid.length {
        return Err(PideError::InvalidConfig("grid does not match the network box".into()));
    }
    let plan = ReactionTermPlan::new(network, grid, cfg.mollify)?;
    let diffusers: Vec<Diffuser> =
        network.species.iter().map(|s| Diffuser::new(grid, s.diffusivity, cfg.diffusion)).collect();
    if cfg.diffusion == DiffusionScheme::Explicit {
        for d in &diffusers {
            if d.d > 0.0 && cfg.dt > d.cfl_limit() {
                return Err(PideError::Cfl { dt: cfg.dt, limit: d.cfl_limit() });
            }
        }
    }
    let steps = (cfg.t_end / cfg.dt).round() as u64;
    let mut record_steps = Vec::new();
    for &t in &cfg.record_times {
        let s = (t / cfg.dt).round();
        if (s * cfg.dt - t).abs() > 1e-9 * t.max(1.0) || s as u64 > steps {
            return Err(PideError::InvalidConfig(format!("record time {t} is not a step of dt = {} within t_end", cfg.dt)));
        }
        record_steps.push(s as u64);
    }

    let mut rho = initial.data.clone();
    let names = initial.species.clone();
    let mut out = Vec::new();
    let snapshot = |rho: &[Vec<f64>], t: f64| GridField { grid, time: t, species: names.clone(), data: rho.to_vec() };
    for _ in record_steps.iter().filter(|&&s| s == 0) {
        out.push(snapshot(&rho, 0.0));
    }
    let half = 0.5 * cfg.dt;
    for step in 1..=steps {
        let t = step as f64 * cfg.dt;
        for (f, d) in rho.iter_mut().zip(&diffusers) {
            d.step(f, half)?;
        }
        let k1 = plan.rhs(&rho);
        let mid: Vec<Vec<f64>> =
            rho.iter().zip(&k1).map(|(r, k)| r.iter().zip(k).map(|(a, b)| a + cfg.dt * b).collect()).collect();
        let k2 = plan.rhs(&mid);
        for ((r, a), b) in rho.iter_mut().zip(&k1).zip(&k2) {
            for ((v, x), y) in r.iter_mut().zip(a).zip(b) {
                *v += half * (x + y);
            }
        }
        for (f, d) in rho.iter_mut().zip(&diffusers) {
            d.step(f, half)?;
        }
        for (f, name) in rho.iter_mut().zip(&names) {
            clip(f, t, name)?;
        }
        for _ in record_steps.iter().filter(|&&s| s == step) {
            out.push(snapshot(&rho, t));
        }
    }
    Ok(out)
}

/// Effective well-mixed rate of a second-order kernel: `∫ K` over the box.
pub fn box_integral(kernel: &RateKernel, network: &ReactionNetwork) -> f64 {
    kernel.integral(network.dim()).unwrap_or_else(|| kernel.bound() * network.domain.volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_network;

    #[test]
    fn constant_field_is_unchanged() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        for scheme in [DiffusionScheme::Explicit, DiffusionScheme::CrankNicolson] {
            let mut f = vec![2.5; g.len()];
            diffusion_step(&g, &mut f, 0.1, 1e-4, scheme).unwrap();
            assert!(f.iter().all(|&v| (v - 2.5).abs() < 1e-13));
        }
    }

    #[test]
    fn explicit_cfl_guard() {
        let g = Grid::new(1, 100, 1.0).unwrap();
        let mut f = vec![0.0; 100];
        let err = diffusion_step(&g, &mut f, 1.0, 1e-3, DiffusionScheme::Explicit).unwrap_err();
        assert!(matches!(err, PideError::Cfl { .. }));
    }

    #[test]
    fn gaussian_variance_growth() {
        let g = Grid::new(1, 400, 8.0).unwrap();
        let s0 = 0.3f64;
        let mut f = g.from_fn(|x| (-x[0] * x[0] / (2.0 * s0 * s0)).exp());
        let m0 = g.integrate(&f);
        let d = Diffuser::new(g, 0.5, DiffusionScheme::CrankNicolson);
        let (dt, n) = (0.01, 50);
        for _ in 0..n {
            d.step(&mut f, dt).unwrap();
        }
        let m = g.integrate(&f);
        let var = g.integrate(&g.from_fn(|x| x[0] * x[0]).iter().zip(&f).map(|(a, b)| a * b).collect::<Vec<_>>()) / m;
        assert!((m - m0).abs() < 1e-12 * m0);
        // discrete heat flow grows the variance by exactly 2 D t; O(h^2) from the initial sampling
        assert!((var - (s0 * s0 + 2.0 * 0.5 * dt * n as f64)).abs() < 1e-4, "var={var}");
    }

    const DECAY: &str = r#"
[system]
dim = 1
gamma = 1
box_length = 1
[species.A]
D = 0.1
initial = { amount = 1, shape = { type = "gaussian", center = [0.0], sigma = 0.1 } }
[species.B]
D = 0.0
[[reaction]]
reactants = ["A"]
products = ["B"]
kernel = { type = "constant", rate = 1.5 }
"#;

    #[test]
    fn first_order_decay_is_exponential() {
        let net = parse_network(DECAY).unwrap();
        let g = grid_for(&net, 64).unwrap();
        let cfg = PideConfig { grid: 64, dt: 1e-3, t_end: 1.0, record_times: vec![1.0], ..Default::default() };
        let out = pide_solve(&net, initial_fields(&net, g), &cfg).unwrap();
        let a = out[0].mass(0);
        let b = out[0].mass(1);
        assert!((a - (-1.5f64).exp()).abs() < 1e-6, "a={a}");
        assert!((a + b - 1.0).abs() < 1e-12);
    }
}
