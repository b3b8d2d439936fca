//! Forward Kolmogorov equation of the Doi model for `A + B ⇌ C` with a few
//! particles.
//!
//! The probability state is a family of densities `p^(a,b,c)` over the
//! positions of `a` A, `b` B and `c` C particles, one per sector of the
//! conserved chain `a + c = a₀ + c₀`, `b + c = b₀ + c₀`. Each density is stored
//! as a full tensor on the product grid and is symmetric under exchange of
//! particles of the same species; the probability of a sector is
//! `(1 / (a! b! c!)) ∫ p^(a,b,c)`.
//!
//! Time stepping is Strang split: exact periodic heat flow on the grid (FFT)
//! for half a step, then a reaction step that removes `p (1 - e^{-Σ K τ})`
//! from each configuration and deposits it into the neighbouring sectors by
//! reaction channel, then heat flow for another half step. Product positions
//! are collocated on the grid with cloud-in-cell weights; placements are not
//! mollified.

use rustfft::num_complex::Complex64;

use crate::field::{laplacian_symbol, FftNd, Grid, GridField, Stencil};
use crate::model::{Domain, ModelError, PlacementSpec, ReactionNetwork, SpatialShape, WeightedAlpha};

#[derive(Debug, thiserror::Error)]
pub enum KolmogorovError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unsupported network: {0}")]
    Unsupported(String),
    #[error("sector ({a},{b},{c}) needs {dims} grid dimensions; at most 4 are allowed")]
    TooLarge { a: usize, b: usize, c: usize, dims: usize },
    #[error("invalid solver setting: {0}")]
    InvalidConfig(String),
}

/// Largest tensor rank `d (a + b + c)` accepted.
pub const MAX_GRID_DIMS: usize = 4;

/// Discretized `A + B ⇌ C` model on a periodic grid.
#[derive(Debug, Clone)]
pub struct KolmogorovModel {
    pub grid: Grid,
    pub domain: Domain,
    /// Network species indices of A, B and C.
    pub species: [usize; 3],
    pub diffusivity: [f64; 3],
    /// Binding rate `K₁(x - y)` indexed by the periodic node offset.
    pair_rate: Vec<f64>,
    binding: Vec<WeightedAlpha>,
    /// Dissociation rate `K₂(z)` per node (empty when irreversible).
    unbinding_rate: Vec<f64>,
    unbinding: Vec<WeightedAlpha>,
    separation: Vec<(Vec<f64>, f64)>,
    initial: [usize; 3],
    initial_shapes: [SpatialShape; 3],
}

impl KolmogorovModel {
    /// Builds the model from a network with reactions `A + B -> C`
    /// (two-to-one placement) and optionally `C -> A + B` (one-to-two).
    /// Rates are the scaled `K^γ`.
    pub fn from_network(network: &ReactionNetwork, n: usize) -> Result<Self, KolmogorovError> {
        let unsupported = |m: &str| Err(KolmogorovError::Unsupported(m.to_string()));
        if network.species.len() != 3 {
            return unsupported("exactly three species A, B, C are required");
        }
        let mut bind = None;
        let mut unbind = None;
        for (l, r) in network.reactions.iter().enumerate() {
            match (&r.placement, r.order(), r.product_slots.len()) {
                (PlacementSpec::TwoToOne { .. }, 2, 1) if bind.is_none() => bind = Some(l),
                (PlacementSpec::OneToTwo { .. }, 1, 2) if unbind.is_none() => unbind = Some(l),
                _ => return unsupported(&format!("reaction `{}` is not part of A + B <-> C", r.name)),
            }
        }
        let Some(bind) = bind else { return unsupported("no binding reaction A + B -> C") };
        let rb = &network.reactions[bind];
        let (a, b, c) = (rb.reactant_slots[0], rb.reactant_slots[1], rb.product_slots[0]);
        if a == b || c == a || c == b {
            return unsupported("binding must involve three distinct species");
        }
        let PlacementSpec::TwoToOne { choices: binding } = rb.placement.clone() else { unreachable!() };

        let grid = Grid::new(network.dim(), n, network.domain.length)?;
        let kernel = network.scaled_kernel(bind);
        let stencil = Stencil::for_kernel(&grid, &kernel)?;
        let inv = 1.0 / grid.cell_volume();
        let mut pair_rate = vec![0.0; grid.len()];
        for (off, w) in &stencil.entries {
            pair_rate[grid.shifted(0, off)] += w * inv;
        }

        let (mut unbinding_rate, mut unbinding, mut separation) = (Vec::new(), Vec::new(), Vec::new());
        if let Some(u) = unbind {
            let ru = &network.reactions[u];
            if ru.reactant_slots[0] != c {
                return unsupported("dissociation must consume C");
            }
            let PlacementSpec::OneToTwo { separation: sep, choices } = &ru.placement else { unreachable!() };
            // products are (A, B) in slot order; swap roles otherwise
            unbinding = match (ru.product_slots[0], ru.product_slots[1]) {
                (x, y) if x == a && y == b => choices.clone(),
                (x, y) if x == b && y == a => {
                    choices.iter().map(|w| WeightedAlpha { p: w.p, alpha: 1.0 - w.alpha }).collect()
                }
                _ => return unsupported("dissociation must produce A and B"),
            };
            let k = network.scaled_kernel(u);
            unbinding_rate = grid.from_fn(|x| k.eval(&[x]).expect("first-order kernel"));
            separation = sep.quadrature(grid.dim);
        }
        let counts = network.initial_counts();
        let shape = |j: usize| {
            network.species[j].initial.as_ref().map_or(SpatialShape::Uniform, |i| i.shape.clone())
        };
        let model = Self {
            grid,
            domain: network.domain,
            species: [a, b, c],
            diffusivity: [a, b, c].map(|j| network.species[j].diffusivity),
            pair_rate,
            binding,
            unbinding_rate,
            unbinding,
            separation,
            initial: [counts[a], counts[b], counts[c]],
            initial_shapes: [shape(a), shape(b), shape(c)],
        };
        for (sa, sb, sc) in model.sectors() {
            let dims = grid.dim * (sa + sb + sc);
            if dims > MAX_GRID_DIMS {
                return Err(KolmogorovError::TooLarge { a: sa, b: sb, c: sc, dims });
            }
        }
        Ok(model)
    }

    pub fn reversible(&self) -> bool {
        !self.unbinding_rate.is_empty()
    }

    /// Sectors reachable from the initial counts.
    pub fn sectors(&self) -> Vec<(usize, usize, usize)> {
        let [a0, b0, c0] = self.initial;
        let (na, nb) = (a0 + c0, b0 + c0);
        let lo = if self.reversible() { 0 } else { c0 };
        (lo..=na.min(nb)).map(|c| (na - c, nb - c, c)).collect()
    }

    /// Product of the initial single-particle densities in the initial sector.
    pub fn initial_state(&self) -> FockState {
        let mut state = self.zero_state();
        let g = &self.grid;
        let marg: Vec<Vec<f64>> = self
            .initial_shapes
            .iter()
            .map(|shape| {
                let mut f = match shape {
                    SpatialShape::Point { at } => {
                        let mut f = vec![0.0; g.len()];
                        g.deposit(&mut f, at, 1.0);
                        f
                    }
                    s => g.from_fn(|x| s.density(&self.domain, x).unwrap_or(0.0)),
                };
                let m = g.integrate(&f);
                f.iter_mut().for_each(|v| *v /= m);
                f
            })
            .collect();
        let [a0, b0, c0] = self.initial;
        let k = state.sectors.iter().position(|s| (s.a, s.b, s.c) == (a0, b0, c0)).unwrap();
        let sector = &mut state.sectors[k];
        let weight = factorial(a0) * factorial(b0) * factorial(c0);
        let m = g.len();
        let n = sector.particles();
        let species: Vec<usize> = (0..n).map(|q| sector.species_of(q)).collect();
        for (i, v) in sector.data.iter_mut().enumerate() {
            let mut p = weight;
            for (q, &sp) in species.iter().enumerate() {
                let node = (i / m.pow((n - 1 - q) as u32)) % m;
                p *= marg[sp][node];
            }
            *v = p;
        }
        state
    }

    pub fn zero_state(&self) -> FockState {
        let m = self.grid.len();
        FockState {
            grid: self.grid,
            time: 0.0,
            sectors: self
                .sectors()
                .into_iter()
                .map(|(a, b, c)| Sector { a, b, c, data: vec![0.0; m.pow((a + b + c) as u32)] })
                .collect(),
        }
    }

    fn sector_index(&self, state: &FockState, a: usize, b: usize, c: usize) -> Option<usize> {
        state.sectors.iter().position(|s| (s.a, s.b, s.c) == (a, b, c))
    }

    fn offset_index(&self, x: usize, y: usize) -> usize {
        let g = &self.grid;
        let (ix, iy) = (g.unflatten(x), g.unflatten(y));
        let n = g.n;
        (0..g.dim).fold(0, |acc, k| acc * n + (ix[k] + n - iy[k]) % n)
    }

    /// Removes reacting probability and deposits it into the product sectors.
    /// With `tau = None` adds the reaction generator applied to `input` to `out`;
    /// otherwise performs an exact-sink step of length `tau` into `out`.
    fn react(&self, input: &FockState, out: &mut FockState, tau: Option<f64>) {
        let g = &self.grid;
        let m = g.len();
        let h_d = g.cell_volume();
        let dim = g.dim;
        for (si, sec) in input.sectors.iter().enumerate() {
            let (a, b, c) = (sec.a, sec.b, sec.c);
            let n = a + b + c;
            let bind_target = if a > 0 && b > 0 { self.sector_index(out, a - 1, b - 1, c + 1) } else { None };
            let unbind_target =
                if c > 0 && self.reversible() { self.sector_index(out, a + 1, b + 1, c - 1) } else { None };
            let mut nodes = vec![0usize; n];
            let mut target = vec![0usize; n + 1];
            for (i, &v) in sec.data.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                for (q, node) in nodes.iter_mut().enumerate() {
                    *node = (i / m.pow((n - 1 - q) as u32)) % m;
                }
                let mut total = 0.0;
                for l in 0..a {
                    for k in 0..b {
                        total += self.pair_rate[self.offset_index(nodes[l], nodes[a + k])];
                    }
                }
                if self.reversible() {
                    for k in 0..c {
                        total += self.unbinding_rate[nodes[a + b + k]];
                    }
                }
                if total == 0.0 {
                    continue;
                }
                // amount per unit channel rate
                let (removed, per_rate) = match tau {
                    Some(t) => {
                        let r = -v * (-total * t).exp_m1();
                        (r, r / total)
                    }
                    None => (v * total, v),
                };
                out.sectors[si].data[i] -= removed;

                if let Some(ti) = bind_target {
                    for l in 0..a {
                        for k in 0..b {
                            let rate = self.pair_rate[self.offset_index(nodes[l], nodes[a + k])];
                            if rate == 0.0 {
                                continue;
                            }
                            let amount = per_rate * rate * h_d / (a * b) as f64;
                            let x = g.node(nodes[l]);
                            let y = g.node(nodes[a + k]);
                            // remaining A, remaining B, then C with the product inserted
                            let mut base = Vec::with_capacity(n - 1);
                            base.extend((0..a).filter(|&j| j != l).map(|j| nodes[j]));
                            base.extend((0..b).filter(|&j| j != k).map(|j| nodes[a + j]));
                            let fixed = base.len();
                            for ch in &self.binding {
                                let z: Vec<f64> = (0..dim)
                                    .map(|d| ch.alpha * x[d] + (1.0 - ch.alpha) * (x[d] + self.domain.delta(x[d], y[d])))
                                    .collect();
                                for (zn, w) in g.cic(&z) {
                                    for pos in 0..=c {
                                        target[..fixed].copy_from_slice(&base);
                                        let cs = &nodes[a + b..];
                                        let mut t = fixed;
                                        for (j, &cn) in cs.iter().enumerate() {
                                            if j == pos {
                                                target[t] = zn;
                                                t += 1;
                                            }
                                            target[t] = cn;
                                            t += 1;
                                        }
                                        if pos == c {
                                            target[t] = zn;
                                            t += 1;
                                        }
                                        let idx = tensor_index(&target[..t], m);
                                        out.sectors[ti].data[idx] += amount * ch.p * w;
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(ti) = unbind_target {
                    for k in 0..c {
                        let rate = self.unbinding_rate[nodes[a + b + k]];
                        if rate == 0.0 {
                            continue;
                        }
                        let amount = per_rate * rate / (h_d * c as f64);
                        let z = g.node(nodes[a + b + k]);
                        let rest_c: Vec<usize> = (0..c).filter(|&j| j != k).map(|j| nodes[a + b + j]).collect();
                        for ch in &self.unbinding {
                            for (w, omega) in &self.separation {
                                let x: Vec<f64> = (0..dim).map(|d| z[d] + (1.0 - ch.alpha) * w[d]).collect();
                                let y: Vec<f64> = (0..dim).map(|d| z[d] - ch.alpha * w[d]).collect();
                                let (cx, cy) = (g.cic(&x), g.cic(&y));
                                for &(xn, wx) in &cx {
                                    for &(yn, wy) in &cy {
                                        let amt = amount * ch.p * omega * wx * wy;
                                        if amt == 0.0 {
                                            continue;
                                        }
                                        for pa in 0..=a {
                                            for pb in 0..=b {
                                                let mut t = 0;
                                                for j in 0..=a {
                                                    if j == pa {
                                                        target[t] = xn;
                                                        t += 1;
                                                    }
                                                    if j < a {
                                                        target[t] = nodes[j];
                                                        t += 1;
                                                    }
                                                }
                                                for j in 0..=b {
                                                    if j == pb {
                                                        target[t] = yn;
                                                        t += 1;
                                                    }
                                                    if j < b {
                                                        target[t] = nodes[a + j];
                                                        t += 1;
                                                    }
                                                }
                                                for &cn in &rest_c {
                                                    target[t] = cn;
                                                    t += 1;
                                                }
                                                let idx = tensor_index(&target[..t], m);
                                                out.sectors[ti].data[idx] += amt;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// `(L + R⁺ + R⁻) p` with the second-order central Laplacian.
    pub fn apply_generator_adjoint(&self, state: &FockState) -> FockState {
        let mut out = self.zero_state();
        out.time = state.time;
        let g = &self.grid;
        let (n1, h2) = (g.n, g.h() * g.h());
        for (s, o) in state.sectors.iter().zip(out.sectors.iter_mut()) {
            let axes = g.dim * s.particles();
            for axis in 0..axes {
                let d = self.diffusivity[s.species_of(axis / g.dim)];
                if d == 0.0 {
                    continue;
                }
                let stride = n1.pow((axes - 1 - axis) as u32);
                for (i, out_v) in o.data.iter_mut().enumerate() {
                    let pos = (i / stride) % n1;
                    let up = if pos + 1 == n1 { i + stride - n1 * stride } else { i + stride };
                    let down = if pos == 0 { i + (n1 - 1) * stride } else { i - stride };
                    *out_v += d * (s.data[up] - 2.0 * s.data[i] + s.data[down]) / h2;
                }
            }
        }
        self.react(state, &mut out, None);
        out
    }

    fn diffuse(&self, state: &mut FockState, tau: f64) {
        let g = &self.grid;
        let factors: Vec<Vec<f64>> = self
            .diffusivity
            .iter()
            .map(|&d| (0..g.n).map(|k| (tau * d * laplacian_symbol(k, g.n, g.h())).exp()).collect())
            .collect();
        for s in state.sectors.iter_mut() {
            let axes = g.dim * s.particles();
            if axes == 0 {
                continue;
            }
            let fft = FftNd::new(&vec![g.n; axes]);
            let mut buf: Vec<Complex64> = s.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.forward(&mut buf);
            for (i, b) in buf.iter_mut().enumerate() {
                let mut f = 1.0;
                let mut rem = i;
                for axis in (0..axes).rev() {
                    f *= factors[s.species_of(axis / g.dim)][rem % g.n];
                    rem /= g.n;
                }
                *b *= f;
            }
            fft.inverse(&mut buf);
            let mut min = 0.0f64;
            let mut max = 0.0f64;
            for (v, b) in s.data.iter_mut().zip(buf) {
                min = min.min(b.re);
                max = max.max(b.re);
                *v = b.re.max(0.0);
            }
            if min < -1e-10 * max {
                log::warn!("sector ({},{},{}): clipped negative density {min:e}", s.a, s.b, s.c);
            }
        }
    }

    /// One Strang step of length `dt`.
    pub fn step(&self, state: &mut FockState, dt: f64) {
        self.diffuse(state, 0.5 * dt);
        let mut out = state.clone();
        self.react(state, &mut out, Some(dt));
        *state = out;
        self.diffuse(state, 0.5 * dt);
        state.time += dt;
    }
}

fn tensor_index(nodes: &[usize], m: usize) -> usize {
    nodes.iter().fold(0, |acc, &q| acc * m + q)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    /// Row-major over particles `A_1..A_a, B_1..B_b, C_1..C_c`, each a grid node.
    pub data: Vec<f64>,
}

impl Sector {
    pub fn particles(&self) -> usize {
        self.a + self.b + self.c
    }

    /// 0, 1, 2 for A, B, C at particle slot `q`.
    pub fn species_of(&self, q: usize) -> usize {
        if q < self.a {
            0
        } else if q < self.a + self.b {
            1
        } else {
            2
        }
    }

    pub fn weight(&self) -> f64 {
        1.0 / (factorial(self.a) * factorial(self.b) * factorial(self.c))
    }
}

/// Sector densities at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub grid: Grid,
    pub time: f64,
    pub sectors: Vec<Sector>,
}

impl FockState {
    /// `(1/(a!b!c!)) ∫ p^(a,b,c)`.
    pub fn sector_mass(&self, k: usize) -> f64 {
        let s = &self.sectors[k];
        let vol = self.grid.cell_volume().powi(s.particles() as i32);
        crate::field::pairwise_sum(&s.data) * vol * s.weight()
    }

    pub fn masses(&self) -> Vec<((usize, usize, usize), f64)> {
        (0..self.sectors.len()).map(|k| ((self.sectors[k].a, self.sectors[k].b, self.sectors[k].c), self.sector_mass(k))).collect()
    }

    pub fn normalization(&self) -> f64 {
        (0..self.sectors.len()).map(|k| self.sector_mass(k)).sum()
    }

    pub fn mass_of(&self, a: usize, b: usize, c: usize) -> f64 {
        self.sectors.iter().position(|s| (s.a, s.b, s.c) == (a, b, c)).map_or(0.0, |k| self.sector_mass(k))
    }

    pub fn min_entry(&self) -> f64 {
        self.sectors.iter().flat_map(|s| s.data.iter().copied()).fold(f64::INFINITY, f64::min)
    }
}

/// Recorded output of [`solve_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct KolmogorovTrajectory {
    pub times: Vec<f64>,
    /// Sector masses per recorded time, in sector order.
    pub masses: Vec<Vec<f64>>,
    pub sectors: Vec<(usize, usize, usize)>,
    pub states: Vec<FockState>,
}

/// Integrates from `initial` to `t_end`, recording at every multiple of
/// `record_every` steps (and the end). States are kept when `keep_states`.
pub fn solve_forward(
    model: &KolmogorovModel,
    initial: FockState,
    dt: f64,
    t_end: f64,
    record_every: usize,
    keep_states: bool,
) -> Result<KolmogorovTrajectory, KolmogorovError> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(KolmogorovError::InvalidConfig(format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    let every = record_every.max(1);
    let mut state = initial;
    let sectors = state.sectors.iter().map(|s| (s.a, s.b, s.c)).collect();
    let mut traj = KolmogorovTrajectory { times: Vec::new(), masses: Vec::new(), sectors, states: Vec::new() };
    let record = |s: &FockState, traj: &mut KolmogorovTrajectory| {
        traj.times.push(s.time);
        traj.masses.push((0..s.sectors.len()).map(|k| s.sector_mass(k)).collect());
        if keep_states {
            traj.states.push(s.clone());
        }
    };
    record(&state, &mut traj);
    for step in 1..=steps {
        model.step(&mut state, dt);
        state.time = step as f64 * dt;
        if step % every == 0 || step == steps {
            record(&state, &mut traj);
        }
    }
    Ok(traj)
}

/// Mean number densities `⟨A(x)⟩, ⟨B(x)⟩, ⟨C(x)⟩` (expected particles per unit volume).
pub fn field_expectations(state: &FockState, names: [&str; 3]) -> GridField {
    let g = state.grid;
    let m = g.len();
    let mut f = GridField::zeros(g, names.iter().map(|s| s.to_string()).collect());
    f.time = state.time;
    for s in &state.sectors {
        let n = s.particles();
        let rest = g.cell_volume().powi(n as i32 - 1);
        for (sp, (count, first)) in [(s.a, 0), (s.b, s.a), (s.c, s.a + s.b)].into_iter().enumerate() {
            if count == 0 {
                continue;
            }
            let coef = count as f64 * s.weight() * rest;
            let stride = m.pow((n - 1 - first) as u32);
            for (i, &v) in s.data.iter().enumerate() {
                f.data[sp][(i / stride) % m] += coef * v;
            }
        }
    }
    f
}

/// `⟨A(x) B(y)⟩` on the product grid, row-major in `(x, y)`.
pub fn pair_correlation(state: &FockState) -> Vec<f64> {
    let g = state.grid;
    let m = g.len();
    let mut out = vec![0.0; m * m];
    for s in &state.sectors {
        if s.a == 0 || s.b == 0 {
            continue;
        }
        let n = s.particles();
        let coef = (s.a * s.b) as f64 * s.weight() * g.cell_volume().powi(n as i32 - 2);
        let sa = m.pow((n - 1) as u32);
        let sb = m.pow((n - 1 - s.a) as u32);
        for (i, &v) in s.data.iter().enumerate() {
            out[((i / sa) % m) * m + (i / sb) % m] += coef * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_network;

    fn network(reversible: bool, a0: u32, b0: u32) -> ReactionNetwork {
        let mut text = format!(
            r#"
[system]
dim = 1
gamma = 1
box_length = 1
[species.A]
D = 1
initial = {{ amount = {a0}, shape = {{ type = "gaussian", center = [-0.2], sigma = 0.05 }} }}
[species.B]
D = 1
initial = {{ amount = {b0}, shape = {{ type = "gaussian", center = [0.2], sigma = 0.05 }} }}
[species.C]
D = 0.5
[[reaction]]
reactants = ["A", "B"]
products = ["C"]
kernel = {{ type = "doi", rate = 5, radius = 0.1 }}
placement = {{ type = "two_to_one", choices = [{{ p = 0.5, alpha = 0.3 }}, {{ p = 0.5, alpha = 1.0 }}] }}
"#
        );
        if reversible {
            text.push_str(
                r#"
[[reaction]]
reactants = ["C"]
products = ["A", "B"]
kernel = { type = "constant", rate = 2 }
placement = { type = "one_to_two", separation = { type = "point", radius = 0.05 }, choices = [{ p = 1, alpha = 0.5 }] }
"#,
            );
        }
        parse_network(&text).unwrap()
    }

    #[test]
    fn irreversible_pair_has_two_sectors() {
        let m = KolmogorovModel::from_network(&network(false, 1, 1), 32).unwrap();
        assert_eq!(m.sectors(), vec![(1, 1, 0), (0, 0, 1)]);
        let r = KolmogorovModel::from_network(&network(true, 1, 1), 32).unwrap();
        assert_eq!(r.sectors(), vec![(1, 1, 0), (0, 0, 1)]);
    }

    #[test]
    fn dimension_guard() {
        let err = KolmogorovModel::from_network(&network(true, 3, 2), 8).unwrap_err();
        assert!(matches!(err, KolmogorovError::TooLarge { .. }));
    }

    #[test]
    fn generator_conserves_probability() {
        for rev in [false, true] {
            let model = KolmogorovModel::from_network(&network(rev, 2, 1), 12).unwrap();
            let mut p = model.initial_state();
            // spread mass into every sector first
            for _ in 0..20 {
                model.step(&mut p, 0.01);
            }
            let dp = model.apply_generator_adjoint(&p);
            let flux: f64 = (0..dp.sectors.len()).map(|k| dp.sector_mass(k)).sum();
            let scale: f64 = dp.sectors.iter().flat_map(|s| s.data.iter()).map(|v| v.abs()).fold(0.0, f64::max);
            assert!(flux.abs() < 1e-12 * scale.max(1.0), "flux={flux}");
        }
    }

    #[test]
    fn survival_is_monotone_and_normalized() {
        let model = KolmogorovModel::from_network(&network(false, 1, 1), 64).unwrap();
        let t = solve_forward(&model, model.initial_state(), 2e-3, 0.5, 10, false).unwrap();
        let s: Vec<f64> = t.masses.iter().map(|m| m[0]).collect();
        assert!(s.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(s.last().unwrap() < &0.99);
        for m in &t.masses {
            assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn expectations_match_sector_counts() {
        let model = KolmogorovModel::from_network(&network(true, 2, 1), 16).unwrap();
        let mut p = model.initial_state();
        let f0 = field_expectations(&p, ["A", "B", "C"]);
        assert!((f0.mass(0) - 2.0).abs() < 1e-12 && (f0.mass(1) - 1.0).abs() < 1e-12);
        for _ in 0..30 {
            model.step(&mut p, 0.01);
        }
        let f = field_expectations(&p, ["A", "B", "C"]);
        let expected_a: f64 = p.masses().iter().map(|((a, _, _), m)| *a as f64 * m).sum();
        let expected_c: f64 = p.masses().iter().map(|((_, _, c), m)| *c as f64 * m).sum();
        assert!((f.mass(0) - expected_a).abs() < 1e-12);
        assert!((f.mass(2) - expected_c).abs() < 1e-12);
        assert!(p.min_entry() >= 0.0);
        let corr = pair_correlation(&p);
        let total: f64 = corr.iter().sum::<f64>() * p.grid.cell_volume().powi(2);
        let expected_ab: f64 = p.masses().iter().map(|((a, b, _), m)| (a * b) as f64 * m).sum();
        assert!((total - expected_ab).abs() < 1e-12);
    }
}
