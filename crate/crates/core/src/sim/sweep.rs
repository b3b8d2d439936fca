use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::model::{Boundary, Domain, RateKernel, ReactionNetwork};
use crate::particles::ParticleState;
use crate::rng::keyed_uniform;

use super::{Event, SimError};

/// How second-order candidates are found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborSearch {
    /// Cell lists when the kernel has compact support and at least three
    /// cells fit along each axis, otherwise all pairs.
    #[default]
    Auto,
    BruteForce,
}

/// Uniform cell grid over the box holding particle indices of one species.
struct CellList {
    per_axis: usize,
    cell_len: f64,
    half: f64,
    cells: Vec<Vec<usize>>,
}

impl CellList {
    fn build(domain: &Domain, positions: &[f64], min_cell: f64) -> Option<Self> {
        let per_axis = (domain.length / min_cell).floor() as usize;
        if per_axis < 3 {
            return None;
        }
        let d = domain.dim;
        let mut list = Self {
            per_axis,
            cell_len: domain.length / per_axis as f64,
            half: domain.half(),
            cells: vec![Vec::new(); per_axis.pow(d as u32)],
        };
        for (i, x) in positions.chunks_exact(d).enumerate() {
            let c = list.cell_of(x);
            list.cells[c].push(i);
        }
        Some(list)
    }

    fn axis_index(&self, x: f64) -> usize {
        (((x + self.half) / self.cell_len).floor().max(0.0) as usize).min(self.per_axis - 1)
    }

    fn cell_of(&self, x: &[f64]) -> usize {
        x.iter().fold(0, |acc, &c| acc * self.per_axis + self.axis_index(c))
    }

    /// Cells within one step of the cell containing `x`, each listed once.
    fn neighbours(&self, x: &[f64], periodic: bool, out: &mut Vec<usize>) {
        out.clear();
        let d = x.len();
        let n = self.per_axis as i64;
        let base: Vec<i64> = x.iter().map(|&c| self.axis_index(c) as i64).collect();
        'corner: for k in 0..3usize.pow(d as u32) {
            let mut rem = k;
            let mut flat = 0usize;
            for &b in &base {
                let mut i = b + (rem % 3) as i64 - 1;
                rem /= 3;
                if periodic {
                    i = i.rem_euclid(n);
                } else if i < 0 || i >= n {
                    continue 'corner;
                }
                flat = flat * self.per_axis + i as usize;
            }
            out.push(flat);
        }
    }
}

/// A candidate that passed its acceptance test.
#[derive(Debug, Clone, Copy)]
struct Fired {
    reaction: usize,
    key: (u64, u64),
    members: [(usize, usize); 2],
    arity: usize,
}

/// Candidate uniform for a reactant tuple, independent of enumeration order.
fn accept(seed: u64, step: u64, reaction: usize, ids: &[u64], rate: f64, dt: f64) -> bool {
    if rate <= 0.0 {
        return false;
    }
    let mut words = [step, reaction as u64, 0, 0];
    words[2..2 + ids.len()].copy_from_slice(ids);
    let p = -(-rate * dt).exp_m1();
    keyed_uniform(seed, &words[..2 + ids.len()]) < p
}

/// Enumerates reactant pairs `(i in s1, j in s2)` with separation inside the
/// kernel support; same-species pairs are listed once with `i < j`.
fn for_each_pair(
    state: &ParticleState,
    s1: usize,
    s2: usize,
    support: Option<f64>,
    search: NeighborSearch,
    mut f: impl FnMut(usize, usize, f64),
) {
    let dom = &state.domain;
    let d = dom.dim;
    let (p1, p2) = (&state.positions[s1], &state.positions[s2]);
    let same = s1 == s2;
    let cutoff2 = support.map(|r| r * r);
    let mut visit = |i: usize, j: usize| {
        let r2 = dom.distance2(&p1[i * d..(i + 1) * d], &p2[j * d..(j + 1) * d]);
        if cutoff2.is_none_or(|c| r2 <= c) {
            f(i, j, r2.sqrt());
        }
    };
    let cells = match (search, support) {
        (NeighborSearch::Auto, Some(r)) if r > 0.0 => CellList::build(dom, p2, r),
        _ => None,
    };
    match cells {
        Some(cl) => {
            let periodic = dom.boundary == Boundary::Periodic;
            let mut nb = Vec::with_capacity(27);
            for (i, x) in p1.chunks_exact(d).enumerate() {
                cl.neighbours(x, periodic, &mut nb);
                for &c in &nb {
                    for &j in &cl.cells[c] {
                        if !same || i < j {
                            visit(i, j);
                        }
                    }
                }
            }
        }
        None => {
            let n2 = p2.len() / d;
            for i in 0..p1.len() / d {
                let start = if same { i + 1 } else { 0 };
                for j in start..n2 {
                    visit(i, j);
                }
            }
        }
    }
}

/// One reaction sweep at the current (post-diffusion) positions.
///
/// Every admissible reactant tuple fires with probability
/// `1 - exp(-K^γ dt)`. Fired tuples are processed in random order, a particle
/// reacts at most once per step, and products are inserted after the sweep.
/// `seed` keys the candidate uniforms; `rng` drives the ordering, placements
/// and zeroth-order reactions.
#[allow(clippy::too_many_arguments)]
pub fn reaction_sweep<R: Rng + ?Sized>(
    state: &mut ParticleState,
    network: &ReactionNetwork,
    kernels: &[RateKernel],
    dt: f64,
    step: u64,
    seed: u64,
    search: NeighborSearch,
    rng: &mut R,
) -> Result<Vec<Event>, SimError> {
    if dt <= 0.0 {
        return Ok(Vec::new());
    }
    let d = state.dim();
    let mut fired: Vec<Fired> = Vec::new();
    for (l, r) in network.reactions.iter().enumerate() {
        let k = &kernels[l];
        match r.order() {
            1 => {
                let s = r.reactant_slots[0];
                for (i, &id) in state.ids[s].iter().enumerate() {
                    let rate = match k {
                        RateKernel::Constant { rate } => *rate,
                        _ => k.eval(&[state.position(s, i)])?,
                    };
                    if accept(seed, step, l, &[id], rate, dt) {
                        fired.push(Fired { reaction: l, key: (id, 0), members: [(s, i), (0, 0)], arity: 1 });
                    }
                }
            }
            2 => {
                let (s1, s2) = (r.reactant_slots[0], r.reactant_slots[1]);
                let ids1 = &state.ids[s1];
                let ids2 = &state.ids[s2];
                for_each_pair(state, s1, s2, k.support(), search, |i, j, dist| {
                    let (a, b) = (ids1[i], ids2[j]);
                    // unordered same-species pairs: slot order by id
                    let (key, members) = if s1 == s2 && b < a {
                        ((b, a), [(s2, j), (s1, i)])
                    } else {
                        ((a, b), [(s1, i), (s2, j)])
                    };
                    if accept(seed, step, l, &[key.0, key.1], k.at_distance(dist), dt) {
                        fired.push(Fired { reaction: l, key, members, arity: 2 });
                    }
                });
            }
            _ => {}
        }
    }
    fired.sort_unstable_by_key(|f| (f.reaction, f.key));
    fired.shuffle(rng);

    let mollifier = network.mollifier();
    let dom = state.domain;
    let mut consumed: Vec<Vec<bool>> = state.ids.iter().map(|v| vec![false; v.len()]).collect();
    let mut pending: Vec<(Event, Vec<usize>)> = Vec::new();
    for f in &fired {
        let members = &f.members[..f.arity];
        if members.iter().any(|&(s, i)| consumed[s][i]) {
            continue;
        }
        for &(s, i) in members {
            consumed[s][i] = true;
        }
        let first = state.position(members[0].0, members[0].1).to_vec();
        let mut positions = vec![first];
        if f.arity == 2 {
            let other = state.position(members[1].0, members[1].1);
            positions.push(dom.unwrap_near(&positions[0], other));
        }
        let refs: Vec<&[f64]> = positions.iter().map(Vec::as_slice).collect();
        let r = &network.reactions[f.reaction];
        let products = r.placement.sample(&refs, &mollifier, &dom, rng)?;
        let event = Event {
            time: state.time,
            reaction: f.reaction,
            consumed: members.iter().map(|&(s, i)| state.ids[s][i]).collect(),
            reactant_positions: members.iter().map(|&(s, i)| state.position(s, i).to_vec()).collect(),
            products: products.into_iter().map(|x| (0, x)).collect(),
        };
        pending.push((event, r.product_slots.clone()));
    }
    // zeroth-order reactions: Poisson number of births per step
    for (l, r) in network.reactions.iter().enumerate() {
        if r.order() != 0 {
            continue;
        }
        let mean = kernels[l].bound() * dt;
        if mean <= 0.0 {
            continue;
        }
        let n = Poisson::new(mean).map_err(|e| SimError::InvalidConfig(e.to_string()))?.sample(rng) as u64;
        for _ in 0..n {
            let products = r.placement.sample(&[], &mollifier, &dom, rng)?;
            let event = Event {
                time: state.time,
                reaction: l,
                consumed: Vec::new(),
                reactant_positions: Vec::new(),
                products: products.into_iter().map(|x| (0, x)).collect(),
            };
            pending.push((event, r.product_slots.clone()));
        }
    }

    for (s, flags) in consumed.iter().enumerate() {
        if flags.iter().any(|&c| c) {
            state.remove_flagged(s, flags);
        }
    }
    let mut events = Vec::with_capacity(pending.len());
    for (mut event, slots) in pending {
        for ((id, x), &s) in event.products.iter_mut().zip(&slots) {
            *id = state.push(s, x);
            let p = state.count(s) - 1;
            x.copy_from_slice(state.position(s, p));
        }
        debug_assert!(event.products.iter().all(|(_, x)| x.len() == d));
        events.push(event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_network;
    use crate::rng::sim_rng;

    fn network(box_length: f64) -> ReactionNetwork {
        parse_network(&format!(
            r#"
[system]
dim = 2
gamma = 1
box_length = {box_length}
[species.A]
D = 1
[species.B]
D = 1
[species.C]
D = 1
[[reaction]]
reactants = ["A", "B"]
products = ["C"]
kernel = {{ type = "doi", rate = 50.0, radius = 0.1 }}
placement = {{ type = "two_to_one", choices = [{{ p = 1.0, alpha = 0.5 }}] }}
[[reaction]]
reactants = ["A", "A"]
kernel = {{ type = "doi", rate = 50.0, radius = 0.1 }}
"#
        ))
        .unwrap()
    }

    fn random_state(net: &ReactionNetwork, n: usize, seed: u64) -> ParticleState {
        let mut rng = sim_rng(seed);
        let mut s = ParticleState::new(net.domain, 3);
        for _ in 0..n {
            for j in 0..2 {
                let x: Vec<f64> = (0..2).map(|_| (rng.random::<f64>() - 0.5) * net.domain.length).collect();
                s.push(j, &x);
            }
        }
        s
    }

    #[test]
    fn cell_list_matches_brute_force() {
        let net = network(2.0);
        let kernels: Vec<_> = (0..2).map(|l| net.scaled_kernel(l)).collect();
        for seed in 0..5 {
            let base = random_state(&net, 400, seed);
            let mut a = base.clone();
            let mut b = base.clone();
            let ea = reaction_sweep(&mut a, &net, &kernels, 0.05, 3, seed, NeighborSearch::Auto, &mut sim_rng(9)).unwrap();
            let eb =
                reaction_sweep(&mut b, &net, &kernels, 0.05, 3, seed, NeighborSearch::BruteForce, &mut sim_rng(9))
                    .unwrap();
            assert!(!ea.is_empty());
            assert_eq!(ea, eb);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn separated_pair_never_fires() {
        let net = network(2.0);
        let kernels: Vec<_> = (0..2).map(|l| net.scaled_kernel(l)).collect();
        let mut s = ParticleState::new(net.domain, 3);
        s.push(0, &[0.0, 0.0]);
        s.push(1, &[0.2, 0.0]);
        for step in 0..1000 {
            let ev = reaction_sweep(&mut s, &net, &kernels, 1.0, step, 1, NeighborSearch::Auto, &mut sim_rng(step))
                .unwrap();
            assert!(ev.is_empty());
        }
    }

    #[test]
    fn pair_across_periodic_boundary_fires() {
        let net = network(2.0);
        let kernels: Vec<_> = (0..2).map(|l| net.scaled_kernel(l)).collect();
        let mut s = ParticleState::new(net.domain, 3);
        s.push(0, &[-0.98, 0.0]);
        s.push(1, &[0.98, 0.0]);
        // probability 1 - e^-50 per step
        let ev = reaction_sweep(&mut s, &net, &kernels, 1.0, 0, 1, NeighborSearch::Auto, &mut sim_rng(1)).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(s.count(2), 1);
        // product at the midpoint of the nearest images
        assert!((s.position(2, 0)[0].abs() - 1.0).abs() < 1e-12);
    }
}
