use super::domain::{Domain, SpatialShape};
use super::kernel::{scale_kernel, RateKernel};
use super::mollifier::Mollifier;
use super::placement::PlacementSpec;
use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    /// Total molar amount `N_j / γ` at time zero.
    pub amount: f64,
    pub shape: SpatialShape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    pub diffusivity: f64,
    pub initial: Option<InitialCondition>,
}

/// Reactant and product counts per species (`α_ℓ`, `β_ℓ`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stoichiometry {
    pub reactants: Vec<u32>,
    pub products: Vec<u32>,
}

impl Stoichiometry {
    /// Builds counts from species-index lists, e.g. `[a, a]` for `2A`.
    pub fn from_slots(n_species: usize, reactants: &[usize], products: &[usize]) -> Self {
        let mut r = vec![0; n_species];
        let mut p = vec![0; n_species];
        for &s in reactants {
            r[s] += 1;
        }
        for &s in products {
            p[s] += 1;
        }
        Self { reactants: r, products: p }
    }

    pub fn reactant_order(&self) -> usize {
        self.reactants.iter().map(|&c| c as usize).sum()
    }

    pub fn product_order(&self) -> usize {
        self.products.iter().map(|&c| c as usize).sum()
    }

    /// `α!` = Π_j α_j!.
    pub fn reactant_factorial(&self) -> f64 {
        self.reactants.iter().map(|&c| (1..=c).product::<u32>() as f64).product()
    }

    /// Net change `β - α` per species.
    pub fn net(&self) -> Vec<i64> {
        self.reactants.iter().zip(&self.products).map(|(&a, &b)| b as i64 - a as i64).collect()
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.reactant_order() > 2 || self.product_order() > 2 {
            return Err(ModelError::InvalidParameter(
                "at most two reactants and two products per reaction".into(),
            ));
        }
        if self.reactant_order() == 0 && self.product_order() == 0 {
            return Err(ModelError::InvalidParameter("reaction has neither reactants nor products".into()));
        }
        Ok(())
    }

    /// True when the reaction can only increase the population:
    /// no reactants, or products strictly containing the reactants.
    pub fn is_growth(&self) -> bool {
        if self.reactant_order() == 0 {
            return true;
        }
        let contains = self.products.iter().zip(&self.reactants).all(|(&b, &a)| b >= a);
        contains && self.products != self.reactants
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub name: String,
    /// Reactant species in slot order (one entry per reactant particle).
    pub reactant_slots: Vec<usize>,
    /// Product species in slot order.
    pub product_slots: Vec<usize>,
    pub stoichiometry: Stoichiometry,
    /// Unscaled kernel `K_ℓ`.
    pub kernel: RateKernel,
    pub placement: PlacementSpec,
}

impl Reaction {
    pub fn order(&self) -> usize {
        self.reactant_slots.len()
    }

    /// Kernel value on a reactant tuple; the arity must match the order.
    pub fn kernel_value(&self, positions: &[&[f64]]) -> Result<f64, ModelError> {
        if positions.len() != self.order() {
            return Err(ModelError::ArityMismatch { expected: self.order(), got: positions.len() });
        }
        self.kernel.eval(positions)
    }

    /// Both reactants of the same species.
    pub fn is_homodimeric(&self) -> bool {
        self.order() == 2 && self.reactant_slots[0] == self.reactant_slots[1]
    }
}

/// A validated reaction network together with its system parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
    /// System size `γ`.
    pub gamma: f64,
    /// Placement mollification range `η`.
    pub eta: f64,
    pub domain: Domain,
    pub allow_growth: bool,
    /// Cap `C(μ)` on the total molar amount, if any.
    pub max_amount: Option<f64>,
}

impl ReactionNetwork {
    /// Checks all invariants; returns the network unchanged on success.
    pub fn validated(self) -> Result<Self, ModelError> {
        let loc = |i: usize, r: &Reaction| format!("reaction[{i}] ({})", r.name);
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ModelError::at("system.gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(ModelError::at("system.eta", format!("must be >= 0, got {}", self.eta)));
        }
        if let Some(m) = self.max_amount {
            if !(m > 0.0) {
                return Err(ModelError::at("system.max_amount", format!("must be positive, got {m}")));
            }
        }
        let n = self.species.len();
        for (i, s) in self.species.iter().enumerate() {
            let here = format!("species.{}", s.name);
            if self.species[..i].iter().any(|o| o.name == s.name) {
                return Err(ModelError::at(here, "duplicate species name"));
            }
            if !(s.diffusivity >= 0.0 && s.diffusivity.is_finite()) {
                return Err(ModelError::at(here, format!("diffusivity must be >= 0, got {}", s.diffusivity)));
            }
            if let Some(init) = &s.initial {
                if !(init.amount >= 0.0 && init.amount.is_finite()) {
                    return Err(ModelError::at(here, "initial amount must be >= 0"));
                }
                init.shape.validate(self.domain.dim).map_err(|e| e.located(&here))?;
            }
        }
        for (i, r) in self.reactions.iter().enumerate() {
            let here = loc(i, r);
            if let Some(&bad) = r.reactant_slots.iter().chain(&r.product_slots).find(|&&s| s >= n) {
                return Err(ModelError::UnknownSpecies { location: here, name: format!("#{bad}") });
            }
            if Stoichiometry::from_slots(n, &r.reactant_slots, &r.product_slots) != r.stoichiometry {
                return Err(ModelError::at(here, "stoichiometry does not match slots"));
            }
            r.stoichiometry.validate().map_err(|e| e.located(&here))?;
            r.kernel.validate(r.order()).map_err(|e| e.located(&here))?;
            if !r.placement.shape_matches(r.order(), r.product_slots.len()) {
                return Err(ModelError::at(
                    here,
                    format!(
                        "placement {:?} does not fit a {}-to-{} reaction",
                        placement_name(&r.placement),
                        r.order(),
                        r.product_slots.len()
                    ),
                ));
            }
            r.placement.validate(self.domain.dim).map_err(|e| e.located(&here))?;
            if r.stoichiometry.is_growth() {
                if self.allow_growth {
                    log::warn!("{here}: reaction can grow the population without bound; allowed by allow_growth");
                } else {
                    return Err(ModelError::Growth { location: here });
                }
            }
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn mollifier(&self) -> Mollifier {
        Mollifier::new(self.domain.dim, self.eta)
    }

    /// `K^γ_ℓ = γ^(1-|α|) K_ℓ`.
    pub fn scaled_kernel(&self, reaction: usize) -> RateKernel {
        let r = &self.reactions[reaction];
        let factor = scale_kernel(1.0, self.gamma, r.order()).expect("validated network");
        r.kernel.scaled(factor)
    }

    /// Initial particle counts `round(γ · amount)`.
    pub fn initial_counts(&self) -> Vec<usize> {
        self.species
            .iter()
            .map(|s| s.initial.as_ref().map_or(0, |i| (self.gamma * i.amount).round() as usize))
            .collect()
    }

    /// Integer basis of the conserved linear combinations of counts
    /// (left null space of the net stoichiometry matrix).
    pub fn conservation_laws(&self) -> Vec<Vec<i64>> {
        let nets: Vec<Vec<i64>> = self.reactions.iter().map(|r| r.stoichiometry.net()).collect();
        integer_null_space(&nets, self.species.len())
    }
}

fn placement_name(p: &PlacementSpec) -> &'static str {
    match p {
        PlacementSpec::None => "none",
        PlacementSpec::OneToOne => "one_to_one",
        PlacementSpec::TwoToOne { .. } => "two_to_one",
        PlacementSpec::TwoToTwo { .. } => "two_to_two",
        PlacementSpec::OneToTwo { .. } => "one_to_two",
        PlacementSpec::Birth { .. } => "birth",
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Integer vectors `c` with `c · row = 0` for every row, reduced by gcd.
fn integer_null_space(rows: &[Vec<i64>], n: usize) -> Vec<Vec<i64>> {
    // fraction-free row reduction of the L x n matrix
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..m.len()).find(|&i| m[i][col] != 0) else { continue };
        m.swap(row, p);
        for i in 0..m.len() {
            if i != row && m[i][col] != 0 {
                let (a, b) = (m[row][col], m[i][col]);
                for k in 0..n {
                    m[i][k] = a * m[i][k] - b * m[row][k];
                }
                let g = m[i].iter().fold(0, |g, &v| gcd(g, v));
                if g > 1 {
                    m[i].iter_mut().for_each(|v| *v /= g);
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::new();
    for &f in &free {
        // x_f = L, x_pivot = -L m[r][f] / m[r][pivot]
        let l = pivots.iter().enumerate().fold(1i128, |acc, (r, &pc)| {
            let d = m[r][pc].abs();
            acc / gcd(acc, d) * d
        });
        let mut v = vec![0i128; n];
        v[f] = l;
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -l * m[r][f] / m[r][pc];
        }
        let g = v.iter().fold(0, |g, &x| gcd(g, x));
        let mut v: Vec<i64> = v.iter().map(|&x| (x / g.max(1)) as i64).collect();
        if v.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        basis.push(v);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_abc() {
        // A + B -> C, C -> A + B
        let rows = vec![vec![-1, -1, 1], vec![1, 1, -1]];
        let ns = integer_null_space(&rows, 3);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            for r in &rows {
                assert_eq!(v.iter().zip(r).map(|(a, b)| a * b).sum::<i64>(), 0);
            }
        }
        // a + b + 2c lies in the span
        assert!(ns.contains(&vec![1, 0, 1]) && ns.contains(&vec![1, -1, 0]));
    }

    #[test]
    fn null_space_dimerization_and_decay() {
        let ns = integer_null_space(&[vec![-2, 1], vec![2, -1]], 2);
        assert_eq!(ns, vec![vec![1, 2]]);
        assert!(integer_null_space(&[vec![-1]], 1).is_empty());
        // no reactions: every unit vector is conserved
        assert_eq!(integer_null_space(&[], 2).len(), 2);
    }

    #[test]
    fn growth_screen() {
        let s = Stoichiometry::from_slots(1, &[0], &[0, 0]);
        assert!(s.is_growth());
        assert!(Stoichiometry::from_slots(1, &[], &[0]).is_growth());
        assert!(!Stoichiometry::from_slots(2, &[0], &[1, 1]).is_growth());
        assert!(!Stoichiometry::from_slots(2, &[0, 1], &[1, 0]).is_growth());
        assert_eq!(Stoichiometry::from_slots(1, &[0, 0], &[]).reactant_factorial(), 2.0);
    }
}
