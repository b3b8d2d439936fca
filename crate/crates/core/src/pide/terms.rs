//! Reaction terms of the mean-field equations on a periodic grid.
//!
//! Second-order kernels enter through their cell-averaged stencil `S`, so
//! `(K ⋆ ρ)(x) = Σ_m S_m ρ(x + m h)`. For a binding reaction with product
//! placed at `α x + (1 - α) y`, the gain at `z` is
//! `Σ_n p_n ∫ K(w) ρ_i(z + (1 - α_n) w) ρ_k(z - α_n w) dw`, evaluated per
//! stencil offset by linear interpolation of `ρ_i(· + m h) ρ_k(·)` at
//! `z - α_n m h`.

use crate::field::{Convolver, Grid, Stencil};
use crate::model::WeightedAlpha;

/// `ρ_i (K ⋆ ρ_k)`: loss rate density of the species in the first slot.
pub fn bimolecular_loss(rho_i: &[f64], rho_k: &[f64], kernel: &Convolver) -> Vec<f64> {
    let c = kernel.apply(rho_k);
    rho_i.iter().zip(c).map(|(a, b)| a * b).collect()
}

/// Gain density of the product of `S_i + S_k -> S_p` with product placed at
/// `α x_i + (1 - α) x_k`, branch `n` taken with probability `p_n`.
pub fn binding_gain(
    grid: &Grid,
    rho_i: &[f64],
    rho_k: &[f64],
    kernel: &Convolver,
    choices: &[WeightedAlpha],
) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for c in choices {
        if c.p == 0.0 {
            continue;
        }
        // product on one of the reactants: local form
        if c.alpha == 1.0 || c.alpha == 0.0 {
            let term =
                if c.alpha == 1.0 { bimolecular_loss(rho_i, rho_k, kernel) } else { bimolecular_loss(rho_k, rho_i, kernel) };
            for (o, t) in out.iter_mut().zip(term) {
                *o += c.p * t;
            }
            continue;
        }
        let h = grid.h();
        for (m, s) in &kernel.stencil().entries {
            let shift: Vec<f64> = m.iter().map(|&mi| -c.alpha * mi as f64 * h).collect();
            let corners = Stencil::from_points(grid, &[(shift, 1.0)]);
            let weight = c.p * s;
            for (off, w) in &corners.entries {
                let off_i: Vec<i64> = off.iter().zip(m).map(|(a, b)| a + b).collect();
                for (x, o) in out.iter_mut().enumerate() {
                    let y = grid.shifted(x, off);
                    let yi = grid.shifted(x, &off_i);
                    *o += weight * w * rho_i[yi] * rho_k[y];
                }
            }
        }
    }
    out
}

/// Stencils of the two product marginals of `S_c -> S_i + S_k` for the
/// separation quadrature `(w_q, ω_q)`: products at `z + (1 - α) w` and `z - α w`.
pub fn unbinding_stencils(
    grid: &Grid,
    quadrature: &[(Vec<f64>, f64)],
    choices: &[WeightedAlpha],
) -> (Stencil, Stencil) {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for c in choices {
        for (w, omega) in quadrature {
            first.push((w.iter().map(|&v| -(1.0 - c.alpha) * v).collect(), c.p * omega));
            second.push((w.iter().map(|&v| c.alpha * v).collect(), c.p * omega));
        }
    }
    (Stencil::from_points(grid, &first), Stencil::from_points(grid, &second))
}

/// `(gain_i, gain_k, loss_c)` for dissociation with local rate `k2` per node.
pub fn unbinding_terms(
    rho_c: &[f64],
    k2: &[f64],
    first: &Convolver,
    second: &Convolver,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let loss = first_order_terms(rho_c, k2);
    (first.apply(&loss), second.apply(&loss), loss)
}

/// Local first-order loss `k(x) ρ(x)`.
pub fn first_order_terms(rho: &[f64], k: &[f64]) -> Vec<f64> {
    rho.iter().zip(k).map(|(r, k)| r * k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RateKernel, SeparationDensity};

    fn doi(grid: &Grid) -> Convolver {
        Convolver::new(*grid, Stencil::for_kernel(grid, &RateKernel::Doi { rate: 2.0, radius: 0.1 }).unwrap())
    }

    #[test]
    fn homogeneous_loss_and_gain() {
        let g = Grid::new(1, 64, 2.0).unwrap();
        let k = doi(&g);
        let a = vec![0.7; 64];
        let b = vec![1.3; 64];
        let expect = 2.0 * 0.2 * 0.7 * 1.3;
        for v in bimolecular_loss(&a, &b, &k) {
            assert!((v - expect).abs() < 1e-13);
        }
        let choices = [WeightedAlpha { p: 0.3, alpha: 0.5 }, WeightedAlpha { p: 0.7, alpha: 0.2 }];
        for v in binding_gain(&g, &a, &b, &k, &choices) {
            assert!((v - expect).abs() < 1e-13);
        }
        assert!(bimolecular_loss(&a, &[0.0; 64], &k).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_on_reactant_matches_symmetrised_local_form() {
        let g = Grid::new(1, 64, 2.0).unwrap();
        let k = doi(&g);
        let a = g.from_fn(|x| (-(x[0] - 0.2).powi(2) / 0.1).exp());
        let b = g.from_fn(|x| 1.0 + 0.5 * (3.0 * x[0]).sin());
        let choices = [WeightedAlpha { p: 0.5, alpha: 0.0 }, WeightedAlpha { p: 0.5, alpha: 1.0 }];
        let gain = binding_gain(&g, &a, &b, &k, &choices);
        let la = bimolecular_loss(&a, &b, &k);
        let lb = bimolecular_loss(&b, &a, &k);
        for i in 0..64 {
            assert!((gain[i] - 0.5 * (la[i] + lb[i])).abs() < 1e-13);
        }
        // the general path agrees at interior alpha values arbitrarily close to 1
        let near = binding_gain(&g, &a, &b, &k, &[WeightedAlpha { p: 1.0, alpha: 1.0 - 1e-12 }]);
        for i in 0..64 {
            assert!((near[i] - la[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn binding_gain_conserves_mass() {
        let g = Grid::new(2, 24, 2.0).unwrap();
        let k = doi(&g);
        let a = g.from_fn(|x| (-(x[0] * x[0] + x[1] * x[1]) / 0.2).exp());
        let b = g.from_fn(|x| 1.0 + 0.5 * (3.0 * x[0]).cos() * x[1].sin());
        let gain = binding_gain(&g, &a, &b, &k, &[WeightedAlpha { p: 1.0, alpha: 0.37 }]);
        let loss = bimolecular_loss(&a, &b, &k);
        assert!((g.integrate(&gain) - g.integrate(&loss)).abs() < 1e-12 * g.integrate(&loss));
    }

    #[test]
    fn unbinding_mass_balance() {
        let g = Grid::new(1, 128, 4.0).unwrap();
        let sep = SeparationDensity::PointMass { radius: 0.5 };
        let (s1, s2) = unbinding_stencils(&g, &sep.quadrature(1), &[WeightedAlpha { p: 1.0, alpha: 0.5 }]);
        let (c1, c2) = (Convolver::new(g, s1), Convolver::new(g, s2));
        let rho = g.from_fn(|x| (-(x[0] * x[0]) / 0.01).exp());
        let k2 = vec![0.8; 128];
        let (gi, gk, loss) = unbinding_terms(&rho, &k2, &c1, &c2);
        let m = 0.8 * g.integrate(&rho);
        assert!((g.integrate(&loss) - m).abs() < 1e-13);
        assert!((g.integrate(&gi) - m).abs() < 1e-13);
        assert!((g.integrate(&gk) - m).abs() < 1e-13);
        // bumps at ±r/2: node 64 is x = 0, h = 1/32, so ±0.25 is ±8 nodes
        let peak = gi.iter().cloned().fold(0.0, f64::max);
        assert!((gi[56] - peak).abs() < 1e-12 * peak && (gi[72] - peak).abs() < 1e-12 * peak);
        let zero = vec![0.0; 128];
        let (a, b, c) = unbinding_terms(&zero, &k2, &c1, &c2);
        assert!(a.iter().chain(&b).chain(&c).all(|&v| v == 0.0));
    }
}
