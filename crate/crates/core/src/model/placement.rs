use rand::Rng;
use statrs::function::gamma::gamma_lr;

use super::domain::{sphere_area, Domain, SpatialShape};
use super::mollifier::{unit_vector, Mollifier};
use super::ModelError;

const WEIGHT_TOL: f64 = 1e-9;

/// One branch of a segment placement: taken with probability `p`, the
/// product sits at `alpha·x + (1 - alpha)·y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedAlpha {
    pub p: f64,
    pub alpha: f64,
}

/// Density `ρ(|w|)` of the product separation vector `w = x - y` for
/// unbinding reactions, normalized so that `∫_{R^d} ρ(|w|) dw = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparationDensity {
    /// `|w| = radius` with uniform direction.
    PointMass { radius: f64 },
    /// `ρ ∝ exp(-|w|²/2σ²)` restricted to `|w| <= cutoff`.
    TruncatedGaussian { sigma: f64, cutoff: f64 },
    /// Piecewise-linear CDF of `|w|` through `(radii[i], cdf[i])`.
    Tabulated { radii: Vec<f64>, cdf: Vec<f64> },
}

impl SeparationDensity {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            SeparationDensity::PointMass { radius } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(ModelError::InvalidParameter(format!(
                        "separation radius must be >= 0, got {radius}"
                    )));
                }
            }
            SeparationDensity::TruncatedGaussian { sigma, cutoff } => {
                if !(*sigma > 0.0 && *cutoff > 0.0 && sigma.is_finite() && cutoff.is_finite()) {
                    return Err(ModelError::InvalidParameter(
                        "gaussian separation needs positive sigma and cutoff".into(),
                    ));
                }
            }
            SeparationDensity::Tabulated { radii, cdf } => {
                if radii.len() < 2 || radii.len() != cdf.len() {
                    return Err(ModelError::InvalidParameter(
                        "tabulated separation needs >= 2 matching radii and cdf values".into(),
                    ));
                }
                if radii[0] < 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ModelError::InvalidParameter(
                        "tabulated separation radii must be non-negative and increasing".into(),
                    ));
                }
                if cdf.windows(2).any(|w| w[1] < w[0]) || cdf[0] < 0.0 {
                    return Err(ModelError::InvalidParameter(
                        "tabulated separation cdf must be non-decreasing from >= 0".into(),
                    ));
                }
                if cdf[0].abs() > WEIGHT_TOL || (cdf[cdf.len() - 1] - 1.0).abs() > WEIGHT_TOL {
                    return Err(ModelError::Unnormalized(format!(
                        "tabulated separation cdf must run from 0 to 1, got {} .. {}",
                        cdf[0],
                        cdf[cdf.len() - 1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest possible separation.
    pub fn max_radius(&self) -> f64 {
        match self {
            SeparationDensity::PointMass { radius } => *radius,
            SeparationDensity::TruncatedGaussian { cutoff, .. } => *cutoff,
            SeparationDensity::Tabulated { radii, .. } => radii[radii.len() - 1],
        }
    }

    /// `P(|w| <= r)`.
    pub fn radial_cdf(&self, dim: usize, r: f64) -> f64 {
        match self {
            SeparationDensity::PointMass { radius } => {
                if r >= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            SeparationDensity::TruncatedGaussian { sigma, cutoff } => {
                let r = r.clamp(0.0, *cutoff);
                let a = 0.5 * dim as f64;
                let chi = |x: f64| if x <= 0.0 { 0.0 } else { gamma_lr(a, 0.5 * x * x / (sigma * sigma)) };
                chi(r) / chi(*cutoff)
            }
            SeparationDensity::Tabulated { radii, cdf } => {
                if r <= radii[0] {
                    return cdf[0];
                }
                if r >= radii[radii.len() - 1] {
                    return 1.0;
                }
                let i = radii.partition_point(|&x| x < r);
                let t = (r - radii[i - 1]) / (radii[i] - radii[i - 1]);
                cdf[i - 1] + t * (cdf[i] - cdf[i - 1])
            }
        }
    }

    /// Inverse of [`radial_cdf`](Self::radial_cdf).
    pub fn radial_quantile(&self, dim: usize, u: f64) -> f64 {
        match self {
            SeparationDensity::PointMass { radius } => *radius,
            SeparationDensity::Tabulated { radii, cdf } => {
                let i = cdf.partition_point(|&c| c < u).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[i - 1], cdf[i]);
                if c1 <= c0 {
                    return radii[i];
                }
                let t = ((u - c0) / (c1 - c0)).clamp(0.0, 1.0);
                radii[i - 1] + t * (radii[i] - radii[i - 1])
            }
            SeparationDensity::TruncatedGaussian { cutoff, .. } => {
                let (mut lo, mut hi) = (0.0, *cutoff);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if self.radial_cdf(dim, mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// `ρ(r)` as a density on `R^d`; `None` for the point mass.
    pub fn density(&self, dim: usize, r: f64) -> Option<f64> {
        match self {
            SeparationDensity::PointMass { .. } => None,
            SeparationDensity::TruncatedGaussian { sigma, cutoff } => {
                if r > *cutoff {
                    return Some(0.0);
                }
                let a = 0.5 * dim as f64;
                let mass = gamma_lr(a, 0.5 * cutoff * cutoff / (sigma * sigma));
                let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-a) / mass;
                Some(norm * (-0.5 * r * r / (sigma * sigma)).exp())
            }
            SeparationDensity::Tabulated { radii, cdf } => {
                if r < radii[0] || r > radii[radii.len() - 1] {
                    return Some(0.0);
                }
                let i = radii.partition_point(|&x| x < r).clamp(1, radii.len() - 1);
                let radial = (cdf[i] - cdf[i - 1]) / (radii[i] - radii[i - 1]);
                let shell = sphere_area(dim) * r.powi(dim as i32 - 1);
                Some(if shell > 0.0 { radial / shell } else { 0.0 })
            }
        }
    }

    pub fn sample_radius<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> f64 {
        match self {
            SeparationDensity::PointMass { radius } => *radius,
            _ => self.radial_quantile(dim, rng.random()),
        }
    }

    /// Nodes `w_q ∈ R^d` with positive weights summing to one that
    /// discretize the separation distribution: equal-mass radial quantiles
    /// times a reflection-symmetric angular rule.
    pub fn quadrature(&self, dim: usize) -> Vec<(Vec<f64>, f64)> {
        let radial: Vec<(f64, f64)> = match self {
            SeparationDensity::PointMass { radius } => vec![(*radius, 1.0)],
            _ => {
                let m = 64;
                (0..m)
                    .map(|k| (self.radial_quantile(dim, (k as f64 + 0.5) / m as f64), 1.0 / m as f64))
                    .collect()
            }
        };
        let dirs = angular_rule(dim);
        let mut nodes = Vec::with_capacity(radial.len() * dirs.len());
        for &(r, wr) in &radial {
            if r == 0.0 {
                nodes.push((vec![0.0; dim], wr));
                continue;
            }
            for (dir, wa) in &dirs {
                nodes.push((dir.iter().map(|c| c * r).collect(), wr * wa));
            }
        }
        nodes
    }
}

/// Unit directions and weights, symmetric under coordinate reflections.
pub fn angular_rule(dim: usize) -> Vec<(Vec<f64>, f64)> {
    use std::f64::consts::PI;
    match dim {
        1 => vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)],
        2 => {
            let n = 16;
            (0..n)
                .map(|k| {
                    let th = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                    (vec![th.cos(), th.sin()], 1.0 / n as f64)
                })
                .collect()
        }
        3 => {
            // Gauss-Legendre in cos(theta) x midpoint rule in phi
            let gl = [
                (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
                (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
                (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
                (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
            ];
            let nphi = 8;
            let mut out = Vec::new();
            for (ct, wt) in gl {
                let st = (1.0f64 - ct * ct).sqrt();
                for k in 0..nphi {
                    let ph = 2.0 * PI * (k as f64 + 0.5) / nphi as f64;
                    out.push((vec![st * ph.cos(), st * ph.sin(), ct], 0.5 * wt / nphi as f64));
                }
            }
            out
        }
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Where the products of a reaction are put.
#[derive(Debug, Clone, PartialEq)]
pub enum PlacementSpec {
    /// No products.
    None,
    /// `S_i → S_j`: product at the reactant.
    OneToOne,
    /// `S_i + S_k → S_j`: product on the segment between the reactants.
    TwoToOne { choices: Vec<WeightedAlpha> },
    /// `S_i + S_k → S_j + S_r`: with probability `p_identity` products take
    /// the reactant positions in order, otherwise swapped.
    TwoToTwo { p_identity: f64 },
    /// `S_i → S_j + S_k`: separation from `separation`, weighted centre at
    /// the reactant.
    OneToTwo { separation: SeparationDensity, choices: Vec<WeightedAlpha> },
    /// `∅ → S_j`: product drawn from `shape`.
    Birth { shape: SpatialShape },
}

impl PlacementSpec {
    /// Expected `(reactant order, product order)` of the reaction shape.
    pub fn shape_matches(&self, reactants: usize, products: usize) -> bool {
        match self {
            PlacementSpec::None => products == 0 && reactants > 0,
            PlacementSpec::OneToOne => reactants == 1 && products == 1,
            PlacementSpec::TwoToOne { .. } => reactants == 2 && products == 1,
            PlacementSpec::TwoToTwo { .. } => reactants == 2 && products == 2,
            PlacementSpec::OneToTwo { .. } => reactants == 1 && products == 2,
            PlacementSpec::Birth { .. } => reactants == 0 && products == 1,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), ModelError> {
        let check_choices = |choices: &[WeightedAlpha]| -> Result<(), ModelError> {
            if choices.is_empty() {
                return Err(ModelError::Unnormalized("placement needs at least one choice".into()));
            }
            for c in choices {
                if !(0.0..=1.0).contains(&c.p) || !(0.0..=1.0).contains(&c.alpha) {
                    return Err(ModelError::InvalidParameter(format!(
                        "placement choice p={} alpha={} outside [0, 1]",
                        c.p, c.alpha
                    )));
                }
            }
            let total: f64 = choices.iter().map(|c| c.p).sum();
            if (total - 1.0).abs() > WEIGHT_TOL {
                return Err(ModelError::Unnormalized(format!(
                    "placement probabilities sum to {total}, expected 1"
                )));
            }
            Ok(())
        };
        match self {
            PlacementSpec::None | PlacementSpec::OneToOne => Ok(()),
            PlacementSpec::TwoToOne { choices } => check_choices(choices),
            PlacementSpec::TwoToTwo { p_identity } => {
                if (0.0..=1.0).contains(p_identity) {
                    Ok(())
                } else {
                    Err(ModelError::InvalidParameter(format!(
                        "two_to_two p must lie in [0, 1], got {p_identity}"
                    )))
                }
            }
            PlacementSpec::OneToTwo { separation, choices } => {
                separation.validate()?;
                check_choices(choices)
            }
            PlacementSpec::Birth { shape } => shape.validate(dim),
        }
    }

    /// Samples product positions for reactants at `reactants`.
    ///
    /// Reactant positions are taken as given (callers unwrap periodic
    /// images first); results are not folded back into the domain.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        reactants: &[&[f64]],
        mollifier: &Mollifier,
        domain: &Domain,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        let dim = mollifier.dim;
        if reactants.iter().any(|x| x.len() != dim) {
            return Err(ModelError::ShapeMismatch(format!("reactant positions must have {dim} coordinates")));
        }
        let arity_err = |want: usize| {
            Err(ModelError::ShapeMismatch(format!(
                "placement expects {want} reactant position(s), got {}",
                reactants.len()
            )))
        };
        let jitter = |mut x: Vec<f64>, rng: &mut R| {
            for (c, g) in x.iter_mut().zip(mollifier.sample(rng)) {
                *c += g;
            }
            x
        };
        match self {
            PlacementSpec::None => Ok(Vec::new()),
            PlacementSpec::OneToOne => {
                if reactants.len() != 1 {
                    return arity_err(1);
                }
                Ok(vec![jitter(reactants[0].to_vec(), rng)])
            }
            PlacementSpec::TwoToOne { choices } => {
                if reactants.len() != 2 {
                    return arity_err(2);
                }
                let c = pick(choices, rng)?;
                let (x, y) = (reactants[0], reactants[1]);
                let z: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| c.alpha * a + (1.0 - c.alpha) * b).collect();
                Ok(vec![jitter(z, rng)])
            }
            PlacementSpec::TwoToTwo { p_identity } => {
                if reactants.len() != 2 {
                    return arity_err(2);
                }
                let (x, y) = (reactants[0].to_vec(), reactants[1].to_vec());
                let (first, second) = if rng.random::<f64>() < *p_identity { (x, y) } else { (y, x) };
                let first = jitter(first, rng);
                let second = jitter(second, rng);
                Ok(vec![first, second])
            }
            PlacementSpec::OneToTwo { separation, choices } => {
                if reactants.len() != 1 {
                    return arity_err(1);
                }
                let r = separation.sample_radius(dim, rng);
                let dir = unit_vector(dim, rng);
                let c = pick(choices, rng)?;
                let centre = jitter(reactants[0].to_vec(), rng);
                // alpha x + (1 - alpha) y = centre and x - y = w
                let x = centre.iter().zip(&dir).map(|(&z, &u)| z + (1.0 - c.alpha) * r * u).collect();
                let y = centre.iter().zip(&dir).map(|(&z, &u)| z - c.alpha * r * u).collect();
                Ok(vec![x, y])
            }
            PlacementSpec::Birth { shape } => {
                if !reactants.is_empty() {
                    return arity_err(0);
                }
                Ok(vec![shape.sample(domain, rng)])
            }
        }
    }
}

fn pick<R: Rng + ?Sized>(choices: &[WeightedAlpha], rng: &mut R) -> Result<WeightedAlpha, ModelError> {
    let total: f64 = choices.iter().map(|c| c.p).sum();
    if choices.is_empty() || (total - 1.0).abs() > WEIGHT_TOL {
        return Err(ModelError::Unnormalized(format!("placement probabilities sum to {total}")));
    }
    if choices.len() == 1 {
        return Ok(choices[0]);
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for c in choices {
        acc += c.p;
        if u < acc {
            return Ok(*c);
        }
    }
    Ok(choices[choices.len() - 1])
}

/// Free-function form of [`PlacementSpec::sample`].
pub fn sample_placement<R: Rng + ?Sized>(
    spec: &PlacementSpec,
    reactants: &[&[f64]],
    mollifier: &Mollifier,
    domain: &Domain,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, ModelError> {
    spec.sample(reactants, mollifier, domain, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::domain::Boundary;
    use crate::rng::sim_rng;
    use proptest::prelude::*;

    fn dom(dim: usize) -> Domain {
        Domain::new(dim, 100.0, Boundary::Periodic).unwrap()
    }

    #[test]
    fn two_to_one_at_reactants() {
        let spec = PlacementSpec::TwoToOne {
            choices: vec![WeightedAlpha { p: 0.5, alpha: 0.0 }, WeightedAlpha { p: 0.5, alpha: 1.0 }],
        };
        let m = Mollifier::new(1, 0.0);
        let mut rng = sim_rng(3);
        let n = 20_000;
        let mut at_x = 0;
        for _ in 0..n {
            let z = spec.sample(&[&[0.0], &[2.0]], &m, &dom(1), &mut rng).unwrap();
            assert!(z[0][0] == 0.0 || z[0][0] == 2.0);
            if z[0][0] == 0.0 {
                at_x += 1;
            }
        }
        let frac = at_x as f64 / n as f64;
        // SE = sqrt(0.25 / n) ~ 3.5e-3
        assert!((frac - 0.5).abs() < 0.0106, "{frac}");
    }

    #[test]
    fn one_to_one_exact() {
        let mut rng = sim_rng(3);
        let z = PlacementSpec::OneToOne.sample(&[&[1.3]], &Mollifier::new(1, 0.0), &dom(1), &mut rng).unwrap();
        assert_eq!(z, vec![vec![1.3]]);
    }

    #[test]
    fn one_to_two_point_mass() {
        let spec = PlacementSpec::OneToTwo {
            separation: SeparationDensity::PointMass { radius: 1.0 },
            choices: vec![WeightedAlpha { p: 1.0, alpha: 0.5 }],
        };
        let mut rng = sim_rng(3);
        for _ in 0..100 {
            let z = spec.sample(&[&[0.0]], &Mollifier::new(1, 0.0), &dom(1), &mut rng).unwrap();
            let mut v = [z[0][0], z[1][0]];
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(v, [-0.5, 0.5]);
        }
    }

    #[test]
    fn shape_and_normalization_errors() {
        let mut rng = sim_rng(3);
        let m = Mollifier::new(1, 0.0);
        let bad = PlacementSpec::TwoToOne { choices: vec![WeightedAlpha { p: 0.7, alpha: 0.5 }] };
        assert!(matches!(bad.validate(1), Err(ModelError::Unnormalized(_))));
        assert!(bad.sample(&[&[0.0], &[1.0]], &m, &dom(1), &mut rng).is_err());
        assert!(matches!(
            PlacementSpec::OneToOne.sample(&[&[0.0], &[1.0]], &m, &dom(1), &mut rng),
            Err(ModelError::ShapeMismatch(_))
        ));
        let tab = SeparationDensity::Tabulated { radii: vec![0.0, 1.0], cdf: vec![0.0, 0.8] };
        assert!(matches!(tab.validate(), Err(ModelError::Unnormalized(_))));
    }

    #[test]
    fn gaussian_separation_density_normalized() {
        // ∫ρ(|w|)dw = |S^{d-1}| ∫ ρ(r) r^{d-1} dr = 1
        for d in 1..=3 {
            let s = SeparationDensity::TruncatedGaussian { sigma: 0.3, cutoff: 0.7 };
            let n = 100_000;
            let h = 0.7 / n as f64;
            let total: f64 = (0..n)
                .map(|i| {
                    let r = (i as f64 + 0.5) * h;
                    sphere_area(d) * r.powi(d as i32 - 1) * s.density(d, r).unwrap() * h
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "d={d} total={total}");
            assert!((s.radial_cdf(d, 0.7) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn quadrature_weights_sum_to_one() {
        let s = SeparationDensity::TruncatedGaussian { sigma: 0.3, cutoff: 0.7 };
        for d in 1..=3 {
            let q = s.quadrature(d);
            let total: f64 = q.iter().map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-13);
            let mean: Vec<f64> = (0..d).map(|k| q.iter().map(|(x, w)| x[k] * w).sum()).collect();
            assert!(mean.iter().all(|m| m.abs() < 1e-14));
        }
    }

    proptest! {
        #[test]
        fn mollified_two_to_one_within_eta(x in -5.0f64..5.0, y in -5.0f64..5.0, eta in 0.001f64..1.0, seed in 0u64..1000) {
            let spec = PlacementSpec::TwoToOne { choices: vec![WeightedAlpha { p: 0.3, alpha: 0.25 }, WeightedAlpha { p: 0.7, alpha: 0.9 }] };
            let mut rng = sim_rng(seed);
            let z = spec.sample(&[&[x], &[y]], &Mollifier::new(1, eta), &dom(1), &mut rng).unwrap()[0][0];
            let near = [0.25, 0.9].iter().any(|&a| (z - (a * x + (1.0 - a) * y)).abs() < eta);
            prop_assert!(near);
            let (lo, hi) = (x.min(y), x.max(y));
            prop_assert!(z > lo - eta && z < hi + eta);
        }

        #[test]
        fn mollified_one_to_two_keeps_separation(z0 in prop::collection::vec(-5.0f64..5.0, 2), eta in 0.001f64..1.0, seed in 0u64..1000) {
            let spec = PlacementSpec::OneToTwo {
                separation: SeparationDensity::PointMass { radius: 0.4 },
                choices: vec![WeightedAlpha { p: 1.0, alpha: 0.3 }],
            };
            let mut rng = sim_rng(seed);
            let out = spec.sample(&[&z0], &Mollifier::new(2, eta), &dom(2), &mut rng).unwrap();
            let sep: f64 = out[0].iter().zip(&out[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!((sep - 0.4).abs() < 1e-12);
            let centre: Vec<f64> = out[0].iter().zip(&out[1]).map(|(a, b)| 0.3 * a + 0.7 * b).collect();
            let dev: f64 = centre.iter().zip(&z0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!(dev < eta);
        }
    }
}
