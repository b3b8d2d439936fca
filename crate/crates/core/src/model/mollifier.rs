//! Compactly supported mollifier `G_η(x) = η^-d G(x/η)`.
//!
//! `G` is the Epanechnikov kernel `c_d (1 - |x|²)` on the open unit ball with
//! `c_d = (d + 2) / (2 |B_1|)`. It is continuous but not smooth; sampling only
//! needs non-negativity, compact support and unit mass.

use rand::Rng;
use rand_distr::StandardNormal;

use super::domain::ball_volume;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    pub dim: usize,
    pub eta: f64,
}

impl Mollifier {
    pub fn new(dim: usize, eta: f64) -> Self {
        assert!((1..=3).contains(&dim));
        assert!(eta >= 0.0 && eta.is_finite());
        Self { dim, eta }
    }

    fn normalization(&self) -> f64 {
        (self.dim as f64 + 2.0) / (2.0 * ball_volume(self.dim, 1.0))
    }

    /// `G_η(x)`. Zero outside the open ball of radius η.
    pub fn density(&self, x: &[f64]) -> f64 {
        if self.eta == 0.0 {
            return 0.0;
        }
        let s2: f64 = x.iter().map(|c| c * c).sum::<f64>() / (self.eta * self.eta);
        if s2 >= 1.0 {
            0.0
        } else {
            self.normalization() * (1.0 - s2) / self.eta.powi(self.dim as i32)
        }
    }

    /// Radial profile `G_η(r)` for `|x| = r`.
    pub fn radial_density(&self, r: f64) -> f64 {
        let mut x = [0.0; 3];
        x[0] = r;
        self.density(&x[..self.dim])
    }

    /// Draws a displacement from `G_η`; all zeros when η = 0.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim;
        if self.eta == 0.0 {
            return vec![0.0; d];
        }
        let u: f64 = rng.random();
        let s = invert_radial_cdf(d, u);
        let mut dir = unit_vector(d, rng);
        for c in dir.iter_mut() {
            *c *= s * self.eta;
        }
        dir
    }
}

/// CDF of `|x|` under `G` on the unit ball: `((d+2) s^d - d s^(d+2)) / 2`.
pub fn radial_cdf(dim: usize, s: f64) -> f64 {
    let d = dim as f64;
    let s = s.clamp(0.0, 1.0);
    0.5 * ((d + 2.0) * s.powi(dim as i32) - d * s.powi(dim as i32 + 2))
}

fn invert_radial_cdf(dim: usize, u: f64) -> f64 {
    let d = dim as f64;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut s = match dim {
        // closed form for d = 2: u = 2 s² - s⁴
        2 => (1.0 - (1.0 - u).max(0.0).sqrt()).sqrt(),
        _ => u.powf(1.0 / d),
    };
    for _ in 0..100 {
        let f = radial_cdf(dim, s) - u;
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let df = 0.5 * d * (d + 2.0) * s.powi(dim as i32 - 1) * (1.0 - s * s);
        let next = s - f / df;
        s = if df > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    // keep the draw inside the open ball
    s.min(1.0 - f64::EPSILON)
}

/// Uniformly distributed unit vector.
pub fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    if dim == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}
