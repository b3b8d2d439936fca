use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Volume of the `dim`-ball of radius `r`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Surface measure of the unit sphere in `dim` dimensions.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Reflecting,
}

/// Cubic box `[-L/2, L/2)^d` centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub dim: usize,
    pub length: f64,
    pub boundary: Boundary,
}

impl Domain {
    pub fn new(dim: usize, length: f64, boundary: Boundary) -> Result<Self, ModelError> {
        if !(1..=3).contains(&dim) {
            return Err(ModelError::InvalidParameter(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "box length must be positive, got {length}"
            )));
        }
        Ok(Self { dim, length, boundary })
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn half(&self) -> f64 {
        0.5 * self.length
    }

    /// Maps a single coordinate back into the box.
    #[inline]
    pub fn fold(&self, x: f64) -> f64 {
        let h = self.half();
        match self.boundary {
            Boundary::Periodic => {
                let mut y = (x + h).rem_euclid(self.length) - h;
                // rem_euclid can return exactly `length` after rounding
                if y >= h {
                    y -= self.length;
                }
                y
            }
            Boundary::Reflecting => {
                let period = 2.0 * self.length;
                let y = (x + h).rem_euclid(period);
                let y = if y > self.length { period - y } else { y };
                (y - h).clamp(-h, h)
            }
        }
    }

    pub fn apply(&self, x: &mut [f64]) {
        for c in x.iter_mut() {
            *c = self.fold(*c);
        }
    }

    /// Separation component `b - a` (minimum image under periodic boundaries).
    #[inline]
    pub fn delta(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        match self.boundary {
            Boundary::Periodic => d - self.length * (d / self.length).round(),
            Boundary::Reflecting => d,
        }
    }

    #[inline]
    pub fn distance2(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = self.delta(x, y);
                d * d
            })
            .sum()
    }

    #[inline]
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.distance2(a, b).sqrt()
    }

    /// `b` expressed as `a + delta(a, b)`, i.e. the image of `b` nearest `a`.
    pub fn unwrap_near(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| x + self.delta(x, y)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let h = self.half();
        x.iter().all(|&c| match self.boundary {
            Boundary::Periodic => (-h..h).contains(&c),
            Boundary::Reflecting => (-h..=h).contains(&c),
        })
    }
}

/// Spatial distribution used for initial conditions and birth placement.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialShape {
    Uniform,
    /// Isotropic Gaussian, wrapped into the box.
    Gaussian { center: Vec<f64>, sigma: f64 },
    Point { at: Vec<f64> },
}

impl SpatialShape {
    pub fn validate(&self, dim: usize) -> Result<(), ModelError> {
        match self {
            SpatialShape::Uniform => Ok(()),
            SpatialShape::Gaussian { center, sigma } => {
                if center.len() != dim {
                    return Err(ModelError::InvalidParameter(format!(
                        "gaussian center has {} coordinates, expected {dim}",
                        center.len()
                    )));
                }
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(ModelError::InvalidParameter(format!(
                        "gaussian sigma must be positive, got {sigma}"
                    )));
                }
                Ok(())
            }
            SpatialShape::Point { at } => {
                if at.len() != dim {
                    return Err(ModelError::InvalidParameter(format!(
                        "point has {} coordinates, expected {dim}",
                        at.len()
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, domain: &Domain, rng: &mut R) -> Vec<f64> {
        let mut x: Vec<f64> = match self {
            SpatialShape::Uniform => (0..domain.dim)
                .map(|_| (rng.random::<f64>() - 0.5) * domain.length)
                .collect(),
            SpatialShape::Gaussian { center, sigma } => center
                .iter()
                .map(|&c| c + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            SpatialShape::Point { at } => at.clone(),
        };
        domain.apply(&mut x);
        x
    }

    /// Density of the (wrapped) distribution at `x`, per unit volume.
    /// `Point` has no density and returns `None`.
    pub fn density(&self, domain: &Domain, x: &[f64]) -> Option<f64> {
        match self {
            SpatialShape::Uniform => Some(1.0 / domain.volume()),
            SpatialShape::Gaussian { center, sigma } => {
                let mut p = 1.0;
                for (&xi, &ci) in x.iter().zip(center) {
                    p *= wrapped_gaussian_1d(domain, xi - ci, *sigma);
                }
                Some(p)
            }
            SpatialShape::Point { .. } => None,
        }
    }
}

/// Periodic sum of the 1D normal density over images within 8 sigma.
pub fn wrapped_gaussian_1d(domain: &Domain, d: f64, sigma: f64) -> f64 {
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    match domain.boundary {
        Boundary::Reflecting => norm * (-0.5 * d * d / (sigma * sigma)).exp(),
        Boundary::Periodic => {
            let l = domain.length;
            let images = (8.0 * sigma / l).ceil() as i64 + 1;
            (-images..=images)
                .map(|k| {
                    let y = d + k as f64 * l;
                    norm * (-0.5 * y * y / (sigma * sigma)).exp()
                })
                .sum()
        }
    }
}
