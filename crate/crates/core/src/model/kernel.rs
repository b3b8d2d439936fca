use super::domain::{ball_volume, sphere_area};
use super::ModelError;

/// Reaction rate kernel (probability per unit time).
///
/// Second-order kernels are radial functions of the reactant separation.
/// First-order tabulated kernels are radial functions of the distance from
/// the box centre.
#[derive(Debug, Clone, PartialEq)]
pub enum RateKernel {
    Constant { rate: f64 },
    /// `rate` while the reactants are within `radius` (closed ball), else 0.
    Doi { rate: f64, radius: f64 },
    /// Piecewise-linear profile through `(radii[i], rates[i])`, equal to
    /// `rates[0]` below `radii[0]` and zero beyond the last radius.
    TabulatedRadial { radii: Vec<f64>, rates: Vec<f64> },
}

impl RateKernel {
    pub fn validate(&self, order: usize) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidParameter(m));
        match self {
            RateKernel::Constant { rate } => {
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return bad(format!("constant rate must be finite and >= 0, got {rate}"));
                }
            }
            RateKernel::Doi { rate, radius } => {
                if order != 2 {
                    return bad(format!("doi kernel needs two reactants, reaction has {order}"));
                }
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return bad(format!("doi rate must be finite and >= 0, got {rate}"));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad(format!("doi radius must be positive, got {radius}"));
                }
            }
            RateKernel::TabulatedRadial { radii, rates } => {
                if order == 0 {
                    return bad("tabulated kernel needs at least one reactant".into());
                }
                if radii.is_empty() || radii.len() != rates.len() {
                    return bad("tabulated kernel needs equally many radii and rates (>= 1)".into());
                }
                if radii[0] < 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated radii must be non-negative and strictly increasing".into());
                }
                if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                    return bad("tabulated rates must be finite and >= 0".into());
                }
            }
        }
        Ok(())
    }

    /// Upper bound `C(K)` of the kernel.
    pub fn bound(&self) -> f64 {
        match self {
            RateKernel::Constant { rate } | RateKernel::Doi { rate, .. } => *rate,
            RateKernel::TabulatedRadial { rates, .. } => rates.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Radius beyond which the kernel vanishes, `None` if unbounded.
    pub fn support(&self) -> Option<f64> {
        match self {
            RateKernel::Constant { .. } => None,
            RateKernel::Doi { radius, .. } => Some(*radius),
            RateKernel::TabulatedRadial { radii, .. } => radii.last().copied(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RateKernel::Constant { .. })
    }

    /// Kernel value as a function of the radial argument.
    #[inline]
    pub fn at_distance(&self, r: f64) -> f64 {
        match self {
            RateKernel::Constant { rate } => *rate,
            RateKernel::Doi { rate, radius } => {
                if r <= *radius {
                    *rate
                } else {
                    0.0
                }
            }
            RateKernel::TabulatedRadial { radii, rates } => {
                let last = radii.len() - 1;
                if r > radii[last] {
                    return 0.0;
                }
                if r <= radii[0] {
                    return rates[0];
                }
                let i = radii.partition_point(|&x| x < r);
                let (r0, r1) = (radii[i - 1], radii[i]);
                let t = (r - r0) / (r1 - r0);
                rates[i - 1] + t * (rates[i] - rates[i - 1])
            }
        }
    }

    /// Evaluates the kernel on a reactant tuple of arity 0, 1 or 2
    /// (free-space distances).
    pub fn eval(&self, positions: &[&[f64]]) -> Result<f64, ModelError> {
        match (self, positions.len()) {
            (RateKernel::Constant { rate }, 0..=2) => Ok(*rate),
            (RateKernel::Doi { .. }, 2) | (RateKernel::TabulatedRadial { .. }, 2) => {
                let r = euclid(positions[0], positions[1]);
                Ok(self.at_distance(r))
            }
            (RateKernel::TabulatedRadial { .. }, 1) => {
                let r = positions[0].iter().map(|c| c * c).sum::<f64>().sqrt();
                Ok(self.at_distance(r))
            }
            (RateKernel::Doi { .. }, n) => Err(ModelError::ArityMismatch { expected: 2, got: n }),
            (_, n) => Err(ModelError::ArityMismatch { expected: 2, got: n }),
        }
    }

    /// The same kernel with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> RateKernel {
        match self {
            RateKernel::Constant { rate } => RateKernel::Constant { rate: rate * factor },
            RateKernel::Doi { rate, radius } => RateKernel::Doi { rate: rate * factor, radius: *radius },
            RateKernel::TabulatedRadial { radii, rates } => RateKernel::TabulatedRadial {
                radii: radii.clone(),
                rates: rates.iter().map(|r| r * factor).collect(),
            },
        }
    }

    /// `∫ K(|w|) dw` over `R^dim`; `None` for kernels without compact support.
    pub fn integral(&self, dim: usize) -> Option<f64> {
        match self {
            RateKernel::Constant { .. } => None,
            RateKernel::Doi { rate, radius } => Some(rate * ball_volume(dim, *radius)),
            RateKernel::TabulatedRadial { radii, .. } => {
                // piecewise polynomial of degree <= dim; Gauss-Legendre 3-point is exact
                let mut total = 0.0;
                let mut knots = vec![0.0];
                knots.extend(radii.iter().copied().filter(|&r| r > 0.0));
                for w in knots.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
                    for (x, wt) in GAUSS3 {
                        let r = m + h * x;
                        total += h * wt * self.at_distance(r) * r.powi(dim as i32 - 1);
                    }
                }
                Some(sphere_area(dim) * total)
            }
        }
    }
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `γ^(1-order) · base_rate`.
pub fn scale_kernel(base_rate: f64, gamma: f64, reactant_order: usize) -> Result<f64, ModelError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ModelError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if reactant_order > 2 {
        return Err(ModelError::InvalidParameter(format!(
            "reactant order must be 0, 1 or 2, got {reactant_order}"
        )));
    }
    Ok(base_rate * gamma.powi(1 - reactant_order as i32))
}

/// Doi rate matching a well-mixed bimolecular rate constant:
/// `k_wm / (γ |B_ε|)`.
pub fn calibrate_doi_lambda(k_wm: f64, gamma: f64, epsilon: f64, dim: usize) -> Result<f64, ModelError> {
    for (name, v) in [("k_wm", k_wm), ("gamma", gamma), ("epsilon", epsilon)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if !(1..=3).contains(&dim) {
        return Err(ModelError::InvalidParameter(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    Ok(k_wm / (gamma * ball_volume(dim, epsilon)))
}
