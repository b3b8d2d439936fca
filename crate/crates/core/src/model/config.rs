//! Model configuration files (TOML).
//!
//! ```toml
//! [system]
//! dim = 1                 # 1, 2 or 3
//! gamma = 100.0           # system size
//! eta = 0.0125            # placement mollification range (default 0)
//! box_length = 4.0        # box is [-L/2, L/2)^dim
//! boundary = "periodic"   # or "reflecting"
//! allow_growth = false    # accept reactions that only add particles
//! max_amount = 50.0       # optional cap on total N/gamma
//!
//! [species.A]
//! D = 0.1
//! initial = { amount = 1.0, shape = { type = "gaussian", center = [0.0], sigma = 0.5 } }
//!
//! [[reaction]]
//! name = "binding"
//! reactants = ["A", "B"]
//! products = ["C"]
//! kernel = { type = "doi", rate = 5.0, radius = 0.1 }   # or k_wm = ... instead of rate
//! placement = { type = "two_to_one", choices = [{ p = 1.0, alpha = 0.5 }] }
//! ```
//!
//! Kernel types: `constant {rate}`, `doi {rate | k_wm, radius}`,
//! `tabulated {radii, rates}`. Placement types: `none`, `one_to_one`,
//! `two_to_one {choices}`, `two_to_two {p}`,
//! `one_to_two {separation, choices}`, `birth {shape}`; `none` and
//! `one_to_one` are inferred when omitted. Separation types:
//! `point {radius}`, `gaussian {sigma, cutoff}`, `tabulated {radii, cdf}`.
//! Shapes: `uniform`, `gaussian {center, sigma}`, `point {at}`.
//!
//! Kernel rates are the unscaled `K_ℓ`; the simulator applies
//! `γ^(1-order)`. With `k_wm`, the Doi rate is `k_wm / |B_radius|`.

use indexmap::IndexMap;
use serde::Deserialize;

use super::domain::{ball_volume, Boundary, Domain, SpatialShape};
use super::kernel::RateKernel;
use super::network::{InitialCondition, Reaction, ReactionNetwork, Species, Stoichiometry};
use super::placement::{PlacementSpec, SeparationDensity, WeightedAlpha};
use super::ModelError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    system: SystemSection,
    species: IndexMap<String, SpeciesSection>,
    #[serde(default, rename = "reaction")]
    reactions: Vec<ReactionSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    dim: usize,
    gamma: f64,
    #[serde(default)]
    eta: f64,
    box_length: f64,
    #[serde(default)]
    boundary: Boundary,
    #[serde(default)]
    allow_growth: bool,
    max_amount: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesSection {
    #[serde(rename = "D")]
    diffusivity: f64,
    initial: Option<InitialSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    amount: f64,
    #[serde(default = "uniform_shape")]
    shape: ShapeSection,
}

fn uniform_shape() -> ShapeSection {
    ShapeSection::Uniform
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ShapeSection {
    Uniform,
    Gaussian { center: Vec<f64>, sigma: f64 },
    Point { at: Vec<f64> },
}

impl From<ShapeSection> for SpatialShape {
    fn from(s: ShapeSection) -> Self {
        match s {
            ShapeSection::Uniform => SpatialShape::Uniform,
            ShapeSection::Gaussian { center, sigma } => SpatialShape::Gaussian { center, sigma },
            ShapeSection::Point { at } => SpatialShape::Point { at },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReactionSection {
    name: Option<String>,
    #[serde(default)]
    reactants: Vec<String>,
    #[serde(default)]
    products: Vec<String>,
    kernel: KernelSection,
    placement: Option<PlacementSection>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum KernelSection {
    Constant { rate: f64 },
    Doi { rate: Option<f64>, k_wm: Option<f64>, radius: f64 },
    Tabulated { radii: Vec<f64>, rates: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChoiceSection {
    p: f64,
    alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum PlacementSection {
    None,
    OneToOne,
    TwoToOne { choices: Vec<ChoiceSection> },
    TwoToTwo { p: f64 },
    OneToTwo { separation: SeparationSection, choices: Vec<ChoiceSection> },
    Birth { shape: ShapeSection },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SeparationSection {
    Point { radius: f64 },
    Gaussian { sigma: f64, cutoff: f64 },
    Tabulated { radii: Vec<f64>, cdf: Vec<f64> },
}

fn choices(c: Vec<ChoiceSection>) -> Vec<WeightedAlpha> {
    c.into_iter().map(|c| WeightedAlpha { p: c.p, alpha: c.alpha }).collect()
}

/// Parses and validates a model configuration.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, ModelError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ModelError::Config {
        location: e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or_else(|| "config".into()),
        message: e.message().to_string(),
    })?;

    let sys = file.system;
    let domain = Domain::new(sys.dim, sys.box_length, sys.boundary).map_err(|e| e.located("system"))?;

    let species: Vec<Species> = file
        .species
        .into_iter()
        .map(|(name, s)| Species {
            name,
            diffusivity: s.diffusivity,
            initial: s.initial.map(|i| InitialCondition { amount: i.amount, shape: i.shape.into() }),
        })
        .collect();
    if species.is_empty() {
        return Err(ModelError::at("species", "at least one species must be declared"));
    }
    let lookup = |loc: &str, name: &str| -> Result<usize, ModelError> {
        species
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| ModelError::UnknownSpecies { location: loc.to_string(), name: name.to_string() })
    };

    let mut reactions = Vec::with_capacity(file.reactions.len());
    for (i, r) in file.reactions.into_iter().enumerate() {
        let name = r.name.unwrap_or_else(|| format!("{} -> {}", r.reactants.join(" + "), r.products.join(" + ")));
        let here = format!("reaction[{i}] ({name})");
        let reactant_slots = r.reactants.iter().map(|s| lookup(&here, s)).collect::<Result<Vec<_>, _>>()?;
        let product_slots = r.products.iter().map(|s| lookup(&here, s)).collect::<Result<Vec<_>, _>>()?;
        let kernel = match r.kernel {
            KernelSection::Constant { rate } => RateKernel::Constant { rate },
            KernelSection::Doi { rate, k_wm, radius } => {
                let rate = match (rate, k_wm) {
                    (Some(rate), None) => rate,
                    (None, Some(k)) if radius > 0.0 => k / ball_volume(sys.dim, radius),
                    (None, Some(_)) => return Err(ModelError::at(&here, "doi radius must be positive")),
                    _ => return Err(ModelError::at(&here, "doi kernel needs exactly one of `rate` or `k_wm`")),
                };
                RateKernel::Doi { rate, radius }
            }
            KernelSection::Tabulated { radii, rates } => RateKernel::TabulatedRadial { radii, rates },
        };
        let placement = match r.placement {
            Some(PlacementSection::None) => PlacementSpec::None,
            Some(PlacementSection::OneToOne) => PlacementSpec::OneToOne,
            Some(PlacementSection::TwoToOne { choices: c }) => PlacementSpec::TwoToOne { choices: choices(c) },
            Some(PlacementSection::TwoToTwo { p }) => PlacementSpec::TwoToTwo { p_identity: p },
            Some(PlacementSection::OneToTwo { separation, choices: c }) => PlacementSpec::OneToTwo {
                separation: match separation {
                    SeparationSection::Point { radius } => SeparationDensity::PointMass { radius },
                    SeparationSection::Gaussian { sigma, cutoff } => {
                        SeparationDensity::TruncatedGaussian { sigma, cutoff }
                    }
                    SeparationSection::Tabulated { radii, cdf } => SeparationDensity::Tabulated { radii, cdf },
                },
                choices: choices(c),
            },
            Some(PlacementSection::Birth { shape }) => PlacementSpec::Birth { shape: shape.into() },
            None => match (reactant_slots.len(), product_slots.len()) {
                (_, 0) => PlacementSpec::None,
                (1, 1) => PlacementSpec::OneToOne,
                (a, b) => {
                    return Err(ModelError::at(
                        &here,
                        format!("a {a}-to-{b} reaction needs an explicit placement"),
                    ))
                }
            },
        };
        let stoichiometry = Stoichiometry::from_slots(species.len(), &reactant_slots, &product_slots);
        reactions.push(Reaction { name, reactant_slots, product_slots, stoichiometry, kernel, placement });
    }

    ReactionNetwork {
        species,
        reactions,
        gamma: sys.gamma,
        eta: sys.eta,
        domain,
        allow_growth: sys.allow_growth,
        max_amount: sys.max_amount,
    }
    .validated()
}

fn line_col(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    format!("line {line}, column {col}")
}
