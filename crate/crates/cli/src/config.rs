//! JSON run configuration. One flat section per subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stohom_core::geometry::{FeatureModel, GeometryRecipe, MaternVariant, Pattern};

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub geometry: Option<GeometryConfig>,
    pub homogenize: Option<HomogenizeConfig>,
    pub permeability: Option<PermeabilityConfig>,
    pub react: Option<ReactConfig>,
    pub converge: Option<ConvergeConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn geometry(&self) -> Result<&GeometryConfig, CliError> {
        self.geometry.as_ref().ok_or_else(|| missing("geometry"))
    }
}

pub fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing key `{key}`"))
}

fn need<T: Copy>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| missing(key))
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

fn default_m() -> usize {
    64
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "two")]
    pub dim: usize,
    /// Window side.
    #[serde(rename = "L", default = "one")]
    pub side: f64,
    /// Cells per side.
    #[serde(default = "default_m")]
    pub m: usize,
    /// boolean, matern1, matern2, lattice, voronoi, delaunay, grains,
    /// uniform, layers, checkerboard, channel.
    pub model: String,
    pub intensity: Option<f64>,
    pub radius: Option<f64>,
    pub hardcore: Option<f64>,
    pub spacing: Option<f64>,
    pub thickness: Option<usize>,
    pub axis: Option<usize>,
    pub fraction: Option<f64>,
    pub tiles: Option<usize>,
    pub wall_rows: Option<usize>,
    /// Phase of the features: "A" (default) or "B".
    pub features_phase: Option<String>,
}

impl GeometryConfig {
    pub fn recipe(&self) -> Result<GeometryRecipe<f64>, CliError> {
        let features = match self.model.as_str() {
            "boolean" => FeatureModel::Boolean { intensity: need(self.intensity, "intensity")?, radius: need(self.radius, "radius")? },
            "matern1" | "matern2" => FeatureModel::MaternBalls {
                intensity: need(self.intensity, "intensity")?,
                hardcore: need(self.hardcore, "hardcore")?,
                variant: if self.model == "matern1" { MaternVariant::I } else { MaternVariant::II },
                radius: need(self.radius, "radius")?,
            },
            "lattice" => FeatureModel::DiskLattice { spacing: need(self.spacing, "spacing")?, radius: need(self.radius, "radius")? },
            "voronoi" => FeatureModel::VoronoiBoundaries { intensity: need(self.intensity, "intensity")?, thickness: self.thickness.unwrap_or(1) },
            "delaunay" => FeatureModel::DelaunayPipes { intensity: need(self.intensity, "intensity")?, radius: need(self.radius, "radius")? },
            "grains" => FeatureModel::Grains { intensity: need(self.intensity, "intensity")? },
            "uniform" => FeatureModel::Pattern(Pattern::Uniform),
            "layers" => FeatureModel::Pattern(Pattern::Layers { axis: self.axis.unwrap_or(0), fraction: need(self.fraction, "fraction")? }),
            "checkerboard" => FeatureModel::Pattern(Pattern::Checkerboard { tiles: self.tiles.unwrap_or(2) }),
            "channel" => FeatureModel::Pattern(Pattern::Channel { wall_rows: self.wall_rows.unwrap_or(1) }),
            other => return Err(CliError::Config(format!("unknown geometry `model` \"{other}\""))),
        };
        if self.axis.is_some_and(|a| a >= self.dim) {
            return Err(CliError::Config(format!("`axis` must be below dim = {}", self.dim)));
        }
        let recipe = GeometryRecipe::new(self.dim, features);
        match self.features_phase.as_deref() {
            None | Some("A") => Ok(recipe),
            Some("B") => Ok(recipe.with_features_b()),
            Some(other) => Err(CliError::Config(format!("`features_phase` must be \"A\" or \"B\", got \"{other}\""))),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizeConfig {
    #[serde(rename = "D_A", default = "one")]
    pub d_a: f64,
    #[serde(rename = "D_B")]
    pub d_b: f64,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    /// Phase field file to use instead of the geometry section.
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PermeabilityConfig {
    #[serde(default = "one")]
    pub nu: f64,
    pub tol: Option<f64>,
    pub div_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub input: Option<PathBuf>,
}

fn default_family() -> String {
    "linear".into()
}

fn default_bc() -> String {
    "neumann".into()
}

fn default_cells() -> usize {
    32
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReactConfig {
    /// "linear" or "langmuir".
    #[serde(default = "default_family")]
    pub family: String,
    pub k: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    #[serde(rename = "Umax")]
    pub umax: Option<f64>,
    pub theta: f64,
    pub s: f64,
    /// Matrix (list of rows) or "from <homogenize CSV>".
    #[serde(rename = "Dhom")]
    pub dhom: serde_json::Value,
    #[serde(default = "default_bc")]
    pub bc: String,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default)]
    pub stride: Option<usize>,
    /// Macro cells per side.
    #[serde(rename = "M", default = "default_cells")]
    pub cells: usize,
    /// Macro box side.
    #[serde(rename = "L", default = "one")]
    pub side: f64,
    #[serde(default)]
    pub u0: f64,
    #[serde(rename = "U0", default)]
    pub big_u0: f64,
    /// Amplitude of a Gaussian added to `u0` at the box centre.
    #[serde(default)]
    pub bump: f64,
    #[serde(default)]
    pub f: f64,
    #[serde(default)]
    pub unit_capacity: bool,
}

fn default_resolution() -> usize {
    64
}

fn default_seeds() -> usize {
    8
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    /// Any of "volume_fraction", "specific_surface", "Dhom".
    pub observables: Vec<String>,
    #[serde(rename = "L")]
    pub sides: Vec<f64>,
    /// Cells per unit length.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Number of seeds, counted from the run seed.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(rename = "D_A", default = "one")]
    pub d_a: f64,
    #[serde(rename = "D_B")]
    pub d_b: Option<f64>,
    pub tol: Option<f64>,
}
