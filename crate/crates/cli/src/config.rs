//! Run configuration files.
//!
//! ```json
//! {
//!   "domain": { "type": "ball", "radius": 7.0 },
//!   "inclusions": [ { "center": [0.5, 0.5, 0.5], "radius": 0.01 } ],
//!   "generator": { "type": "cubic_lattice", "n": 4, "cell": 0.5,
//!                  "origin": [0.25, 0.25, 0.25], "radius": 0.01 }
//! }
//! ```
//!
//! Generated sites come first, explicit inclusions after them. `c_threshold`,
//! `quadrature` and `grid` are optional.

use std::path::Path;

use anyhow::{bail, Context};
use mesoeig::geometry::{
    generate_ball_lattice, generate_cubic_lattice, Cluster, Domain, Inclusion, RadiusSpec, Vec3,
};
use mesoeig::kernels::QuadratureSpec;
use mesoeig::spectral::GridSpec;
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Ball { radius: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionConfig {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    /// `n^3` sites at `origin + cell (i, j, k)`.
    CubicLattice {
        n: usize,
        cell: f64,
        origin: [f64; 3],
        radius: RadiusSpec,
    },
    /// Sites of `cell Z^3` inside the ball of radius `cloud_radius`.
    BallLattice {
        cell: f64,
        cloud_radius: f64,
        radius: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: DomainConfig,
    #[serde(default)]
    pub inclusions: Vec<InclusionConfig>,
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub c_threshold: Option<f64>,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

/// A parsed config with the raw bytes it came from.
pub struct LoadedConfig {
    pub config: Config,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl LoadedConfig {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&bytes).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(bytes: &[u8]) -> anyhow::Result<Self> {
        let config: Config = serde_json::from_slice(bytes)?;
        Ok(Self {
            config,
            sha256: sha256_hex(bytes),
        })
    }
}

impl Config {
    pub fn domain(&self) -> mesoeig::Result<Domain> {
        match self.domain {
            DomainConfig::Ball { radius } => Domain::ball(radius),
        }
    }

    pub fn cluster(&self) -> anyhow::Result<Cluster> {
        let domain = self.domain()?;
        let mut inc = match &self.generator {
            None => Vec::new(),
            Some(GeneratorConfig::CubicLattice {
                n,
                cell,
                origin,
                radius,
            }) => generate_cubic_lattice(*n, *cell, Vec3::from(*origin), radius)?,
            Some(GeneratorConfig::BallLattice {
                cell,
                cloud_radius,
                radius,
            }) => generate_ball_lattice(*cell, *cloud_radius, *radius)?,
        };
        for i in &self.inclusions {
            inc.push(Inclusion::new(Vec3::from(i.center), i.radius)?);
        }
        Ok(Cluster::build(inc, domain)?)
    }

    /// Radius of the ball `omega` occupied by a generated lattice: the cloud
    /// radius for ball lattices, the equal-volume radius for cubic ones.
    pub fn cloud_radius(&self) -> anyhow::Result<f64> {
        match &self.generator {
            Some(GeneratorConfig::BallLattice { cloud_radius, .. }) => Ok(*cloud_radius),
            Some(GeneratorConfig::CubicLattice { n, cell, .. }) => {
                let side = *n as f64 * cell;
                Ok(side * (3.0 / (4.0 * std::f64::consts::PI)).cbrt())
            }
            None => bail!("the lattice path of `homogenize` needs a `generator` entry"),
        }
    }
}

/// Configs shipped with the binary.
pub mod bundled {
    pub const TABLE1: [(&str, &str); 3] = [
        ("table1_row1", include_str!("../fixtures/table1_row1.json")),
        ("table1_row2", include_str!("../fixtures/table1_row2.json")),
        ("table1_row3", include_str!("../fixtures/table1_row3.json")),
    ];
}
