//! JSON input documents.
//!
//! Network:
//!
//! ```json
//! {"arcs": [{"length": 1.0, "speed": 1.0, "orientation": "in"},
//!           {"length": 1.0, "speed": 2.0, "orientation": "out"}],
//!  "K": [[0, 1], [1, 0]]}
//! ```
//!
//! Data (one entry per arc, `boundary` per incoming arc in arc order):
//!
//! ```json
//! {"initial": [{"breakpoints": [0.5], "values": [1, 0]},
//!              {"breakpoints": [], "values": [0]}],
//!  "boundary": [1.0]}
//! ```
//!
//! Malformed documents are rejected with the JSON path of the offending
//! field and its line and column.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ArcSpec, CouplingMatrix, Orientation, StarNetwork};
use crate::piecewise::PiecewiseConstant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcConfig {
    pub length: f64,
    pub speed: f64,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub arcs: Vec<ArcConfig>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
}

impl NetworkConfig {
    pub fn build(&self) -> Result<(StarNetwork, CouplingMatrix)> {
        let specs: Vec<ArcSpec> = self
            .arcs
            .iter()
            .map(|a| ArcSpec::new(a.length, a.speed, a.orientation))
            .collect();
        let net = StarNetwork::new(&specs)?;
        if self.k.len() != net.len() {
            return Err(Error::DimensionMismatch {
                context: "rows of K",
                expected: net.len(),
                found: self.k.len(),
            });
        }
        let k = CouplingMatrix::new(&self.k)?;
        Ok((net, k))
    }

    pub fn from_parts(net: &StarNetwork, k: &CouplingMatrix) -> Self {
        Self {
            arcs: net
                .arcs()
                .iter()
                .map(|a| ArcConfig {
                    length: a.length,
                    speed: a.speed,
                    orientation: a.orientation,
                })
                .collect(),
            k: k.to_rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub initial: Vec<FieldConfig>,
    #[serde(default)]
    pub boundary: Vec<f64>,
}

impl DataConfig {
    /// Initial fields by arc id and boundary values by incoming position.
    pub fn build(&self, net: &StarNetwork) -> Result<(Vec<PiecewiseConstant>, Vec<f64>)> {
        if self.initial.len() != net.len() {
            return Err(Error::DimensionMismatch {
                context: "initial fields",
                expected: net.len(),
                found: self.initial.len(),
            });
        }
        if self.boundary.len() != net.incoming().len() {
            return Err(Error::DimensionMismatch {
                context: "boundary values",
                expected: net.incoming().len(),
                found: self.boundary.len(),
            });
        }
        let fields = self
            .initial
            .iter()
            .zip(net.arcs())
            .map(|(f, a)| PiecewiseConstant::new(a.length, f.breakpoints.clone(), f.values.clone()))
            .collect::<Result<Vec<_>>>()?;
        if let Some(b) = self.boundary.iter().find(|b| !b.is_finite()) {
            return Err(Error::InvalidField(format!("boundary value {b} is not finite")));
        }
        Ok((fields, self.boundary.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Proportional mode: one value per outgoing arc. Two-out mode: the
    /// share sent to the first outgoing arc, one value per incoming arc.
    pub gamma: Vec<f64>,
}

/// Either a path (relative to the referring document) or an inline value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Source<T> {
    pub fn resolve(&self, base: &Path) -> Result<T> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::Path(p) => read_json(&base.join(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricRange {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonList {
    List(Vec<f64>),
    Geometric(GeometricRange),
}

impl EpsilonList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            EpsilonList::List(v) => v.clone(),
            EpsilonList::Geometric(g) => (0..g.count).map(|k| g.start * g.ratio.powi(k as i32)).collect(),
        }
    }
}

fn default_theta() -> f64 {
    crate::data_prep::DEFAULT_THETA
}

fn default_h_ratio() -> f64 {
    8.0
}

/// Description of a vanishing-viscosity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub network: Source<NetworkConfig>,
    pub data: Source<DataConfig>,
    pub epsilons: EpsilonList,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub horizon: f64,
    /// `h = ε / h_ratio`.
    #[serde(default = "default_h_ratio")]
    pub h_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// An `ExperimentSpec` with its sources loaded and checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedExperiment {
    pub network: NetworkConfig,
    pub data: DataConfig,
    pub epsilons: Vec<f64>,
    pub theta: f64,
    pub horizon: f64,
    pub h_ratio: f64,
    pub dt: Option<f64>,
}

impl ExperimentSpec {
    pub fn resolve(&self, base: &Path) -> Result<ResolvedExperiment> {
        let epsilons = self.epsilons.values();
        if epsilons.is_empty() {
            return Err(Error::InvalidConfig("epsilon list is empty".into()));
        }
        if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidConfig(format!("epsilon {e} must be positive")));
        }
        if let Some(w) = epsilons.windows(2).find(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidConfig(format!(
                "epsilons must be strictly decreasing, got {} then {}",
                w[0], w[1]
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon {} must be positive", self.horizon)));
        }
        if !(self.theta > 1.0 && self.theta.is_finite()) {
            return Err(Error::InvalidConfig(format!("theta {} must exceed 1", self.theta)));
        }
        if !(self.h_ratio >= 4.0 && self.h_ratio.is_finite()) {
            return Err(Error::InvalidConfig(format!("h_ratio {} must be at least 4", self.h_ratio)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidConfig(format!("dt {dt} must be positive")));
            }
        }
        let network = self.network.resolve(base)?;
        let (net, _) = network.build()?;
        let data = self.data.resolve(base)?;
        data.build(&net)?;
        Ok(ResolvedExperiment {
            network,
            data,
            epsilons,
            theta: self.theta,
            horizon: self.horizon,
            h_ratio: self.h_ratio,
            dt: self.dt,
        })
    }
}

/// Parses `text`, reporting the failing field path, line and column.
pub fn parse_json<T: DeserializeOwned>(text: &str, source_name: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            source_name: source_name.to_string(),
            message: format!("field `{path}`: {inner}"),
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        source_name: source_name.to_string(),
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}
