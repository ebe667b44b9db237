//! Scenario configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::deploy::{BeaconSpec, Point2};
use crate::error::{Error, Result};
use crate::fields::FieldModel;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BeaconRepr {
    Token(String),
    Points(Vec<[f64; 2]>),
}

impl Serialize for BeaconSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BeaconSpec::Corners => BeaconRepr::Token("corners".into()),
            BeaconSpec::Explicit(ps) => BeaconRepr::Points(ps.iter().map(|p| [p.x, p.y]).collect()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BeaconSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match BeaconRepr::deserialize(d)? {
            BeaconRepr::Token(t) if t == "corners" => Ok(BeaconSpec::Corners),
            BeaconRepr::Token(t) => Err(serde::de::Error::custom(format!(
                "unknown beacon token `{t}`, expected \"corners\" or a list of [x, y]"
            ))),
            BeaconRepr::Points(ps) => Ok(BeaconSpec::Explicit(
                ps.into_iter().map(|[x, y]| Point2::new(x, y)).collect(),
            )),
        }
    }
}

fn default_knn_exponent() -> f64 {
    1.2
}

fn default_interior_band() -> f64 {
    0.2
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_sensors: usize,
    pub beacons: BeaconSpec,
    pub field_model: FieldModel,
    pub n_steps: usize,
    #[serde(default = "default_knn_exponent")]
    pub knn_exponent: f64,
    /// Lag window for the time-lagged cumulant; 0 disables it. When positive
    /// the graph ranks pairs by the lagged cumulant.
    #[serde(default)]
    pub lag_window: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Overrides the neighbor count derived from `knn_exponent`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn_k: Option<usize>,
    #[serde(default = "default_interior_band")]
    pub interior_band: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 {
            return Err(Error::config("n_sensors", "must be at least 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::config("n_steps", "must be at least 1"));
        }
        if !(self.knn_exponent > 1.0) || !self.knn_exponent.is_finite() {
            return Err(Error::config("knn_exponent", format!("must be > 1, got {}", self.knn_exponent)));
        }
        if self.lag_window > 0 && self.n_steps <= 2 * self.lag_window {
            return Err(Error::config(
                "lag_window",
                format!("needs n_steps > 2 * lag_window (n_steps = {})", self.n_steps),
            ));
        }
        if !(0.0..=0.5).contains(&self.interior_band) {
            return Err(Error::config("interior_band", "must lie in [0, 0.5]"));
        }
        if let BeaconSpec::Explicit(ps) = &self.beacons {
            if let Some(p) = ps.iter().find(|p| !p.is_finite() || !p.in_unit_square()) {
                return Err(Error::config("beacons", format!("({}, {}) is outside the unit square", p.x, p.y)));
            }
        }
        let n_total = self.n_total();
        if let Some(k) = self.knn_k {
            if k == 0 || k >= n_total {
                return Err(Error::config("knn_k", format!("must satisfy 1 <= k < {n_total}")));
            }
        }
        self.field_model.validate()
    }

    /// Sensor count including beacons.
    pub fn n_total(&self) -> usize {
        self.n_sensors + self.beacons.positions().len()
    }

    /// Neighbor count for the proximity graph.
    pub fn k(&self) -> Result<usize> {
        match self.knn_k {
            Some(k) => Ok(k),
            None => crate::deploy::compute_kn(self.n_total(), self.knn_exponent),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(json_field(&e), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Best-effort name of the field a serde error complains about.
fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["missing field `", "unknown field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "config".to_string()
}
