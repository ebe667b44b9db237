//! The end-to-end pipeline as separately runnable stages that communicate
//! through files in one output directory.
//!
//! | stage    | reads                     | writes                    |
//! |----------|---------------------------|---------------------------|
//! | generate | config                    | sensors.csv, observations.bin |
//! | estimate | observations.bin          | cumulants.csv             |
//! | graph    | sensors.csv, cumulants.csv| graph.csv, hops.csv       |
//! | localize | sensors.csv, hops.csv     | positions.csv             |
//!
//! Each stage records its outputs, checksums and wall-clock time in
//! `manifest.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytic::{boolean_curve, montecarlo_curve, CovarianceCurve};
use crate::config::ScenarioConfig;
use crate::deploy::{deploy_sensors, place_beacons, Deployment};
use crate::error::{Error, Result};
use crate::estimation::cumulant_matrix;
use crate::fields::{generate_observations, FieldModel, ObservationMatrix};
use crate::graph::{build_topk_graph, hop_distances, hop_scale};
use crate::io::{self, CurveSource, PairTable, ScatterRow};
use crate::localization::{error_report, localize_all, ErrorReport};
use crate::rng::RngStream;

pub const SENSORS_CSV: &str = "sensors.csv";
pub const OBSERVATIONS_BIN: &str = "observations.bin";
pub const CUMULANTS_CSV: &str = "cumulants.csv";
pub const GRAPH_CSV: &str = "graph.csv";
pub const HOPS_CSV: &str = "hops.csv";
pub const POSITIONS_CSV: &str = "positions.csv";
pub const SCATTER_CSV: &str = "scatter.csv";
pub const CURVE_CSV: &str = "covariance_curve.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generate,
    Estimate,
    Graph,
    Localize,
    Scatter,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub seconds: f64,
    pub files: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization: Option<ErrorReport>,
}

impl Manifest {
    pub fn new(config: &ScenarioConfig) -> Self {
        Self {
            config: config.clone(),
            seed: config.seed,
            stages: Vec::new(),
            localization: None,
        }
    }

    /// Replaces any earlier record of the same stage, keeping stages in
    /// pipeline order.
    pub fn record(&mut self, rec: StageRecord) {
        self.stages.retain(|s| s.stage != rec.stage);
        self.stages.push(rec);
        self.stages.sort_by_key(|s| s.stage as u8);
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        let path = out.join(MANIFEST_JSON);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST_JSON);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
    }

    /// The manifest in `out` if it belongs to `config`, else a fresh one.
    pub fn load_or_new(out: &Path, config: &ScenarioConfig) -> Self {
        match Self::read(out) {
            Ok(m) if m.config == *config => m,
            _ => Self::new(config),
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (`None`: one per core).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == Some(0) {
        return Err(Error::invalid("thread count must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

fn artifacts(out: &Path, names: &[&str]) -> Result<Vec<Artifact>> {
    names
        .iter()
        .map(|n| {
            Ok(Artifact {
                path: n.to_string(),
                sha256: io::sha256_file(&out.join(n))?,
            })
        })
        .collect()
}

fn timed<T>(stage: Stage, out: &Path, names: &[&str], f: impl FnOnce() -> Result<T>) -> Result<(StageRecord, T)> {
    let start = Instant::now();
    let value = f()?;
    let seconds = start.elapsed().as_secs_f64();
    Ok((
        StageRecord {
            stage,
            seconds,
            files: artifacts(out, names)?,
        },
        value,
    ))
}

/// Deployment with beacons for a scenario.
pub fn scenario_deployment(cfg: &ScenarioConfig) -> Result<Deployment> {
    let root = RngStream::new(cfg.seed);
    let d = deploy_sensors(cfg.n_sensors, &root.derive("deploy"))?;
    place_beacons(&d, &cfg.beacons)
}

/// Observation matrix for a scenario's deployment.
pub fn scenario_observations(cfg: &ScenarioConfig, d: &Deployment) -> Result<ObservationMatrix> {
    generate_observations(d, &cfg.field_model, cfg.n_steps, &RngStream::new(cfg.seed).derive("field"))
}

pub fn generate(cfg: &ScenarioConfig, out: &Path) -> Result<StageRecord> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (rec, ()) = timed(Stage::Generate, out, &[SENSORS_CSV, OBSERVATIONS_BIN], || {
        let d = scenario_deployment(cfg)?;
        let obs = scenario_observations(cfg, &d)?;
        io::write_sensors(&out.join(SENSORS_CSV), &d)?;
        obs.write_bin(&out.join(OBSERVATIONS_BIN))
    })?;
    Ok(rec)
}

pub fn estimate(cfg: &ScenarioConfig, out: &Path) -> Result<StageRecord> {
    cfg.validate()?;
    let (rec, ()) = timed(Stage::Estimate, out, &[CUMULANTS_CSV], || {
        let obs = ObservationMatrix::read_bin(&out.join(OBSERVATIONS_BIN))?;
        let cm = cumulant_matrix(&obs, cfg.lag_window)?;
        io::write_cumulants(&out.join(CUMULANTS_CSV), &cm)
    })?;
    Ok(rec)
}

/// Ranks pairs by the lagged cumulant when the config asks for a lag window.
pub fn graph(cfg: &ScenarioConfig, out: &Path) -> Result<StageRecord> {
    cfg.validate()?;
    let (rec, ()) = timed(Stage::Graph, out, &[GRAPH_CSV, HOPS_CSV], || {
        let d = io::read_sensors(&out.join(SENSORS_CSV))?;
        let table = io::read_cumulants(&out.join(CUMULANTS_CSV), d.len())?;
        let use_lagged = cfg.lag_window > 0;
        if use_lagged && table.c2_lagged.is_none() {
            return Err(Error::data(out.join(CUMULANTS_CSV), "lag window set but c2_lagged is empty"));
        }
        let k = cfg.k()?;
        let g = build_topk_graph(d.len(), k, |i, j| {
            if use_lagged {
                table.c2_lagged(i, j).expect("checked above")
            } else {
                table.c2(i, j)
            }
        })?;
        io::write_graph(&out.join(GRAPH_CSV), &g)?;
        let hops = if d.beacon_ids().is_empty() {
            crate::graph::HopDistanceTable {
                sources: vec![],
                hops: vec![],
            }
        } else {
            hop_distances(&g, d.beacon_ids())?
        };
        io::write_hops(&out.join(HOPS_CSV), &hops, hop_scale(d.len(), k))
    })?;
    Ok(rec)
}

pub fn localize(cfg: &ScenarioConfig, out: &Path) -> Result<(StageRecord, ErrorReport)> {
    cfg.validate()?;
    timed(Stage::Localize, out, &[POSITIONS_CSV], || {
        let d = io::read_sensors(&out.join(SENSORS_CSV))?;
        let hops = io::read_hops(&out.join(HOPS_CSV), d.len())?;
        if hops.sources != d.beacon_ids() {
            return Err(Error::data(out.join(HOPS_CSV), "beacons differ from sensors.csv"));
        }
        let nodes = localize_all(&d, &hops, cfg.k()?, cfg.interior_band)?;
        io::write_positions(&out.join(POSITIONS_CSV), &nodes)?;
        Ok(error_report(&nodes))
    })
}

/// Runs the four stages in order into `out` and writes a fresh manifest.
pub fn run_pipeline(cfg: &ScenarioConfig, out: &Path) -> Result<Manifest> {
    let mut m = Manifest::new(cfg);
    m.record(generate(cfg, out)?);
    m.record(estimate(cfg, out)?);
    m.record(graph(cfg, out)?);
    let (rec, report) = localize(cfg, out)?;
    m.record(rec);
    m.localization = Some(report);
    m.write(out)?;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterMode {
    AllPairs,
    /// Only pairs containing this node.
    FixedNode(usize),
}

/// Cumulant against true distance for the selected pairs, in pair order.
pub fn scatter_rows(d: &Deployment, table: &PairTable, mode: ScatterMode, lagged: bool) -> Result<Vec<ScatterRow>> {
    if table.n() != d.len() {
        return Err(Error::invalid("cumulant table and deployment sizes differ"));
    }
    if lagged && table.c2_lagged.is_none() {
        return Err(Error::invalid("lagged scatter requested but no lagged cumulants"));
    }
    if let ScatterMode::FixedNode(k) = mode {
        if k >= d.len() {
            return Err(Error::invalid(format!("node {k} out of range for {} sensors", d.len())));
        }
    }
    let pts = d.sensors();
    Ok(table
        .pairs()
        .filter(|&(i, j)| match mode {
            ScatterMode::AllPairs => true,
            ScatterMode::FixedNode(k) => i == k || j == k,
        })
        .map(|(i, j)| ScatterRow {
            i,
            j,
            distance: pts[i].dist(pts[j]),
            c2: if lagged {
                table.c2_lagged(i, j).expect("checked above")
            } else {
                table.c2(i, j)
            },
        })
        .collect())
}

pub fn scatter(out: &Path, mode: ScatterMode, lagged: bool) -> Result<StageRecord> {
    let (rec, ()) = timed(Stage::Scatter, out, &[SCATTER_CSV], || {
        let d = io::read_sensors(&out.join(SENSORS_CSV))?;
        let table = io::read_cumulants(&out.join(CUMULANTS_CSV), d.len())?;
        io::write_scatter(&out.join(SCATTER_CSV), &scatter_rows(&d, &table, mode, lagged)?)
    })?;
    Ok(rec)
}

/// Covariance curves for `model`: the closed form where one exists, and
/// a Monte Carlo estimate with `n_samples` per distance.
pub fn oracle_curves(
    model: &FieldModel,
    distances: &[f64],
    n_samples: u64,
    stream: &RngStream,
) -> Result<Vec<(CurveSource, CovarianceCurve)>> {
    if distances.is_empty() {
        return Err(Error::invalid("oracle needs at least one distance"));
    }
    let mut curves = Vec::new();
    if let FieldModel::BooleanClouds(m) = model {
        curves.push((CurveSource::Analytic, boolean_curve(distances, m)?));
    }
    curves.push((CurveSource::MonteCarlo, montecarlo_curve(model, distances, n_samples, stream)?));
    Ok(curves)
}

pub fn oracle(cfg: &ScenarioConfig, out: &Path, distances: &[f64], n_samples: u64) -> Result<StageRecord> {
    cfg.field_model.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (rec, ()) = timed(Stage::Oracle, out, &[CURVE_CSV], || {
        let stream = RngStream::new(cfg.seed).derive("oracle");
        let curves = oracle_curves(&cfg.field_model, distances, n_samples, &stream)?;
        let refs: Vec<_> = curves.iter().map(|(s, c)| (*s, c)).collect();
        io::write_curves(&out.join(CURVE_CSV), &refs)
    })?;
    Ok(rec)
}

/// Resolves the output directory: an explicit override, else the config's.
pub fn output_dir(cfg: &ScenarioConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone())
}
