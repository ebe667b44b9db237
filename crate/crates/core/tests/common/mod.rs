//! Scenario runners shared by the acceptance suite and the pilot example.

#![allow(dead_code)]

use anchorite::deploy::deploy_sensors;
use anchorite::estimation::{cumulant_matrix, lagged_cumulant, CumulantMatrix};
use anchorite::fields::{BigClouds, BooleanClouds, FieldModel, RandomWalkers};
use anchorite::graph::{build_geometric_graph, build_proximity_graph, geometric_radius, hop_distances, knn_quality};
use anchorite::localization::{error_report, localize_all, ErrorReport};
use anchorite::pipeline::{scenario_deployment, scenario_observations};
use anchorite::{stats, BeaconSpec, Deployment, FieldModel as Model, ObservationMatrix, RngStream, ScenarioConfig};
use rand::Rng;

pub const N_SENSORS: usize = 1000;
pub const N_STEPS: usize = 2000;
pub const KNN_EXPONENT: f64 = 1.2;

pub fn scenario(seed: u64, field_model: FieldModel, lag_window: usize) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        n_sensors: N_SENSORS,
        beacons: BeaconSpec::Corners,
        field_model,
        n_steps: N_STEPS,
        knn_exponent: KNN_EXPONENT,
        lag_window,
        output_dir: "out".into(),
        knn_k: None,
        interior_band: 0.2,
    }
}

pub fn round_clouds() -> FieldModel {
    Model::BooleanClouds(BooleanClouds::new(30.0, 0.0, 0.2))
}

pub fn half_plane() -> FieldModel {
    Model::BigClouds(BigClouds::HalfPlane)
}

pub fn walkers() -> FieldModel {
    Model::RandomWalkers(RandomWalkers::new(10, 0.13))
}

pub struct Run {
    pub cfg: ScenarioConfig,
    pub d: Deployment,
    pub obs: ObservationMatrix,
    pub cm: CumulantMatrix,
}

pub fn run(cfg: ScenarioConfig) -> Run {
    cfg.validate().unwrap();
    let d = scenario_deployment(&cfg).unwrap();
    let obs = scenario_observations(&cfg, &d).unwrap();
    let cm = cumulant_matrix(&obs, cfg.lag_window).unwrap();
    Run { cfg, d, obs, cm }
}

/// Spearman correlation of the cumulant with distance over all pairs.
pub fn all_pairs_spearman(r: &Run, lagged: bool) -> f64 {
    let pts = r.d.sensors();
    let (mut ds, mut cs) = (Vec::new(), Vec::new());
    for (i, j) in r.cm.pairs() {
        ds.push(pts[i].dist(pts[j]));
        cs.push(if lagged { r.cm.c2_lagged(i, j).unwrap() } else { r.cm.c2(i, j) });
    }
    stats::spearman(&ds, &cs).unwrap_or(f64::NAN)
}

/// Spearman correlation of the cumulant with distance over pairs with `node`.
pub fn fixed_node_spearman(r: &Run, node: usize, lagged: bool) -> f64 {
    let pts = r.d.sensors();
    let (mut ds, mut cs) = (Vec::new(), Vec::new());
    for j in (0..r.d.len()).filter(|&j| j != node) {
        ds.push(pts[node].dist(pts[j]));
        cs.push(if lagged { r.cm.c2_lagged(node, j).unwrap() } else { r.cm.c2(node, j) });
    }
    stats::spearman(&ds, &cs).unwrap_or(f64::NAN)
}

pub fn k(r: &Run) -> usize {
    r.cfg.k().unwrap()
}

/// Recall of the true k-NN edges in the cumulant graph.
pub fn recall(r: &Run) -> f64 {
    let g = build_proximity_graph(&r.cm, k(r), r.cfg.lag_window > 0).unwrap();
    knn_quality(&g, &r.d, k(r)).unwrap().recall
}

pub fn end_to_end(r: &Run) -> ErrorReport {
    let g = build_proximity_graph(&r.cm, k(r), r.cfg.lag_window > 0).unwrap();
    let h = hop_distances(&g, r.d.beacon_ids()).unwrap();
    let nodes = localize_all(&r.d, &h, k(r), r.cfg.interior_band).unwrap();
    error_report(&nodes)
}

pub const THEOREM1_SIZES: [usize; 3] = [500, 1000, 2000];
pub const THEOREM1_PAIRS: usize = 100;

/// Per size, the median over random connected pairs of `|hops r(N) - d|` on
/// the geometric graph G(N), and the number of sampled pairs that were
/// disconnected.
pub fn theorem1_medians(seed: u64) -> Vec<(f64, usize)> {
    let root = RngStream::new(seed).derive("theorem1");
    THEOREM1_SIZES
        .iter()
        .map(|&n| {
            let s = root.derive_indexed("size", n as u64);
            let d = deploy_sensors(n, &s.derive("deploy")).unwrap();
            let r = geometric_radius(n, KNN_EXPONENT);
            let g = build_geometric_graph(&d, r).unwrap();
            let mut rng = s.derive("pairs").rng();
            let pairs: Vec<(usize, usize)> = (0..THEOREM1_PAIRS)
                .map(|_| {
                    let a = rng.random_range(0..n);
                    let mut b = rng.random_range(0..n - 1);
                    if b >= a {
                        b += 1;
                    }
                    (a, b)
                })
                .collect();
            let sources: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let h = hop_distances(&g, &sources).unwrap();
            let mut errs = Vec::new();
            let mut lost = 0;
            for (k, &(a, b)) in pairs.iter().enumerate() {
                match h.get(k, b) {
                    Some(hops) => errs.push((hops as f64 * r - d.sensors()[a].dist(d.sensors()[b])).abs()),
                    None => lost += 1,
                }
            }
            (stats::median(&errs).unwrap_or(f64::NAN), lost)
        })
        .collect()
}

/// Reference nodes for the fixed-node walker scatter: the non-beacon
/// sensors at the 90th and 10th percentiles of occupation frequency.
pub fn occupation_nodes(r: &Run) -> (usize, usize) {
    let mut ids: Vec<usize> = (0..r.d.len()).filter(|&i| !r.d.is_beacon(i)).collect();
    ids.sort_by(|&a, &b| r.cm.mean(a).total_cmp(&r.cm.mean(b)).then(a.cmp(&b)));
    let at = |q: f64| ids[((ids.len() - 1) as f64 * q).round() as usize];
    (at(0.9), at(0.1))
}

/// Lagged cumulant of a sensor with itself (distance 0).
pub fn self_lagged(r: &Run, node: usize) -> f64 {
    lagged_cumulant(&r.obs, node, node, r.cfg.lag_window).unwrap()
}
