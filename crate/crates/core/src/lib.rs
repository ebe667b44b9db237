//! Localization of sensors that never communicate, from the statistics of
//! their binary observations of a shared random field.

pub mod analytic;
pub mod config;
pub mod deploy;
pub mod error;
pub mod estimation;
pub mod fields;
pub mod graph;
pub mod io;
pub mod localization;
pub mod pipeline;
mod quad;
pub mod rng;
pub mod stats;

pub use config::ScenarioConfig;
pub use deploy::{compute_kn, deploy_sensors, place_beacons, BeaconSpec, Deployment, Point2};
pub use error::{Error, Result};
pub use estimation::{cumulant_matrix, CumulantMatrix, PairStatistics};
pub use fields::{generate_observations, FieldModel, ObservationMatrix};
pub use graph::{build_proximity_graph, hop_distances, HopDistanceTable, ProximityGraph};
pub use localization::{error_report, localize_all, multilaterate, ErrorReport};
pub use rng::RngStream;
