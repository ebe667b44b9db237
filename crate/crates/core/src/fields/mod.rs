//! Background random fields and the binary records they induce at sensors.
//!
//! A sensor records 1 exactly when it lies in the random set (in a cloud
//! shadow, or within sensing range of a walker); no analog signal is
//! synthesized.

mod bigclouds;
mod clouds;
mod observation;
mod walkers;

pub use bigclouds::{sample_big_clouds, BigClouds};
pub use clouds::{sample_boolean_clouds, BooleanClouds, Disk};
pub use observation::{BitRow, ObservationMatrix};
pub use walkers::{init_walkers, observe_walkers, reflect_into, step_walkers, RandomWalkers};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deploy::Deployment;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldModel {
    BooleanClouds(BooleanClouds),
    BigClouds(BigClouds),
    RandomWalkers(RandomWalkers),
}

impl FieldModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            FieldModel::BooleanClouds(m) => m.validate(),
            FieldModel::BigClouds(m) => m.validate(),
            FieldModel::RandomWalkers(m) => m.validate(),
        }
    }
}

/// Synthesizes `T` observation columns for every sensor in `d`.
///
/// Cloud models draw an independent realization per step from the sub-stream
/// for that step, so columns are computed in parallel. Walkers follow a
/// single trajectory, advanced once before each observation.
pub fn generate_observations(
    d: &Deployment,
    model: &FieldModel,
    n_steps: usize,
    stream: &RngStream,
) -> Result<ObservationMatrix> {
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    model.validate()?;
    let columns: Vec<Vec<bool>> = match model {
        FieldModel::BooleanClouds(m) => (0..n_steps as u64)
            .into_par_iter()
            .map(|t| sample_boolean_clouds(d, m, t, stream))
            .collect(),
        FieldModel::BigClouds(m) => (0..n_steps as u64)
            .into_par_iter()
            .map(|t| sample_big_clouds(d, m, t, stream))
            .collect(),
        FieldModel::RandomWalkers(m) => {
            let mut walkers = init_walkers(m, &stream.derive("walkers/init"));
            let mut rng = stream.derive("walkers/steps").rng();
            (0..n_steps)
                .map(|_| {
                    step_walkers(&mut walkers, m, &mut rng);
                    observe_walkers(d, &walkers, m.sensing_radius)
                })
                .collect()
        }
    };
    ObservationMatrix::from_columns(d.len(), &columns)
}

pub(crate) fn check_positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {v}")))
    }
}

pub(crate) fn check_non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a non-negative finite number, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deploy::{deploy_sensors, Point2};

    fn clouds() -> FieldModel {
        FieldModel::BooleanClouds(BooleanClouds::new(30.0, 0.0, 0.2))
    }

    #[test]
    fn single_step() {
        let d = deploy_sensors(20, &RngStream::new(1)).unwrap();
        let obs = generate_observations(&d, &clouds(), 1, &RngStream::new(2)).unwrap();
        assert_eq!((obs.n_sensors(), obs.n_steps()), (20, 1));
        assert!(generate_observations(&d, &clouds(), 0, &RngStream::new(2)).is_err());
    }

    #[test]
    fn serde_shape() {
        let json = r#"{"kind":"big_clouds","variant":"strip_process","line_intensity":3.0}"#;
        let m: FieldModel = serde_json::from_str(json).unwrap();
        assert_eq!(m, FieldModel::BigClouds(BigClouds::StripProcess { line_intensity: 3.0 }));
        let back: FieldModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);

        let w: FieldModel =
            serde_json::from_str(r#"{"kind":"random_walkers","n_walkers":10,"sensing_radius":0.13}"#)
                .unwrap();
        let FieldModel::RandomWalkers(w) = w else { panic!() };
        assert_eq!(w.step_sigma, 0.02);
        assert_eq!(w.margin(), 0.13);

        let c: FieldModel =
            serde_json::from_str(r#"{"kind":"boolean_clouds","intensity":30}"#).unwrap();
        assert_eq!(c, clouds());
    }

    #[test]
    fn clouds_are_independent_in_time() {
        // lag-1 autocovariance of an i.i.d. sequence is zero; its estimator has
        // sd ≈ p(1-p)/sqrt(T)
        let d = Deployment::new(vec![Point2::new(0.5, 0.5)], vec![]).unwrap();
        let t = 2000;
        let obs = generate_observations(&d, &clouds(), t, &RngStream::new(11)).unwrap();
        let p = obs.mean(0);
        let both = (0..t - 1).filter(|&s| obs.get(0, s) && obs.get(0, s + 1)).count() as f64;
        let cov = both / (t - 1) as f64 - p * p;
        let sigma = p * (1.0 - p) / ((t - 1) as f64).sqrt();
        assert!(cov.abs() < 3.0 * sigma, "lag-1 cov {cov}, sigma {sigma}");
    }

    #[test]
    fn walkers_have_positive_lagged_self_correlation() {
        let d = Deployment::new(vec![Point2::new(0.5, 0.5), Point2::new(0.3, 0.6)], vec![]).unwrap();
        let m = FieldModel::RandomWalkers(RandomWalkers::new(10, 0.13));
        let t = 2000;
        let obs = generate_observations(&d, &m, t, &RngStream::new(4)).unwrap();
        for i in 0..2 {
            let p = obs.mean(i);
            for lag in 1..=2 {
                let both = (0..t - lag).filter(|&s| obs.get(i, s) && obs.get(i, s + lag)).count() as f64;
                let cov = both / (t - lag) as f64 - p * p;
                assert!(cov > 0.0, "sensor {i} lag {lag}: {cov}");
            }
        }
    }

    #[test]
    fn observations_reproducible_for_any_thread_count() {
        let d = deploy_sensors(50, &RngStream::new(3)).unwrap();
        for model in [
            clouds(),
            FieldModel::BigClouds(BigClouds::HalfPlane),
            FieldModel::RandomWalkers(RandomWalkers::new(4, 0.1)),
        ] {
            let run = |threads| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .unwrap()
                    .install(|| generate_observations(&d, &model, 300, &RngStream::new(9)).unwrap())
            };
            assert_eq!(run(1), run(4));
        }
    }
}
