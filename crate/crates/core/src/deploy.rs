//! Sensor deployments in the unit square.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn in_unit_square(self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    /// Distance to the nearest side of the unit square (negative outside).
    pub fn boundary_distance(self) -> f64 {
        self.x.min(1.0 - self.x).min(self.y).min(1.0 - self.y)
    }
}

/// How beacons are added to a deployment.
#[derive(Debug, Clone, PartialEq)]
pub enum BeaconSpec {
    /// One beacon on each corner of the unit square.
    Corners,
    Explicit(Vec<Point2>),
}

impl BeaconSpec {
    pub fn positions(&self) -> Vec<Point2> {
        match self {
            BeaconSpec::Corners => vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
                Point2::new(1.0, 1.0),
            ],
            BeaconSpec::Explicit(points) => points.clone(),
        }
    }
}

/// Ground-truth sensor positions. Beacons are ordinary sensors whose
/// positions are known to the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    sensors: Vec<Point2>,
    beacon_ids: Vec<usize>,
}

impl Deployment {
    pub fn new(sensors: Vec<Point2>, beacon_ids: Vec<usize>) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::invalid("deployment needs at least one sensor"));
        }
        if let Some((i, p)) = sensors
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || !p.in_unit_square())
        {
            return Err(Error::invalid(format!(
                "sensor {i} at ({}, {}) lies outside the unit square",
                p.x, p.y
            )));
        }
        let mut seen = vec![false; sensors.len()];
        for &b in &beacon_ids {
            if b >= sensors.len() {
                return Err(Error::invalid(format!("beacon id {b} out of range")));
            }
            if std::mem::replace(&mut seen[b], true) {
                return Err(Error::invalid(format!("beacon id {b} listed twice")));
            }
        }
        Ok(Self { sensors, beacon_ids })
    }

    pub fn sensors(&self) -> &[Point2] {
        &self.sensors
    }

    pub fn beacon_ids(&self) -> &[usize] {
        &self.beacon_ids
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn is_beacon(&self, id: usize) -> bool {
        self.beacon_ids.contains(&id)
    }

    pub fn beacon_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.sensors.len()];
        for &b in &self.beacon_ids {
            mask[b] = true;
        }
        mask
    }
}

/// `n` sensors i.i.d. uniform on the unit square, in generation order.
pub fn deploy_sensors(n: usize, stream: &RngStream) -> Result<Deployment> {
    if n == 0 {
        return Err(Error::invalid("n_sensors must be at least 1"));
    }
    let mut rng = stream.rng();
    let sensors = (0..n)
        .map(|_| Point2::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    Deployment::new(sensors, Vec::new())
}

/// Appends the beacons described by `spec` as extra sensors and marks them.
pub fn place_beacons(d: &Deployment, spec: &BeaconSpec) -> Result<Deployment> {
    let extra = spec.positions();
    if let Some(p) = extra.iter().find(|p| !p.is_finite() || !p.in_unit_square()) {
        return Err(Error::invalid(format!(
            "beacon ({}, {}) lies outside the unit square",
            p.x, p.y
        )));
    }
    let mut sensors = d.sensors.clone();
    let mut beacon_ids = d.beacon_ids.clone();
    for p in extra {
        beacon_ids.push(sensors.len());
        sensors.push(p);
    }
    Deployment::new(sensors, beacon_ids)
}

/// Per-node neighbour count `floor((ln n)^c)`, at least 1.
pub fn compute_kn(n: usize, c: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::invalid("compute_kn needs n >= 2"));
    }
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::invalid(format!("knn exponent must exceed 1, got {c}")));
    }
    let k = (n as f64).ln().powf(c).floor();
    Ok((k as usize).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kn_values() {
        assert_eq!(compute_kn(1000, 1.2).unwrap(), 10);
        assert_eq!(compute_kn(3, 1.2).unwrap(), 1);
        // (ln 10000)^1.2 = 14.359, evaluated independently with python
        assert_eq!(compute_kn(10_000, 1.2).unwrap(), 14);
        assert_eq!(compute_kn(2, 1.5).unwrap(), 1);
    }

    #[test]
    fn kn_rejects_bad_input() {
        assert!(compute_kn(1, 1.2).is_err());
        assert!(compute_kn(100, 1.0).is_err());
        assert!(compute_kn(100, f64::NAN).is_err());
    }

    #[test]
    fn kn_monotone() {
        for c in [1.05, 1.2, 2.0] {
            let mut prev = 0;
            for n in 2..5000 {
                let k = compute_kn(n, c).unwrap();
                assert!(k >= prev, "n={n} c={c}");
                prev = k;
            }
        }
    }

    #[test]
    fn deploy_basic() {
        let s = RngStream::new(1).derive("deploy");
        let d = deploy_sensors(1, &s).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.sensors()[0].in_unit_square());
        assert!(deploy_sensors(0, &s).is_err());
    }

    #[test]
    fn deploy_is_deterministic() {
        let s = RngStream::new(99).derive("deploy");
        let a = deploy_sensors(1000, &s).unwrap();
        let b = deploy_sensors(1000, &s).unwrap();
        let bits = |d: &Deployment| {
            d.sensors()
                .iter()
                .flat_map(|p| [p.x.to_bits(), p.y.to_bits()])
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn deploy_mean_near_center() {
        let d = deploy_sensors(1000, &RngStream::new(5).derive("deploy")).unwrap();
        let n = d.len() as f64;
        let mx = d.sensors().iter().map(|p| p.x).sum::<f64>() / n;
        let my = d.sensors().iter().map(|p| p.y).sum::<f64>() / n;
        // sd of a U[0,1] mean over n points
        let sigma = (1.0 / 12.0 / n).sqrt();
        assert!((mx - 0.5).abs() < 3.0 * sigma);
        assert!((my - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn beacons() {
        let d = deploy_sensors(10, &RngStream::new(2)).unwrap();
        let c = place_beacons(&d, &BeaconSpec::Corners).unwrap();
        assert_eq!(c.len(), 14);
        assert_eq!(c.beacon_ids(), &[10, 11, 12, 13]);
        let corners: Vec<_> = c.beacon_ids().iter().map(|&i| c.sensors()[i]).collect();
        assert_eq!(corners, BeaconSpec::Corners.positions());
        assert_eq!(&c.sensors()[..10], d.sensors());

        let e = place_beacons(&d, &BeaconSpec::Explicit(vec![])).unwrap();
        assert_eq!(e, d);

        let m = place_beacons(&d, &BeaconSpec::Explicit(vec![Point2::new(0.5, 0.5)])).unwrap();
        assert_eq!(m.beacon_ids(), &[10]);
        assert_eq!(m.sensors()[10], Point2::new(0.5, 0.5));

        assert!(place_beacons(&d, &BeaconSpec::Explicit(vec![Point2::new(1.5, 0.5)])).is_err());
    }

    #[test]
    fn deployment_validation() {
        assert!(Deployment::new(vec![], vec![]).is_err());
        assert!(Deployment::new(vec![Point2::new(0.2, 0.2)], vec![1]).is_err());
        assert!(Deployment::new(vec![Point2::new(0.2, 0.2)], vec![0, 0]).is_err());
        assert!(Deployment::new(vec![Point2::new(-0.1, 0.2)], vec![]).is_err());
    }
}
