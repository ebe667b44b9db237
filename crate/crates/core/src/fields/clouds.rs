use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{check_non_negative, check_positive};
use crate::deploy::{Deployment, Point2};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Poisson Boolean model of round clouds: disk centers form a Poisson process
/// of `intensity` per unit area, radii are i.i.d. uniform on
/// `[radius_min, radius_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BooleanClouds {
    pub intensity: f64,
    #[serde(default)]
    pub radius_min: f64,
    #[serde(default = "default_radius_max")]
    pub radius_max: f64,
    /// Centers are drawn on the unit square grown by this much on every side.
    /// Defaults to `radius_max`, the smallest value with no edge bias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

fn default_radius_max() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Point2,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, p: Point2) -> bool {
        self.center.dist_sq(p) <= self.radius * self.radius
    }
}

impl BooleanClouds {
    pub fn new(intensity: f64, radius_min: f64, radius_max: f64) -> Self {
        Self {
            intensity,
            radius_min,
            radius_max,
            margin: None,
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = Some(margin);
        self
    }

    pub fn margin(&self) -> f64 {
        self.margin.unwrap_or(self.radius_max)
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("field_model.intensity", self.intensity)?;
        check_non_negative("field_model.radius_min", self.radius_min)?;
        check_positive("field_model.radius_max", self.radius_max)?;
        if self.radius_max < self.radius_min {
            return Err(Error::config(
                "field_model.radius_max",
                "must be at least radius_min",
            ));
        }
        let margin = self.margin();
        check_non_negative("field_model.margin", margin)?;
        if margin < self.radius_max {
            return Err(Error::config(
                "field_model.margin",
                format!("must be at least radius_max ({}), got {margin}", self.radius_max),
            ));
        }
        Ok(())
    }

    /// `E[R^2]` for the uniform radius law.
    pub fn mean_sq_radius(&self) -> f64 {
        let (a, b) = (self.radius_min, self.radius_max);
        (a * a + a * b + b * b) / 3.0
    }

    /// Probability that a point far from the window edges is covered.
    pub fn coverage_probability(&self) -> f64 {
        1.0 - (-self.intensity * std::f64::consts::PI * self.mean_sq_radius()).exp()
    }

    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.radius_max > self.radius_min {
            rng.random_range(self.radius_min..self.radius_max)
        } else {
            self.radius_min
        }
    }

    /// One realization of the disks whose centers fall in
    /// `[lo.x, hi.x] x [lo.y, hi.y]`.
    pub fn realize_in<R: Rng + ?Sized>(&self, lo: Point2, hi: Point2, rng: &mut R) -> Vec<Disk> {
        let (w, h) = (hi.x - lo.x, hi.y - lo.y);
        let mean = self.intensity * w * h;
        let count = if mean > 0.0 {
            Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
        } else {
            0
        };
        (0..count)
            .map(|_| {
                let center = Point2::new(lo.x + w * rng.random::<f64>(), lo.y + h * rng.random::<f64>());
                Disk {
                    center,
                    radius: self.sample_radius(rng),
                }
            })
            .collect()
    }
}

/// One column of records: sensor `i` reads 1 iff it lies in the union of the
/// disks of realization `t_index`.
pub fn sample_boolean_clouds(
    d: &Deployment,
    m: &BooleanClouds,
    t_index: u64,
    stream: &RngStream,
) -> Vec<bool> {
    let mut rng = stream.derive_indexed("boolean_clouds", t_index).rng();
    let margin = m.margin();
    let disks = m.realize_in(
        Point2::new(-margin, -margin),
        Point2::new(1.0 + margin, 1.0 + margin),
        &mut rng,
    );
    d.sensors()
        .iter()
        .map(|&p| disks.iter().any(|disk| disk.contains(p)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deploy::deploy_sensors;

    #[test]
    fn coverage_matches_void_probability() {
        // p = 1 - exp(-30 π 0.04/3) = 0.71537; an independent Monte Carlo
        // (python, 1e6 draws of Poisson disks around the origin) gave 0.7149,
        // within its sd of 0.00045.
        let m = BooleanClouds::new(30.0, 0.0, 0.2).with_margin(0.2);
        let p = m.coverage_probability();
        assert!((p - 0.715_37).abs() < 1e-4);

        let d = Deployment::new(
            vec![Point2::new(0.5, 0.5), Point2::new(0.1, 0.9), Point2::new(0.0, 0.0)],
            vec![],
        )
        .unwrap();
        let t = 2000;
        let s = RngStream::new(21);
        let mut hits = [0usize; 3];
        for k in 0..t {
            for (h, b) in hits.iter_mut().zip(sample_boolean_clouds(&d, &m, k, &s)) {
                *h += b as usize;
            }
        }
        let sigma = (p * (1.0 - p) / t as f64).sqrt();
        for h in hits {
            let mean = h as f64 / t as f64;
            assert!((mean - p).abs() < 3.0 * sigma, "mean {mean}, p {p}");
        }
    }

    #[test]
    fn tiny_intensity_gives_empty_sky() {
        let d = deploy_sensors(100, &RngStream::new(1)).unwrap();
        let m = BooleanClouds::new(1e-9, 0.0, 0.2);
        assert!(sample_boolean_clouds(&d, &m, 0, &RngStream::new(2)).iter().all(|b| !b));
    }

    #[test]
    fn huge_clouds_cover_everything() {
        let d = deploy_sensors(100, &RngStream::new(1)).unwrap();
        let m = BooleanClouds::new(5.0, 2.0, 2.0).with_margin(2.0);
        for t in 0..5 {
            assert!(sample_boolean_clouds(&d, &m, t, &RngStream::new(2)).iter().all(|&b| b));
        }
    }

    #[test]
    fn validation() {
        assert!(BooleanClouds::new(-1.0, 0.0, 0.2).validate().is_err());
        assert!(BooleanClouds::new(30.0, 0.3, 0.2).validate().is_err());
        assert!(BooleanClouds::new(30.0, 0.0, 0.2).with_margin(0.1).validate().is_err());
        assert!(BooleanClouds::new(30.0, 0.0, 0.2).validate().is_ok());
        let err = BooleanClouds::new(-1.0, 0.0, 0.2).validate().unwrap_err();
        assert!(err.to_string().contains("field_model.intensity"));
    }
}
