use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_non_negative, check_positive};
use crate::deploy::{Deployment, Point2};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Independent Gaussian random walkers reflected at the boundary of the unit
/// square grown by `margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomWalkers {
    pub n_walkers: usize,
    pub sensing_radius: f64,
    /// Per-axis standard deviation of one step.
    #[serde(default = "default_step_sigma")]
    pub step_sigma: f64,
    /// Defaults to `sensing_radius`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

fn default_step_sigma() -> f64 {
    0.02
}

impl RandomWalkers {
    pub fn new(n_walkers: usize, sensing_radius: f64) -> Self {
        Self {
            n_walkers,
            sensing_radius,
            step_sigma: default_step_sigma(),
            margin: None,
        }
    }

    pub fn margin(&self) -> f64 {
        self.margin.unwrap_or(self.sensing_radius)
    }

    /// Lower and upper coordinate of the square the walkers move in.
    pub fn bounds(&self) -> (f64, f64) {
        (-self.margin(), 1.0 + self.margin())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_walkers == 0 {
            return Err(Error::config("field_model.n_walkers", "must be at least 1"));
        }
        check_positive("field_model.sensing_radius", self.sensing_radius)?;
        // zero is accepted: a frozen field is occasionally useful in tests
        check_non_negative("field_model.step_sigma", self.step_sigma)?;
        check_non_negative("field_model.margin", self.margin())
    }
}

/// Folds `x` into `[lo, hi]` by mirror reflection at both ends, however far
/// outside it lands.
pub fn reflect_into(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    if width <= 0.0 {
        return lo;
    }
    let y = (x - lo).rem_euclid(2.0 * width);
    lo + if y > width { 2.0 * width - y } else { y }
}

/// Starting positions drawn from the stationary (uniform) law.
pub fn init_walkers(m: &RandomWalkers, stream: &RngStream) -> Vec<Point2> {
    let (lo, hi) = m.bounds();
    let mut rng = stream.rng();
    (0..m.n_walkers)
        .map(|_| Point2::new(rng.random_range(lo..hi), rng.random_range(lo..hi)))
        .collect()
}

/// Advances every walker by one isotropic Gaussian step.
pub fn step_walkers<R: Rng + ?Sized>(walkers: &mut [Point2], m: &RandomWalkers, rng: &mut R) {
    let (lo, hi) = m.bounds();
    for w in walkers.iter_mut() {
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        w.x = reflect_into(w.x + m.step_sigma * dx, lo, hi);
        w.y = reflect_into(w.y + m.step_sigma * dy, lo, hi);
    }
}

/// Sensor `i` reads 1 iff some walker is within `sensing_radius` of it.
pub fn observe_walkers(d: &Deployment, walkers: &[Point2], sensing_radius: f64) -> Vec<bool> {
    let r2 = sensing_radius * sensing_radius;
    d.sensors()
        .iter()
        .map(|&p| walkers.iter().any(|&w| w.dist_sq(p) <= r2))
        .collect()
}
