use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::check_positive;
use crate::deploy::{Deployment, Point2};
use crate::error::Result;
use crate::rng::RngStream;

const CENTER: Point2 = Point2::new(0.5, 0.5);

/// Unbounded "big cloud" shadows with isotropic orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum BigClouds {
    /// A single half plane per step. The boundary line's offset from the
    /// square's center is uniform on `[-√2/2, √2/2]`, so every line that
    /// meets the square is reachable in every direction.
    HalfPlane,
    /// Alternating in/out strips whose boundaries project to a Poisson
    /// process of `line_intensity` on the normal direction.
    StripProcess { line_intensity: f64 },
}

impl BigClouds {
    pub fn validate(&self) -> Result<()> {
        match self {
            BigClouds::HalfPlane => Ok(()),
            BigClouds::StripProcess { line_intensity } => {
                check_positive("field_model.line_intensity", *line_intensity)
            }
        }
    }

    /// Draws one realization as a membership test over points.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> BigCloudRealization {
        let angle = rng.random_range(0.0..TAU);
        let normal = Point2::new(angle.cos(), angle.sin());
        match self {
            BigClouds::HalfPlane => BigCloudRealization::HalfPlane {
                normal,
                offset: rng.random_range(-FRAC_1_SQRT_2..=FRAC_1_SQRT_2),
            },
            BigClouds::StripProcess { line_intensity } => {
                let gaps = Exp::new(*line_intensity).expect("validated intensity");
                let inside_at_start = rng.random::<bool>();
                let mut boundaries = Vec::new();
                let mut s = -FRAC_1_SQRT_2;
                loop {
                    s += gaps.sample(rng);
                    if s > FRAC_1_SQRT_2 {
                        break;
                    }
                    boundaries.push(s);
                }
                BigCloudRealization::Strips {
                    normal,
                    inside_at_start,
                    boundaries,
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum BigCloudRealization {
    HalfPlane {
        normal: Point2,
        offset: f64,
    },
    /// Membership alternates at each boundary, starting from
    /// `inside_at_start` at projection `-√2/2`.
    Strips {
        normal: Point2,
        inside_at_start: bool,
        boundaries: Vec<f64>,
    },
}

impl BigCloudRealization {
    /// Membership of `p`. Only meaningful for points whose projection on the
    /// normal, relative to the square's center, lies within `±√2/2`.
    pub fn contains(&self, p: Point2) -> bool {
        let project = |n: &Point2| (p.x - CENTER.x) * n.x + (p.y - CENTER.y) * n.y;
        match self {
            BigCloudRealization::HalfPlane { normal, offset } => project(normal) <= *offset,
            BigCloudRealization::Strips {
                normal,
                inside_at_start,
                boundaries,
            } => {
                let crossed = boundaries.partition_point(|&b| b < project(normal));
                *inside_at_start ^ (crossed % 2 == 1)
            }
        }
    }
}

pub fn sample_big_clouds(
    d: &Deployment,
    m: &BigClouds,
    t_index: u64,
    stream: &RngStream,
) -> Vec<bool> {
    let mut rng = stream.derive_indexed("big_clouds", t_index).rng();
    let shadow = m.realize(&mut rng);
    d.sensors().iter().map(|&p| shadow.contains(p)).collect()
}
