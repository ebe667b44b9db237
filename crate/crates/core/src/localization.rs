//! Position recovery from estimated distances to beacons.

use rayon::prelude::*;

use crate::deploy::{Deployment, Point2};
use crate::error::{Error, Result};
use crate::graph::{scale_hops, HopDistanceTable};
use crate::stats;

const MAX_ITERATIONS: usize = 100;
const STEP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multilateration {
    pub position: Point2,
    /// Sum of squared range residuals at `position`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sum_sq_residual(p: Point2, beacons: &[Point2], dists: &[f64]) -> f64 {
    beacons
        .iter()
        .zip(dists)
        .map(|(b, &r)| (p.dist(*b) - r).powi(2))
        .sum()
}

/// Solves the differenced linear system `2(b_i - b_0)·p = |b_i|² - |b_0|² - r_i² + r_0²`
/// by least squares.
fn linear_estimate(beacons: &[Point2], dists: &[f64]) -> Result<Point2> {
    let b0 = beacons[0];
    let (mut a11, mut a12, mut a22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut scale: f64 = 0.0;
    for (b, &r) in beacons.iter().zip(dists).skip(1) {
        let ax = 2.0 * (b.x - b0.x);
        let ay = 2.0 * (b.y - b0.y);
        let rhs = (b.x * b.x + b.y * b.y) - (b0.x * b0.x + b0.y * b0.y) - r * r + dists[0] * dists[0];
        a11 += ax * ax;
        a12 += ax * ay;
        a22 += ay * ay;
        y1 += ax * rhs;
        y2 += ay * rhs;
        scale = scale.max(ax * ax + ay * ay);
    }
    let det = a11 * a22 - a12 * a12;
    if !(det.abs() > 1e-12 * scale * scale) {
        return Err(Error::DegenerateGeometry(
            "beacons are collinear or coincident".into(),
        ));
    }
    Ok(Point2::new((a22 * y1 - a12 * y2) / det, (a11 * y2 - a12 * y1) / det))
}

/// Least-squares position from ranges to at least three non-collinear
/// beacons: linear initialization refined by Gauss-Newton with backtracking.
pub fn multilaterate(beacons: &[Point2], dists: &[f64]) -> Result<Multilateration> {
    if beacons.len() != dists.len() {
        return Err(Error::invalid("beacon and distance counts differ"));
    }
    if beacons.len() < 3 {
        return Err(Error::invalid(format!(
            "multilateration needs at least 3 beacons, got {}",
            beacons.len()
        )));
    }
    if beacons.iter().any(|b| !b.is_finite()) || dists.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::invalid("beacons and distances must be finite, distances non-negative"));
    }
    let mut p = linear_estimate(beacons, dists)?;
    let mut cost = sum_sq_residual(p, beacons, dists);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // normal equations of the range residuals
        let (mut h11, mut h12, mut h22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (b, &r) in beacons.iter().zip(dists) {
            let dist = p.dist(*b);
            if dist < 1e-14 {
                continue;
            }
            let (jx, jy) = ((p.x - b.x) / dist, (p.y - b.y) / dist);
            let res = dist - r;
            h11 += jx * jx;
            h12 += jx * jy;
            h22 += jy * jy;
            g1 += jx * res;
            g2 += jy * res;
        }
        let det = h11 * h22 - h12 * h12;
        if !(det.abs() > 1e-300) {
            break;
        }
        let dx = -(h22 * g1 - h12 * g2) / det;
        let dy = -(h11 * g2 - h12 * g1) / det;
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-8 {
            let q = Point2::new(p.x + t * dx, p.y + t * dy);
            let c = sum_sq_residual(q, beacons, dists);
            if c <= cost {
                let step = t * (dx * dx + dy * dy).sqrt();
                p = q;
                cost = c;
                accepted = true;
                if step < STEP_TOLERANCE {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no descent left along the Gauss-Newton direction
            converged = true;
        }
        if converged {
            break;
        }
    }
    Ok(Multilateration {
        position: p,
        residual: cost,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedNode {
    pub id: usize,
    pub truth: Point2,
    /// `None` when fewer than three beacons are reachable.
    pub estimate: Option<Point2>,
    pub is_beacon: bool,
    /// At least `interior_band` from the square's boundary.
    pub interior: bool,
}

impl LocalizedNode {
    pub fn error(&self) -> Option<f64> {
        self.estimate.map(|e| e.dist(self.truth))
    }
}

/// Multilaterates every non-beacon sensor from its scaled hop distances to
/// the beacons. Beacons keep their known positions.
pub fn localize_all(
    d: &Deployment,
    hops: &HopDistanceTable,
    k: usize,
    interior_band: f64,
) -> Result<Vec<LocalizedNode>> {
    if hops.sources != d.beacon_ids() {
        return Err(Error::invalid("hop table sources must be the deployment's beacons"));
    }
    if hops.hops.iter().any(|row| row.len() != d.len()) {
        return Err(Error::invalid("hop table size differs from the deployment"));
    }
    let est = scale_hops(hops, d.len(), k);
    let beacon_pos: Vec<Point2> = d.beacon_ids().iter().map(|&b| d.sensors()[b]).collect();
    (0..d.len())
        .into_par_iter()
        .map(|i| {
            let truth = d.sensors()[i];
            let is_beacon = d.is_beacon(i);
            let estimate = if is_beacon {
                Some(truth)
            } else {
                let (bs, rs): (Vec<Point2>, Vec<f64>) = beacon_pos
                    .iter()
                    .zip(&est)
                    .filter_map(|(b, row)| row[i].map(|r| (*b, r)))
                    .unzip();
                if bs.len() < 3 {
                    None
                } else {
                    match multilaterate(&bs, &rs) {
                        Ok(m) => Some(m.position),
                        Err(Error::DegenerateGeometry(_)) => None,
                        Err(e) => return Err(e),
                    }
                }
            };
            Ok(LocalizedNode {
                id: i,
                truth,
                estimate,
                is_beacon,
                interior: truth.boundary_distance() >= interior_band,
            })
        })
        .collect()
}

/// Error summary over non-beacon sensors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorReport {
    pub n_nodes: usize,
    pub n_localized: usize,
    pub n_unlocalized: usize,
    pub mean_error: Option<f64>,
    pub median_error: Option<f64>,
    pub p90_error: Option<f64>,
    pub interior_median_error: Option<f64>,
    pub boundary_median_error: Option<f64>,
}

pub fn error_report(nodes: &[LocalizedNode]) -> ErrorReport {
    let sensors: Vec<&LocalizedNode> = nodes.iter().filter(|n| !n.is_beacon).collect();
    let errs: Vec<f64> = sensors.iter().filter_map(|n| n.error()).collect();
    let part = |interior: bool| -> Vec<f64> {
        sensors
            .iter()
            .filter(|n| n.interior == interior)
            .filter_map(|n| n.error())
            .collect()
    };
    ErrorReport {
        n_nodes: sensors.len(),
        n_localized: errs.len(),
        n_unlocalized: sensors.len() - errs.len(),
        mean_error: stats::mean(&errs),
        median_error: stats::median(&errs),
        p90_error: stats::quantile(&errs, 0.9),
        interior_median_error: stats::median(&part(true)),
        boundary_median_error: stats::median(&part(false)),
    }
}
