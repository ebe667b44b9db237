//! Empirical moments and cumulants of binary records.
//!
//! Every statistic is computed from exact integer co-occurrence counts
//! (popcounts of AND-ed words) and converted to floating point once, so
//! results are independent of evaluation order and thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{BitRow, ObservationMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStatistics {
    pub i: usize,
    pub j: usize,
    /// Fraction of steps at which both sensors recorded 1.
    pub kappa: f64,
    pub mean_i: f64,
    pub mean_j: f64,
    /// `kappa - mean_i * mean_j`.
    pub c2: f64,
    /// Lag-windowed cumulant, present when the lag window is positive.
    pub c2_lagged: Option<f64>,
}

/// Fraction of steps at which every row in `rows` is 1.
pub fn empirical_correlation(rows: &[BitRow<'_>]) -> Result<f64> {
    let first = rows
        .first()
        .ok_or_else(|| Error::invalid("empirical correlation of an empty set"))?;
    let t = first.len();
    if t == 0 {
        return Err(Error::invalid("rows must have at least one step"));
    }
    if rows.iter().any(|r| r.len() != t) {
        return Err(Error::invalid("rows differ in length"));
    }
    let count: u64 = (0..first.words().len())
        .map(|w| {
            let all = rows.iter().fold(u64::MAX, |acc, r| acc & r.words()[w]);
            u64::from(all.count_ones())
        })
        .sum();
    Ok(count as f64 / t as f64)
}

fn and_count(a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| u64::from((x & y).count_ones())).sum()
}

/// `(joint * T - n_i * n_j) / T²`, the cumulant from integer counts.
fn cumulant_from_counts(joint: u64, ones_i: u64, ones_j: u64, t: u64) -> f64 {
    let num = i128::from(joint) * i128::from(t) - i128::from(ones_i) * i128::from(ones_j);
    num as f64 / (t as f64 * t as f64)
}

/// Sum over lags `s ∈ [-Δ, Δ]` of `count_s / (T - |s|) - mean_i * mean_j`,
/// where `count_s = Σ_t ξ_i(t) ξ_j(t + s)`. `counts[k]` holds lag
/// `s = k - Δ`.
fn lagged_from_counts(counts: &[u64], ones_i: u64, ones_j: u64, t: u64) -> f64 {
    let lag = (counts.len() / 2) as i64;
    let tf = t as f64;
    let mean_prod = (ones_i as f64 / tf) * (ones_j as f64 / tf);
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let s = k as i64 - lag;
            c as f64 / (t - s.unsigned_abs()) as f64 - mean_prod
        })
        .sum()
}

/// Row shifted `s` steps earlier in time: bit `t` of the result is bit
/// `t + s` of the input, zero past the end.
fn shift_earlier(words: &[u64], s: usize) -> Vec<u64> {
    let (q, r) = (s / 64, s % 64);
    (0..words.len())
        .map(|w| {
            let lo = words.get(w + q).copied().unwrap_or(0);
            if r == 0 {
                lo
            } else {
                let hi = words.get(w + q + 1).copied().unwrap_or(0);
                (lo >> r) | (hi << (64 - r))
            }
        })
        .collect()
}

fn check_index(obs: &ObservationMatrix, i: usize) -> Result<()> {
    if i >= obs.n_sensors() {
        return Err(Error::invalid(format!(
            "sensor {i} out of range (n = {})",
            obs.n_sensors()
        )));
    }
    Ok(())
}

pub fn pair_cumulant(obs: &ObservationMatrix, i: usize, j: usize) -> Result<PairStatistics> {
    check_index(obs, i)?;
    check_index(obs, j)?;
    let t = obs.n_steps() as u64;
    if t == 0 {
        return Err(Error::invalid("rows must have at least one step"));
    }
    let (ri, rj) = (obs.row(i), obs.row(j));
    let (ni, nj) = (ri.count_ones(), rj.count_ones());
    let joint = and_count(ri.words(), rj.words());
    Ok(PairStatistics {
        i,
        j,
        kappa: joint as f64 / t as f64,
        mean_i: ni as f64 / t as f64,
        mean_j: nj as f64 / t as f64,
        c2: cumulant_from_counts(joint, ni, nj, t),
        c2_lagged: None,
    })
}

/// Lag-windowed cumulant over lags `-Δ..=Δ`, each lag normalized by its own
/// overlap length `T - |s|`.
pub fn lagged_cumulant(obs: &ObservationMatrix, i: usize, j: usize, lag: usize) -> Result<f64> {
    check_index(obs, i)?;
    check_index(obs, j)?;
    let t = obs.n_steps();
    if t <= 2 * lag {
        return Err(Error::invalid(format!(
            "lag window {lag} needs more than {} steps, have {t}",
            2 * lag
        )));
    }
    let (ri, rj) = (obs.row(i), obs.row(j));
    let mut counts = Vec::with_capacity(2 * lag + 1);
    for s in -(lag as i64)..=(lag as i64) {
        let c = if s >= 0 {
            and_count(ri.words(), &shift_earlier(rj.words(), s as usize))
        } else {
            and_count(&shift_earlier(ri.words(), (-s) as usize), rj.words())
        };
        counts.push(c);
    }
    Ok(lagged_from_counts(&counts, ri.count_ones(), rj.count_ones(), t as u64))
}

/// All pairwise statistics of an observation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantMatrix {
    n: usize,
    n_steps: usize,
    lag: usize,
    ones: Vec<u64>,
    /// Lag-0 joint counts for `i < j`, packed row-major.
    joint: Vec<u64>,
    lagged: Option<Vec<f64>>,
}

impl CumulantMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn lag_window(&self) -> usize {
        self.lag
    }

    pub fn has_lagged(&self) -> bool {
        self.lagged.is_some()
    }

    pub fn n_pairs(&self) -> usize {
        self.joint.len()
    }

    fn tri(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * self.n - a * (a + 1) / 2 + (b - a - 1)
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.ones[i] as f64 / self.n_steps as f64
    }

    /// Empirical variance `mean - mean²` of sensor `i`.
    pub fn variance(&self, i: usize) -> f64 {
        let t = self.n_steps as u64;
        cumulant_from_counts(self.ones[i], self.ones[i], self.ones[i], t)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.variance(i)).collect()
    }

    pub fn kappa(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.mean(i);
        }
        self.joint[self.tri(i, j)] as f64 / self.n_steps as f64
    }

    pub fn c2(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.variance(i);
        }
        cumulant_from_counts(
            self.joint[self.tri(i, j)],
            self.ones[i],
            self.ones[j],
            self.n_steps as u64,
        )
    }

    /// `None` for the diagonal or when no lag window was requested.
    pub fn c2_lagged(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return None;
        }
        self.lagged.as_ref().map(|l| l[self.tri(i, j)])
    }

    pub fn pair(&self, i: usize, j: usize) -> PairStatistics {
        PairStatistics {
            i,
            j,
            kappa: self.kappa(i, j),
            mean_i: self.mean(i),
            mean_j: self.mean(j),
            c2: self.c2(i, j),
            c2_lagged: self.c2_lagged(i, j),
        }
    }

    /// Unordered pairs `(i, j)`, `i < j`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }

    /// Rebuilds a matrix from exported per-pair values (`kappa`, optional
    /// lagged cumulant) in [`CumulantMatrix::pairs`] order. The counts are
    /// recovered by rounding `kappa * T`, which is exact for values written
    /// with 17 significant digits.
    pub fn from_parts(
        n_steps: usize,
        lag: usize,
        means: &[f64],
        kappas: &[f64],
        lagged: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = means.len();
        if kappas.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::invalid("pair count does not match sensor count"));
        }
        if lagged.as_ref().is_some_and(|l| l.len() != kappas.len()) {
            return Err(Error::invalid("lagged column has wrong length"));
        }
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be positive"));
        }
        let to_count = |v: f64| -> Result<u64> {
            let c = (v * n_steps as f64).round();
            if !(0.0..=n_steps as f64).contains(&c) {
                return Err(Error::invalid(format!("moment {v} outside [0, 1]")));
            }
            Ok(c as u64)
        };
        Ok(Self {
            n,
            n_steps,
            lag,
            ones: means.iter().map(|&m| to_count(m)).collect::<Result<_>>()?,
            joint: kappas.iter().map(|&k| to_count(k)).collect::<Result<_>>()?,
            lagged,
        })
    }
}

/// Statistics for all `N(N-1)/2` pairs; lagged cumulants when `lag > 0`.
/// Parallel over rows; each row's pairs are written to their own slots.
pub fn cumulant_matrix(obs: &ObservationMatrix, lag: usize) -> Result<CumulantMatrix> {
    let n = obs.n_sensors();
    let t = obs.n_steps();
    if t == 0 {
        return Err(Error::invalid("observation matrix has no steps"));
    }
    if lag > 0 && t <= 2 * lag {
        return Err(Error::invalid(format!(
            "lag window {lag} needs more than {} steps, have {t}",
            2 * lag
        )));
    }
    let ones: Vec<u64> = (0..n).map(|i| obs.row(i).count_ones()).collect();
    // shifted[s - 1][i] = row i moved s steps earlier
    let shifted: Vec<Vec<Vec<u64>>> = (1..=lag)
        .map(|s| (0..n).map(|i| shift_earlier(obs.row(i).words(), s)).collect())
        .collect();

    let rows: Vec<(Vec<u64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = obs.row(i).words();
            let mut joint = Vec::with_capacity(n - i - 1);
            let mut lagged = Vec::with_capacity(if lag > 0 { n - i - 1 } else { 0 });
            let mut counts = vec![0u64; 2 * lag + 1];
            for j in i + 1..n {
                let rj = obs.row(j).words();
                let c0 = and_count(ri, rj);
                joint.push(c0);
                if lag > 0 {
                    counts[lag] = c0;
                    for s in 1..=lag {
                        counts[lag + s] = and_count(ri, &shifted[s - 1][j]);
                        counts[lag - s] = and_count(&shifted[s - 1][i], rj);
                    }
                    lagged.push(lagged_from_counts(&counts, ones[i], ones[j], t as u64));
                }
            }
            (joint, lagged)
        })
        .collect();

    let mut joint = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut lagged = Vec::with_capacity(if lag > 0 { joint.capacity() } else { 0 });
    for (j, l) in rows {
        joint.extend(j);
        lagged.extend(l);
    }
    Ok(CumulantMatrix {
        n,
        n_steps: t,
        lag,
        ones,
        joint,
        lagged: (lag > 0).then_some(lagged),
    })
}
