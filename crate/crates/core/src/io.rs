//! CSV and checksum plumbing for the pipeline's exported artifacts.
//!
//! Reals are written as `%.17g`, which round-trips every `f64`, so a stage
//! reading an upstream CSV sees exactly the values the producer held.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::analytic::CovarianceCurve;
use crate::deploy::{Deployment, Point2};
use crate::error::{Error, Result};
use crate::estimation::CumulantMatrix;
use crate::graph::{GraphKind, HopDistanceTable, ProximityGraph};
use crate::localization::LocalizedNode;

pub const SENSORS_HEADER: [&str; 4] = ["id", "x", "y", "is_beacon"];
pub const CUMULANTS_HEADER: [&str; 5] = ["i", "j", "kappa", "c2", "c2_lagged"];
pub const GRAPH_HEADER: [&str; 2] = ["i", "j"];
pub const HOPS_HEADER: [&str; 4] = ["beacon_id", "node_id", "hops", "estimated_distance"];
pub const POSITIONS_HEADER: [&str; 8] =
    ["id", "true_x", "true_y", "est_x", "est_y", "error", "interior", "unlocalized"];
pub const SCATTER_HEADER: [&str; 4] = ["i", "j", "distance", "c2"];
pub const CURVE_HEADER: [&str; 4] = ["distance", "value", "stderr", "source"];

/// Formats like C's `%.17g`.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mant), exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (16 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_g17).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

struct Writer<'p> {
    path: &'p Path,
    inner: csv::Writer<File>,
}

impl<'p> Writer<'p> {
    fn create(path: &'p Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path,
            inner: csv::Writer::from_writer(file),
        };
        w.row(header)?;
        Ok(w)
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(|e| csv_err(self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(self.path, e))
    }
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.into(),
        source,
    }
}

/// Data rows of a CSV with an exact header, each tagged with its line number.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let got = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::data(
            path,
            format!("expected header `{}`, found `{}`", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(rows)
}

/// Typed access to the fields of one CSV row, with errors naming the row.
struct Row<'a> {
    path: &'a Path,
    line: u64,
    rec: &'a csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::data(self.path, format!("line {}: {msg}", self.line))
    }

    fn raw(&self, k: usize) -> &str {
        self.rec.get(k).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, k: usize, name: &str) -> Result<T> {
        self.raw(k)
            .trim()
            .parse()
            .map_err(|_| self.err(format!("bad {name} `{}`", self.raw(k))))
    }

    fn parse_opt<T: std::str::FromStr>(&self, k: usize, name: &str) -> Result<Option<T>> {
        if self.raw(k).trim().is_empty() {
            Ok(None)
        } else {
            self.parse(k, name).map(Some)
        }
    }

    fn flag(&self, k: usize, name: &str) -> Result<bool> {
        match self.raw(k).trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(self.err(format!("bad {name} `{other}`, expected 0 or 1"))),
        }
    }
}

fn rows<'a>(path: &'a Path, raw: &'a [(u64, csv::StringRecord)]) -> impl Iterator<Item = Row<'a>> {
    raw.iter().map(move |(line, rec)| Row { path, line: *line, rec })
}

pub fn write_sensors(path: &Path, d: &Deployment) -> Result<()> {
    let mut w = Writer::create(path, &SENSORS_HEADER)?;
    let mask = d.beacon_mask();
    for (i, p) in d.sensors().iter().enumerate() {
        w.row([i.to_string(), fmt_g17(p.x), fmt_g17(p.y), flag(mask[i]).into()])?;
    }
    w.finish()
}

pub fn read_sensors(path: &Path) -> Result<Deployment> {
    let raw = read_rows(path, &SENSORS_HEADER)?;
    let mut sensors = Vec::with_capacity(raw.len());
    let mut beacons = Vec::new();
    for (k, row) in rows(path, &raw).enumerate() {
        let id: usize = row.parse(0, "id")?;
        if id != k {
            return Err(row.err(format!("id {id} out of sequence, expected {k}")));
        }
        sensors.push(Point2::new(row.parse(1, "x")?, row.parse(2, "y")?));
        if row.flag(3, "is_beacon")? {
            beacons.push(id);
        }
    }
    Deployment::new(sensors, beacons).map_err(|e| Error::data(path, e.to_string()))
}

pub fn write_cumulants(path: &Path, cm: &CumulantMatrix) -> Result<()> {
    let mut w = Writer::create(path, &CUMULANTS_HEADER)?;
    for (i, j) in cm.pairs() {
        w.row([
            i.to_string(),
            j.to_string(),
            fmt_g17(cm.kappa(i, j)),
            fmt_g17(cm.c2(i, j)),
            opt(cm.c2_lagged(i, j)),
        ])?;
    }
    w.finish()
}

/// Per-pair values from `cumulants.csv`, packed for `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    n: usize,
    pub kappa: Vec<f64>,
    pub c2: Vec<f64>,
    pub c2_lagged: Option<Vec<f64>>,
}

impl PairTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * self.n - a * (a + 1) / 2 + (b - a - 1)
    }

    pub fn c2(&self, i: usize, j: usize) -> f64 {
        self.c2[self.index(i, j)]
    }

    pub fn c2_lagged(&self, i: usize, j: usize) -> Option<f64> {
        self.c2_lagged.as_ref().map(|l| l[self.index(i, j)])
    }

    /// Pairs `(i, j)`, `i < j`, in the table's storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }
}

/// Reads `cumulants.csv` for `n` sensors; every pair must appear once, in
/// lexicographic order. The lagged column is either filled on every row or
/// on none.
pub fn read_cumulants(path: &Path, n: usize) -> Result<PairTable> {
    let raw = read_rows(path, &CUMULANTS_HEADER)?;
    let expected = n * n.saturating_sub(1) / 2;
    if raw.len() != expected {
        return Err(Error::data(
            path,
            format!("{} pair rows for {n} sensors, expected {expected}", raw.len()),
        ));
    }
    let mut t = PairTable {
        n,
        kappa: Vec::with_capacity(expected),
        c2: Vec::with_capacity(expected),
        c2_lagged: None,
    };
    let mut lagged = Vec::new();
    let mut has_lagged = None;
    let order = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    for (row, (ei, ej)) in rows(path, &raw).zip(order) {
        let (i, j): (usize, usize) = (row.parse(0, "i")?, row.parse(1, "j")?);
        if (i, j) != (ei, ej) {
            return Err(row.err(format!("pair ({i}, {j}) out of order, expected ({ei}, {ej})")));
        }
        t.kappa.push(row.parse(2, "kappa")?);
        t.c2.push(row.parse(3, "c2")?);
        let l: Option<f64> = row.parse_opt(4, "c2_lagged")?;
        match (has_lagged, l) {
            (None, _) => has_lagged = Some(l.is_some()),
            (Some(h), _) if h != l.is_some() => {
                return Err(row.err("c2_lagged must be filled on every row or on none"))
            }
            _ => {}
        }
        lagged.extend(l);
    }
    if has_lagged == Some(true) {
        t.c2_lagged = Some(lagged);
    }
    Ok(t)
}

pub fn write_graph(path: &Path, g: &ProximityGraph) -> Result<()> {
    let mut w = Writer::create(path, &GRAPH_HEADER)?;
    for &(i, j) in g.edges() {
        w.row([i.to_string(), j.to_string()])?;
    }
    w.finish()
}

pub fn read_graph(path: &Path, n: usize) -> Result<ProximityGraph> {
    let raw = read_rows(path, &GRAPH_HEADER)?;
    let mut edges = Vec::with_capacity(raw.len());
    for row in rows(path, &raw) {
        let (i, j): (usize, usize) = (row.parse(0, "i")?, row.parse(1, "j")?);
        if i >= j || j >= n {
            return Err(row.err(format!("edge ({i}, {j}) needs i < j < {n}")));
        }
        edges.push((i, j));
    }
    ProximityGraph::from_edges(n, edges, GraphKind::EdgeList)
}

/// One row per (beacon, node); unreachable nodes have empty hop and
/// distance fields. `scale` converts hops to distance.
pub fn write_hops(path: &Path, h: &HopDistanceTable, scale: f64) -> Result<()> {
    let mut w = Writer::create(path, &HOPS_HEADER)?;
    for (s, row) in h.sources.iter().zip(&h.hops) {
        for (node, hops) in row.iter().enumerate() {
            w.row([
                s.to_string(),
                node.to_string(),
                hops.map(|x| x.to_string()).unwrap_or_default(),
                opt(hops.map(|x| x as f64 * scale)),
            ])?;
        }
    }
    w.finish()
}

/// Reads `hops.csv` for `n` nodes; beacons appear in the order of their
/// first row and each must list every node in order.
pub fn read_hops(path: &Path, n: usize) -> Result<HopDistanceTable> {
    let raw = read_rows(path, &HOPS_HEADER)?;
    if n == 0 || raw.len() % n != 0 {
        return Err(Error::data(path, format!("{} rows is not a multiple of {n} nodes", raw.len())));
    }
    let mut t = HopDistanceTable {
        sources: Vec::new(),
        hops: Vec::new(),
    };
    for (k, row) in rows(path, &raw).enumerate() {
        let (b, node): (usize, usize) = (row.parse(0, "beacon_id")?, row.parse(1, "node_id")?);
        if k % n == 0 {
            if b >= n {
                return Err(row.err(format!("beacon {b} out of range")));
            }
            t.sources.push(b);
            t.hops.push(Vec::with_capacity(n));
        }
        if b != *t.sources.last().expect("pushed above") || node != k % n {
            return Err(row.err(format!("row ({b}, {node}) out of order")));
        }
        t.hops.last_mut().expect("pushed above").push(row.parse_opt(2, "hops")?);
    }
    Ok(t)
}

/// One row per non-beacon node; estimate and error fields are empty for
/// unlocalized nodes.
pub fn write_positions(path: &Path, nodes: &[LocalizedNode]) -> Result<()> {
    let mut w = Writer::create(path, &POSITIONS_HEADER)?;
    for n in nodes.iter().filter(|n| !n.is_beacon) {
        w.row([
            n.id.to_string(),
            fmt_g17(n.truth.x),
            fmt_g17(n.truth.y),
            opt(n.estimate.map(|p| p.x)),
            opt(n.estimate.map(|p| p.y)),
            opt(n.error()),
            flag(n.interior).into(),
            flag(n.estimate.is_none()).into(),
        ])?;
    }
    w.finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterRow {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub c2: f64,
}

pub fn write_scatter(path: &Path, rows: &[ScatterRow]) -> Result<()> {
    let mut w = Writer::create(path, &SCATTER_HEADER)?;
    for r in rows {
        w.row([r.i.to_string(), r.j.to_string(), fmt_g17(r.distance), fmt_g17(r.c2)])?;
    }
    w.finish()
}

/// Where the values of a covariance curve come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveSource {
    Analytic,
    MonteCarlo,
    Empirical,
}

impl CurveSource {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveSource::Analytic => "analytic",
            CurveSource::MonteCarlo => "montecarlo",
            CurveSource::Empirical => "empirical",
        }
    }
}

pub fn write_curves(path: &Path, curves: &[(CurveSource, &CovarianceCurve)]) -> Result<()> {
    let mut w = Writer::create(path, &CURVE_HEADER)?;
    for (src, c) in curves {
        for k in 0..c.len() {
            w.row([
                fmt_g17(c.distances[k]),
                fmt_g17(c.values[k]),
                fmt_g17(c.stderr[k]),
                src.as_str().into(),
            ])?;
        }
    }
    w.finish()
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
