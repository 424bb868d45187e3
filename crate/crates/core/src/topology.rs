//! Node placement with exclusion zones ("uniform clustering").
//!
//! The source sits at the origin, the destination on the +x axis, and the
//! remaining mobiles are drawn uniformly over the disk, each redrawn until it
//! clears the exclusion zone of every node placed before it.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

/// Redraws allowed per mobile before placement is declared infeasible.
pub const DEFAULT_RETRY_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Fixed node placement for one simulated session.
///
/// Index 0 is the source, index `M + 1` the destination and `1..=M` the other
/// mobiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<Point>,
    r_net: f64,
    r_ex: f64,
    remaining: Vec<f64>,
}

impl Topology {
    fn assemble(positions: Vec<Point>, r_net: f64, r_ex: f64) -> Self {
        let dest = positions[positions.len() - 1];
        let remaining = positions.iter().map(|p| p.distance(dest)).collect();
        Topology {
            positions,
            r_net,
            r_ex,
            remaining,
        }
    }

    /// Builds a topology from explicit positions and validates every invariant.
    pub fn from_positions(positions: Vec<Point>, r_net: f64, r_ex: f64) -> Result<Self> {
        check_radii(r_net, r_ex)?;
        if positions.len() < 2 {
            return Err(Error::Argument(
                "a topology needs at least a source and a destination".into(),
            ));
        }
        if positions[0] != Point::ORIGIN {
            return Err(Error::Argument("the source must sit at the origin".into()));
        }
        let tol = 1e-12 * r_net;
        let last = positions.len() - 1;
        for (i, p) in positions.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) || p.norm() > r_net + tol {
                return Err(Error::Argument(format!(
                    "node {i} at ({}, {}) lies outside the network disk",
                    p.x, p.y
                )));
            }
            for (j, q) in positions.iter().enumerate().skip(i + 1) {
                let endpoints = i == 0 && j == last;
                if !endpoints && p.distance(*q) < r_ex {
                    return Err(Error::Argument(format!(
                        "nodes {i} and {j} violate the exclusion radius {r_ex}"
                    )));
                }
            }
        }
        Ok(Topology::assemble(positions, r_net, r_ex))
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Number of mobiles other than source and destination.
    pub fn mobiles(&self) -> usize {
        self.positions.len() - 2
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn destination(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn r_net(&self) -> f64 {
        self.r_net
    }

    pub fn r_ex(&self) -> f64 {
        self.r_ex
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Result<Point> {
        self.positions
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.positions.len(),
            })
    }

    /// Euclidean distance between nodes `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.position(i)?.distance(self.position(j)?))
    }

    /// Unchecked variant for hot loops where indices come from the topology itself.
    #[inline]
    pub(crate) fn dist(&self, i: usize, j: usize) -> f64 {
        self.positions[i].distance(self.positions[j])
    }

    /// Remaining distance from node `i` to the destination.
    #[inline]
    pub fn remaining(&self, i: usize) -> f64 {
        self.remaining[i]
    }

    /// Plain-text table, one node per line: `index x y`. Radii travel in
    /// `#` header lines so the table can be read back on its own.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# r_net {:e}", self.r_net);
        let _ = writeln!(out, "# r_ex {:e}", self.r_ex);
        for (i, p) in self.positions.iter().enumerate() {
            let _ = writeln!(out, "{i} {:e} {:e}", p.x, p.y);
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut r_net = None;
        let mut r_ex = None;
        let mut positions = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("topology line {}: {what}", lineno + 1));
            if let Some(header) = line.strip_prefix('#') {
                let mut it = header.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("r_net"), Some(v)) => {
                        r_net = Some(v.parse::<f64>().map_err(|_| bad("bad r_net"))?)
                    }
                    (Some("r_ex"), Some(v)) => {
                        r_ex = Some(v.parse::<f64>().map_err(|_| bad("bad r_ex"))?)
                    }
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 3 {
                return Err(bad("expected `index x y`"));
            }
            let index: usize = fields[0].parse().map_err(|_| bad("bad index"))?;
            if index != positions.len() {
                return Err(bad("node indices must be consecutive from 0"));
            }
            let x = fields[1].parse().map_err(|_| bad("bad x"))?;
            let y = fields[2].parse().map_err(|_| bad("bad y"))?;
            positions.push(Point::new(x, y));
        }
        let r_net = r_net.ok_or_else(|| Error::Parse("missing `# r_net` header".into()))?;
        let r_ex = r_ex.ok_or_else(|| Error::Parse("missing `# r_ex` header".into()))?;
        Topology::from_positions(positions, r_net, r_ex)
    }
}

fn check_radii(r_net: f64, r_ex: f64) -> Result<()> {
    if !(r_net.is_finite() && r_net > 0.0) {
        return Err(Error::Argument(format!("network radius must be positive, got {r_net}")));
    }
    if !(r_ex.is_finite() && r_ex >= 0.0) {
        return Err(Error::Argument(format!(
            "exclusion radius must be non-negative, got {r_ex}"
        )));
    }
    Ok(())
}

fn uniform_in_disk<R: Rng + ?Sized>(r_net: f64, rng: &mut R) -> Point {
    let r = r_net * rng.gen::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.gen::<f64>();
    Point::new(r * theta.cos(), r * theta.sin())
}

/// Places `mobiles` nodes uniformly outside the exclusion zones of all nodes
/// already placed (source and destination first).
pub fn generate_topology<R: Rng + ?Sized>(
    mobiles: usize,
    r_net: f64,
    r_ex: f64,
    dest_distance: f64,
    rng: &mut R,
) -> Result<Topology> {
    generate_topology_with_budget(mobiles, r_net, r_ex, dest_distance, DEFAULT_RETRY_BUDGET, rng)
}

pub fn generate_topology_with_budget<R: Rng + ?Sized>(
    mobiles: usize,
    r_net: f64,
    r_ex: f64,
    dest_distance: f64,
    retry_budget: u64,
    rng: &mut R,
) -> Result<Topology> {
    check_radii(r_net, r_ex)?;
    if !(dest_distance > 0.0 && dest_distance <= r_net) {
        return Err(Error::Argument(format!(
            "destination distance must lie in (0, r_net], got {dest_distance}"
        )));
    }
    if retry_budget == 0 {
        return Err(Error::Argument("retry budget must be at least 1".into()));
    }

    let dest = Point::new(dest_distance, 0.0);
    let mut placed = Vec::with_capacity(mobiles + 2);
    placed.push(Point::ORIGIN);
    placed.push(dest);

    for mobile in 1..=mobiles {
        let mut accepted = None;
        for _ in 0..retry_budget {
            let candidate = uniform_in_disk(r_net, rng);
            if placed.iter().all(|p| p.distance(candidate) >= r_ex) {
                accepted = Some(candidate);
                break;
            }
        }
        match accepted {
            Some(p) => placed.push(p),
            None => {
                return Err(Error::InfeasibleDensity {
                    mobile,
                    attempts: retry_budget,
                })
            }
        }
    }

    // Storage order: source, mobiles 1..=M, destination.
    let dest = placed.remove(1);
    placed.push(dest);
    Ok(Topology::assemble(placed, r_net, r_ex))
}
