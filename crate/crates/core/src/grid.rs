//! Structured 2-D grids over rectangles and disks.
//!
//! Every interior node carries four second-difference line stencils: along
//! `x`, along `y`, and along the two diagonals. The Hessian at a node is
//! assembled from them as
//!
//! ```text
//! u_xx = D_x u,   u_yy = D_y u,   u_xy = (D_(1,1) u − D_(1,−1) u) / 2
//! ```
//!
//! which reduces to the standard 9-point stencil on uniform arms. On the disk
//! an arm that would leave the domain is shortened to the point where it
//! crosses the circle (cut cell) and the Dirichlet value 0 is pinned there,
//! giving a Shortley–Weller type non-uniform three-point difference.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::operators::HessianOperator;
use crate::sparse::TripletMatrix;

/// Nodes closer than this fraction of `h` to the circle are treated as
/// boundary nodes, which keeps cut-cell arms from degenerating.
const MIN_ARM_FRACTION: f64 = 0.1;

const MIN_INTERIOR_PER_AXIS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    /// `[0, width] × [0, height]`.
    Rectangle { width: f64, height: f64 },
    /// Disk of the given radius centred at the origin.
    Disk { radius: f64 },
}

impl DomainSpec {
    pub fn unit_square() -> Self {
        DomainSpec::Rectangle { width: 1.0, height: 1.0 }
    }

    pub fn unit_disk() -> Self {
        DomainSpec::Disk { radius: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DomainSpec::Rectangle { width, height } => {
                width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()
            }
            DomainSpec::Disk { radius } => radius > 0.0 && radius.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("domain dimensions must be positive: {self}")))
        }
    }

    /// Exact distance from an interior point to the boundary.
    pub fn distance_to_boundary(&self, p: [f64; 2]) -> f64 {
        match *self {
            DomainSpec::Rectangle { width, height } => p[0].min(width - p[0]).min(p[1]).min(height - p[1]).max(0.0),
            DomainSpec::Disk { radius } => (radius - p[0].hypot(p[1])).max(0.0),
        }
    }

    /// Principal curvatures met along the boundary (one per smooth piece).
    pub fn boundary_curvatures(&self) -> Vec<f64> {
        match *self {
            DomainSpec::Rectangle { .. } => vec![0.0],
            DomainSpec::Disk { radius } => vec![1.0 / radius],
        }
    }

    pub fn has_corners(&self) -> bool {
        matches!(self, DomainSpec::Rectangle { .. })
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainSpec::Rectangle { width, height } => write!(f, "rectangle:width={width:?},height={height:?}"),
            DomainSpec::Disk { radius } => write!(f, "disk:radius={radius:?}"),
        }
    }
}

impl FromStr for DomainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "bad domain '{s}' (expected rectangle:width=W,height=H, disk:radius=R, unit-square or unit-disk)"
            ))
        };
        let s = s.trim();
        let domain = match s {
            "unit-square" => DomainSpec::unit_square(),
            "unit-disk" => DomainSpec::unit_disk(),
            _ => {
                let (shape, params) = s.split_once(':').ok_or_else(bad)?;
                let mut values = std::collections::BTreeMap::new();
                for part in params.split(',') {
                    let (k, v) = part.split_once('=').ok_or_else(bad)?;
                    let v: f64 = v.trim().parse().map_err(|_| bad())?;
                    values.insert(k.trim().to_string(), v);
                }
                let take = |k: &str| values.get(k).copied().ok_or_else(bad);
                match shape {
                    "rectangle" if values.len() == 2 => {
                        DomainSpec::Rectangle { width: take("width")?, height: take("height")? }
                    }
                    "disk" if values.len() == 1 => DomainSpec::Disk { radius: take("radius")? },
                    _ => return Err(bad()),
                }
            }
        };
        domain.validate()?;
        Ok(domain)
    }
}

impl Serialize for DomainSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DomainSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighbor {
    Node(usize),
    /// Cut-cell point on the boundary, value pinned to 0.
    Wall,
}

/// Non-uniform three-point second difference along one line:
/// `D u = center·u_0 + minus.0·u_− + plus.0·u_+`.
#[derive(Debug, Clone, Copy)]
pub struct LineStencil {
    pub center: f64,
    pub minus: (f64, Neighbor),
    pub plus: (f64, Neighbor),
}

impl LineStencil {
    /// Arms of length `theta_m·len` and `theta_p·len`.
    fn new(len: f64, theta_m: f64, theta_p: f64, minus: Neighbor, plus: Neighbor) -> Self {
        let hm = theta_m * len;
        let hp = theta_p * len;
        Self { center: -2.0 / (hm * hp), minus: (2.0 / (hm * (hm + hp)), minus), plus: (2.0 / (hp * (hm + hp)), plus) }
    }

    fn apply(&self, values: &[f64], center: f64) -> f64 {
        let at = |n: Neighbor| match n {
            Neighbor::Node(i) => values[i],
            Neighbor::Wall => 0.0,
        };
        self.center * center + self.minus.0 * at(self.minus.1) + self.plus.0 * at(self.plus.1)
    }
}

/// Line directions, in stencil order.
pub const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

#[derive(Debug, Clone)]
pub struct NodeStencil {
    pub lines: [LineStencil; 4],
    /// At least one arm ends on a cut-cell wall point.
    pub cut: bool,
}

#[derive(Debug)]
pub struct Grid {
    domain: DomainSpec,
    h: f64,
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    kinds: Vec<NodeKind>,
    unknown_of: Vec<Option<usize>>,
    interior: Vec<usize>,
    stencils: Vec<NodeStencil>,
}

impl Grid {
    pub fn build(domain: DomainSpec, h: f64) -> Result<Arc<Grid>> {
        domain.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
        }
        let (nx, ny, origin) = match domain {
            DomainSpec::Rectangle { width, height } => {
                let cells = |len: f64| -> Result<usize> {
                    let c = (len / h).round();
                    if ((len / h) - c).abs() > 1e-9 * c.max(1.0) {
                        return Err(Error::Config(format!("spacing {h} does not divide side length {len}")));
                    }
                    Ok(c as usize)
                };
                let (cx, cy) = (cells(width)?, cells(height)?);
                if cx < MIN_INTERIOR_PER_AXIS + 1 || cy < MIN_INTERIOR_PER_AXIS + 1 {
                    return Err(Error::Config(format!(
                        "grid too coarse: need at least {MIN_INTERIOR_PER_AXIS} interior nodes per axis"
                    )));
                }
                (cx + 1, cy + 1, [0.0, 0.0])
            }
            DomainSpec::Disk { radius } => {
                let m = (radius / h).ceil() as usize;
                let start = -(m as f64) * h;
                (2 * m + 1, 2 * m + 1, [start, start])
            }
        };

        let position = |i: usize, j: usize| [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
        let mut kinds = vec![NodeKind::Exterior; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                kinds[j * nx + i] = match domain {
                    DomainSpec::Rectangle { .. } => {
                        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                            NodeKind::Boundary
                        } else {
                            NodeKind::Interior
                        }
                    }
                    DomainSpec::Disk { radius } => {
                        let r = {
                            let p = position(i, j);
                            p[0].hypot(p[1])
                        };
                        if r < radius - MIN_ARM_FRACTION * h {
                            NodeKind::Interior
                        } else if r <= radius {
                            NodeKind::Boundary
                        } else {
                            NodeKind::Exterior
                        }
                    }
                };
            }
        }

        let mut unknown_of = vec![None; nx * ny];
        let mut interior = Vec::new();
        for (node, kind) in kinds.iter().enumerate() {
            if *kind == NodeKind::Interior {
                unknown_of[node] = Some(interior.len());
                interior.push(node);
            }
        }
        if let DomainSpec::Disk { .. } = domain {
            let per_axis = (0..nx).filter(|&i| kinds[(ny / 2) * nx + i] == NodeKind::Interior).count();
            if per_axis < MIN_INTERIOR_PER_AXIS {
                return Err(Error::Config(format!(
                    "grid too coarse: need at least {MIN_INTERIOR_PER_AXIS} interior nodes per axis"
                )));
            }
        }

        let stencils = interior
            .iter()
            .map(|&node| {
                let (i, j) = ((node % nx) as i64, (node / nx) as i64);
                let p = position(i as usize, j as usize);
                let mut cut = false;
                let lines = DIRECTIONS.map(|(dx, dy)| {
                    let len = h * ((dx * dx + dy * dy) as f64).sqrt();
                    let mut arm = |sign: i64| -> (f64, Neighbor) {
                        let (ni, nj) = (i + sign * dx, j + sign * dy);
                        let inside = ni >= 0 && nj >= 0 && (ni as usize) < nx && (nj as usize) < ny;
                        let nb = inside.then(|| nj as usize * nx + ni as usize);
                        // Disk boundary nodes sit up to MIN_ARM_FRACTION·h inside the circle, so
                        // arms towards them end at the true crossing instead.
                        let on_boundary = matches!(domain, DomainSpec::Rectangle { .. });
                        match nb {
                            Some(q)
                                if kinds[q] == NodeKind::Interior || on_boundary && kinds[q] == NodeKind::Boundary =>
                            {
                                (1.0, Neighbor::Node(q))
                            }
                            _ => {
                                cut = true;
                                let dir = [(sign * dx) as f64 * h, (sign * dy) as f64 * h];
                                (wall_fraction(&domain, p, dir), Neighbor::Wall)
                            }
                        }
                    };
                    let (tm, nm) = arm(-1);
                    let (tp, np) = arm(1);
                    LineStencil::new(len, tm, tp, nm, np)
                });
                NodeStencil { lines, cut }
            })
            .collect();

        Ok(Arc::new(Grid { domain, h, nx, ny, origin, kinds, unknown_of, interior, stencils }))
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn node_at(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn position(&self, node: usize) -> [f64; 2] {
        let (i, j) = (node % self.nx, node / self.nx);
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    /// Node ids of the interior nodes, in unknown order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        self.unknown_of[node]
    }

    pub fn stencil(&self, unknown: usize) -> &NodeStencil {
        &self.stencils[unknown]
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|k| **k == kind).count()
    }

    /// Hessian entries `(u_xx, u_xy, u_yy)` at an interior unknown from
    /// node-indexed values.
    pub fn hessian_entries(&self, values: &[f64], unknown: usize) -> [f64; 3] {
        let st = &self.stencils[unknown];
        let u0 = values[self.interior[unknown]];
        let d: [f64; 4] = std::array::from_fn(|m| st.lines[m].apply(values, u0));
        [d[0], 0.5 * (d[2] - d[3]), d[1]]
    }

    /// `scale·(D_x + D_y)` (five-point Laplacian) as rows over unknowns.
    fn laplacian_triplets(&self, scale: f64) -> TripletMatrix {
        let mut m = TripletMatrix::new(self.interior_count());
        for (row, st) in self.stencils.iter().enumerate() {
            let mut diag = 0.0;
            for line in &st.lines[..2] {
                diag += line.center;
                for (w, nb) in [line.minus, line.plus] {
                    if let Neighbor::Node(q) = nb {
                        if let Some(col) = self.unknown_of[q] {
                            m.push(row, col, scale * w);
                        }
                    }
                }
            }
            m.push(row, row, scale * diag);
        }
        m
    }

    /// JSON sidecar describing the grid.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "domain": self.domain.to_string(),
            "h": self.h,
            "counts": {
                "nodes": self.node_count(),
                "interior": self.interior_count(),
                "boundary": self.count_kind(NodeKind::Boundary),
                "exterior": self.count_kind(NodeKind::Exterior),
                "cut_cells": self.stencils.iter().filter(|s| s.cut).count(),
            }
        })
    }
}

/// Fraction `θ ∈ (0, 1]` of the step `dir` from `p` at which the boundary is crossed.
fn wall_fraction(domain: &DomainSpec, p: [f64; 2], dir: [f64; 2]) -> f64 {
    match *domain {
        DomainSpec::Disk { radius } => {
            // |p + θ dir|² = R²
            let a = dir[0] * dir[0] + dir[1] * dir[1];
            let b = 2.0 * (p[0] * dir[0] + p[1] * dir[1]);
            let c = p[0] * p[0] + p[1] * p[1] - radius * radius;
            let disc = (b * b - 4.0 * a * c).max(0.0);
            // c < 0 inside, so the positive root is well defined.
            let theta = 2.0 * c / (-b - disc.sqrt());
            // Slightly beyond 1 when the neighbour is a boundary node just inside.
            theta.max(f64::EPSILON)
        }
        // Rectangle neighbours are always boundary nodes, never walls.
        DomainSpec::Rectangle { .. } => 1.0,
    }
}

/// Nodal scalar field on a grid.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self { grid: Arc::clone(grid), values: vec![0.0; grid.node_count()] }
    }

    /// Samples `f` at every non-exterior node, boundary nodes included.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|n| match grid.kind(n) {
                NodeKind::Exterior => 0.0,
                _ => {
                    let p = grid.position(n);
                    f(p[0], p[1])
                }
            })
            .collect();
        Self { grid: Arc::clone(grid), values }
    }

    /// Field with the given unknown values and zero boundary data.
    pub fn from_interior(grid: &Arc<Grid>, interior: &[f64]) -> Result<Self> {
        if interior.len() != grid.interior_count() {
            return Err(Error::Contract(format!(
                "expected {} interior values, got {}",
                grid.interior_count(),
                interior.len()
            )));
        }
        let mut field = Self::zeros(grid);
        for (u, &node) in grid.interior_nodes().iter().enumerate() {
            field.values[node] = interior[u];
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.grid.interior_nodes().iter().map(|&n| self.values[n]).collect()
    }

    pub fn set_interior(&mut self, unknown: usize, value: f64) {
        let node = self.grid.interior_nodes()[unknown];
        self.values[node] = value;
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_value(&self) -> f64 {
        self.grid.interior_nodes().iter().map(|&n| self.values[n]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: Arc::clone(&self.grid), values: self.values.iter().map(|v| c * v).collect() }
    }

    /// `self + c·other` (same grid required).
    pub fn axpy(&self, c: f64, other: &GridField) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Self { grid: Arc::clone(&self.grid), values }
    }

    pub fn sup_distance(&self, other: &GridField) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Discrete Hessian at an interior node.
    pub fn hessian_at(&self, node: usize) -> Result<SymMatrix> {
        let unknown =
            self.grid.unknown_of(node).ok_or_else(|| Error::Contract(format!("node {node} is not interior")))?;
        let [a, b, c] = self.grid.hessian_entries(&self.values, unknown);
        Ok(SymMatrix::sym2(a, b, c))
    }

    /// CSV dump with header `x,y,value`; exterior nodes are skipped.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for node in 0..self.grid.node_count() {
            if self.grid.kind(node) == NodeKind::Exterior {
                continue;
            }
            let p = self.grid.position(node);
            writeln!(w, "{:?},{:?},{:?}", p[0], p[1], self.values[node])?;
        }
        Ok(())
    }
}

/// First Dirichlet eigenvalue of `−(D_x + D_y)` by inverse power iteration.
pub fn laplace_mu1(grid: &Grid) -> Result<f64> {
    const MAX_ITER: usize = 10_000;
    let lu = grid.laplacian_triplets(-1.0).factorize()?;
    let mut x = vec![1.0; grid.interior_count()];
    let mut mu = f64::NAN;
    for _ in 0..MAX_ITER {
        let y = lu.solve(&x)?;
        let norm = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let next = 1.0 / norm;
        x = y.into_iter().map(|v| v / norm).collect();
        if (next - mu).abs() < 1e-10 * next {
            return Ok(next);
        }
        mu = next;
    }
    Err(Error::Convergence { what: "laplace_mu1 inverse iteration".into(), iterations: MAX_ITER })
}

/// Outcome of the strict Γ-convexity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaConvexity {
    pub strictly_convex: bool,
    /// Smallest `R` on the decade grid `10^-6 … 10^6` that works, if any.
    pub required_r: Option<f64>,
    /// The boundary has corners where curvature is undefined.
    pub corner_warning: bool,
}

/// Tests `(κ_1, …, κ_{n−1}, R) ∈ Γ` at every boundary curvature value.
pub fn check_strict_gamma_convexity(domain: &DomainSpec, op: &HessianOperator) -> GammaConvexity {
    let n = op.dim();
    let kappas = domain.boundary_curvatures();
    let required_r = (-6..=6).map(|e| 10f64.powi(e)).find(|&r| {
        kappas.iter().all(|&kappa| {
            let mut lam = vec![kappa; n - 1];
            lam.push(r);
            op.cone_contains(&lam, 0.0).unwrap_or(false)
        })
    });
    GammaConvexity { strictly_convex: required_r.is_some(), required_r, corner_warning: domain.has_corners() }
}

/// The barrier `v = (e^{−R d} − 1) / R` with `d` the exact distance to the boundary.
pub fn barrier_subsolution(grid: &Arc<Grid>, r_param: f64) -> Result<GridField> {
    if !(r_param > 0.0) {
        return Err(Error::Contract(format!("barrier parameter must be positive, got {r_param}")));
    }
    let mut field = GridField::zeros(grid);
    for (u, &node) in grid.interior_nodes().iter().enumerate() {
        let d = grid.domain().distance_to_boundary(grid.position(node));
        field.set_interior(u, ((-r_param * d).exp() - 1.0) / r_param);
    }
    Ok(field)
}
