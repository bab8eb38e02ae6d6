//! Ghost-augmented subgraphs of the rescaled square lattice `aZ²`.
//!
//! A [`GhostGraph`] holds the lattice sites of a domain, the nearest-neighbour
//! (internal) edges with coupling `β_c`, and one external edge per site to the
//! ghost vertex with coupling `a^{15/8} h`. Sites are indexed row-major
//! (row = y, then column = x); the ghost is the last vertex. Internal edges come
//! first, ordered by their lower-left endpoint and then right before up;
//! external edge `n_int + v` joins site `v` to the ghost.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsu::UnionFind;
use crate::error::{Error, Result};

/// Critical inverse temperature of the square-lattice Ising model, `ln(1+√2)/2`.
pub const BETA_C: f64 = 0.440_686_793_509_771_47;

/// Tolerance for comparing lattice coordinates against rectangle sides.
pub const GEOM_EPS: f64 = 1e-9;

/// An exact rational exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exponent {
    pub num: i32,
    pub den: i32,
}

impl Exponent {
    pub const fn new(num: i32, den: i32) -> Self {
        Exponent { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn pow(self, base: f64) -> f64 {
        base.powf(self.value())
    }
}

/// Scaling of the external field with the lattice spacing.
pub const FIELD_EXPONENT: Exponent = Exponent::new(15, 8);
/// Scaling of the inverse correlation length with the field.
pub const MASS_EXPONENT: Exponent = Exponent::new(8, 15);
/// Critical one-arm exponent of the random-cluster model.
pub const ONE_ARM_EXPONENT: Exponent = Exponent::new(1, 8);
/// Critical two-point decay exponent.
pub const TWO_POINT_EXPONENT: Exponent = Exponent::new(1, 4);

/// External coupling `a^{15/8} h` for spacing `a` and field `h`.
pub fn external_coupling(spacing: f64, field: f64) -> f64 {
    FIELD_EXPONENT.pow(spacing) * field
}

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const BOTTOM: usize = 2;
pub const TOP: usize = 3;

/// Axis-aligned rectangle with per-side openness `[left, right, bottom, top]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    #[serde(default)]
    pub open: [bool; 4],
}

impl Rect {
    pub const fn closed(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect {
            x0,
            x1,
            y0,
            y1,
            open: [false; 4],
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        let above = |v: f64, lo: f64, open: bool| {
            if open {
                v > lo + GEOM_EPS
            } else {
                v >= lo - GEOM_EPS
            }
        };
        let below = |v: f64, hi: f64, open: bool| {
            if open {
                v < hi - GEOM_EPS
            } else {
                v <= hi + GEOM_EPS
            }
        };
        above(x, self.x0, self.open[LEFT])
            && below(x, self.x1, self.open[RIGHT])
            && above(y, self.y0, self.open[BOTTOM])
            && below(y, self.y1, self.open[TOP])
    }

    /// True if `other` lies inside `self` as closed sets.
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 - GEOM_EPS
            && other.x1 <= self.x1 + GEOM_EPS
            && other.y0 >= self.y0 - GEOM_EPS
            && other.y1 <= self.y1 + GEOM_EPS
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Rect {
        Rect {
            x0: self.x0 + dx,
            x1: self.x1 + dx,
            y0: self.y0 + dy,
            y1: self.y1 + dy,
            open: self.open,
        }
    }

    /// Rotation by `k` quarter turns counter-clockwise about the origin.
    pub fn rotate_quarter(&self, k: u8) -> Rect {
        let mut r = *self;
        for _ in 0..k % 4 {
            // (x, y) -> (-y, x)
            r = Rect {
                x0: -r.y1,
                x1: -r.y0,
                y0: r.x0,
                y1: r.x1,
                open: [r.open[TOP], r.open[BOTTOM], r.open[LEFT], r.open[RIGHT]],
            };
        }
        r
    }

    /// ℓ∞ distance between two closed rectangles (0 if they intersect).
    pub fn linf_distance(&self, other: &Rect) -> f64 {
        let dx = (other.x0 - self.x1).max(self.x0 - other.x1).max(0.0);
        let dy = (other.y0 - self.y1).max(self.y0 - other.y1).max(0.0);
        dx.max(dy)
    }
}

/// Reference rectangles of a frame (unrotated, at the origin).
pub mod frame_ref {
    use super::Rect;

    pub const T: Rect = Rect::closed(0.0, 10.0, 0.0, 3.0);
    pub const R: Rect = Rect::closed(2.0, 8.0, 0.0, 3.0);
    pub const S: Rect = Rect::closed(1.0, 9.0, 1.0, 2.0);
    pub const Q1: Rect = Rect {
        x0: 1.0,
        x1: 2.0,
        y0: 1.0,
        y1: 2.0,
        open: [false, true, false, false],
    };
    pub const Q8: Rect = Rect {
        x0: 8.0,
        x1: 9.0,
        y0: 1.0,
        y1: 2.0,
        open: [true, false, false, false],
    };
    /// Component of `T \ R` on the `Q1` side.
    pub const T_LEFT: Rect = Rect {
        x0: 0.0,
        x1: 2.0,
        y0: 0.0,
        y1: 3.0,
        open: [false, true, false, false],
    };
    /// Component of `T \ R` on the `Q8` side.
    pub const T_RIGHT: Rect = Rect {
        x0: 8.0,
        x1: 10.0,
        y0: 0.0,
        y1: 3.0,
        open: [true, false, false, false],
    };
}

/// A placed copy of the `T/R/S/Q1/Q8` geometry: rotation by a multiple of 90°
/// about the origin followed by a translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectFrame {
    pub origin: (f64, f64),
    pub quarter_turns: u8,
}

impl RectFrame {
    pub fn new(origin: (f64, f64), quarter_turns: u8) -> Self {
        RectFrame {
            origin,
            quarter_turns: quarter_turns % 4,
        }
    }

    pub fn place(&self, r: &Rect) -> Rect {
        r.rotate_quarter(self.quarter_turns)
            .translate(self.origin.0, self.origin.1)
    }

    pub fn t(&self) -> Rect {
        self.place(&frame_ref::T)
    }
    pub fn r(&self) -> Rect {
        self.place(&frame_ref::R)
    }
    pub fn s(&self) -> Rect {
        self.place(&frame_ref::S)
    }
    pub fn q1(&self) -> Rect {
        self.place(&frame_ref::Q1)
    }
    pub fn q8(&self) -> Rect {
        self.place(&frame_ref::Q8)
    }
    pub fn t_left(&self) -> Rect {
        self.place(&frame_ref::T_LEFT)
    }
    pub fn t_right(&self) -> Rect {
        self.place(&frame_ref::T_RIGHT)
    }

    /// True when the long direction of `R` and `S` is horizontal.
    pub fn is_horizontal(&self) -> bool {
        self.quarter_turns % 2 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Internal,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub coupling: f64,
    pub kind: EdgeKind,
}

/// Finite subgraph of `aZ²` plus a ghost vertex joined to every site.
#[derive(Clone, Debug)]
pub struct GhostGraph {
    spacing: f64,
    field: f64,
    domain: Rect,
    sites: Vec<(i64, i64)>,
    grid_origin: (i64, i64),
    grid_cols: usize,
    grid_rows: usize,
    grid: Vec<u32>,
    edges: Vec<Edge>,
    num_internal: usize,
    boundary: Vec<bool>,
    adj_offsets: Vec<u32>,
    adj: Vec<(u32, u32)>,
}

const NO_SITE: u32 = u32::MAX;

impl GhostGraph {
    /// Graph on `Λ ∩ aZ²` for a rectangle `Λ`, spacing `a` and field `h`.
    pub fn build_domain_graph(domain: Rect, spacing: f64, field: f64) -> Result<Self> {
        check_params(spacing, field)?;
        if !(domain.x0 <= domain.x1 && domain.y0 <= domain.y1) {
            return Err(Error::invalid(format!("empty domain {domain:?}")));
        }
        let i0 = (domain.x0 / spacing - 1e-6).ceil() as i64;
        let i1 = (domain.x1 / spacing + 1e-6).floor() as i64;
        let j0 = (domain.y0 / spacing - 1e-6).ceil() as i64;
        let j1 = (domain.y1 / spacing + 1e-6).floor() as i64;
        let mut sites = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                if domain.contains((i as f64 * spacing, j as f64 * spacing)) {
                    sites.push((i, j));
                }
            }
        }
        if sites.is_empty() {
            return Err(Error::invalid(format!(
                "domain {domain:?} contains no point of the lattice with spacing {spacing}"
            )));
        }
        Self::assemble(spacing, field, domain, sites)
    }

    /// Induced graph on an arbitrary finite set of lattice sites `(i, j)`,
    /// located at `(a i, a j)`.
    pub fn from_sites(spacing: f64, field: f64, sites: &[(i64, i64)]) -> Result<Self> {
        check_params(spacing, field)?;
        if sites.is_empty() {
            return Err(Error::invalid("no sites"));
        }
        let mut sorted: Vec<(i64, i64)> = sites.to_vec();
        sorted.sort_by_key(|&(i, j)| (j, i));
        sorted.dedup();
        let (mut x0, mut x1, mut y0, mut y1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for &(i, j) in &sorted {
            x0 = x0.min(i);
            x1 = x1.max(i);
            y0 = y0.min(j);
            y1 = y1.max(j);
        }
        let domain = Rect::closed(
            x0 as f64 * spacing,
            x1 as f64 * spacing,
            y0 as f64 * spacing,
            y1 as f64 * spacing,
        );
        Self::assemble(spacing, field, domain, sorted)
    }

    fn assemble(spacing: f64, field: f64, domain: Rect, sites: Vec<(i64, i64)>) -> Result<Self> {
        let n = sites.len();
        if n >= NO_SITE as usize - 1 {
            return Err(Error::invalid("too many sites"));
        }
        let imin = sites.iter().map(|s| s.0).min().unwrap();
        let imax = sites.iter().map(|s| s.0).max().unwrap();
        let jmin = sites.iter().map(|s| s.1).min().unwrap();
        let jmax = sites.iter().map(|s| s.1).max().unwrap();
        let cols = (imax - imin + 1) as usize;
        let rows = (jmax - jmin + 1) as usize;
        let mut grid = vec![NO_SITE; cols * rows];
        for (v, &(i, j)) in sites.iter().enumerate() {
            grid[(j - jmin) as usize * cols + (i - imin) as usize] = v as u32;
        }
        let mut g = GhostGraph {
            spacing,
            field,
            domain,
            sites,
            grid_origin: (imin, jmin),
            grid_cols: cols,
            grid_rows: rows,
            grid,
            edges: Vec::new(),
            num_internal: 0,
            boundary: Vec::new(),
            adj_offsets: Vec::new(),
            adj: Vec::new(),
        };
        let ghost = n;
        let mut edges = Vec::with_capacity(3 * n);
        for v in 0..n {
            let (i, j) = g.sites[v];
            for (di, dj) in [(1, 0), (0, 1)] {
                if let Some(w) = g.site_index(i + di, j + dj) {
                    edges.push(Edge {
                        u: v,
                        v: w,
                        coupling: BETA_C,
                        kind: EdgeKind::Internal,
                    });
                }
            }
        }
        let num_internal = edges.len();
        let jext = external_coupling(spacing, field);
        for v in 0..n {
            edges.push(Edge {
                u: v,
                v: ghost,
                coupling: jext,
                kind: EdgeKind::External,
            });
        }
        g.boundary = (0..n)
            .map(|v| {
                let (i, j) = g.sites[v];
                [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|&(di, dj)| g.site_index(i + di, j + dj).is_none())
            })
            .collect();
        g.edges = edges;
        g.num_internal = num_internal;
        g.rebuild_adjacency();
        Ok(g)
    }

    fn rebuild_adjacency(&mut self) {
        let n = self.sites.len();
        let mut deg = vec![0u32; n + 1];
        for e in &self.edges[..self.num_internal] {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + deg[v];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![(0u32, 0u32); offsets[n] as usize];
        for (k, e) in self.edges[..self.num_internal].iter().enumerate() {
            adj[fill[e.u] as usize] = (e.v as u32, k as u32);
            fill[e.u] += 1;
            adj[fill[e.v] as usize] = (e.u as u32, k as u32);
            fill[e.v] += 1;
        }
        self.adj_offsets = offsets;
        self.adj = adj;
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    /// Number of lattice sites (the ghost excluded).
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// Number of vertices including the ghost.
    pub fn num_vertices(&self) -> usize {
        self.sites.len() + 1
    }

    pub fn ghost(&self) -> usize {
        self.sites.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_internal(&self) -> usize {
        self.num_internal
    }

    pub fn is_external(&self, e: usize) -> bool {
        e >= self.num_internal
    }

    /// Index of the external edge of site `v`.
    pub fn external_edge(&self, v: usize) -> usize {
        debug_assert!(v < self.sites.len());
        self.num_internal + v
    }

    /// The nominal external coupling `a^{15/8} h`.
    pub fn nominal_external_coupling(&self) -> f64 {
        external_coupling(self.spacing, self.field)
    }

    pub fn site(&self, v: usize) -> (i64, i64) {
        self.sites[v]
    }

    pub fn sites(&self) -> &[(i64, i64)] {
        &self.sites
    }

    pub fn position(&self, v: usize) -> (f64, f64) {
        let (i, j) = self.sites[v];
        (i as f64 * self.spacing, j as f64 * self.spacing)
    }

    pub fn site_index(&self, i: i64, j: i64) -> Option<usize> {
        let ci = i - self.grid_origin.0;
        let cj = j - self.grid_origin.1;
        if ci < 0 || cj < 0 || ci as usize >= self.grid_cols || cj as usize >= self.grid_rows {
            return None;
        }
        match self.grid[cj as usize * self.grid_cols + ci as usize] {
            NO_SITE => None,
            v => Some(v as usize),
        }
    }

    /// Site at the lattice point nearest to `(x, y)`, if that point is a site.
    pub fn site_near(&self, (x, y): (f64, f64)) -> Option<usize> {
        self.site_index(
            (x / self.spacing).round() as i64,
            (y / self.spacing).round() as i64,
        )
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        v < self.boundary.len() && self.boundary[v]
    }

    /// `∂G`: sites with a lattice neighbour outside the graph, in index order.
    pub fn boundary_sites(&self) -> Vec<usize> {
        (0..self.sites.len()).filter(|&v| self.boundary[v]).collect()
    }

    /// Internal neighbours of site `v` as `(neighbour, edge index)` pairs.
    pub fn internal_neighbors(&self, v: usize) -> &[(u32, u32)] {
        let a = self.adj_offsets[v] as usize;
        let b = self.adj_offsets[v + 1] as usize;
        &self.adj[a..b]
    }

    /// Sites lying in `rect`, in index order.
    pub fn sites_in(&self, rect: &Rect) -> Vec<usize> {
        let a = self.spacing;
        let i0 = ((rect.x0 / a).floor() as i64).max(self.grid_origin.0);
        let i1 = ((rect.x1 / a).ceil() as i64).min(self.grid_origin.0 + self.grid_cols as i64 - 1);
        let j0 = ((rect.y0 / a).floor() as i64).max(self.grid_origin.1);
        let j1 = ((rect.y1 / a).ceil() as i64).min(self.grid_origin.1 + self.grid_rows as i64 - 1);
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                if let Some(v) = self.site_index(i, j) {
                    if rect.contains(self.position(v)) {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    /// Membership mask of `rect` over the lattice sites.
    pub fn site_mask(&self, rect: &Rect) -> Vec<bool> {
        let mut m = vec![false; self.sites.len()];
        for v in self.sites_in(rect) {
            m[v] = true;
        }
        m
    }

    /// Same graph with a different field; external couplings are recomputed.
    pub fn with_field(&self, field: f64) -> Result<Self> {
        check_params(self.spacing, field)?;
        let mut g = self.clone();
        g.field = field;
        let j = external_coupling(self.spacing, field);
        for e in &mut g.edges[self.num_internal..] {
            e.coupling = j;
        }
        Ok(g)
    }

    /// Same graph with one coupling overwritten. Used for negative controls.
    pub fn with_coupling(&self, e: usize, coupling: f64) -> Result<Self> {
        if e >= self.edges.len() {
            return Err(Error::invalid(format!("edge {e} out of range")));
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::invalid(format!("coupling {coupling} must be finite and >= 0")));
        }
        let mut g = self.clone();
        g.edges[e].coupling = coupling;
        Ok(g)
    }

    /// Copy with every internal coupling set to `coupling`.
    pub fn with_internal_coupling(&self, coupling: f64) -> Result<Self> {
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::invalid(format!("coupling {coupling} must be finite and >= 0")));
        }
        let mut g = self.clone();
        for e in 0..g.num_internal() {
            g.edges[e].coupling = coupling;
        }
        Ok(g)
    }

    /// Largest deviation of a coupling from its nominal value
    /// (`β_c` internal, `a^{15/8} h` external).
    pub fn coupling_deviation(&self) -> f64 {
        let jext = self.nominal_external_coupling();
        self.edges
            .iter()
            .map(|e| match e.kind {
                EdgeKind::Internal => (e.coupling - BETA_C).abs(),
                EdgeKind::External => (e.coupling - jext).abs(),
            })
            .fold(0.0, f64::max)
    }

    /// True if the graph (ghost included) is connected.
    pub fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.num_vertices());
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        uf.count_sets() == 1
    }

    /// True if the lattice part (internal edges only) is connected.
    pub fn lattice_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.num_sites());
        for e in &self.edges[..self.num_internal] {
            uf.union(e.u, e.v);
        }
        uf.count_sets() == 1
    }

    /// Plain-text adjacency serialization.
    ///
    /// ```text
    /// ghost-graph 1
    /// spacing <a>
    /// field <h>
    /// domain <x0> <x1> <y0> <y1>
    /// sites <n>
    /// <i> <j>                     (n lines, index order)
    /// edges <m>
    /// <u> <v> <coupling> <I|E>    (m lines, index order)
    /// ```
    ///
    /// Floats use the shortest representation that round-trips.
    pub fn to_adjacency_text(&self) -> String {
        let mut s = String::new();
        let d = &self.domain;
        writeln!(s, "ghost-graph 1").unwrap();
        writeln!(s, "spacing {}", self.spacing).unwrap();
        writeln!(s, "field {}", self.field).unwrap();
        writeln!(s, "domain {} {} {} {}", d.x0, d.x1, d.y0, d.y1).unwrap();
        writeln!(s, "sites {}", self.sites.len()).unwrap();
        for &(i, j) in &self.sites {
            writeln!(s, "{i} {j}").unwrap();
        }
        writeln!(s, "edges {}", self.edges.len()).unwrap();
        for e in &self.edges {
            let kind = match e.kind {
                EdgeKind::Internal => 'I',
                EdgeKind::External => 'E',
            };
            writeln!(s, "{} {} {} {}", e.u, e.v, e.coupling, kind).unwrap();
        }
        s
    }

    /// Parses [`to_adjacency_text`](Self::to_adjacency_text) output. The edge
    /// list must match the canonical structure of the listed sites; couplings
    /// are taken from the file as written.
    pub fn from_adjacency_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            let (k, l) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("unexpected end of input, expected {what}"),
            })?;
            Ok((k, l.split_whitespace().collect()))
        };
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let num = |line: usize, tok: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| perr(line, format!("bad number {tok:?}")))
        };
        let int = |line: usize, tok: &str| -> Result<i64> {
            tok.parse::<i64>()
                .map_err(|_| perr(line, format!("bad integer {tok:?}")))
        };

        let (k, t) = next("header")?;
        if t != ["ghost-graph", "1"] {
            return Err(perr(k, "expected header `ghost-graph 1`".into()));
        }
        let (k, t) = next("spacing")?;
        if t.len() != 2 || t[0] != "spacing" {
            return Err(perr(k, "expected `spacing <a>`".into()));
        }
        let spacing = num(k, t[1])?;
        let (k, t) = next("field")?;
        if t.len() != 2 || t[0] != "field" {
            return Err(perr(k, "expected `field <h>`".into()));
        }
        let field = num(k, t[1])?;
        let (k, t) = next("domain")?;
        if t.len() != 5 || t[0] != "domain" {
            return Err(perr(k, "expected `domain <x0> <x1> <y0> <y1>`".into()));
        }
        let domain = Rect::closed(num(k, t[1])?, num(k, t[2])?, num(k, t[3])?, num(k, t[4])?);
        let (k, t) = next("sites")?;
        if t.len() != 2 || t[0] != "sites" {
            return Err(perr(k, "expected `sites <n>`".into()));
        }
        let n = int(k, t[1])? as usize;
        let mut sites = Vec::with_capacity(n);
        for _ in 0..n {
            let (k, t) = next("site")?;
            if t.len() != 2 {
                return Err(perr(k, "expected `<i> <j>`".into()));
            }
            sites.push((int(k, t[0])?, int(k, t[1])?));
        }
        check_params(spacing, field)?;
        let mut g = Self::assemble(spacing, field, domain, sites.clone())?;
        if g.sites != sites {
            return Err(perr(k, "sites are not in row-major order or repeat".into()));
        }
        let (k, t) = next("edges")?;
        if t.len() != 2 || t[0] != "edges" {
            return Err(perr(k, "expected `edges <m>`".into()));
        }
        let m = int(k, t[1])? as usize;
        if m != g.edges.len() {
            return Err(perr(k, format!("expected {} edges, file has {m}", g.edges.len())));
        }
        for e in 0..m {
            let (k, t) = next("edge")?;
            if t.len() != 4 {
                return Err(perr(k, "expected `<u> <v> <coupling> <I|E>`".into()));
            }
            let u = int(k, t[0])? as usize;
            let v = int(k, t[1])? as usize;
            let j = num(k, t[2])?;
            let kind = match t[3] {
                "I" => EdgeKind::Internal,
                "E" => EdgeKind::External,
                other => return Err(perr(k, format!("bad edge kind {other:?}"))),
            };
            let want = g.edges[e];
            if (u, v, kind) != (want.u, want.v, want.kind) {
                return Err(perr(k, format!("edge {e} does not match the lattice structure")));
            }
            if !(j >= 0.0 && j.is_finite()) {
                return Err(perr(k, format!("coupling {j} must be finite and >= 0")));
            }
            g.edges[e].coupling = j;
        }
        Ok(g)
    }

    /// SHA-256 of the adjacency text, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_adjacency_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn check_params(spacing: f64, field: f64) -> Result<()> {
    if !(spacing > 0.0 && spacing <= 1.0) {
        return Err(Error::invalid(format!("spacing {spacing} not in (0, 1]")));
    }
    if !(field >= 0.0 && field.is_finite()) {
        return Err(Error::invalid(format!("field {field} must be finite and >= 0")));
    }
    Ok(())
}

/// Partition of `∂Ḡ = ∂G ∪ {ghost}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    /// Every boundary vertex in its own block.
    Free,
    /// All boundary vertices and the ghost in one block.
    Wired,
    /// Explicit blocks; must partition `∂Ḡ` exactly.
    Custom(Vec<Vec<usize>>),
}

impl BoundaryCondition {
    /// Resolves the partition into explicit blocks, validating custom ones.
    pub fn blocks(&self, g: &GhostGraph) -> Result<Vec<Vec<usize>>> {
        let mut members = g.boundary_sites();
        members.push(g.ghost());
        match self {
            BoundaryCondition::Free => Ok(members.into_iter().map(|v| vec![v]).collect()),
            BoundaryCondition::Wired => Ok(vec![members]),
            BoundaryCondition::Custom(blocks) => {
                let mut seen: HashMap<usize, usize> = HashMap::new();
                for (b, block) in blocks.iter().enumerate() {
                    if block.is_empty() {
                        return Err(Error::invalid(format!("block {b} is empty")));
                    }
                    for &v in block {
                        if !(v == g.ghost() || g.is_boundary(v)) {
                            return Err(Error::invalid(format!(
                                "vertex {v} in block {b} is not in the boundary set"
                            )));
                        }
                        if let Some(prev) = seen.insert(v, b) {
                            return Err(Error::invalid(format!(
                                "vertex {v} appears in blocks {prev} and {b}"
                            )));
                        }
                    }
                }
                if seen.len() != members.len() {
                    return Err(Error::invalid(format!(
                        "blocks cover {} of {} boundary vertices",
                        seen.len(),
                        members.len()
                    )));
                }
                Ok(blocks.clone())
            }
        }
    }
}

/// A graph with the blocks of a boundary condition identified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientGraph {
    /// Original vertex → quotient vertex.
    pub vertex_map: Vec<usize>,
    pub num_vertices: usize,
    /// Edge multiset in original edge order, endpoints mapped (loops kept).
    pub edges: Vec<(usize, usize)>,
}

/// Identifies the vertices of each block of `bc`. Quotient vertices are
/// numbered in order of their smallest original vertex.
pub fn quotient_by_boundary(g: &GhostGraph, bc: &BoundaryCondition) -> Result<QuotientGraph> {
    let blocks = bc.blocks(g)?;
    let n = g.num_vertices();
    let mut uf = UnionFind::new(n);
    for block in &blocks {
        for w in block.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    let mut root_label = vec![usize::MAX; n];
    let mut vertex_map = vec![0; n];
    let mut next = 0;
    for v in 0..n {
        let r = uf.find(v);
        if root_label[r] == usize::MAX {
            root_label[r] = next;
            next += 1;
        }
        vertex_map[v] = root_label[r];
    }
    let edges = g
        .edges
        .iter()
        .map(|e| (vertex_map[e.u], vertex_map[e.v]))
        .collect();
    Ok(QuotientGraph {
        vertex_map,
        num_vertices: next,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square(h: f64) -> GhostGraph {
        GhostGraph::build_domain_graph(Rect::closed(0.0, 1.0, 0.0, 1.0), 1.0, h).unwrap()
    }

    #[test]
    fn beta_c_closed_form() {
        assert_eq!(BETA_C, (1.0 + 2f64.sqrt()).ln() / 2.0);
    }

    #[test]
    fn unit_square_zero_field() {
        let g = unit_square(0.0);
        assert_eq!(g.num_sites(), 4);
        assert_eq!(g.num_vertices(), 5);
        assert_eq!(g.num_internal(), 4);
        assert_eq!(g.num_edges(), 8);
        for e in &g.edges()[4..] {
            assert_eq!(e.coupling, 0.0);
            assert_eq!(e.v, g.ghost());
        }
        for e in &g.edges()[..4] {
            assert_eq!(e.coupling, BETA_C);
        }
    }

    #[test]
    fn three_by_three_half_field() {
        let g = GhostGraph::build_domain_graph(Rect::closed(0.0, 2.0, 0.0, 2.0), 1.0, 0.5).unwrap();
        assert_eq!(g.num_sites(), 9);
        assert_eq!(g.num_internal(), 12);
        assert_eq!(g.edge(g.external_edge(0)).coupling, 0.5);
        assert_eq!(g.boundary_sites(), vec![0, 1, 2, 3, 5, 6, 7, 8]);
    }

    #[test]
    fn half_spacing_external_coupling() {
        let g = GhostGraph::build_domain_graph(Rect::closed(0.0, 1.0, 0.0, 1.0), 0.5, 1.0).unwrap();
        assert_eq!(g.num_sites(), 9);
        let j = g.edge(g.external_edge(0)).coupling;
        // 2^{-15/8}
        assert!((j - 0.272_626_933_166_314_4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let r = Rect::closed(0.2, 0.8, 0.2, 0.8);
        assert!(matches!(
            GhostGraph::build_domain_graph(r, 1.0, 0.0),
            Err(Error::InvalidInput(_))
        ));
        let unit = Rect::closed(0.0, 1.0, 0.0, 1.0);
        assert!(GhostGraph::build_domain_graph(unit, 0.0, 0.0).is_err());
        assert!(GhostGraph::build_domain_graph(unit, 1.5, 0.0).is_err());
        assert!(GhostGraph::build_domain_graph(unit, 1.0, -1.0).is_err());
    }

    #[test]
    fn row_major_indexing() {
        let g = GhostGraph::build_domain_graph(Rect::closed(0.0, 2.0, 0.0, 1.0), 1.0, 0.0).unwrap();
        assert_eq!(g.site(0), (0, 0));
        assert_eq!(g.site(1), (1, 0));
        assert_eq!(g.site(3), (0, 1));
        assert_eq!(g.ghost(), 6);
        // right-then-up from each site
        let pairs: Vec<_> = g.edges()[..g.num_internal()].iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 3), (1, 2), (1, 4), (2, 5), (3, 4), (4, 5)]);
    }

    #[test]
    fn half_open_quadrants_on_lattice() {
        let g = GhostGraph::build_domain_graph(Rect::closed(0.0, 10.0, 0.0, 3.0), 0.5, 0.0).unwrap();
        let f = RectFrame::new((0.0, 0.0), 0);
        let xs = |r: &Rect| {
            let mut x: Vec<f64> = g.sites_in(r).iter().map(|&v| g.position(v).0).collect();
            x.sort_by(f64::total_cmp);
            x.dedup();
            x
        };
        assert_eq!(xs(&f.q1()), vec![1.0, 1.5]);
        assert_eq!(xs(&f.q8()), vec![8.5, 9.0]);
        assert_eq!(g.sites_in(&f.q1()).len(), 2 * 3);
    }

    #[test]
    fn rotation_preserves_containment() {
        for k in 0..4 {
            let f = RectFrame::new((20.0, -5.0), k);
            let t = f.t();
            assert!(t.contains_rect(&f.r()));
            assert!(t.contains_rect(&f.s()));
            assert!(f.s().contains_rect(&f.q1()));
            assert!(f.s().contains_rect(&f.q8()));
            assert_eq!(f.is_horizontal(), k % 2 == 0);
            let (w, h) = (t.width(), t.height());
            if k % 2 == 0 {
                assert_eq!((w, h), (10.0, 3.0));
            } else {
                assert_eq!((w, h), (3.0, 10.0));
            }
        }
    }

    #[test]
    fn rotated_open_side_follows_rectangle() {
        // Q1 = [1,2) x [1,2]: after a quarter turn the open side x=2 becomes y=2.
        let q = frame_ref::Q1.rotate_quarter(1);
        assert_eq!((q.x0, q.x1, q.y0, q.y1), (-2.0, -1.0, 1.0, 2.0));
        assert!(q.contains((-1.5, 1.5)));
        assert!(q.contains((-1.5, 1.0)));
        assert!(!q.contains((-1.5, 2.0)));
    }

    #[test]
    fn free_quotient_is_identity() {
        let g = unit_square(0.3);
        let q = quotient_by_boundary(&g, &BoundaryCondition::Free).unwrap();
        assert_eq!(q.num_vertices, g.num_vertices());
        assert_eq!(q.vertex_map, (0..g.num_vertices()).collect::<Vec<_>>());
    }

    #[test]
    fn wired_unit_square_collapses() {
        let g = unit_square(0.3);
        let q = quotient_by_boundary(&g, &BoundaryCondition::Wired).unwrap();
        assert_eq!(q.num_vertices, 1);
        assert_eq!(q.edges.len(), g.num_edges());
    }

    #[test]
    fn custom_partition_drops_vertices() {
        let g = GhostGraph::build_domain_graph(Rect::closed(0.0, 2.0, 0.0, 2.0), 1.0, 0.1).unwrap();
        let ghost = g.ghost();
        let blocks = vec![vec![0, 1], vec![ghost], vec![2, 3, 5], vec![6], vec![7], vec![8]];
        let q = quotient_by_boundary(&g, &BoundaryCondition::Custom(blocks.clone())).unwrap();
        let drop: usize = blocks.iter().map(|b| b.len() - 1).sum();
        assert_eq!(q.num_vertices, g.num_vertices() - drop);
    }

    #[test]
    fn custom_partition_rejects_interior_and_gaps() {
        let g = GhostGraph::build_domain_graph(Rect::closed(0.0, 2.0, 0.0, 2.0), 1.0, 0.1).unwrap();
        let ghost = g.ghost();
        // 4 is the centre of the 3x3 grid
        let bad = BoundaryCondition::Custom(vec![vec![4, 0], vec![ghost]]);
        assert!(bad.blocks(&g).is_err());
        let missing = BoundaryCondition::Custom(vec![vec![0, 1], vec![ghost]]);
        assert!(missing.blocks(&g).is_err());
        let twice = BoundaryCondition::Custom(vec![
            vec![0, 1, 2, 3, 5, 6, 7, 8],
            vec![ghost, 0],
        ]);
        assert!(twice.blocks(&g).is_err());
    }

    #[test]
    fn adjacency_text_roundtrip_and_stability() {
        let g = GhostGraph::build_domain_graph(Rect::closed(0.0, 1.0, 0.0, 1.5), 0.5, 0.7).unwrap();
        let text = g.to_adjacency_text();
        let back = GhostGraph::from_adjacency_text(&text).unwrap();
        assert_eq!(back.to_adjacency_text(), text);
        let again = GhostGraph::build_domain_graph(Rect::closed(0.0, 1.0, 0.0, 1.5), 0.5, 0.7).unwrap();
        assert_eq!(again.to_adjacency_text(), text);
        assert_eq!(again.content_hash(), g.content_hash());
    }

    #[test]
    fn adjacency_text_keeps_corrupted_coupling() {
        let g = unit_square(0.2).with_coupling(1, 0.5).unwrap();
        assert!((g.coupling_deviation() - (0.5 - BETA_C)).abs() < 1e-15);
        let back = GhostGraph::from_adjacency_text(&g.to_adjacency_text()).unwrap();
        assert_eq!(back.edge(1).coupling, 0.5);
    }

    #[test]
    fn adjacency_text_rejects_wrong_structure() {
        let g = unit_square(0.2);
        let text = g.to_adjacency_text().replace("0 1 0.44068679350977147 I", "0 3 0.44068679350977147 I");
        assert!(matches!(GhostGraph::from_adjacency_text(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn golden_unit_square_text() {
        let g = unit_square(0.0);
        let expected = "\
ghost-graph 1
spacing 1
field 0
domain 0 1 0 1
sites 4
0 0
1 0
0 1
1 1
edges 8
0 1 0.44068679350977147 I
0 2 0.44068679350977147 I
1 3 0.44068679350977147 I
2 3 0.44068679350977147 I
0 4 0 E
1 4 0 E
2 4 0 E
3 4 0 E
";
        assert_eq!(g.to_adjacency_text(), expected);
    }

    proptest! {
        #[test]
        fn one_external_edge_per_site(
            w in 0.0f64..6.0, h in 0.0f64..4.0, x0 in -3.0f64..3.0, y0 in -3.0f64..3.0,
            k in 0usize..4, field in 0.0f64..2.0,
        ) {
            let a = [1.0, 0.5, 0.25, 0.125][k];
            let dom = Rect::closed(x0, x0 + w, y0, y0 + h);
            if let Ok(g) = GhostGraph::build_domain_graph(dom, a, field) {
                let ext = g.edges().iter().filter(|e| e.kind == EdgeKind::External).count();
                prop_assert_eq!(ext, g.num_sites());
                let ghost_deg = g.edges().iter().filter(|e| e.v == g.ghost() || e.u == g.ghost()).count();
                prop_assert_eq!(ghost_deg, g.num_sites());
                prop_assert_eq!(g.coupling_deviation(), 0.0);
                for v in 0..g.num_sites() {
                    prop_assert!(dom.contains(g.position(v)));
                }
            }
        }
    }
}
