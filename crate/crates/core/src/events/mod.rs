//! Connectivity events on bond configurations: cluster labels, rectangle
//! crossings, dual circuits in frame annuli, the frame events and the
//! rectangle-covering construction for long paths.

mod frame;
mod rectangles;

use serde::{Deserialize, Serialize};

use crate::config::BondConfig;
use crate::dsu::UnionFind;
use crate::lattice::{GhostGraph, Rect, GEOM_EPS};

pub use frame::{
    dual_circuit_by_search, event_e, event_h, has_dual_circuit, EventReport, FrameRegions,
};
pub use rectangles::{
    disjoint_crossed_rectangles, required_rectangles, verify_rectangles, LatticeBox, PlacedRect,
    RectangleViolation,
};

/// Cluster ids of every vertex of `Ḡ` (ghost last); the id of a cluster is its
/// smallest vertex index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterLabeling {
    pub labels: Vec<usize>,
}

impl ClusterLabeling {
    pub fn same(&self, u: usize, v: usize) -> bool {
        self.labels[u] == self.labels[v]
    }

    pub fn num_clusters(&self) -> usize {
        self.labels
            .iter()
            .enumerate()
            .filter(|(v, &l)| *v == l)
            .count()
    }

    /// Number of vertices carrying each label, indexed by label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.labels.len()];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

/// Labels clusters of open edges. With `internal_only` external edges are
/// ignored; with a `region` only edges with both endpoints in the region are
/// used (vertices outside stay singletons, the ghost counts as outside).
pub fn label_clusters(
    omega: &BondConfig,
    g: &GhostGraph,
    internal_only: bool,
    region: Option<&Rect>,
) -> ClusterLabeling {
    let n = g.num_vertices();
    let inside: Option<Vec<bool>> = region.map(|r| g.site_mask(r));
    let keep = |v: usize| match &inside {
        None => true,
        Some(m) => v < m.len() && m[v],
    };
    let mut uf = UnionFind::new(n);
    for e in omega.iter_open() {
        if internal_only && g.is_external(e) {
            continue;
        }
        let edge = g.edge(e);
        if keep(edge.u) && keep(edge.v) {
            uf.union(edge.u, edge.v);
        }
    }
    let mut rep = vec![usize::MAX; n];
    let mut labels = vec![0; n];
    for v in 0..n {
        let r = uf.find(v);
        if rep[r] == usize::MAX {
            rep[r] = v;
        }
        labels[v] = rep[r];
    }
    ClusterLabeling { labels }
}

/// Direction of a rectangle crossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Between the two short sides (left-right for a square).
    Long,
    /// Between the left and right sides.
    LeftRight,
    /// Between the bottom and top sides.
    TopBottom,
}

/// The lattice sites of a rectangle with a compact local index.
#[derive(Clone, Debug)]
pub struct Region {
    pub rect: Rect,
    verts: Vec<usize>,
    origin: (i64, i64),
    cols: usize,
    rows: usize,
    local: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl Region {
    pub fn new(g: &GhostGraph, rect: Rect) -> Self {
        let verts = g.sites_in(&rect);
        let (mut i0, mut i1, mut j0, mut j1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for &v in &verts {
            let (i, j) = g.site(v);
            i0 = i0.min(i);
            i1 = i1.max(i);
            j0 = j0.min(j);
            j1 = j1.max(j);
        }
        let (cols, rows) = if verts.is_empty() {
            (0, 0)
        } else {
            ((i1 - i0 + 1) as usize, (j1 - j0 + 1) as usize)
        };
        let mut local = vec![NONE; cols * rows];
        for (k, &v) in verts.iter().enumerate() {
            let (i, j) = g.site(v);
            local[(j - j0) as usize * cols + (i - i0) as usize] = k as u32;
        }
        Region {
            rect,
            verts,
            origin: (i0, j0),
            cols,
            rows,
            local,
        }
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.verts
    }

    /// Local index of site `v`, if it lies in the region.
    #[inline]
    pub fn index_of(&self, g: &GhostGraph, v: usize) -> Option<usize> {
        if v >= g.num_sites() || self.verts.is_empty() {
            return None;
        }
        let (i, j) = g.site(v);
        let (ci, cj) = (i - self.origin.0, j - self.origin.1);
        if ci < 0 || cj < 0 || ci as usize >= self.cols || cj as usize >= self.rows {
            return None;
        }
        match self.local[cj as usize * self.cols + ci as usize] {
            NONE => None,
            k => Some(k as usize),
        }
    }

    pub fn contains(&self, g: &GhostGraph, v: usize) -> bool {
        self.index_of(g, v).is_some()
    }

    /// Union-find over the region's sites joined by open internal edges with
    /// both endpoints inside. With `through_ghost` an extra slot (index
    /// `len()`) stands for the ghost and open external edges join it.
    pub fn clusters(&self, omega: &BondConfig, g: &GhostGraph, through_ghost: bool) -> UnionFind {
        let n = self.verts.len();
        let mut uf = UnionFind::new(n + through_ghost as usize);
        for (k, &v) in self.verts.iter().enumerate() {
            for &(w, e) in g.internal_neighbors(v) {
                let w = w as usize;
                if w > v && omega.get(e as usize) {
                    if let Some(kw) = self.index_of(g, w) {
                        uf.union(k, kw);
                    }
                }
            }
            if through_ghost && omega.get(g.external_edge(v)) {
                uf.union(k, n);
            }
        }
        uf
    }

    /// Local indices of the sites on the two sides crossed in direction
    /// `axis`. A site is on a side if it is within `a/2` of it.
    pub fn sides(&self, g: &GhostGraph, axis: Axis) -> (Vec<usize>, Vec<usize>) {
        let r = &self.rect;
        let lr = match axis {
            Axis::LeftRight => true,
            Axis::TopBottom => false,
            Axis::Long => r.width() >= r.height() - GEOM_EPS,
        };
        let tol = 0.5 * g.spacing() + GEOM_EPS;
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for (k, &v) in self.verts.iter().enumerate() {
            let (x, y) = g.position(v);
            let (c, c0, c1) = if lr { (x, r.x0, r.x1) } else { (y, r.y0, r.y1) };
            if (c - c0).abs() <= tol {
                lo.push(k);
            }
            if (c - c1).abs() <= tol {
                hi.push(k);
            }
        }
        (lo, hi)
    }
}

/// True iff an open path inside `rect` joins the two sides crossed in
/// direction `axis`. Unless `internal_only`, the path may pass through the
/// ghost via open external edges of region sites.
pub fn has_crossing(
    omega: &BondConfig,
    g: &GhostGraph,
    rect: &Rect,
    axis: Axis,
    internal_only: bool,
) -> bool {
    let region = Region::new(g, *rect);
    crossing_in(&region, omega, g, axis, internal_only)
}

pub(crate) fn crossing_in(
    region: &Region,
    omega: &BondConfig,
    g: &GhostGraph,
    axis: Axis,
    internal_only: bool,
) -> bool {
    let (lo, hi) = region.sides(g, axis);
    if lo.is_empty() || hi.is_empty() {
        return false;
    }
    let mut uf = region.clusters(omega, g, !internal_only);
    let mut roots: Vec<usize> = lo.iter().map(|&k| uf.find(k)).collect();
    roots.sort_unstable();
    hi.iter().any(|&k| roots.binary_search(&uf.find(k)).is_ok())
}

/// Index of the internal edge joining sites `u` and `v`, if any.
pub fn edge_between(g: &GhostGraph, u: usize, v: usize) -> Option<usize> {
    if u >= g.num_sites() {
        return None;
    }
    g.internal_neighbors(u)
        .iter()
        .find(|&&(w, _)| w as usize == v)
        .map(|&(_, e)| e as usize)
}

/// A shortest open internal path from `from` to `to` using only sites of
/// `region`, as a list of edges.
pub fn internal_path(
    omega: &BondConfig,
    g: &GhostGraph,
    region: &Region,
    from: usize,
    to: usize,
) -> Option<Vec<usize>> {
    let start = region.index_of(g, from)?;
    region.index_of(g, to)?;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; region.len()];
    let mut seen = vec![false; region.len()];
    seen[start] = true;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut path = Vec::new();
            let mut cur = u;
            while let Some((p, e)) = parent[region.index_of(g, cur).unwrap()] {
                path.push(e);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for &(w, e) in g.internal_neighbors(u) {
            let (w, e) = (w as usize, e as usize);
            if let Some(k) = region.index_of(g, w) {
                if omega.get(e) && !seen[k] {
                    seen[k] = true;
                    parent[k] = Some((u, e));
                    queue.push_back(w);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Rect;

    fn grid(w: i64, h: i64) -> GhostGraph {
        GhostGraph::build_domain_graph(Rect::closed(0.0, (w - 1) as f64, 0.0, (h - 1) as f64), 1.0, 0.1)
            .unwrap()
    }

    /// Breadth-first reference labelling.
    fn bfs_labels(omega: &BondConfig, g: &GhostGraph) -> Vec<usize> {
        let n = g.num_vertices();
        let mut adj = vec![Vec::new(); n];
        for e in omega.iter_open() {
            let ed = g.edge(e);
            adj[ed.u].push(ed.v);
            adj[ed.v].push(ed.u);
        }
        let mut lab = vec![usize::MAX; n];
        for s in 0..n {
            if lab[s] != usize::MAX {
                continue;
            }
            lab[s] = s;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if lab[w] == usize::MAX {
                        lab[w] = s;
                        stack.push(w);
                    }
                }
            }
        }
        lab
    }

    #[test]
    fn labels_match_bfs() {
        let g = grid(4, 4);
        let mut s = 12345u64;
        for _ in 0..500 {
            let mut omega = BondConfig::closed(g.num_edges());
            for e in 0..g.num_edges() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if s >> 62 >= 2 {
                    omega.set(e, true);
                }
            }
            assert_eq!(label_clusters(&omega, &g, false, None).labels, bfs_labels(&omega, &g));
        }
    }

    #[test]
    fn trivial_labelings() {
        let g = grid(3, 3);
        let closed = label_clusters(&BondConfig::closed(g.num_edges()), &g, false, None);
        assert_eq!(closed.num_clusters(), g.num_vertices());
        let open = label_clusters(&BondConfig::open(g.num_edges()), &g, true, None);
        // internal edges connect the sites; the ghost stays alone
        assert_eq!(open.num_clusters(), 2);
        assert_eq!(open.sizes()[0], 9);
    }

    #[test]
    fn staircase_crosses_strip() {
        // S = [1,9] x [1,2] on an 11 x 4 grid
        let g = grid(11, 4);
        let s = Rect::closed(1.0, 9.0, 1.0, 2.0);
        let mut verts = vec![(1, 1)];
        let mut y = 1;
        for i in 2..=9 {
            verts.push((i, y));
            if i < 9 {
                y = 3 - y;
                verts.push((i, y));
            }
        }
        let path: Vec<usize> = verts
            .windows(2)
            .map(|w| {
                let u = g.site_index(w[0].0, w[0].1).unwrap();
                let v = g.site_index(w[1].0, w[1].1).unwrap();
                edge_between(&g, u, v).unwrap()
            })
            .collect();
        let omega = BondConfig::from_open_edges(g.num_edges(), path.iter().copied());
        assert!(has_crossing(&omega, &g, &s, Axis::LeftRight, true));
        assert!(has_crossing(&omega, &g, &s, Axis::Long, true));
        let mut broken = omega.clone();
        broken.set(path[path.len() / 2], false);
        assert!(!has_crossing(&broken, &g, &s, Axis::LeftRight, true));
        assert!(has_crossing(&BondConfig::open(g.num_edges()), &g, &s, Axis::Long, true));
        assert!(!has_crossing(&BondConfig::closed(g.num_edges()), &g, &s, Axis::Long, false));
    }

    #[test]
    fn crossing_through_ghost_only_when_allowed() {
        let g = grid(3, 1);
        let r = Rect::closed(0.0, 2.0, 0.0, 0.0);
        let omega = BondConfig::from_open_edges(
            g.num_edges(),
            [g.external_edge(0), g.external_edge(2)],
        );
        assert!(!has_crossing(&omega, &g, &r, Axis::LeftRight, true));
        assert!(has_crossing(&omega, &g, &r, Axis::LeftRight, false));
    }

    #[test]
    fn path_finder_returns_open_path() {
        let g = grid(4, 4);
        let omega = BondConfig::open(g.num_edges());
        let region = Region::new(&g, Rect::closed(0.0, 3.0, 0.0, 3.0));
        let p = internal_path(&omega, &g, &region, 0, 15).unwrap();
        assert_eq!(p.len(), 6);
        assert!(internal_path(&BondConfig::closed(g.num_edges()), &g, &region, 0, 15).is_none());
    }
}
