use serde::{Deserialize, Serialize};

use super::{crossing_in, Axis, Region};
use crate::config::BondConfig;
use crate::dsu::UnionFind;
use crate::lattice::{GhostGraph, RectFrame};

/// The events of one frame evaluated on one configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventReport {
    pub e1: bool,
    pub e2: bool,
    pub e_r: bool,
    pub h_r: bool,
    /// `|𝒞|` on `E2`, else 0.
    pub n: usize,
    pub n1: usize,
    pub n8: usize,
    /// The endpoints in `Q₁` and `Q₈` of the two external edges when `H(R)` holds.
    pub anchors: Option<(usize, usize)>,
}

/// Site sets of a placed frame, built once and reused across samples.
#[derive(Clone, Debug)]
pub struct FrameRegions {
    pub frame: RectFrame,
    pub t: Region,
    pub r: Region,
    pub s: Region,
    pub q1: Region,
    pub q8: Region,
    pub t_left: Region,
    pub t_right: Region,
    /// Local `T` indices of sites with a lattice neighbour outside `T`.
    t_rim: Vec<usize>,
    /// Crossing direction of `Q₁`, `Q₈` (top-bottom in frame coordinates).
    q_axis: Axis,
}

impl FrameRegions {
    pub fn new(g: &GhostGraph, frame: RectFrame) -> Self {
        let t = Region::new(g, frame.t());
        let a = g.spacing();
        let t_rim = t
            .vertices()
            .iter()
            .enumerate()
            .filter(|(_, &v)| {
                let (x, y) = g.position(v);
                [(a, 0.0), (-a, 0.0), (0.0, a), (0.0, -a)]
                    .iter()
                    .any(|(dx, dy)| !t.rect.contains((x + dx, y + dy)))
            })
            .map(|(k, _)| k)
            .collect();
        FrameRegions {
            frame,
            r: Region::new(g, frame.r()),
            s: Region::new(g, frame.s()),
            q1: Region::new(g, frame.q1()),
            q8: Region::new(g, frame.q8()),
            t_left: Region::new(g, frame.t_left()),
            t_right: Region::new(g, frame.t_right()),
            t,
            t_rim,
            q_axis: if frame.is_horizontal() {
                Axis::TopBottom
            } else {
                Axis::LeftRight
            },
        }
    }

    /// `E1` by primal blocking: no open internal path inside `T` joins `S`
    /// to the rim of `T`.
    pub fn dual_circuit(&self, omega: &BondConfig, g: &GhostGraph) -> bool {
        let mut uf = self.t.clusters(omega, g, false);
        let mut inner: Vec<usize> = self
            .s
            .vertices()
            .iter()
            .filter_map(|&v| self.t.index_of(g, v))
            .map(|k| uf.find(k))
            .collect();
        inner.sort_unstable();
        !self
            .t_rim
            .iter()
            .any(|&k| inner.binary_search(&uf.find(k)).is_ok())
    }

    pub fn e2(&self, omega: &BondConfig, g: &GhostGraph) -> bool {
        crossing_in(&self.s, omega, g, Axis::Long, true)
            && crossing_in(&self.q1, omega, g, self.q_axis, true)
            && crossing_in(&self.q8, omega, g, self.q_axis, true)
    }

    /// Roots in `uf_t` of the `T`-clusters containing a long crossing of
    /// `region` (which must lie inside `T`).
    fn crossing_roots(
        &self,
        region: &Region,
        omega: &BondConfig,
        g: &GhostGraph,
        uf_t: &mut UnionFind,
    ) -> Vec<usize> {
        let mut uf = region.clusters(omega, g, false);
        let (lo, hi) = region.sides(g, Axis::Long);
        let mut lo_roots: Vec<usize> = lo.iter().map(|&k| uf.find(k)).collect();
        lo_roots.sort_unstable();
        let mut crossing: Vec<usize> = hi
            .iter()
            .map(|&k| uf.find(k))
            .filter(|r| lo_roots.binary_search(r).is_ok())
            .collect();
        crossing.sort_unstable();
        crossing.dedup();
        let mut out: Vec<usize> = region
            .vertices()
            .iter()
            .enumerate()
            .filter(|(k, _)| crossing.binary_search(&uf.find(*k)).is_ok())
            .filter_map(|(_, &v)| self.t.index_of(g, v))
            .map(|kt| uf_t.find(kt))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn event_h(&self, omega: &BondConfig, g: &GhostGraph) -> EventReport {
        let mut rep = EventReport {
            e1: self.dual_circuit(omega, g),
            e2: self.e2(omega, g),
            e_r: self.event_e(omega, g),
            ..EventReport::default()
        };
        if !rep.e2 {
            return rep;
        }
        let mut uf_t = self.t.clusters(omega, g, false);
        let roots = self.crossing_roots(&self.s, omega, g, &mut uf_t);
        assert_eq!(
            roots.len(),
            1,
            "E2 holds but {} distinct clusters cross S",
            roots.len()
        );
        let c = roots[0];
        let mut anchors = Vec::new();
        for (k, &v) in self.t.vertices().iter().enumerate() {
            if uf_t.find(k) != c {
                continue;
            }
            rep.n += 1;
            if self.q1.contains(g, v) {
                rep.n1 += 1;
            }
            if self.q8.contains(g, v) {
                rep.n8 += 1;
            }
            if omega.get(g.external_edge(v)) {
                anchors.push(v);
            }
        }
        if rep.e1 && anchors.len() == 2 {
            let (u, w) = (anchors[0], anchors[1]);
            let pair = if self.q1.contains(g, u) && self.q8.contains(g, w) {
                Some((u, w))
            } else if self.q1.contains(g, w) && self.q8.contains(g, u) {
                Some((w, u))
            } else {
                None
            };
            rep.h_r = pair.is_some();
            rep.anchors = pair;
        }
        rep
    }

    pub fn event_e(&self, trace: &BondConfig, g: &GhostGraph) -> bool {
        let mut uf_t = self.t.clusters(trace, g, false);
        let crossing = self.crossing_roots(&self.r, trace, g, &mut uf_t);
        if crossing.is_empty() {
            return false;
        }
        let mut anchored = |side: &Region| -> Vec<usize> {
            let mut roots: Vec<usize> = side
                .vertices()
                .iter()
                .filter(|&&v| trace.get(g.external_edge(v)))
                .filter_map(|&v| self.t.index_of(g, v))
                .map(|k| uf_t.find(k))
                .collect();
            roots.sort_unstable();
            roots
        };
        let left = anchored(&self.t_left);
        let right = anchored(&self.t_right);
        crossing
            .iter()
            .any(|r| left.binary_search(r).is_ok() && right.binary_search(r).is_ok())
    }
}

/// `E1`: a dual open circuit in `T^a ∖ S^a` surrounds `S^a`.
pub fn has_dual_circuit(omega: &BondConfig, g: &GhostGraph, frame: &RectFrame) -> bool {
    FrameRegions::new(g, *frame).dual_circuit(omega, g)
}

pub fn event_h(omega: &BondConfig, g: &GhostGraph, frame: &RectFrame) -> EventReport {
    FrameRegions::new(g, *frame).event_h(omega, g)
}

pub fn event_e(trace: &BondConfig, g: &GhostGraph, frame: &RectFrame) -> bool {
    FrameRegions::new(g, *frame).event_e(trace, g)
}

/// `E1` by an explicit search on the dual plaquettes of `T` outside `S`.
///
/// Dual edges cross closed primal edges. A vertical ray from the top of `S`
/// to the top of `T` splits the plane; walking the two-sheeted cover that
/// switches sheet on every crossing of the ray, a closed dual walk surrounds
/// `S` an odd number of times iff it ends on the other sheet.
pub fn dual_circuit_by_search(omega: &BondConfig, g: &GhostGraph, frame: &RectFrame) -> bool {
    let t = Region::new(g, frame.t());
    let s = Region::new(g, frame.s());
    if t.is_empty() || s.is_empty() {
        return false;
    }
    let coords: Vec<(i64, i64)> = t.vertices().iter().map(|&v| g.site(v)).collect();
    let i_lo = coords.iter().map(|c| c.0).min().unwrap();
    let i_hi = coords.iter().map(|c| c.0).max().unwrap();
    let j_lo = coords.iter().map(|c| c.1).min().unwrap();
    let j_hi = coords.iter().map(|c| c.1).max().unwrap();
    let in_t = |i: i64, j: i64| g.site_index(i, j).filter(|&v| t.contains(g, v));
    let in_s = |i: i64, j: i64| g.site_index(i, j).is_some_and(|v| s.contains(g, v));
    let cols = (i_hi - i_lo) as usize;
    let rows = (j_hi - j_lo) as usize;
    let pid = |i: i64, j: i64| (j - j_lo) as usize * cols + (i - i_lo) as usize;
    // plaquette with lower-left corner (i, j)
    let allowed = |i: i64, j: i64| -> bool {
        let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
        corners.iter().all(|&(x, y)| in_t(x, y).is_some())
            && !corners.iter().all(|&(x, y)| in_s(x, y))
    };
    let s_coords: Vec<(i64, i64)> = s.vertices().iter().map(|&v| g.site(v)).collect();
    let s_i_lo = s_coords.iter().map(|c| c.0).min().unwrap();
    let s_i_hi = s_coords.iter().map(|c| c.0).max().unwrap();
    let ray_col = (s_i_lo + s_i_hi) / 2;
    let ray_from = s_coords.iter().map(|c| c.1).max().unwrap();
    let closed = |u: (i64, i64), v: (i64, i64)| -> bool {
        let (a, b) = (in_t(u.0, u.1).unwrap(), in_t(v.0, v.1).unwrap());
        let e = super::edge_between(g, a, b).expect("lattice neighbours share an edge");
        !omega.get(e)
    };
    let np = cols * rows;
    let mut uf = UnionFind::new(2 * np);
    for j in j_lo..j_hi {
        for i in i_lo..i_hi {
            if !allowed(i, j) {
                continue;
            }
            let p = pid(i, j);
            // right neighbour shares the vertical edge (i+1, j)-(i+1, j+1)
            if i + 1 < i_hi && allowed(i + 1, j) && closed((i + 1, j), (i + 1, j + 1)) {
                let q = pid(i + 1, j);
                let flip = i + 1 == ray_col && j >= ray_from;
                for sheet in 0..2 {
                    let other = if flip { 1 - sheet } else { sheet };
                    uf.union(sheet * np + p, other * np + q);
                }
            }
            // upper neighbour shares the horizontal edge (i, j+1)-(i+1, j+1)
            if j + 1 < j_hi && allowed(i, j + 1) && closed((i, j + 1), (i + 1, j + 1)) {
                let q = pid(i, j + 1);
                uf.union(p, q);
                uf.union(np + p, np + q);
            }
        }
    }
    (0..np).any(|p| uf.same(p, np + p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::edge_between;
    use crate::lattice::Rect;

    /// Grid covering a horizontal frame at the origin with a margin.
    fn frame_graph(a: f64) -> (GhostGraph, RectFrame) {
        let g = GhostGraph::build_domain_graph(Rect::closed(-1.0, 11.0, -1.0, 4.0), a, 0.1).unwrap();
        (g, RectFrame::new((0.0, 0.0), 0))
    }

    fn open_path(g: &GhostGraph, omega: &mut BondConfig, pts: &[(i64, i64)]) {
        for w in pts.windows(2) {
            let u = g.site_index(w[0].0, w[0].1).unwrap();
            let v = g.site_index(w[1].0, w[1].1).unwrap();
            omega.set(edge_between(g, u, v).unwrap(), true);
        }
    }

    /// Straight path along y = 1 from x = 1 to x = 9, vertical rungs in Q1
    /// and Q8, and the two external edges at (1, 1) and (9, 1).
    fn h_fixture(g: &GhostGraph) -> BondConfig {
        let mut omega = BondConfig::closed(g.num_edges());
        let row: Vec<(i64, i64)> = (1..=9).map(|i| (i, 1)).collect();
        open_path(g, &mut omega, &row);
        open_path(g, &mut omega, &[(1, 1), (1, 2)]);
        open_path(g, &mut omega, &[(9, 1), (9, 2)]);
        omega.set(g.external_edge(g.site_index(1, 1).unwrap()), true);
        omega.set(g.external_edge(g.site_index(9, 2).unwrap()), true);
        omega
    }

    #[test]
    fn all_closed_and_all_open_annulus() {
        let (g, f) = frame_graph(1.0);
        let closed = BondConfig::closed(g.num_edges());
        assert!(has_dual_circuit(&closed, &g, &f));
        assert!(dual_circuit_by_search(&closed, &g, &f));
        let open = BondConfig::open(g.num_edges());
        assert!(!has_dual_circuit(&open, &g, &f));
        assert!(!dual_circuit_by_search(&open, &g, &f));
    }

    #[test]
    fn radial_path_blocks_circuit() {
        let (g, f) = frame_graph(1.0);
        let mut omega = BondConfig::closed(g.num_edges());
        open_path(&g, &mut omega, &[(5, 2), (5, 3)]);
        assert!(!has_dual_circuit(&omega, &g, &f));
        assert!(!dual_circuit_by_search(&omega, &g, &f));
        let mut cut = BondConfig::closed(g.num_edges());
        open_path(&g, &mut cut, &[(0, 0), (1, 0)]);
        open_path(&g, &mut cut, &[(5, 2), (5, 1)]);
        assert!(has_dual_circuit(&cut, &g, &f));
        assert!(dual_circuit_by_search(&cut, &g, &f));
    }

    #[test]
    fn h_fixture_satisfies_h_and_e() {
        let (g, f) = frame_graph(1.0);
        let omega = h_fixture(&g);
        let rep = event_h(&omega, &g, &f);
        assert!(rep.e1 && rep.e2 && rep.h_r, "{rep:?}");
        assert_eq!(rep.n, 11);
        assert_eq!((rep.n1, rep.n8), (2, 2));
        let u1 = g.site_index(1, 1).unwrap();
        let u8 = g.site_index(9, 2).unwrap();
        assert_eq!(rep.anchors, Some((u1, u8)));
        assert!(event_e(&omega, &g, &f));
        assert!(rep.e_r);

        let mut third = omega.clone();
        third.set(g.external_edge(g.site_index(5, 1).unwrap()), true);
        assert!(!event_h(&third, &g, &f).h_r);

        let mut no_ghost = omega.clone();
        for v in 0..g.num_sites() {
            no_ghost.set(g.external_edge(v), false);
        }
        assert!(!event_h(&no_ghost, &g, &f).h_r);
        assert!(!event_e(&no_ghost, &g, &f));

        let mut same_side = omega.clone();
        same_side.set(g.external_edge(g.site_index(9, 2).unwrap()), false);
        same_side.set(g.external_edge(g.site_index(1, 2).unwrap()), true);
        assert!(!event_e(&same_side, &g, &f));
    }

    #[test]
    fn counts_vanish_without_e2() {
        let (g, f) = frame_graph(0.5);
        let rep = event_h(&BondConfig::closed(g.num_edges()), &g, &f);
        assert!(!rep.e2 && rep.n == 0 && rep.n1 == 0 && rep.n8 == 0);
    }

    #[test]
    fn rotated_frame_fixture() {
        let g = GhostGraph::build_domain_graph(Rect::closed(-5.0, 1.0, -1.0, 11.0), 1.0, 0.1).unwrap();
        let f = RectFrame::new((0.0, 0.0), 1);
        // rotated S = [-2,-1] x [1,9]; path along x = -1
        let mut omega = BondConfig::closed(g.num_edges());
        let col: Vec<(i64, i64)> = (1..=9).map(|j| (-1, j)).collect();
        open_path(&g, &mut omega, &col);
        open_path(&g, &mut omega, &[(-1, 1), (-2, 1)]);
        open_path(&g, &mut omega, &[(-1, 9), (-2, 9)]);
        omega.set(g.external_edge(g.site_index(-1, 1).unwrap()), true);
        omega.set(g.external_edge(g.site_index(-1, 9).unwrap()), true);
        let rep = event_h(&omega, &g, &f);
        assert!(rep.h_r, "{rep:?}");
        assert!(dual_circuit_by_search(&omega, &g, &f));
    }
}
