use rand::Rng;

use super::SimRng;
use crate::config::BondConfig;
use crate::dsu::UnionFind;
use crate::lattice::GhostGraph;

/// Reusable buffers for uniform even subgraph draws on one graph.
#[derive(Clone, Debug)]
pub struct UegSampler {
    parent_edge: Vec<u32>,
    seen: Vec<bool>,
    order: Vec<u32>,
    odd: Vec<bool>,
    tree: BondConfig,
}

const NONE: u32 = u32::MAX;

impl UegSampler {
    pub fn new(g: &GhostGraph) -> Self {
        let n = g.num_vertices();
        UegSampler {
            parent_edge: vec![NONE; n],
            seen: vec![false; n],
            order: Vec::with_capacity(n),
            odd: vec![false; n],
            tree: BondConfig::closed(g.num_edges()),
        }
    }

    /// Writes into `out` a uniform element of the cycle space of `omega`.
    ///
    /// A breadth-first spanning forest of the open graph is grown from the
    /// lowest-indexed vertex of each component. Every open non-forest edge
    /// gets a fair coin; the forest edges are then fixed leaf-up so that all
    /// degrees are even, which equals the symmetric difference of the chosen
    /// fundamental cycles.
    pub fn sample_into(
        &mut self,
        g: &GhostGraph,
        omega: &BondConfig,
        rng: &mut SimRng,
        out: &mut BondConfig,
    ) {
        self.grow_forest(g, omega);
        self.flip_and_fix(g, omega, rng, out, None);
    }

    /// As [`UegSampler::sample_into`], but the spanning forest is grown
    /// from `preferred` first (edges closing a cycle are skipped), then from
    /// the remaining open edges in index order. The open non-forest edges whose
    /// coin came up heads are appended to `heads`.
    pub fn sample_with_forest(
        &mut self,
        g: &GhostGraph,
        omega: &BondConfig,
        preferred: &[usize],
        rng: &mut SimRng,
        out: &mut BondConfig,
        heads: &mut Vec<usize>,
    ) {
        let mut uf = UnionFind::new(g.num_vertices());
        let mut hint = BondConfig::closed(g.num_edges());
        for e in preferred.iter().copied().chain(omega.iter_open()) {
            let edge = g.edge(e);
            if omega.get(e) && uf.union(edge.u, edge.v) {
                hint.set(e, true);
            }
        }
        self.grow_forest(g, &hint);
        self.flip_and_fix(g, omega, rng, out, Some(heads));
    }

    fn flip_and_fix(
        &mut self,
        g: &GhostGraph,
        omega: &BondConfig,
        rng: &mut SimRng,
        out: &mut BondConfig,
        mut heads: Option<&mut Vec<usize>>,
    ) {
        out.clear();
        for e in omega.iter_open() {
            if !self.tree.get(e) && rng.random::<bool>() {
                if let Some(h) = heads.as_deref_mut() {
                    h.push(e);
                }
                out.set(e, true);
                let edge = g.edge(e);
                self.odd[edge.u] ^= true;
                self.odd[edge.v] ^= true;
            }
        }
        for &v in self.order.iter().rev() {
            let v = v as usize;
            if self.odd[v] {
                let pe = self.parent_edge[v];
                debug_assert!(pe != NONE, "odd root cannot happen");
                let edge = g.edge(pe as usize);
                out.set(pe as usize, true);
                self.odd[edge.u] ^= true;
                self.odd[edge.v] ^= true;
            }
        }
    }

    fn grow_forest(&mut self, g: &GhostGraph, omega: &BondConfig) {
        let n = g.num_vertices();
        let ghost = g.ghost();
        self.parent_edge.fill(NONE);
        self.seen.fill(false);
        self.odd.fill(false);
        self.order.clear();
        self.tree.clear();
        for root in 0..n {
            if self.seen[root] {
                continue;
            }
            self.seen[root] = true;
            let mut head = self.order.len();
            self.order.push(root as u32);
            while head < self.order.len() {
                let u = self.order[head] as usize;
                head += 1;
                if u == ghost {
                    for w in 0..g.num_sites() {
                        let e = g.external_edge(w);
                        self.visit(omega, w, e);
                    }
                } else {
                    for &(w, e) in g.internal_neighbors(u) {
                        self.visit(omega, w as usize, e as usize);
                    }
                    self.visit(omega, ghost, g.external_edge(u));
                }
            }
        }
    }

    #[inline]
    fn visit(&mut self, omega: &BondConfig, w: usize, e: usize) {
        if omega.get(e) && !self.seen[w] {
            self.seen[w] = true;
            self.parent_edge[w] = e as u32;
            self.tree.set(e, true);
            self.order.push(w as u32);
        }
    }
}

/// A uniform even subgraph of `omega`.
pub fn uniform_even_subgraph(g: &GhostGraph, omega: &BondConfig, rng: &mut SimRng) -> BondConfig {
    let mut out = BondConfig::closed(g.num_edges());
    UegSampler::new(g).sample_into(g, omega, rng, &mut out);
    out
}

/// Adds every edge outside `loops` independently with probability `1 − sech J`.
pub fn sech_augment(g: &GhostGraph, loops: &BondConfig, rng: &mut SimRng) -> BondConfig {
    let p: Vec<f64> = g.edges().iter().map(|e| 1.0 - 1.0 / e.coupling.cosh()).collect();
    let mut out = BondConfig::closed(g.num_edges());
    sech_augment_into(&p, loops, rng, &mut out);
    out
}

pub(crate) fn sech_augment_into(
    p: &[f64],
    loops: &BondConfig,
    rng: &mut SimRng,
    out: &mut BondConfig,
) {
    out.clone_from(loops);
    for (e, &pe) in p.iter().enumerate() {
        if pe > 0.0 && !loops.get(e) && rng.random::<f64>() < pe {
            out.set(e, true);
        }
    }
}
