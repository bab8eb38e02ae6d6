//! Exact computation of the spin, random-cluster, loop and random-current
//! measures on small ghost graphs by complete enumeration.
//!
//! Every routine either returns an exact (up to floating point) answer or a
//! [`Error::Capacity`]; nothing is truncated silently.

mod corpus;
mod identities;
pub mod reference;
pub(crate) mod small;

use serde::{Deserialize, Serialize};

use crate::config::BondConfig;
use crate::error::{Error, Result};
use crate::lattice::{quotient_by_boundary, BoundaryCondition, GhostGraph};
use small::SmallGraph;

pub use corpus::{default_corpus, CorpusEntry, CORPUS_FIELDS, CORPUS_SPACINGS};
pub use identities::{Identity, IdentityReport, GHS_FIELD_STEP};

/// Enumeration limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Lattice vertices for spin sums (`2^n` states).
    pub spins: usize,
    /// Edges for bond and trace laws (`2^|Ē|` states).
    pub edges: usize,
    /// Cycle-space dimension for even-subgraph enumeration.
    pub cycles: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            spins: 16,
            edges: 24,
            cycles: 20,
        }
    }
}

/// First and second spin moments of `μ^f`, lattice vertices only.
#[derive(Clone, Debug)]
pub struct SpinMoments {
    pub mean: Vec<f64>,
    /// `⟨σ_u σ_v⟩`, row-major `n × n`.
    pub pair: Vec<f64>,
    n: usize,
}

impl SpinMoments {
    pub fn num_sites(&self) -> usize {
        self.n
    }

    pub fn two_point(&self, u: usize, v: usize) -> f64 {
        self.pair[u * self.n + v]
    }

    pub fn covariance(&self, u: usize, v: usize) -> f64 {
        self.two_point(u, v) - self.mean[u] * self.mean[v]
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ExactOracle {
    pub caps: Caps,
}

impl ExactOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_caps(caps: Caps) -> Self {
        ExactOracle { caps }
    }

    fn check_spins(&self, g: &GhostGraph) -> Result<()> {
        if g.num_sites() > self.caps.spins.min(30) {
            return Err(Error::Capacity {
                what: "lattice vertices",
                size: g.num_sites(),
                cap: self.caps.spins,
            });
        }
        Ok(())
    }

    fn check_edges(&self, g: &GhostGraph) -> Result<()> {
        if g.num_edges() > self.caps.edges.min(40) || g.num_vertices() > 64 {
            return Err(Error::Capacity {
                what: "edges",
                size: g.num_edges(),
                cap: self.caps.edges,
            });
        }
        Ok(())
    }

    fn check_cycles(&self, g: &GhostGraph) -> Result<()> {
        if g.num_edges() > 64 {
            return Err(Error::Capacity {
                what: "edges",
                size: g.num_edges(),
                cap: 64,
            });
        }
        let dim = g.num_edges() + components(g) - g.num_vertices();
        if dim > self.caps.cycles.min(40) {
            return Err(Error::Capacity {
                what: "cycle-space dimension",
                size: dim,
                cap: self.caps.cycles,
            });
        }
        Ok(())
    }

    /// `⟨Π_{x∈A} σ_x⟩` under `μ^f`. `A` may contain the ghost (spin `+1`);
    /// repeated vertices cancel.
    pub fn ising_correlation(&self, g: &GhostGraph, a: &[usize]) -> Result<f64> {
        self.check_spins(g)?;
        let n = g.num_sites();
        let mut amask = 0u64;
        for &v in a {
            if v > g.ghost() {
                return Err(Error::invalid(format!("vertex {v} out of range")));
            }
            if v < n {
                amask ^= 1 << v;
            }
        }
        let (mut z, mut s) = (0.0, 0.0);
        spin_sum(g, |bits, w| {
            z += w;
            // bit set = +1; product is -1 iff an odd number of A are -1
            if (!bits & amask).count_ones() & 1 == 1 {
                s -= w;
            } else {
                s += w;
            }
        });
        Ok(s / z)
    }

    /// `⟨σ_x;σ_y⟩ = ⟨σ_xσ_y⟩ − ⟨σ_x⟩⟨σ_y⟩`.
    pub fn truncated_correlation_exact(&self, g: &GhostGraph, x: usize, y: usize) -> Result<f64> {
        let m = self.spin_moments(g)?;
        if x >= m.n || y >= m.n {
            return Err(Error::invalid("truncated correlation needs lattice vertices"));
        }
        Ok(m.covariance(x, y))
    }

    pub fn spin_moments(&self, g: &GhostGraph) -> Result<SpinMoments> {
        self.check_spins(g)?;
        let n = g.num_sites();
        let mut z = 0.0;
        let mut mean = vec![0.0; n];
        let mut pair = vec![0.0; n * n];
        let mut spins = vec![0.0f64; n];
        spin_sum(g, |bits, w| {
            z += w;
            for (v, s) in spins.iter_mut().enumerate() {
                *s = if bits >> v & 1 == 1 { w } else { -w };
            }
            for u in 0..n {
                mean[u] += spins[u];
                let su = if bits >> u & 1 == 1 { 1.0 } else { -1.0 };
                let row = &mut pair[u * n..(u + 1) * n];
                for (r, s) in row.iter_mut().zip(&spins) {
                    *r += su * s;
                }
            }
        });
        for m in mean.iter_mut() {
            *m /= z;
        }
        for p in pair.iter_mut() {
            *p /= z;
        }
        Ok(SpinMoments { mean, pair, n })
    }

    /// Unnormalized random-cluster weights indexed by edge mask.
    pub fn rc_weights(&self, g: &GhostGraph, bc: &BoundaryCondition) -> Result<Vec<f64>> {
        self.check_edges(g)?;
        let q = quotient_by_boundary(g, bc)?;
        let ne = g.num_edges();
        let open: Vec<f64> = g.edges().iter().map(|e| -(-2.0 * e.coupling).exp_m1()).collect();
        let closed: Vec<f64> = g.edges().iter().map(|e| (-2.0 * e.coupling).exp()).collect();
        let mut out = vec![0.0; 1 << ne];
        let mut parent = vec![0usize; q.num_vertices];
        for (m, slot) in out.iter_mut().enumerate() {
            let mut w = 1.0;
            for e in 0..ne {
                w *= if m >> e & 1 == 1 { open[e] } else { closed[e] };
            }
            if w == 0.0 {
                continue;
            }
            for (v, p) in parent.iter_mut().enumerate() {
                *p = v;
            }
            let mut clusters = q.num_vertices;
            for (e, &(u, v)) in q.edges.iter().enumerate() {
                if m >> e & 1 == 1 {
                    let (ru, rv) = (root(&mut parent, u), root(&mut parent, v));
                    if ru != rv {
                        parent[ru] = rv;
                        clusters -= 1;
                    }
                }
            }
            *slot = w * (clusters as f64).exp2();
        }
        Ok(out)
    }

    /// The random-cluster law `φ^ξ` indexed by edge mask.
    pub fn rc_law(&self, g: &GhostGraph, bc: &BoundaryCondition) -> Result<Vec<f64>> {
        let mut w = self.rc_weights(g, bc)?;
        normalize(&mut w, "random-cluster")?;
        Ok(w)
    }

    pub fn rc_event_probability(
        &self,
        g: &GhostGraph,
        bc: &BoundaryCondition,
        event: impl Fn(&BondConfig) -> bool,
    ) -> Result<f64> {
        let law = self.rc_law(g, bc)?;
        Ok(event_mass(g.num_edges(), &law, event))
    }

    /// Loop O(1) law as `(even subgraph mask, probability)` pairs, in Gray-code
    /// order starting from the empty subgraph.
    pub fn loop_law(&self, g: &GhostGraph) -> Result<Vec<(u64, f64)>> {
        self.check_cycles(g)?;
        let sg = SmallGraph::new(g);
        let tanh: Vec<f64> = sg.coupling.iter().map(|j| j.tanh()).collect();
        let basis = sg.cycle_basis(sg.full_mask());
        let mut out = Vec::with_capacity(1 << basis.len());
        gray_walk(0, &basis, |f| out.push((f, mask_product(f, &tanh))));
        let z: f64 = out.iter().map(|p| p.1).sum();
        for p in out.iter_mut() {
            p.1 /= z;
        }
        Ok(out)
    }

    /// Loop O(1) law as a dense vector over all edge masks.
    pub fn loop_law_dense(&self, g: &GhostGraph) -> Result<Vec<f64>> {
        self.check_edges(g)?;
        let mut dense = vec![0.0; 1 << g.num_edges()];
        for (f, p) in self.loop_law(g)? {
            dense[f as usize] = p;
        }
        Ok(dense)
    }

    pub fn loop_event_probability(
        &self,
        g: &GhostGraph,
        event: impl Fn(&BondConfig) -> bool,
    ) -> Result<f64> {
        let ne = g.num_edges();
        let mut c = BondConfig::closed(ne);
        let mut p = 0.0;
        for (f, w) in self.loop_law(g)? {
            c.set_mask(f);
            if event(&c) {
                p += w;
            }
        }
        Ok(p)
    }

    /// Law of the open-edge trace of the random current with sources `A`,
    /// indexed by edge mask.
    ///
    /// Summing `J^n/n!` over odd `n` gives `sinh J` and over even `n ≥ 2`
    /// gives `cosh J − 1`, so the trace weight is a sum over parity vectors
    /// `p ⊆ τ` with `∂p = A` of `Π_{p} sinh J · Π_{τ∖p} (cosh J − 1)`.
    pub fn current_trace_law(&self, g: &GhostGraph, sources: &[usize]) -> Result<Vec<f64>> {
        self.check_edges(g)?;
        self.check_cycles(g)?;
        let amask = source_mask(g, sources)?;
        let sg = SmallGraph::new(g);
        let full = sg.full_mask();
        let p0 = sg.parity_solution(full, amask).ok_or_else(|| {
            Error::ZeroMeasure(format!("no current with sources {sources:?} exists"))
        })?;
        let sinh: Vec<f64> = sg.coupling.iter().map(|j| j.sinh()).collect();
        let cosh_m1: Vec<f64> = sg
            .coupling
            .iter()
            .map(|j| 2.0 * (0.5 * j).sinh().powi(2))
            .collect();
        let basis = sg.cycle_basis(full);
        let mut w = vec![0.0; 1 << sg.num_edges()];
        gray_walk(p0, &basis, |p| w[p as usize] = mask_product(p, &sinh));
        // each edge outside p is independently absent (weight 1) or carries an
        // even current >= 2 (weight cosh - 1)
        for (e, &c) in cosh_m1.iter().enumerate() {
            let bit = 1usize << e;
            for s in 0..w.len() {
                if s & bit == 0 && w[s] != 0.0 {
                    w[s | bit] += w[s] * c;
                }
            }
        }
        normalize(&mut w, "random current")?;
        Ok(w)
    }

    pub fn current_trace_probability(
        &self,
        g: &GhostGraph,
        sources: &[usize],
        event: impl Fn(&BondConfig) -> bool,
    ) -> Result<f64> {
        let law = self.current_trace_law(g, sources)?;
        Ok(event_mass(g.num_edges(), &law, event))
    }

    /// Law of the union of the traces of independent currents with sources
    /// `A` and `B`.
    pub fn double_current_union_law(
        &self,
        g: &GhostGraph,
        a: &[usize],
        b: &[usize],
    ) -> Result<Vec<f64>> {
        Ok(identities::union_law(
            self.current_trace_law(g, a)?,
            self.current_trace_law(g, b)?,
        ))
    }

    /// `P^{xy,∅}(x ↮ 𝔤 in n+m)`. For `x = y` the first current is sourceless.
    pub fn double_current_disconnection(&self, g: &GhostGraph, x: usize, y: usize) -> Result<f64> {
        let a: Vec<usize> = if x == y { vec![] } else { vec![x, y] };
        let law = self.double_current_union_law(g, &a, &[])?;
        let reach = ghost_reach(g);
        let bit = 1u32 << x;
        Ok(law
            .iter()
            .zip(&reach)
            .filter(|(_, r)| *r & bit == 0)
            .map(|(p, _)| *p)
            .sum())
    }

    pub fn verify_identity(&self, g: &GhostGraph, which: Identity) -> Result<f64> {
        identities::verify(self, g, which)
    }
}

fn root(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn components(g: &GhostGraph) -> usize {
    let mut parent: Vec<usize> = (0..g.num_vertices()).collect();
    let mut c = g.num_vertices();
    for e in g.edges() {
        let (ru, rv) = (root(&mut parent, e.u), root(&mut parent, e.v));
        if ru != rv {
            parent[ru] = rv;
            c -= 1;
        }
    }
    c
}

/// Calls `f(bits, weight)` for every spin configuration, bit `v` set meaning
/// `σ_v = +1`. Weights are scaled by a common constant.
fn spin_sum(g: &GhostGraph, mut f: impl FnMut(u64, f64)) {
    let n = g.num_sites();
    let ghost = g.ghost();
    let shift: f64 = g.edges().iter().map(|e| e.coupling.abs()).sum();
    for bits in 0..1u64 << n {
        let spin = |v: usize| -> f64 {
            if v == ghost || bits >> v & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        };
        let energy: f64 = g
            .edges()
            .iter()
            .map(|e| e.coupling * spin(e.u) * spin(e.v))
            .sum();
        f(bits, (energy - shift).exp());
    }
}

fn source_mask(g: &GhostGraph, sources: &[usize]) -> Result<u64> {
    let mut m = 0u64;
    for &v in sources {
        if v >= g.num_vertices() {
            return Err(Error::invalid(format!("source {v} out of range")));
        }
        m ^= 1 << v;
    }
    if sources.len() % 2 == 1 {
        return Err(Error::invalid(format!(
            "source set must have even size, got {}",
            sources.len()
        )));
    }
    Ok(m)
}

/// Visits `start ⊕ span(basis)` in Gray-code order.
pub(crate) fn gray_walk(start: u64, basis: &[u64], mut visit: impl FnMut(u64)) {
    let mut cur = start;
    visit(cur);
    for k in 1u64..(1u64 << basis.len()) {
        cur ^= basis[k.trailing_zeros() as usize];
        visit(cur);
    }
}

fn mask_product(m: u64, factor: &[f64]) -> f64 {
    let mut w = 1.0;
    let mut rest = m;
    while rest != 0 {
        w *= factor[rest.trailing_zeros() as usize];
        rest &= rest - 1;
    }
    w
}

fn normalize(w: &mut [f64], what: &str) -> Result<()> {
    let z: f64 = w.iter().sum();
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::ZeroMeasure(format!("{what} partition function is {z}")));
    }
    for x in w.iter_mut() {
        *x /= z;
    }
    Ok(())
}

fn event_mass(ne: usize, law: &[f64], event: impl Fn(&BondConfig) -> bool) -> f64 {
    let mut c = BondConfig::closed(ne);
    let mut p = 0.0;
    for (m, &w) in law.iter().enumerate() {
        if w != 0.0 {
            c.set_mask(m as u64);
            if event(&c) {
                p += w;
            }
        }
    }
    p
}

/// For every edge mask, the vertices connected to the ghost, as a bitmask.
pub(crate) fn ghost_reach(g: &GhostGraph) -> Vec<u32> {
    let sg = SmallGraph::new(g);
    let mut labels = vec![0u8; sg.n];
    let ghost = sg.ghost;
    (0..1u64 << sg.num_edges())
        .map(|m| {
            sg.components(m, &mut labels);
            let lg = labels[ghost];
            labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == lg)
                .fold(0u32, |acc, (v, _)| acc | 1 << v)
        })
        .collect()
}

/// Total-variation distance between two laws on the same index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Rect, BETA_C};
    use small::low_bits;

    fn pair(h: f64) -> GhostGraph {
        GhostGraph::from_sites(1.0, h, &[(0, 0), (1, 0)]).unwrap()
    }

    fn square(h: f64) -> GhostGraph {
        GhostGraph::build_domain_graph(Rect::closed(0.0, 1.0, 0.0, 1.0), 1.0, h).unwrap()
    }

    #[test]
    fn two_point_on_single_edge_is_tanh() {
        let o = ExactOracle::new();
        let c = o.ising_correlation(&pair(0.0), &[0, 1]).unwrap();
        assert!((c - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((c - BETA_C.tanh()).abs() < 1e-15);
        assert_eq!(o.ising_correlation(&pair(0.0), &[]).unwrap(), 1.0);
    }

    #[test]
    fn odd_moments_vanish_at_zero_field() {
        let o = ExactOracle::new();
        let g = square(0.0);
        for v in 0..4 {
            assert!(o.ising_correlation(&g, &[v]).unwrap().abs() < 1e-15);
        }
        let m = o.spin_moments(&g).unwrap();
        assert!((m.covariance(0, 3) - m.two_point(0, 3)).abs() < 1e-15);
    }

    #[test]
    fn single_site_magnetization_with_ghost() {
        // σ in {±1}, weight e^{Jσ}: mean tanh J, and the ghost is +1
        let o = ExactOracle::new();
        let g = GhostGraph::from_sites(1.0, 0.3, &[(0, 0)]).unwrap();
        let m = o.ising_correlation(&g, &[0]).unwrap();
        assert!((m - 0.3f64.tanh()).abs() < 1e-15);
        assert!((o.ising_correlation(&g, &[0, 1]).unwrap() - m).abs() < 1e-15);
        let c = o.truncated_correlation_exact(&g, 0, 0).unwrap();
        assert!((c - (1.0 - m * m)).abs() < 1e-15);
    }

    #[test]
    fn rc_single_edge_open_probability_is_tanh() {
        let o = ExactOracle::new();
        let g = pair(0.0);
        let e = (0..g.num_edges()).find(|&e| !g.is_external(e)).unwrap();
        let p = o
            .rc_event_probability(&g, &BoundaryCondition::Free, |c| c.get(e))
            .unwrap();
        assert!((p - BETA_C.tanh()).abs() < 1e-15);
        // J = 0 external edges are never open
        for v in 0..2 {
            let x = g.external_edge(v);
            let q = o
                .rc_event_probability(&g, &BoundaryCondition::Free, |c| c.get(x))
                .unwrap();
            assert_eq!(q, 0.0);
        }
        let all = o
            .rc_event_probability(&g, &BoundaryCondition::Wired, |_| true)
            .unwrap();
        assert!((all - 1.0).abs() < 1e-15);
    }

    #[test]
    fn loop_triangle_closed_form() {
        // two sites with field: edges {xy, x𝔤, y𝔤} form a triangle
        let o = ExactOracle::new();
        let g = pair(0.7);
        let t: f64 = g.edges().iter().map(|e| e.coupling.tanh()).product();
        let law = o.loop_law(&g).unwrap();
        assert_eq!(law.len(), 2);
        let full = low_bits(3);
        let p = o.loop_event_probability(&g, |c| c.as_mask() == Some(full)).unwrap();
        assert!((p - t / (1.0 + t)).abs() < 1e-15);
    }

    #[test]
    fn loop_law_on_tree_is_empty_subgraph() {
        let o = ExactOracle::new();
        let g = GhostGraph::from_sites(1.0, 0.0, &[(0, 0), (1, 0), (2, 0), (2, 1)]).unwrap();
        let p = o.loop_event_probability(&g, |c| c.count_open() == 0).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn current_trace_simple_cases() {
        let o = ExactOracle::new();
        // tree with h = 0: the only sourceless parity vector is empty, but each
        // edge may still carry an even current, so P(all closed) = Π 1/cosh J
        let tree = GhostGraph::from_sites(1.0, 0.0, &[(0, 0), (1, 0), (1, 1)]).unwrap();
        let p = o
            .current_trace_probability(&tree, &[], |c| c.count_open() == 0)
            .unwrap();
        assert!((p - BETA_C.cosh().powi(-2)).abs() < 1e-15);
        let odd = o
            .current_trace_probability(&tree, &[], |c| c.count_open() % 2 == 1)
            .unwrap();
        let one = 2.0 * (BETA_C.cosh() - 1.0) / BETA_C.cosh().powi(2);
        assert!((odd - one).abs() < 1e-15);
        // sources at both ends of the only edge force it open
        let g = pair(0.0);
        let e = (0..g.num_edges()).find(|&e| !g.is_external(e)).unwrap();
        let p = o.current_trace_probability(&g, &[0, 1], |c| c.get(e)).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(matches!(
            o.current_trace_law(&g, &[0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn disconnected_sources_are_zero_measure() {
        let o = ExactOracle::new();
        let g = GhostGraph::from_sites(1.0, 0.0, &[(0, 0), (5, 5)]).unwrap();
        assert!(matches!(
            o.double_current_disconnection(&g, 0, 1),
            Err(Error::ZeroMeasure(_))
        ));
    }

    #[test]
    fn disconnection_is_certain_without_field() {
        let o = ExactOracle::new();
        let g = square(0.0);
        let p = o.double_current_disconnection(&g, 0, 3).unwrap();
        assert!((p - 1.0).abs() < 1e-13);
    }

    #[test]
    fn caps_are_enforced() {
        let o = ExactOracle::with_caps(Caps {
            spins: 3,
            edges: 5,
            cycles: 1,
        });
        let g = square(0.2);
        assert!(matches!(o.spin_moments(&g), Err(Error::Capacity { .. })));
        assert!(matches!(
            o.rc_law(&g, &BoundaryCondition::Free),
            Err(Error::Capacity { .. })
        ));
        assert!(matches!(o.loop_law(&g), Err(Error::Capacity { .. })));
    }

    #[test]
    fn wired_dominates_free_on_increasing_events() {
        let o = ExactOracle::new();
        let g = GhostGraph::from_sites(1.0, 0.1, &[(0, 0), (1, 0), (0, 1), (1, 1), (2, 0)]).unwrap();
        let free = o.rc_law(&g, &BoundaryCondition::Free).unwrap();
        let wired = o.rc_law(&g, &BoundaryCondition::Wired).unwrap();
        // increasing events of the form "all edges of m open"
        let mut fz = free.clone();
        let mut wz = wired.clone();
        small::superset_sum(&mut fz);
        small::superset_sum(&mut wz);
        for (f, w) in fz.iter().zip(&wz) {
            assert!(*w >= f - 1e-12, "{w} {f}");
        }
    }
}
