//! Mask-level view of a small ghost graph used by the enumerations.

use crate::lattice::GhostGraph;

/// Edge sets and vertex sets of a small graph as `u64` bitmasks.
#[derive(Clone, Debug)]
pub(crate) struct SmallGraph {
    pub n: usize,
    pub ghost: usize,
    pub ends: Vec<(usize, usize)>,
    pub coupling: Vec<f64>,
    /// Edges incident to each vertex.
    pub incident: Vec<u64>,
}

impl SmallGraph {
    pub fn new(g: &GhostGraph) -> Self {
        let n = g.num_vertices();
        assert!(n <= 64 && g.num_edges() <= 64);
        let ends: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        let coupling = g.edges().iter().map(|e| e.coupling).collect();
        let mut incident = vec![0u64; n];
        for (k, &(u, v)) in ends.iter().enumerate() {
            incident[u] |= 1 << k;
            incident[v] |= 1 << k;
        }
        SmallGraph {
            n,
            ghost: g.ghost(),
            ends,
            coupling,
            incident,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.ends.len()
    }

    pub fn full_mask(&self) -> u64 {
        low_bits(self.num_edges())
    }

    /// Vertices of odd degree in the edge set `m`, as a vertex bitmask.
    pub fn odd_vertices(&self, m: u64) -> u64 {
        let mut out = 0u64;
        for (v, &inc) in self.incident.iter().enumerate() {
            if (inc & m).count_ones() & 1 == 1 {
                out |= 1 << v;
            }
        }
        out
    }

    /// Connected-component labels of `(V̄, m)`; label = smallest vertex in component.
    pub fn components(&self, m: u64, labels: &mut [u8]) -> usize {
        let mut parent = [0u8; 64];
        for (v, p) in parent.iter_mut().enumerate().take(self.n) {
            *p = v as u8;
        }
        fn find(parent: &mut [u8; 64], mut x: usize) -> usize {
            while parent[x] as usize != x {
                parent[x] = parent[parent[x] as usize];
                x = parent[x] as usize;
            }
            x
        }
        let mut comps = self.n;
        let mut rest = m;
        while rest != 0 {
            let e = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let (u, v) = self.ends[e];
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                // keep the smaller index as root so labels are canonical
                let (lo, hi) = if ru < rv { (ru, rv) } else { (rv, ru) };
                parent[hi] = lo as u8;
                comps -= 1;
            }
        }
        for (v, l) in labels.iter_mut().enumerate().take(self.n) {
            *l = find(&mut parent, v) as u8;
        }
        comps
    }

    /// Breadth-first spanning forest of `(V̄, m)` rooted at the smallest
    /// vertex of each component.
    pub fn forest(&self, m: u64) -> Forest {
        let mut parent_edge = vec![usize::MAX; self.n];
        let mut seen = vec![false; self.n];
        let mut order = Vec::with_capacity(self.n);
        let mut tree = 0u64;
        for root in 0..self.n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let start = order.len();
            order.push(root);
            let mut head = start;
            while head < order.len() {
                let u = order[head];
                head += 1;
                let mut es = self.incident[u] & m;
                while es != 0 {
                    let e = es.trailing_zeros() as usize;
                    es &= es - 1;
                    let (a, b) = self.ends[e];
                    let w = if a == u { b } else { a };
                    if !seen[w] {
                        seen[w] = true;
                        parent_edge[w] = e;
                        tree |= 1 << e;
                        order.push(w);
                    }
                }
            }
        }
        Forest {
            parent_edge,
            order,
            tree,
        }
    }

    /// Fundamental cycles of `m` with respect to its BFS forest, one per
    /// non-forest edge, in increasing edge order.
    pub fn cycle_basis(&self, m: u64) -> Vec<u64> {
        let f = self.forest(m);
        let mut depth = vec![0usize; self.n];
        for &v in &f.order {
            let pe = f.parent_edge[v];
            if pe != usize::MAX {
                let (a, b) = self.ends[pe];
                let p = if a == v { b } else { a };
                depth[v] = depth[p] + 1;
            }
        }
        let parent = |v: usize| -> (usize, usize) {
            let pe = f.parent_edge[v];
            let (a, b) = self.ends[pe];
            (if a == v { b } else { a }, pe)
        };
        let mut out = Vec::new();
        let mut rest = m & !f.tree;
        while rest != 0 {
            let e = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let (mut u, mut v) = self.ends[e];
            let mut cyc = 1u64 << e;
            while depth[u] > depth[v] {
                let (p, pe) = parent(u);
                cyc ^= 1 << pe;
                u = p;
            }
            while depth[v] > depth[u] {
                let (p, pe) = parent(v);
                cyc ^= 1 << pe;
                v = p;
            }
            while u != v {
                let (pu, eu) = parent(u);
                let (pv, ev) = parent(v);
                cyc ^= (1 << eu) ^ (1 << ev);
                u = pu;
                v = pv;
            }
            out.push(cyc);
        }
        out
    }

    /// Some `p ⊆ m` whose odd vertices are exactly `sources`, if one exists.
    pub fn parity_solution(&self, m: u64, sources: u64) -> Option<u64> {
        let f = self.forest(m);
        let mut demand = sources;
        let mut p = 0u64;
        for &v in f.order.iter().rev() {
            let pe = f.parent_edge[v];
            if demand >> v & 1 == 1 {
                if pe == usize::MAX {
                    return None;
                }
                let (a, b) = self.ends[pe];
                let parent = if a == v { b } else { a };
                p |= 1 << pe;
                demand ^= (1 << v) | (1 << parent);
            }
        }
        debug_assert_eq!(demand, 0);
        Some(p)
    }
}

pub(crate) struct Forest {
    pub parent_edge: Vec<usize>,
    pub order: Vec<usize>,
    pub tree: u64,
}

pub(crate) fn low_bits(k: usize) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// In-place subset-sum (zeta) transform: `f[s] <- Σ_{t ⊆ s} f[t]`.
pub(crate) fn subset_sum(f: &mut [f64]) {
    let n = f.len();
    let mut bit = 1;
    while bit < n {
        for s in 0..n {
            if s & bit != 0 {
                f[s] += f[s ^ bit];
            }
        }
        bit <<= 1;
    }
}

/// Inverse of [`subset_sum`].
pub(crate) fn subset_mobius(f: &mut [f64]) {
    let n = f.len();
    let mut bit = 1;
    while bit < n {
        for s in 0..n {
            if s & bit != 0 {
                f[s] -= f[s ^ bit];
            }
        }
        bit <<= 1;
    }
}

/// In-place superset-sum transform: `f[s] <- Σ_{t ⊇ s} f[t]`.
pub(crate) fn superset_sum(f: &mut [f64]) {
    let n = f.len();
    let mut bit = 1;
    while bit < n {
        for s in 0..n {
            if s & bit == 0 {
                f[s] += f[s | bit];
            }
        }
        bit <<= 1;
    }
}
