//! The exact identities and couplings relating the four measures.

use serde::{Deserialize, Serialize};

use super::small::{superset_sum, SmallGraph};
use super::{ghost_reach, total_variation, ExactOracle};
use crate::error::{Error, Result};
use crate::lattice::{BoundaryCondition, GhostGraph};

/// Field step of the grid on `[0, 1]` used by [`Identity::GhsMonotone`].
pub const GHS_FIELD_STEP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Identity {
    /// `⟨σ_xσ_y⟩ = φ⁰(x ↔ y)`, ghost included.
    Es,
    /// `⟨σ_x;σ_y⟩ = ⟨σ_xσ_y⟩ · P^{xy,∅}(x ↮ 𝔤)`.
    Switching,
    /// Uniform even subgraph of `φ⁰` is loop O(1).
    Ueg,
    /// Loop O(1) plus independent `1 − sech J` additions is the sourceless trace.
    Sech,
    /// `⟨σ_x;σ_y⟩` is non-increasing in the field.
    GhsMonotone,
    /// `p/2 ≤ φ^ξ(ω_e = 1 | rest) ≤ p` on external edges.
    FiniteEnergy,
}

impl Identity {
    pub const ALL: [Identity; 6] = [
        Identity::Es,
        Identity::Switching,
        Identity::Ueg,
        Identity::Sech,
        Identity::GhsMonotone,
        Identity::FiniteEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::Es => "ES",
            Identity::Switching => "SWITCHING",
            Identity::Ueg => "UEG",
            Identity::Sech => "SECH",
            Identity::GhsMonotone => "GHS-MONOTONE",
            Identity::FiniteEnergy => "FINITE-ENERGY",
        }
    }

    pub fn parse(s: &str) -> Option<Identity> {
        Identity::ALL
            .into_iter()
            .find(|i| i.name().eq_ignore_ascii_case(s))
    }
}

/// One row of a verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub graph_hash: String,
    pub identity: Identity,
    pub deviation: f64,
}

pub(super) fn verify(o: &ExactOracle, g: &GhostGraph, which: Identity) -> Result<f64> {
    match which {
        Identity::Es => es(o, g),
        Identity::Switching => switching(o, g),
        Identity::Ueg => ueg(o, g),
        Identity::Sech => sech(o, g),
        Identity::GhsMonotone => ghs(o, g),
        Identity::FiniteEnergy => finite_energy(o, g),
    }
}

fn es(o: &ExactOracle, g: &GhostGraph) -> Result<f64> {
    let m = o.spin_moments(g)?;
    let law = o.rc_law(g, &BoundaryCondition::Free)?;
    let sg = SmallGraph::new(g);
    let nv = sg.n;
    let ns = g.num_sites();
    let mut conn = vec![0.0; nv * nv];
    let mut labels = vec![0u8; nv];
    for (mask, &p) in law.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        sg.components(mask as u64, &mut labels);
        for x in 0..nv {
            for y in x + 1..nv {
                if labels[x] == labels[y] {
                    conn[x * nv + y] += p;
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for x in 0..nv {
        for y in x + 1..nv {
            let spin = if y == g.ghost() {
                m.mean[x]
            } else {
                debug_assert!(y < ns);
                m.two_point(x, y)
            };
            worst = worst.max((spin - conn[x * nv + y]).abs());
        }
    }
    Ok(worst)
}

fn switching(o: &ExactOracle, g: &GhostGraph) -> Result<f64> {
    let m = o.spin_moments(g)?;
    let ns = g.num_sites();
    let reach = ghost_reach(g);
    let sourceless = o.current_trace_law(g, &[])?;
    let mut worst: f64 = 0.0;
    for x in 0..ns {
        for y in x..ns {
            let a: Vec<usize> = if x == y { vec![] } else { vec![x, y] };
            let first = if x == y {
                sourceless.clone()
            } else {
                o.current_trace_law(g, &a)?
            };
            let union = union_law(first, sourceless.clone());
            let bit = 1u32 << x;
            let dis: f64 = union
                .iter()
                .zip(&reach)
                .filter(|(_, r)| *r & bit == 0)
                .map(|(p, _)| *p)
                .sum();
            worst = worst.max((m.covariance(x, y) - m.two_point(x, y) * dis).abs());
        }
    }
    Ok(worst)
}

pub(super) fn union_law(mut f: Vec<f64>, mut h: Vec<f64>) -> Vec<f64> {
    super::small::subset_sum(&mut f);
    super::small::subset_sum(&mut h);
    for (x, y) in f.iter_mut().zip(&h) {
        *x *= y;
    }
    super::small::subset_mobius(&mut f);
    f
}

fn ueg(o: &ExactOracle, g: &GhostGraph) -> Result<f64> {
    let law = o.rc_law(g, &BoundaryCondition::Free)?;
    let loops = o.loop_law_dense(g)?;
    let sg = SmallGraph::new(g);
    let mut labels = vec![0u8; sg.n];
    // φ⁰(ω) 2^{-cyclomatic(ω)} pushed down to every even F ⊆ ω
    let mut f: Vec<f64> = law
        .iter()
        .enumerate()
        .map(|(mask, &p)| {
            if p == 0.0 {
                return 0.0;
            }
            let kappa = sg.components(mask as u64, &mut labels);
            let cyc = (mask as u64).count_ones() as i32 - sg.n as i32 + kappa as i32;
            p * (-cyc as f64).exp2()
        })
        .collect();
    superset_sum(&mut f);
    for (mask, x) in f.iter_mut().enumerate() {
        if sg.odd_vertices(mask as u64) != 0 {
            *x = 0.0;
        }
    }
    Ok(total_variation(&f, &loops))
}

fn sech(o: &ExactOracle, g: &GhostGraph) -> Result<f64> {
    let mut f = o.loop_law_dense(g)?;
    let trace = o.current_trace_law(g, &[])?;
    for (e, edge) in g.edges().iter().enumerate() {
        let add = 1.0 - 1.0 / edge.coupling.cosh();
        let bit = 1usize << e;
        for s in 0..f.len() {
            if s & bit == 0 {
                let moved = f[s] * add;
                f[s] -= moved;
                f[s | bit] += moved;
            }
        }
    }
    Ok(total_variation(&f, &trace))
}

fn ghs(o: &ExactOracle, g: &GhostGraph) -> Result<f64> {
    let steps = (1.0 / GHS_FIELD_STEP).round() as usize;
    let ns = g.num_sites();
    let mut prev: Option<Vec<f64>> = None;
    let mut worst: f64 = 0.0;
    for k in 0..=steps {
        let gh = g.with_field(k as f64 * GHS_FIELD_STEP)?;
        let m = o.spin_moments(&gh)?;
        let cov: Vec<f64> = (0..ns)
            .flat_map(|x| (0..ns).map(move |y| (x, y)))
            .map(|(x, y)| m.covariance(x, y))
            .collect();
        if let Some(p) = &prev {
            for (a, b) in p.iter().zip(&cov) {
                worst = worst.max((b - a) / GHS_FIELD_STEP);
            }
        }
        prev = Some(cov);
    }
    Ok(worst)
}

fn finite_energy(o: &ExactOracle, g: &GhostGraph) -> Result<f64> {
    if g.num_sites() == 0 {
        return Err(Error::invalid("graph has no lattice vertices"));
    }
    let p = -(-2.0 * g.nominal_external_coupling()).exp_m1();
    let mut worst: f64 = 0.0;
    for bc in [BoundaryCondition::Free, BoundaryCondition::Wired] {
        let w = o.rc_weights(g, &bc)?;
        for v in 0..g.num_sites() {
            let bit = 1usize << g.external_edge(v);
            for s in 0..w.len() {
                if s & bit != 0 {
                    continue;
                }
                let (w0, w1) = (w[s], w[s | bit]);
                if w0 + w1 <= 0.0 {
                    continue;
                }
                let cond = w1 / (w0 + w1);
                worst = worst.max(p / 2.0 - cond).max(cond - p);
            }
        }
    }
    Ok(worst)
}
