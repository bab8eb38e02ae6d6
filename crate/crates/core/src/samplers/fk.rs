use rand::Rng;

use super::spin::heatbath_sweep_pinned;
use super::ueg::{sech_augment_into, UegSampler};
use super::{ChainState, SimRng};
use crate::config::{BondConfig, SpinConfig};
use crate::dsu::UnionFind;
use crate::error::{Error, Result};
use crate::lattice::{BoundaryCondition, GhostGraph};

/// Edwards–Sokal bond draw: an edge whose endpoints agree (ghost `+1`) is
/// opened with probability `1 − e^{−2J}`, a disagreeing edge is closed.
pub fn bonds_given_spins(spins: &SpinConfig, g: &GhostGraph, rng: &mut SimRng) -> BondConfig {
    let mut out = BondConfig::closed(g.num_edges());
    let p = open_probabilities(g);
    bonds_into(spins, g, &p, &mut out, rng);
    out
}

fn open_probabilities(g: &GhostGraph) -> Vec<f64> {
    g.edges()
        .iter()
        .map(|e| -(-2.0 * e.coupling).exp_m1())
        .collect()
}

fn bonds_into(
    spins: &SpinConfig,
    g: &GhostGraph,
    p: &[f64],
    out: &mut BondConfig,
    rng: &mut SimRng,
) {
    out.clear();
    for (e, edge) in g.edges().iter().enumerate() {
        if p[e] > 0.0
            && spins.get_or_ghost(edge.u) == spins.get_or_ghost(edge.v)
            && rng.random::<f64>() < p[e]
        {
            out.set(e, true);
        }
    }
}

/// `10 ×` the longer side of the graph's site set, in lattice units.
pub fn default_burn_in(g: &GhostGraph) -> u64 {
    let sites = g.sites();
    if sites.is_empty() {
        return 0;
    }
    let (mut lo_i, mut hi_i, mut lo_j, mut hi_j) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for &(i, j) in sites {
        lo_i = lo_i.min(i);
        hi_i = hi_i.max(i);
        lo_j = lo_j.min(j);
        hi_j = hi_j.max(j);
    }
    10 * ((hi_i - lo_i).max(hi_j - lo_j) + 1) as u64
}

/// Composite chain targeting the joint Edwards–Sokal measure under FREE or
/// WIRED boundary conditions.
///
/// One sweep is a heat-bath spin sweep, a bond draw given the spins, and a
/// recolouring of the spins given the bonds (every cluster not attached to
/// the ghost or to a pinned vertex gets a fair sign). WIRED pins the spins of
/// `∂G` to `+1`.
#[derive(Clone, Debug)]
pub struct FkChain<'g> {
    g: &'g GhostGraph,
    pinned: Vec<bool>,
    state: ChainState,
    bonds: BondConfig,
    open_p: Vec<f64>,
    uf: UnionFind,
    colour: Vec<i8>,
}

impl<'g> FkChain<'g> {
    pub fn new(g: &'g GhostGraph, bc: &BoundaryCondition) -> Result<Self> {
        let mut pinned = vec![false; g.num_sites()];
        match bc {
            BoundaryCondition::Free => {}
            BoundaryCondition::Wired => {
                for v in g.boundary_sites() {
                    pinned[v] = true;
                }
            }
            BoundaryCondition::Custom(_) => {
                return Err(Error::invalid(
                    "only FREE and WIRED boundary conditions can be sampled",
                ))
            }
        }
        Ok(FkChain {
            g,
            pinned,
            state: ChainState::all_plus(g.num_sites()),
            bonds: BondConfig::closed(g.num_edges()),
            open_p: open_probabilities(g),
            uf: UnionFind::new(g.num_vertices()),
            colour: vec![0; g.num_vertices()],
        })
    }

    pub fn graph(&self) -> &'g GhostGraph {
        self.g
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn spins(&self) -> &SpinConfig {
        &self.state.spins
    }

    /// Bonds drawn in the latest sweep (all closed before the first).
    pub fn bonds(&self) -> &BondConfig {
        &self.bonds
    }

    pub fn sweep(&mut self, rng: &mut SimRng) {
        let pins = if self.pinned.iter().any(|&p| p) {
            Some(self.pinned.as_slice())
        } else {
            None
        };
        heatbath_sweep_pinned(&mut self.state, self.g, pins, rng);
        bonds_into(&self.state.spins, self.g, &self.open_p, &mut self.bonds, rng);
        self.recolour(rng);
    }

    pub fn run(&mut self, sweeps: u64, rng: &mut SimRng) {
        for _ in 0..sweeps {
            self.sweep(rng);
        }
    }

    fn recolour(&mut self, rng: &mut SimRng) {
        let g = self.g;
        self.uf.reset();
        for e in self.bonds.iter_open() {
            let edge = g.edge(e);
            self.uf.union(edge.u, edge.v);
        }
        self.colour.fill(0);
        let ghost_root = self.uf.find(g.ghost());
        self.colour[ghost_root] = 1;
        for v in 0..g.num_sites() {
            if self.pinned[v] {
                let r = self.uf.find(v);
                self.colour[r] = 1;
            }
        }
        for v in 0..g.num_sites() {
            let r = self.uf.find(v);
            if self.colour[r] == 0 {
                self.colour[r] = if rng.random::<bool>() { 1 } else { -1 };
            }
            self.state.spins.0[v] = self.colour[r];
        }
    }
}

/// Runs the composite chain for `sweeps` sweeps from all-plus and returns the
/// final bond configuration.
pub fn sample_fk(
    g: &GhostGraph,
    bc: &BoundaryCondition,
    sweeps: u64,
    rng: &mut SimRng,
) -> Result<BondConfig> {
    check_sweeps(g, sweeps)?;
    let mut chain = FkChain::new(g, bc)?;
    chain.run(sweeps, rng);
    Ok(chain.bonds.clone())
}

fn check_sweeps(g: &GhostGraph, sweeps: u64) -> Result<()> {
    let burn = default_burn_in(g);
    if sweeps < burn.max(1) {
        return Err(Error::invalid(format!(
            "{sweeps} sweeps is below the burn-in of {burn}"
        )));
    }
    Ok(())
}

/// One draw of the coupling chain FK → uniform even subgraph → sech
/// augmentation. `loops ⊆ fk` and `loops ⊆ trace` always.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledTrace {
    pub fk: BondConfig,
    pub loops: BondConfig,
    pub trace: BondConfig,
}

pub fn sample_current_trace(g: &GhostGraph, sweeps: u64, rng: &mut SimRng) -> Result<CoupledTrace> {
    check_sweeps(g, sweeps)?;
    let mut chain = TraceChain::new(g)?;
    chain.fk.run(sweeps - 1, rng);
    chain.sweep(rng);
    Ok(chain.current().clone())
}

/// A FREE [`FkChain`] that also pushes every bond sample through the loop
/// and current-trace stages.
#[derive(Clone, Debug)]
pub struct TraceChain<'g> {
    fk: FkChain<'g>,
    ueg: UegSampler,
    sech_p: Vec<f64>,
    out: CoupledTrace,
}

impl<'g> TraceChain<'g> {
    pub fn new(g: &'g GhostGraph) -> Result<Self> {
        let ne = g.num_edges();
        Ok(TraceChain {
            fk: FkChain::new(g, &BoundaryCondition::Free)?,
            ueg: UegSampler::new(g),
            sech_p: g.edges().iter().map(|e| 1.0 - 1.0 / e.coupling.cosh()).collect(),
            out: CoupledTrace {
                fk: BondConfig::closed(ne),
                loops: BondConfig::closed(ne),
                trace: BondConfig::closed(ne),
            },
        })
    }

    pub fn fk_chain(&self) -> &FkChain<'g> {
        &self.fk
    }

    /// Advances the bond chain without drawing loops or traces.
    pub fn burn(&mut self, sweeps: u64, rng: &mut SimRng) {
        self.fk.run(sweeps, rng);
    }

    pub fn sweep(&mut self, rng: &mut SimRng) -> &CoupledTrace {
        self.fk.sweep(rng);
        let g = self.fk.g;
        self.out.fk.clone_from(&self.fk.bonds);
        self.ueg.sample_into(g, &self.out.fk, rng, &mut self.out.loops);
        sech_augment_into(&self.sech_p, &self.out.loops, rng, &mut self.out.trace);
        &self.out
    }

    pub fn current(&self) -> &CoupledTrace {
        &self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::RngStream;

    #[test]
    fn disagreeing_edges_stay_closed() {
        let g = GhostGraph::from_sites(1.0, 0.5, &[(0, 0), (1, 0)]).unwrap();
        let s = SpinConfig(vec![1, -1]);
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..200 {
            let b = bonds_given_spins(&s, &g, &mut rng);
            for e in b.iter_open() {
                let edge = g.edge(e);
                assert_eq!(s.get_or_ghost(edge.u), s.get_or_ghost(edge.v));
            }
        }
    }

    #[test]
    fn zero_coupling_never_opens() {
        let g = GhostGraph::from_sites(1.0, 0.0, &[(0, 0), (1, 0)]).unwrap();
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..100 {
            let b = bonds_given_spins(&SpinConfig::all_plus(2), &g, &mut rng);
            assert!(!b.get(g.external_edge(0)) && !b.get(g.external_edge(1)));
        }
    }

    #[test]
    fn custom_boundary_rejected_and_short_runs_rejected() {
        let g = GhostGraph::from_sites(1.0, 0.0, &[(0, 0), (1, 0)]).unwrap();
        let bc = BoundaryCondition::Custom(vec![vec![0, 1, 2]]);
        assert!(FkChain::new(&g, &bc).is_err());
        let mut rng = RngStream::new(1, 0).rng();
        assert!(sample_fk(&g, &BoundaryCondition::Free, 1, &mut rng).is_err());
    }

    #[test]
    fn wired_pins_boundary() {
        let g = GhostGraph::from_sites(
            1.0,
            0.0,
            &[(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2), (2, 2)],
        )
        .unwrap();
        let mut chain = FkChain::new(&g, &BoundaryCondition::Wired).unwrap();
        let mut rng = RngStream::new(5, 0).rng();
        chain.run(50, &mut rng);
        for v in g.boundary_sites() {
            assert_eq!(chain.spins().get(v), 1);
        }
    }

    #[test]
    fn coupled_trace_contains_loops() {
        let g = GhostGraph::from_sites(1.0, 0.3, &[(0, 0), (1, 0), (0, 1), (1, 1)]).unwrap();
        let mut rng = RngStream::new(9, 0).rng();
        let mut chain = TraceChain::new(&g).unwrap();
        for _ in 0..500 {
            let s = chain.sweep(&mut rng);
            assert!(s.loops.is_subset_of(&s.fk));
            assert!(s.loops.is_subset_of(&s.trace));
        }
    }
}
