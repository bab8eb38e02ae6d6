use rand::Rng;

use super::{ChainState, SimRng};
use crate::config::SpinConfig;
use crate::error::{Error, Result};
use crate::lattice::GhostGraph;

/// Heat-bath probability `P(σ_x = +1 | rest)`; the ghost acts as a fixed `+1`
/// neighbour through the external coupling.
pub fn heatbath_probability(g: &GhostGraph, spins: &SpinConfig, x: usize) -> f64 {
    let mut field = g.edge(g.external_edge(x)).coupling;
    for &(y, e) in g.internal_neighbors(x) {
        field += g.edge(e as usize).coupling * spins.get(y as usize) as f64;
    }
    1.0 / (1.0 + (-2.0 * field).exp())
}

/// One sweep of single-site heat-bath updates in vertex order.
pub fn spin_heatbath_sweep(state: &mut ChainState, g: &GhostGraph, rng: &mut SimRng) {
    heatbath_sweep_pinned(state, g, None, rng);
}

/// Heat-bath sweep skipping the vertices flagged in `pinned`.
pub(crate) fn heatbath_sweep_pinned(
    state: &mut ChainState,
    g: &GhostGraph,
    pinned: Option<&[bool]>,
    rng: &mut SimRng,
) {
    for x in 0..g.num_sites() {
        if pinned.is_some_and(|p| p[x]) {
            continue;
        }
        let p = heatbath_probability(g, &state.spins, x);
        let s = if rng.random::<f64>() < p { 1 } else { -1 };
        if s != state.spins.0[x] {
            state.flips += 1;
            state.spins.0[x] = s;
        }
        state.updates += 1;
    }
    state.sweeps += 1;
}

/// Largest violation of `μ(σ)P(σ→σ') = μ(σ')P(σ'→σ)` over all single-site
/// heat-bath transitions, with `μ` normalized by direct enumeration.
pub fn heatbath_detailed_balance_deviation(g: &GhostGraph) -> Result<f64> {
    let n = g.num_sites();
    if n > 16 {
        return Err(Error::Capacity {
            what: "lattice vertices",
            size: n,
            cap: 16,
        });
    }
    let energy = |s: &SpinConfig| -> f64 {
        g.edges()
            .iter()
            .map(|e| e.coupling * (s.get_or_ghost(e.u) * s.get_or_ghost(e.v)) as f64)
            .sum()
    };
    let states: Vec<SpinConfig> = (0..1u64 << n).map(|b| SpinConfig::from_bits(n, b)).collect();
    let weights: Vec<f64> = states.iter().map(|s| energy(s).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut worst: f64 = 0.0;
    for (b, s) in states.iter().enumerate() {
        for x in 0..n {
            let b2 = b ^ (1 << x);
            let t = &states[b2];
            let p_plus = heatbath_probability(g, s, x);
            let forward = if t.get(x) == 1 { p_plus } else { 1.0 - p_plus };
            let q_plus = heatbath_probability(g, t, x);
            let backward = if s.get(x) == 1 { q_plus } else { 1.0 - q_plus };
            let lhs = weights[b] / z * forward;
            let rhs = weights[b2] / z * backward;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::RngStream;

    #[test]
    fn isolated_vertex_is_fair_without_field() {
        let g = GhostGraph::from_sites(1.0, 0.0, &[(0, 0)]).unwrap();
        let p = heatbath_probability(&g, &SpinConfig::all_plus(1), 0);
        assert_eq!(p, 0.5);
    }

    #[test]
    fn strong_field_forces_plus() {
        let g = GhostGraph::from_sites(1.0, 50.0, &[(0, 0), (1, 0)]).unwrap();
        let s = SpinConfig(vec![-1, -1]);
        assert!(heatbath_probability(&g, &s, 0) > 1.0 - 1e-12);
    }

    #[test]
    fn detailed_balance_on_three_vertices() {
        let g = GhostGraph::from_sites(1.0, 0.3, &[(0, 0), (1, 0), (1, 1)]).unwrap();
        assert!(heatbath_detailed_balance_deviation(&g).unwrap() <= 1e-12);
    }

    #[test]
    fn sweep_counts() {
        let g = GhostGraph::from_sites(1.0, 0.0, &[(0, 0), (1, 0), (2, 0)]).unwrap();
        let mut st = ChainState::all_plus(3);
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..10 {
            spin_heatbath_sweep(&mut st, &g, &mut rng);
        }
        assert_eq!(st.sweeps, 10);
        assert_eq!(st.updates, 30);
        assert!(st.flips > 0 && st.flips <= 30);
    }
}
