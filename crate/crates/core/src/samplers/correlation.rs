use rayon::prelude::*;

use super::fk::{default_burn_in, FkChain};
use super::RngStream;
use crate::error::{Error, Result};
use crate::lattice::{BoundaryCondition, GhostGraph};
use crate::stats::Estimate;

/// Estimates `⟨σ_x;σ_y⟩` from `chains` independent FREE composite chains of
/// `sweeps` measured sweeps each (after the default burn-in).
///
/// The value pools all samples; the standard error treats each chain's own
/// covariance estimate as one batch mean.
pub fn estimate_truncated_correlation(
    g: &GhostGraph,
    x: usize,
    y: usize,
    chains: usize,
    sweeps: u64,
    stream: RngStream,
) -> Result<Estimate> {
    if chains < 2 {
        return Err(Error::invalid("need at least two chains for an error estimate"));
    }
    if sweeps == 0 {
        return Err(Error::invalid("sweep budget must be positive"));
    }
    if x >= g.num_sites() || y >= g.num_sites() {
        return Err(Error::invalid("correlation vertices must be lattice vertices"));
    }
    let burn = default_burn_in(g);
    let per_chain: Vec<[f64; 3]> = (0..chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.substream(c).rng();
            let mut chain = FkChain::new(g, &BoundaryCondition::Free).expect("free chain");
            chain.run(burn, &mut rng);
            let mut sums = [0.0; 3];
            for _ in 0..sweeps {
                chain.sweep(&mut rng);
                let s = chain.spins();
                let (sx, sy) = (s.get(x) as f64, s.get(y) as f64);
                sums[0] += sx * sy;
                sums[1] += sx;
                sums[2] += sy;
            }
            sums.map(|v| v / sweeps as f64)
        })
        .collect();
    let c = chains as f64;
    let pooled = |k: usize| per_chain.iter().map(|m| m[k]).sum::<f64>() / c;
    let value = pooled(0) - pooled(1) * pooled(2);
    let batches: Vec<f64> = per_chain.iter().map(|m| m[0] - m[1] * m[2]).collect();
    let se = Estimate::from_batches(&batches).se;
    Ok(Estimate::new(value, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_budgets() {
        let g = GhostGraph::from_sites(1.0, 0.0, &[(0, 0), (1, 0)]).unwrap();
        let s = RngStream::new(1, 0);
        assert!(estimate_truncated_correlation(&g, 0, 1, 1, 10, s).is_err());
        assert!(estimate_truncated_correlation(&g, 0, 1, 2, 0, s).is_err());
    }

    #[test]
    fn self_covariance_is_positive() {
        let g = GhostGraph::from_sites(1.0, 0.5, &[(0, 0), (1, 0)]).unwrap();
        let e = estimate_truncated_correlation(&g, 0, 0, 4, 2000, RngStream::new(2, 0)).unwrap();
        assert!(e.value > 0.0);
    }
}
