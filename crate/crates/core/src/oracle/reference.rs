//! Independent reference for the current-trace law: per-edge factorial
//! weights `J^n/n!` summed up to a cutoff, combined through the character
//! expansion `1[∂p = A] = 2^{-|V̄|} Σ_σ σ_A Π_e (σ_uσ_v)^{p_e}`.
//!
//! Shares nothing with the parity-vector enumeration in the parent module.

use crate::error::{Error, Result};
use crate::lattice::GhostGraph;

/// Cutoff used by the validation suite.
pub const DEFAULT_MAX_CURRENT: u32 = 40;

/// Sums of `J^n/n!` over odd `n ≤ n_max` and over even `2 ≤ n ≤ n_max`.
pub fn truncated_parity_sums(j: f64, n_max: u32) -> (f64, f64) {
    let (mut odd, mut even) = (0.0, 0.0);
    let mut term = 1.0;
    for n in 1..=n_max {
        term *= j / n as f64;
        if n % 2 == 1 {
            odd += term;
        } else {
            even += term;
        }
    }
    (odd, even)
}

/// Current-trace law with sources `A` from truncated factorial sums, indexed
/// by edge mask. Cost `2^{|V̄|+|Ē|}`; refuses beyond `max_log2_work`.
pub fn factorial_trace_law(
    g: &GhostGraph,
    sources: &[usize],
    n_max: u32,
    max_log2_work: usize,
) -> Result<Vec<f64>> {
    let nv = g.num_vertices();
    let ne = g.num_edges();
    if nv + ne > max_log2_work || ne > 40 {
        return Err(Error::Capacity {
            what: "vertices + edges",
            size: nv + ne,
            cap: max_log2_work,
        });
    }
    if sources.len() % 2 == 1 {
        return Err(Error::invalid("source set must have even size"));
    }
    let ends: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    let sums: Vec<(f64, f64)> = g
        .edges()
        .iter()
        .map(|e| truncated_parity_sums(e.coupling, n_max))
        .collect();
    let mut law = vec![0.0; 1 << ne];
    let mut prod = vec![0.0; 1 << ne];
    let mut factor = vec![0.0; ne];
    for sigma in 0u64..1 << nv {
        let s = |v: usize| if sigma >> v & 1 == 1 { -1.0 } else { 1.0 };
        let sign: f64 = sources.iter().map(|&v| s(v)).product();
        for (e, &(u, v)) in ends.iter().enumerate() {
            let (odd, even) = sums[e];
            factor[e] = even + odd * s(u) * s(v);
        }
        prod[0] = sign;
        law[0] += sign;
        for m in 1..prod.len() {
            let low = m.trailing_zeros() as usize;
            prod[m] = prod[m & (m - 1)] * factor[low];
            law[m] += prod[m];
        }
    }
    let z: f64 = law.iter().sum();
    if z <= 0.0 {
        return Err(Error::ZeroMeasure(format!(
            "no current with sources {sources:?} exists"
        )));
    }
    for x in law.iter_mut() {
        *x /= z;
    }
    Ok(law)
}

/// Maximum absolute difference between the parity-collapsed law and the
/// factorial reference for the sources `A`.
pub fn parity_collapse_deviation(
    oracle: &super::ExactOracle,
    g: &GhostGraph,
    sources: &[usize],
) -> Result<f64> {
    let fast = oracle.current_trace_law(g, sources)?;
    let slow = factorial_trace_law(g, sources, DEFAULT_MAX_CURRENT, 34)?;
    Ok(fast
        .iter()
        .zip(&slow)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ExactOracle;

    #[test]
    fn parity_sums_match_hyperbolic_functions() {
        for j in [0.0, 0.1, 0.44, 1.0] {
            let (odd, even) = truncated_parity_sums(j, 40);
            assert!((odd - f64::sinh(j)).abs() < 1e-15);
            assert!((even - (f64::cosh(j) - 1.0)).abs() < 1e-15);
        }
    }

    /// Direct sum over all integer currents `n_e ≤ 40` on the triangle.
    fn brute_triangle(g: &GhostGraph, sources: u64) -> Vec<f64> {
        let js: Vec<f64> = g.edges().iter().map(|e| e.coupling).collect();
        let w = |j: f64, n: u32| (0..n).fold(1.0, |acc, k| acc * j / (k + 1) as f64);
        let mut law = vec![0.0; 8];
        for n0 in 0..=40u32 {
            for n1 in 0..=40u32 {
                for n2 in 0..=40u32 {
                    let n = [n0, n1, n2];
                    let mut odd = 0u64;
                    for (e, edge) in g.edges().iter().enumerate() {
                        if n[e] % 2 == 1 {
                            odd ^= (1 << edge.u) ^ (1 << edge.v);
                        }
                    }
                    if odd != sources {
                        continue;
                    }
                    let trace = (0..3).filter(|&e| n[e] > 0).fold(0, |m, e| m | 1 << e);
                    law[trace] += w(js[0], n0) * w(js[1], n1) * w(js[2], n2);
                }
            }
        }
        let z: f64 = law.iter().sum();
        law.iter().map(|x| x / z).collect()
    }

    #[test]
    fn triangle_matches_direct_integer_sum() {
        let g = GhostGraph::from_sites(1.0, 0.7, &[(0, 0), (1, 0)]).unwrap();
        let o = ExactOracle::new();
        for (sources, mask) in [(vec![], 0u64), (vec![0, 1], 0b011), (vec![0, 2], 0b101)] {
            let brute = brute_triangle(&g, mask);
            let fast = o.current_trace_law(&g, &sources).unwrap();
            let slow = factorial_trace_law(&g, &sources, 40, 30).unwrap();
            for k in 0..8 {
                assert!((brute[k] - fast[k]).abs() < 1e-12, "{sources:?} {k}");
                assert!((brute[k] - slow[k]).abs() < 1e-12, "{sources:?} {k}");
            }
        }
    }

    #[test]
    fn odd_sources_rejected() {
        let g = GhostGraph::from_sites(1.0, 0.7, &[(0, 0), (1, 0)]).unwrap();
        assert!(factorial_trace_law(&g, &[0], 40, 30).is_err());
    }
}
