use serde::{Deserialize, Serialize};

use super::{per_replica, ExperimentConfig, ExperimentOutput, Summary, Table};
use crate::dsu::UnionFind;
use crate::error::Result;
use crate::lattice::{GhostGraph, Rect, MASS_EXPONENT};
use crate::samplers::{FkChain, SimRng};
use crate::stats::{jackknife, weighted_linear_fit, Estimate, LinearFit};
use crate::BoundaryCondition;

/// Signal threshold for the fit window, in standard errors.
const WINDOW_SE: f64 = 5.0;
const MIN_WINDOW: usize = 3;
/// Largest field included in the rescaled-rate band.
const BAND_MAX_FIELD: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub distance: f64,
    pub covariance: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// First and last distance with signal above `5 SE`.
    pub window: Option<(f64, f64)>,
    /// Line through `ln cov` against distance.
    pub fit: Option<LinearFit>,
    /// Decay rate `m = −slope`.
    pub rate: Option<Estimate>,
    pub reason: Option<String>,
}

impl DecayFit {
    fn none(window: Option<(f64, f64)>, reason: impl Into<String>) -> Self {
        DecayFit {
            window,
            fit: None,
            rate: None,
            reason: Some(reason.into()),
        }
    }
}

/// Exponential fit of a covariance profile.
///
/// The window is the first run of consecutive points with `cov > 5 SE`. No
/// rate is reported if the window is shorter than three points, if it runs
/// to the largest distance (the decay is not resolved), or if a power law in
/// the distance fits the window at least as well as an exponential.
pub fn fit_decay(points: &[DecayPoint]) -> DecayFit {
    let above = |p: &DecayPoint| p.covariance.value > WINDOW_SE * p.covariance.se;
    let Some(start) = points.iter().position(above) else {
        return DecayFit::none(None, "no distance with signal above 5 SE");
    };
    let len = points[start..].iter().take_while(|p| above(p)).count();
    let win = &points[start..start + len];
    let window = Some((win[0].distance, win[len - 1].distance));
    if start + len == points.len() {
        return DecayFit::none(window, "signal persists to the largest distance; no exponential decay resolved");
    }
    if len < MIN_WINDOW {
        return DecayFit::none(window, format!("window has {len} points, need {MIN_WINDOW}"));
    }
    let y: Vec<f64> = win.iter().map(|p| p.covariance.value.ln()).collect();
    let s: Vec<f64> = win.iter().map(|p| p.covariance.se / p.covariance.value).collect();
    let d: Vec<f64> = win.iter().map(|p| p.distance).collect();
    let logd: Vec<f64> = d.iter().map(|x| x.ln()).collect();
    let (Some(exp), power) = (weighted_linear_fit(&d, &y, &s), weighted_linear_fit(&logd, &y, &s)) else {
        return DecayFit::none(window, "degenerate fit");
    };
    if power.is_some_and(|p| p.chi2 <= exp.chi2) {
        return DecayFit::none(window, "a power law fits the window at least as well");
    }
    DecayFit {
        window,
        fit: Some(exp),
        rate: Some(Estimate::new(-exp.slope, exp.slope_se)),
        reason: None,
    }
}

/// `ln(c₁/c₂)/(d₂ − d₁)` over the first two distances, when both are above
/// `5 SE`; usable where the fit window is too short.
fn initial_rate(points: &[DecayPoint]) -> Option<Estimate> {
    let [p, q] = points.get(..2)? else {
        return None;
    };
    let ok = |x: &DecayPoint| x.covariance.value > WINDOW_SE * x.covariance.se;
    if !(ok(p) && ok(q)) {
        return None;
    }
    let dd = q.distance - p.distance;
    let rel = |x: &DecayPoint| x.covariance.se / x.covariance.value;
    Some(Estimate::new(
        (p.covariance.value / q.covariance.value).ln() / dd,
        rel(p).hypot(rel(q)) / dd,
    ))
}

/// Central square of the box and the axis-parallel pairs inside it.
struct PairGeometry {
    window: Vec<usize>,
    /// Per distance, pairs of indices into `window`.
    pairs: Vec<Vec<(u32, u32)>>,
}

impl PairGeometry {
    fn new(g: &GhostGraph, size: usize, distances: &[usize]) -> Self {
        let margin = (size / 4) as i64;
        let (lo, hi) = (margin, size as i64 - 1 - margin);
        let w = (hi - lo + 1) as usize;
        let local = |i: i64, j: i64| ((j - lo) as usize * w + (i - lo) as usize) as u32;
        let window = (lo..=hi)
            .flat_map(|j| (lo..=hi).map(move |i| (i, j)))
            .map(|(i, j)| g.site_index(i, j).expect("window lies in the box"))
            .collect();
        let pairs = distances
            .iter()
            .map(|&d| {
                let d = d as i64;
                let mut v = Vec::new();
                for j in lo..=hi {
                    for i in lo..=hi - d {
                        v.push((local(i, j), local(i + d, j)));
                        v.push((local(j, i), local(j, i + d)));
                    }
                }
                v
            })
            .collect();
        PairGeometry { window, pairs }
    }
}

/// Sums over the samples of one block.
#[derive(Clone, Debug)]
struct Block {
    samples: f64,
    /// Per distance: pair-averaged `E[σ_xσ_y | internal bonds]`.
    joint: Vec<f64>,
    /// Per window site: `E[σ_x | internal bonds]`.
    single: Vec<f64>,
}

/// Runs one chain and returns its blocks.
///
/// Given the internal bonds, each internal cluster `C` joins the ghost
/// independently with probability `tanh(|C| J_ext)`, so
/// `E[σ_x | ω] = tanh(|C_x| J_ext)` and `E[σ_xσ_y | ω]` is 1 on a common
/// cluster and the product otherwise.
fn run_chain(
    g: &GhostGraph,
    geo: &PairGeometry,
    cfg: &ExperimentConfig,
    rng: &mut SimRng,
) -> Result<Vec<Block>> {
    let mut chain = FkChain::new(g, &BoundaryCondition::Free)?;
    chain.run(cfg.burn_in, rng);
    let j_ext = g.nominal_external_coupling();
    let n = g.num_sites();
    let mut uf = UnionFind::new(n);
    let mut size = vec![0u32; n];
    let mut root = vec![0u32; geo.window.len()];
    let mut t = vec![0.0; geo.window.len()];
    let per_block = (cfg.sweeps / cfg.batches as u64).max(1);
    let mut blocks = Vec::with_capacity(cfg.batches);
    for _ in 0..cfg.batches {
        let mut b = Block {
            samples: 0.0,
            joint: vec![0.0; geo.pairs.len()],
            single: vec![0.0; geo.window.len()],
        };
        for _ in 0..per_block {
            chain.sweep(rng);
            uf.reset();
            for e in chain.bonds().iter_open() {
                if e < g.num_internal() {
                    let edge = g.edge(e);
                    uf.union(edge.u, edge.v);
                }
            }
            size.fill(0);
            for v in 0..n {
                size[uf.find(v)] += 1;
            }
            for (k, &v) in geo.window.iter().enumerate() {
                let r = uf.find(v);
                root[k] = r as u32;
                t[k] = (size[r] as f64 * j_ext).tanh();
                b.single[k] += t[k];
            }
            for (d, pairs) in geo.pairs.iter().enumerate() {
                let s: f64 = pairs
                    .iter()
                    .map(|&(x, y)| {
                        let (x, y) = (x as usize, y as usize);
                        if root[x] == root[y] {
                            1.0
                        } else {
                            t[x] * t[y]
                        }
                    })
                    .sum();
                b.joint[d] += s / pairs.len() as f64;
            }
            b.samples += 1.0;
        }
        blocks.push(b);
    }
    Ok(blocks)
}

fn covariances(geo: &PairGeometry, samples: f64, joint: &[f64], single: &[f64]) -> Vec<f64> {
    geo.pairs
        .iter()
        .zip(joint)
        .map(|(pairs, &jd)| {
            let prod: f64 = pairs
                .iter()
                .map(|&(x, y)| single[x as usize] * single[y as usize])
                .sum::<f64>()
                / pairs.len() as f64;
            jd / samples - prod / (samples * samples)
        })
        .collect()
}

/// Covariance profile with jackknife errors over all blocks of all chains.
fn profile(geo: &PairGeometry, blocks: &[Block], distances: &[usize]) -> Vec<DecayPoint> {
    let total = |skip: Option<usize>| {
        let mut samples = 0.0;
        let mut joint = vec![0.0; geo.pairs.len()];
        let mut single = vec![0.0; geo.window.len()];
        for (k, b) in blocks.iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            samples += b.samples;
            joint.iter_mut().zip(&b.joint).for_each(|(a, x)| *a += x);
            single.iter_mut().zip(&b.single).for_each(|(a, x)| *a += x);
        }
        covariances(geo, samples, &joint, &single)
    };
    let full = total(None);
    let loo: Vec<Vec<f64>> = (0..blocks.len()).map(|k| total(Some(k))).collect();
    distances
        .iter()
        .enumerate()
        .map(|(d, &dist)| {
            let column: Vec<f64> = loo.iter().map(|c| c[d]).collect();
            DecayPoint {
                distance: dist as f64,
                covariance: jackknife(full[d], &column),
            }
        })
        .collect()
}

pub(super) fn decay_scan(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let a = cfg.spacings[0];
    let side = (cfg.size - 1) as f64 * a;
    let box_rect = Rect::closed(0.0, side, 0.0, side);
    let graphs: Vec<GhostGraph> = cfg
        .fields
        .iter()
        .map(|&h| GhostGraph::build_domain_graph(box_rect, a, h))
        .collect::<Result<_>>()?;
    let geo = PairGeometry::new(&graphs[0], cfg.size, &cfg.distances);
    let runs = per_replica(cfg, &graphs, |g, rng| run_chain(g, &geo, cfg, rng))?;

    let mut table = Table::new(&["h", "distance", "covariance", "se"]);
    let mut summary = Summary::new(cfg);
    let mut rates: Vec<(f64, Estimate)> = Vec::new();
    let mut initial: Vec<(f64, Estimate)> = Vec::new();
    for (&h, chains) in cfg.fields.iter().zip(runs) {
        let blocks: Vec<Block> = chains.into_iter().flatten().collect();
        let points = profile(&geo, &blocks, &cfg.distances);
        for p in &points {
            table.push(vec![h, p.distance, p.covariance.value, p.covariance.se]);
        }
        if let Some(r) = initial_rate(&points) {
            summary.estimates.insert(format!("initial_rate(h={h})"), r);
            initial.push((h, r));
        }
        let fit = fit_decay(&points);
        match (&fit.fit, &fit.rate) {
            (Some(line), Some(m)) => {
                summary.fits.insert(format!("log_covariance(h={h})"), *line);
                summary.estimates.insert(format!("m(h={h})"), *m);
                if h > 0.0 {
                    let scale = MASS_EXPONENT.pow(h);
                    summary
                        .estimates
                        .insert(format!("m/h^(8/15)(h={h})"), Estimate::new(m.value / scale, m.se / scale));
                }
                rates.push((h, *m));
            }
            _ => summary.notes.push(format!(
                "h={h}: no exponential fit ({})",
                fit.reason.as_deref().unwrap_or("unknown")
            )),
        }
        if h == 0.0 {
            summary.flags.insert("h0_no_exponential_fit".into(), fit.rate.is_none());
        }
    }

    let band_fields: Vec<f64> = cfg
        .fields
        .iter()
        .copied()
        .filter(|&h| h > 0.0 && h <= BAND_MAX_FIELD)
        .collect();
    if !band_fields.is_empty() {
        let ratios: Vec<Option<f64>> = band_fields
            .iter()
            .map(|&h| rates.iter().find(|r| r.0 == h).map(|r| r.1.value / MASS_EXPONENT.pow(h)))
            .collect();
        let ok = ratios.iter().all(Option::is_some);
        if ok {
            let vals: Vec<f64> = ratios.into_iter().flatten().collect();
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            summary.estimates.insert("band_ratio".into(), Estimate::new(hi / lo, f64::NAN));
            summary.flags.insert("rescaled_rate_within_factor_2".into(), hi / lo <= 2.0);
        } else {
            summary.flags.insert("rescaled_rate_within_factor_2".into(), false);
            summary.notes.push("a band field has no fitted rate".into());
        }
    }
    let rate_at = |h: f64| initial.iter().find(|r| r.0 == h).map(|r| r.1.value);
    if let (Some(m1), Some(m01)) = (rate_at(1.0), rate_at(0.1)) {
        summary.flags.insert("rate_increases_with_field".into(), m1 > m01);
    }
    Ok(ExperimentOutput { table, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(f: impl Fn(f64) -> f64, se: f64, n: usize) -> Vec<DecayPoint> {
        (1..=n)
            .map(|d| DecayPoint {
                distance: d as f64,
                covariance: Estimate::new(f(d as f64), se),
            })
            .collect()
    }

    #[test]
    fn exponential_profile_recovers_rate() {
        let p = points(|d| 0.5 * (-0.3 * d).exp(), 1e-4, 40);
        let fit = fit_decay(&p);
        let m = fit.rate.unwrap();
        assert!((m.value - 0.3).abs() < 1e-9, "{m:?}");
        assert!(fit.window.unwrap().1 < 40.0);
    }

    #[test]
    fn power_law_out_to_the_edge_gives_no_fit() {
        let p = points(|d| 0.7 * d.powf(-0.25), 1e-3, 40);
        let fit = fit_decay(&p);
        assert!(fit.rate.is_none());
        assert!(fit.reason.unwrap().contains("persists"));
    }

    #[test]
    fn power_law_beats_exponential_inside_window() {
        let p = points(|d| if d < 20.0 { 0.7 * d.powf(-3.0) } else { 0.0 }, 1e-5, 40);
        assert!(fit_decay(&p).rate.is_none());
    }

    #[test]
    fn pure_noise_gives_no_window() {
        let p = points(|_| 1e-4, 1e-3, 10);
        let fit = fit_decay(&p);
        assert!(fit.window.is_none() && fit.rate.is_none());
    }

    #[test]
    fn independent_sites_have_zero_covariance() {
        // no internal bonds: each site is its own cluster
        let g = GhostGraph::build_domain_graph(Rect::closed(0.0, 15.0, 0.0, 15.0), 1.0, 0.3).unwrap();
        let g = g.with_internal_coupling(0.0).unwrap();
        let mut cfg = ExperimentConfig::defaults(super::super::ExperimentKind::Decay);
        cfg.size = 16;
        cfg.distances = vec![1, 2, 3];
        cfg.sweeps = 20;
        cfg.batches = 4;
        cfg.burn_in = 2;
        let geo = PairGeometry::new(&g, 16, &cfg.distances);
        let blocks = run_chain(&g, &geo, &cfg, &mut crate::samplers::RngStream::new(1, 0).rng()).unwrap();
        for p in profile(&geo, &blocks, &cfg.distances) {
            assert!(p.covariance.value.abs() < 1e-12, "{p:?}");
        }
    }
}
