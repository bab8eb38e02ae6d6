use rand::Rng;

use super::{per_replica, ExperimentConfig, ExperimentOutput, Summary, Table};
use crate::error::Result;
use crate::events::{disjoint_crossed_rectangles, required_rectangles, verify_rectangles, LatticeBox};
use crate::samplers::SimRng;
use crate::stats::Estimate;

const PATHS_PER_TASK: usize = 500;
const MAX_SCALE: i64 = 4;

/// A nearest-neighbour path with its rectangle scale `L` and a box `Λ_N`
/// that keeps the path at distance `≥ 2L` from `∂Λ_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomPath {
    pub path: Vec<(i64, i64)>,
    pub l: i64,
    pub domain: LatticeBox,
}

/// Draws `L ∈ [1, 4]`, endpoints with `|x − y| ∈ [6L, 60L]` and a biased
/// random walk from `x` to `y` that wanders sideways and backwards.
pub fn random_lattice_path(rng: &mut SimRng) -> RandomPath {
    let l = rng.random_range(1..=MAX_SCALE);
    let (x, y) = loop {
        let d = rng.random_range(6.0 * l as f64..=60.0 * l as f64);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let x = (rng.random_range(-20..=20), rng.random_range(-20..=20));
        let y = (
            x.0 + (d * theta.cos()).round() as i64,
            x.1 + (d * theta.sin()).round() as i64,
        );
        let e = (((x.0 - y.0).pow(2) + (x.1 - y.1).pow(2)) as f64).sqrt();
        if e >= 6.0 * l as f64 && e <= 60.0 * l as f64 {
            break (x, y);
        }
    };
    let bias = rng.random_range(0.55..0.9);
    let mut path = vec![x];
    let mut p = x;
    while p != y {
        let step = if rng.random::<f64>() < bias {
            let dx = (y.0 - p.0).signum();
            let dy = (y.1 - p.1).signum();
            if dx != 0 && (dy == 0 || rng.random::<bool>()) {
                (dx, 0)
            } else {
                (0, dy)
            }
        } else {
            [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.random_range(0..4)]
        };
        p = (p.0 + step.0, p.1 + step.1);
        path.push(p);
    }
    let reach = path.iter().map(|q| q.0.abs().max(q.1.abs())).max().unwrap();
    let n = reach + 2 * l + rng.random_range(0..=l);
    RandomPath {
        path,
        l,
        domain: LatticeBox::new(n),
    }
}

pub(super) fn rectangle_check(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let tasks: Vec<usize> = (0..cfg.paths.div_ceil(PATHS_PER_TASK)).collect();
    let results = per_replica(cfg, &tasks, |&t, rng| {
        let count = PATHS_PER_TASK.min(cfg.paths - t * PATHS_PER_TASK);
        let mut rows = Vec::with_capacity(count);
        for i in 0..count {
            let rp = random_lattice_path(rng);
            let (x, y) = (rp.path[0], *rp.path.last().unwrap());
            let dist = (((x.0 - y.0).pow(2) + (x.1 - y.1).pow(2)) as f64).sqrt();
            let required = required_rectangles(&rp.path, rp.l);
            let (found, violations, failed) = match disjoint_crossed_rectangles(&rp.path, rp.l, rp.domain) {
                Ok(rects) => (rects.len(), verify_rectangles(&rp.path, rp.l, rp.domain, &rects).len(), 0),
                Err(_) => (0, 0, 1),
            };
            rows.push(vec![
                (t * PATHS_PER_TASK + i) as f64,
                rp.l as f64,
                rp.domain.n as f64,
                rp.path.len() as f64,
                dist,
                required as f64,
                found as f64,
                violations as f64,
                failed as f64,
            ]);
        }
        Ok(rows)
    })?;
    let mut table = Table::new(&[
        "path",
        "l",
        "n",
        "length",
        "distance",
        "required",
        "found",
        "violations",
        "rejected",
    ]);
    for row in results.into_iter().flatten().flatten() {
        table.push(row);
    }
    let total = |col: &str| table.column(col).unwrap().iter().sum::<f64>();
    let (violations, rejected) = (total("violations"), total("rejected"));
    let mut summary = Summary::new(cfg);
    summary
        .estimates
        .insert("violations".into(), Estimate::new(violations, 0.0));
    summary
        .estimates
        .insert("rejected_paths".into(), Estimate::new(rejected, 0.0));
    summary
        .estimates
        .insert("paths".into(), Estimate::new(table.rows.len() as f64, 0.0));
    summary
        .flags
        .insert("zero_violations".into(), violations == 0.0 && rejected == 0.0);
    summary
        .notes
        .push("exact counts; errors are zero by construction".into());
    Ok(ExperimentOutput { table, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::RngStream;

    #[test]
    fn paths_respect_their_box() {
        let mut rng = RngStream::new(9, 0).rng();
        for _ in 0..200 {
            let rp = random_lattice_path(&mut rng);
            let inner = LatticeBox::new(rp.domain.n - 2 * rp.l);
            assert!(rp.path.iter().all(|&p| inner.contains(p)));
            assert!(rp.path.windows(2).all(|w| (w[0].0 - w[1].0).abs() + (w[0].1 - w[1].1).abs() == 1));
            let d = required_rectangles(&rp.path, rp.l);
            assert!((1..=10).contains(&d), "{d}");
        }
    }
}
