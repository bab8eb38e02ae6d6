use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Rect, BOTTOM, LEFT, RIGHT, TOP};

/// The box `Λ_N = [−N, N]²` of the integer lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub n: i64,
}

impl LatticeBox {
    pub fn new(n: i64) -> Self {
        LatticeBox { n }
    }

    pub fn contains(&self, (x, y): (i64, i64)) -> bool {
        x.abs() <= self.n && y.abs() <= self.n
    }

    /// ℓ∞ distance from a rectangle inside the box to its boundary.
    pub fn clearance(&self, r: &Rect) -> f64 {
        let n = self.n as f64;
        (n - r.x1).min(r.x0 + n).min(n - r.y1).min(r.y0 + n)
    }
}

/// One `2L × L` rectangle with the stretch of path crossing it between its
/// long sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedRect {
    /// The first-hit vertex the rectangle is attached to.
    pub z: (i64, i64),
    pub rect: Rect,
    /// Which half of `Λ_L(z)`: one of `LEFT`, `RIGHT`, `BOTTOM`, `TOP`.
    pub side: usize,
    pub crossing: Vec<(i64, i64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RectangleViolation {
    TooFew { found: usize, required: usize },
    NotCrossed { index: usize },
    TooClose { i: usize, j: usize, distance: f64 },
    NearBoundary { index: usize, distance: f64 },
}

/// `⌊|x − y| / (6L)⌋` for the endpoints of `path`.
pub fn required_rectangles(path: &[(i64, i64)], l: i64) -> usize {
    let (Some(x), Some(y)) = (path.first(), path.last()) else {
        return 0;
    };
    let d = (((x.0 - y.0).pow(2) + (x.1 - y.1).pow(2)) as f64).sqrt();
    (d / (6 * l) as f64).floor() as usize
}

fn linf(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// Disjoint `2L × L` rectangles crossed by a nearest-neighbour path in the
/// easy direction.
///
/// Lines perpendicular to the dominant displacement axis are drawn through
/// the start point at spacing `4L`. On each line the first path vertex in
/// `Λ_{N−2L}` is `z_k`; the path leaves `Λ_L(z_k)` through one side, and the
/// half of `Λ_L(z_k)` on that side is crossed between its long sides.
pub fn disjoint_crossed_rectangles(
    path: &[(i64, i64)],
    l: i64,
    domain: LatticeBox,
) -> Result<Vec<PlacedRect>> {
    if l <= 0 {
        return Err(Error::invalid(format!("rectangle scale must be positive, got {l}")));
    }
    let (Some(&start), Some(&end)) = (path.first(), path.last()) else {
        return Err(Error::invalid("empty path"));
    };
    if let Some(p) = path.iter().find(|&&p| !domain.contains(p)) {
        return Err(Error::invalid(format!("path vertex {p:?} lies outside Λ_{}", domain.n)));
    }
    if let Some(w) = path.windows(2).find(|w| linf(w[0], w[1]) != 1 || w[0].0 != w[1].0 && w[0].1 != w[1].1) {
        return Err(Error::invalid(format!("{:?} -> {:?} is not a lattice step", w[0], w[1])));
    }
    let required = required_rectangles(path, l);
    let horizontal = (end.0 - start.0).abs() >= (end.1 - start.1).abs();
    let coord = |p: (i64, i64)| if horizontal { p.0 } else { p.1 };
    let (c0, c1) = (coord(start), coord(end));
    let sign = if c1 >= c0 { 1 } else { -1 };
    let inner = LatticeBox::new(domain.n - 2 * l);

    let mut out = Vec::new();
    for k in 0..=((c1 - c0).abs() / (4 * l)) {
        let line = c0 + sign * 4 * k * l;
        let Some(t) = path
            .iter()
            .position(|&p| coord(p) == line && inner.contains(p))
        else {
            continue;
        };
        if let Some(placed) = place_at(path, t, l) {
            out.push(placed);
        }
    }
    if out.len() < required {
        return Err(Error::invalid(format!(
            "only {} of {required} rectangles fit; the path must keep 2L = {} away from ∂Λ_{}",
            out.len(),
            2 * l,
            domain.n
        )));
    }
    Ok(out)
}

/// Half of `Λ_L(z)` through whose side the path leaves, going forward from
/// index `t` if it can and backward otherwise.
fn place_at(path: &[(i64, i64)], t: usize, l: i64) -> Option<PlacedRect> {
    let z = path[t];
    let forward: Vec<usize> = (t..path.len()).collect();
    let backward: Vec<usize> = (0..=t).rev().collect();
    for order in [forward, backward] {
        let Some(exit) = order.iter().position(|&i| linf(path[i], z) == l) else {
            continue;
        };
        let w = path[order[exit]];
        let (side, depth): (usize, fn((i64, i64), (i64, i64)) -> i64) = if w.0 - z.0 == -l {
            (LEFT, |p, z| z.0 - p.0)
        } else if w.0 - z.0 == l {
            (RIGHT, |p, z| p.0 - z.0)
        } else if w.1 - z.1 == -l {
            (BOTTOM, |p, z| z.1 - p.1)
        } else {
            (TOP, |p, z| p.1 - z.1)
        };
        // last visit to depth 0 before the exit; from there on depth stays in (0, L]
        let last_zero = (0..=exit).rev().find(|&s| depth(path[order[s]], z) <= 0)?;
        let (i0, i1) = (order[last_zero], order[exit]);
        let crossing = path[i0.min(i1)..=i0.max(i1)].to_vec();
        let (x, y, lf) = (z.0 as f64, z.1 as f64, l as f64);
        let rect = match side {
            LEFT => Rect::closed(x - lf, x, y - lf, y + lf),
            RIGHT => Rect::closed(x, x + lf, y - lf, y + lf),
            BOTTOM => Rect::closed(x - lf, x + lf, y - lf, y),
            _ => Rect::closed(x - lf, x + lf, y, y + lf),
        };
        return Some(PlacedRect {
            z,
            rect,
            side,
            crossing,
        });
    }
    None
}

/// Checks the output of [`disjoint_crossed_rectangles`] from scratch.
///
/// A rectangle counts as crossed if some contiguous stretch of `path` stays
/// inside it and touches both of its long sides.
pub fn verify_rectangles(
    path: &[(i64, i64)],
    l: i64,
    domain: LatticeBox,
    rects: &[PlacedRect],
) -> Vec<RectangleViolation> {
    let mut bad = Vec::new();
    let required = required_rectangles(path, l);
    if rects.len() < required {
        bad.push(RectangleViolation::TooFew {
            found: rects.len(),
            required,
        });
    }
    for (index, pr) in rects.iter().enumerate() {
        if !crossed_between_long_sides(path, &pr.rect) {
            bad.push(RectangleViolation::NotCrossed { index });
        }
        let distance = domain.clearance(&pr.rect);
        if distance < l as f64 {
            bad.push(RectangleViolation::NearBoundary { index, distance });
        }
        for (j, other) in rects.iter().enumerate().skip(index + 1) {
            let distance = pr.rect.linf_distance(&other.rect);
            if distance < 2.0 * l as f64 {
                bad.push(RectangleViolation::TooClose { i: index, j, distance });
            }
        }
    }
    bad
}

fn crossed_between_long_sides(path: &[(i64, i64)], r: &Rect) -> bool {
    let tall = r.height() > r.width();
    let (lo, hi) = if tall { (r.x0, r.x1) } else { (r.y0, r.y1) };
    let along = |p: (i64, i64)| if tall { p.0 as f64 } else { p.1 as f64 };
    let mut touched = (false, false);
    for &p in path {
        if !r.contains((p.0 as f64, p.1 as f64)) {
            touched = (false, false);
            continue;
        }
        touched.0 |= along(p) == lo;
        touched.1 |= along(p) == hi;
        if touched.0 && touched.1 {
            return true;
        }
    }
    false
}
