//! Dataset-quality radii: the smallest ζ making a point set ζ-informative
//! (every k-subset of ζ-balls covers at least k/n of the target measure) and
//! the smallest ζ achieving plain coverage of the support.
//!
//! Measures are grid quadratures over 1-D or 2-D supports; this is a
//! verification oracle for small point sets, not general computational
//! geometry.

use crate::scalar::Real;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Exhaustive subset checking is capped here.
const MAX_INFORMATIVE_POINTS: usize = 15;

/// Union-of-balls probability oracle.
pub trait BallMeasure<R> {
    /// Probability mass of the union of open `zeta`-balls around `points`.
    fn union_measure(&self, points: &[Vec<R>], zeta: R) -> R;
}

/// Uniform quadrature over a rectangular support: each cell carries equal
/// weight at its center.
#[derive(Debug, Clone)]
pub struct GridMeasure<R> {
    centers: Vec<Vec<R>>,
    cell_weight: R,
    diameter: R,
}

impl<R: Real> GridMeasure<R> {
    pub fn uniform_1d(lo: R, hi: R, cells: usize) -> Self {
        let width = (hi - lo) / R::of_usize(cells);
        let centers = (0..cells)
            .map(|c| vec![lo + width * (R::of_usize(c) + R::of(0.5))])
            .collect();
        GridMeasure {
            centers,
            cell_weight: R::one() / R::of_usize(cells),
            diameter: hi - lo,
        }
    }

    pub fn uniform_2d(lo: [R; 2], hi: [R; 2], cells: [usize; 2]) -> Self {
        let wx = (hi[0] - lo[0]) / R::of_usize(cells[0]);
        let wy = (hi[1] - lo[1]) / R::of_usize(cells[1]);
        let mut centers = Vec::with_capacity(cells[0] * cells[1]);
        for cx in 0..cells[0] {
            for cy in 0..cells[1] {
                centers.push(vec![
                    lo[0] + wx * (R::of_usize(cx) + R::of(0.5)),
                    lo[1] + wy * (R::of_usize(cy) + R::of(0.5)),
                ]);
            }
        }
        let dx = hi[0] - lo[0];
        let dy = hi[1] - lo[1];
        GridMeasure {
            centers,
            cell_weight: R::one() / R::of_usize(cells[0] * cells[1]),
            diameter: (dx * dx + dy * dy).sqrt(),
        }
    }

    pub fn centers(&self) -> &[Vec<R>] {
        &self.centers
    }

    pub fn diameter(&self) -> R {
        self.diameter
    }
}

impl<R: Real> BallMeasure<R> for GridMeasure<R> {
    fn union_measure(&self, points: &[Vec<R>], zeta: R) -> R {
        let mut covered = 0usize;
        for c in &self.centers {
            if points.iter().any(|p| distance(p, c) < zeta) {
                covered += 1;
            }
        }
        self.cell_weight * R::of_usize(covered)
    }
}

fn distance<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(R::zero(), |acc, d| acc + d)
        .sqrt()
}

/// Quality report for one point set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZetaReport<R> {
    /// Smallest ζ (to grid resolution) making the set ζ-informative.
    pub zeta_inf: R,
    /// Smallest ζ whose balls cover the support; never exceeds `zeta_inf`.
    pub coverage_zeta: R,
    pub resolution: R,
}

/// Smallest ζ on the `resolution` grid such that every nonempty subset X of
/// the points satisfies `P(union of ζ-balls over X) >= |X| / n`.
pub fn zeta_informative_inf<R: Real>(
    points: &[Vec<R>],
    measure: &GridMeasure<R>,
    resolution: R,
) -> Result<R> {
    if points.is_empty() {
        return Err(Error::validation("empty point set"));
    }
    if points.len() > MAX_INFORMATIVE_POINTS {
        return Err(Error::Refused(format!(
            "exhaustive check infeasible for {} > {MAX_INFORMATIVE_POINTS} points",
            points.len()
        )));
    }
    if resolution <= R::zero() {
        return Err(Error::validation("resolution must be positive"));
    }
    // The condition is monotone in ζ: search the smallest passing multiple.
    let max_steps = (measure.diameter() / resolution)
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(1)
        + 1;
    let mut lo = 0usize; // known failing (ζ = 0 fails: balls are empty)
    let mut hi = max_steps; // full-diameter balls cover everything
    debug_assert!(informative_at(points, measure, resolution * R::of_usize(hi)));
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if informative_at(points, measure, resolution * R::of_usize(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(resolution * R::of_usize(hi))
}

fn informative_at<R: Real>(points: &[Vec<R>], measure: &GridMeasure<R>, zeta: R) -> bool {
    let n = points.len();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    // Weight of quadrature cells grouped by which balls contain them.
    let mut weight_by_mask = vec![R::zero(); 1usize << n];
    for c in measure.centers() {
        let mut mask = 0u32;
        for (i, p) in points.iter().enumerate() {
            if distance(p, c) < zeta {
                mask |= 1 << i;
            }
        }
        weight_by_mask[mask as usize] += measure.cell_weight;
    }
    // Subset-sum (SOS) over masks: after the sweep, entry S holds the weight
    // of cells whose mask is a subset of S.
    for bit in 0..n {
        for s in 0..(1usize << n) {
            if s & (1 << bit) != 0 {
                let lower = weight_by_mask[s ^ (1 << bit)];
                weight_by_mask[s] += lower;
            }
        }
    }
    // P(union over X) = total - weight(cells missed by X)
    //                 = total - subset_sum(complement of X).
    let total = weight_by_mask[full as usize];
    let n_r = R::of_usize(n);
    let tol = R::of(1e-12);
    for x in 1u32..=full {
        let missed = weight_by_mask[(full ^ x) as usize];
        let covered = total - missed;
        let required = R::of_usize(x.count_ones() as usize) / n_r;
        if covered + tol < required {
            return false;
        }
    }
    true
}

/// Largest distance from any grid point of the support to its nearest data
/// point: the infimum coverage radius.
pub fn zeta_coverage_inf<R: Real>(points: &[Vec<R>], domain_grid: &[Vec<R>]) -> Result<R> {
    if points.is_empty() {
        return Err(Error::validation("empty point set"));
    }
    if domain_grid.is_empty() {
        return Err(Error::validation("empty domain grid"));
    }
    let mut worst = R::zero();
    for g in domain_grid {
        let nearest = points
            .iter()
            .map(|p| distance(p, g))
            .fold(R::infinity(), R::min);
        worst = worst.max(nearest);
    }
    Ok(worst)
}

/// Convenience bundle of both radii over the same quadrature.
pub fn zeta_report<R: Real>(
    points: &[Vec<R>],
    measure: &GridMeasure<R>,
    resolution: R,
) -> Result<ZetaReport<R>> {
    let zeta_inf = zeta_informative_inf(points, measure, resolution)?;
    let coverage_zeta = zeta_coverage_inf(points, measure.centers())?;
    Ok(ZetaReport {
        zeta_inf,
        coverage_zeta,
        resolution,
    })
}
