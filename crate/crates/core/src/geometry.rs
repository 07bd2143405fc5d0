//! Grid partition, box coordinates, dilution classes, max-distance and
//! granularity: the spatial substrate of every protocol.
//!
//! The plane is partitioned by the grid `G_c` into half-open boxes
//! `[i*c, (i+1)*c) x [j*c, (j+1)*c)` with `(0, 0)` a grid point. All
//! protocol schedules are expressed in terms of box coordinates on grids
//! whose sides are exact binary halvings of one another, so box nesting
//! is exact in floating point.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A planar position, in units of the transmission range `r = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Coordinates of a box of the grid `G_c`. The side is carried along so
/// that mixing boxes from different grids is detectable at runtime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxCoord {
    pub i: i64,
    pub j: i64,
    pub side: f64,
}

/// Index along one axis such that `idx * side <= v < (idx + 1) * side`
/// holds for the f64 products. Plain `floor(v / side)` can land one off
/// at box boundaries because of division rounding, so the result is
/// nudged until the defining inequalities hold.
fn grid_index(v: f64, side: f64) -> i64 {
    let mut idx = (v / side).floor() as i64;
    while (idx as f64) * side > v {
        idx -= 1;
    }
    while ((idx + 1) as f64) * side <= v {
        idx += 1;
    }
    idx
}

/// Maps a point to its box of the grid with the given side. Total on
/// finite points: every point lands in exactly one box, boxes include
/// their left and bottom sides only.
pub fn box_of(p: Point, side: f64) -> Result<BoxCoord> {
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::invalid_arg(format!("grid side must be positive and finite, got {side}")));
    }
    if !p.is_finite() {
        return Err(Error::invalid_arg(format!("point ({}, {}) is not finite", p.x, p.y)));
    }
    Ok(BoxCoord {
        i: grid_index(p.x, side),
        j: grid_index(p.y, side),
        side,
    })
}

fn check_same_side(a: &BoxCoord, b: &BoxCoord) -> Result<()> {
    if a.side != b.side {
        return Err(Error::invalid_arg(format!(
            "box sides differ: {} vs {}",
            a.side, b.side
        )));
    }
    Ok(())
}

impl BoxCoord {
    /// True iff the boxes coincide or touch, including diagonally.
    pub fn adjacent(&self, other: &BoxCoord) -> Result<bool> {
        check_same_side(self, other)?;
        Ok((self.i - other.i).abs() <= 1 && (self.j - other.j).abs() <= 1)
    }

    /// Max-distance between two boxes, in box units: the maximum over
    /// the two axes of the per-axis segment distance, which is zero when
    /// the half-open projections intersect and `|delta| - 1` otherwise.
    /// Any point of one box is at Euclidean distance at least
    /// `dist_m * side` from any point of the other.
    pub fn dist_m(&self, other: &BoxCoord) -> Result<f64> {
        check_same_side(self, other)?;
        let per_axis = |d: i64| -> i64 { (d.abs() - 1).max(0) };
        Ok(per_axis(self.i - other.i).max(per_axis(self.j - other.j)) as f64)
    }

    /// The box's dilution class modulo `d` on both axes, with the
    /// nonnegative modulus so points left of or below the origin get
    /// classes in `[0, d-1]^2` like everything else.
    pub fn dilution_class(&self, d: u32) -> Result<(u32, u32)> {
        if d == 0 {
            return Err(Error::invalid_arg("dilution factor must be at least 1"));
        }
        let d = i64::from(d);
        Ok((self.i.rem_euclid(d) as u32, self.j.rem_euclid(d) as u32))
    }

    /// Coordinates of the box of `G_{2*side}` containing this box.
    /// Exact because grid boundaries of the doubled grid are a subset of
    /// this grid's boundaries.
    pub fn parent(&self) -> BoxCoord {
        BoxCoord {
            i: self.i.div_euclid(2),
            j: self.j.div_euclid(2),
            side: self.side * 2.0,
        }
    }

    /// Position of this box within its `G_{2*side}` parent:
    /// `(0,0)` bottom-left, `(1,0)` bottom-right, `(0,1)` top-left,
    /// `(1,1)` top-right.
    pub fn sub_position(&self) -> (u8, u8) {
        (self.i.rem_euclid(2) as u8, self.j.rem_euclid(2) as u8)
    }

    pub fn key(&self) -> (i64, i64) {
        (self.i, self.j)
    }
}

/// Smallest pairwise Euclidean distance of a point set.
/// Errors on coincident points; `None` for fewer than two points.
pub fn min_pairwise_distance(points: &[Point]) -> Result<Option<f64>> {
    if points.len() < 2 {
        return Ok(None);
    }
    let mut min = f64::INFINITY;
    for (a_idx, a) in points.iter().enumerate() {
        for b in &points[a_idx + 1..] {
            let d = a.dist_sq(b);
            if d == 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "two stations share position ({}, {})",
                    a.x, a.y
                )));
            }
            if d < min {
                min = d;
            }
        }
    }
    Ok(Some(min.sqrt()))
}

/// Granularity of a point set: `r = 1` over the minimum pairwise
/// distance. A singleton set has granularity 1 by convention.
pub fn granularity(points: &[Point]) -> Result<f64> {
    match min_pairwise_distance(points)? {
        Some(d) => Ok(1.0 / d),
        None => Ok(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn boxc(i: i64, j: i64, side: f64) -> BoxCoord {
        BoxCoord { i, j, side }
    }

    #[test]
    fn box_of_grid_point_is_left_bottom_inclusive() {
        let b = box_of(Point::new(0.0, 0.0), 1.0).unwrap();
        assert_eq!((b.i, b.j), (0, 0));
    }

    #[test]
    fn box_of_negative_coordinate() {
        let b = box_of(Point::new(-0.5, 2.0), 1.0).unwrap();
        assert_eq!((b.i, b.j), (-1, 2));
    }

    #[test]
    fn box_of_fractional_side() {
        let b = box_of(Point::new(0.75, 0.25), 0.5).unwrap();
        assert_eq!((b.i, b.j), (1, 0));
    }

    #[test]
    fn box_of_rejects_bad_input() {
        assert!(box_of(Point::new(f64::NAN, 0.0), 1.0).is_err());
        assert!(box_of(Point::new(0.0, 0.0), 0.0).is_err());
        assert!(box_of(Point::new(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn adjacency_examples() {
        assert!(boxc(0, 0, 1.0).adjacent(&boxc(1, 1, 1.0)).unwrap());
        assert!(boxc(0, 0, 1.0).adjacent(&boxc(0, 0, 1.0)).unwrap());
        assert!(!boxc(0, 0, 1.0).adjacent(&boxc(2, 0, 1.0)).unwrap());
        assert!(boxc(0, 0, 1.0).adjacent(&boxc(0, 0, 0.5)).is_err());
    }

    #[test]
    fn dist_m_examples() {
        assert_eq!(boxc(0, 0, 1.0).dist_m(&boxc(1, 0, 1.0)).unwrap(), 0.0);
        // Per-axis segment formula: x axis gives 2, y axis gives 3.
        assert_eq!(boxc(0, 0, 1.0).dist_m(&boxc(3, 4, 1.0)).unwrap(), 3.0);
        assert_eq!(boxc(5, 5, 0.25).dist_m(&boxc(5, 5, 0.25)).unwrap(), 0.0);
    }

    #[test]
    fn dist_m_symmetric_on_window() {
        for i in -3..3i64 {
            for j in -3..3i64 {
                let a = boxc(i, j, 0.5);
                let b = boxc(1, -2, 0.5);
                assert_eq!(a.dist_m(&b).unwrap(), b.dist_m(&a).unwrap());
            }
        }
    }

    /// Triangle-style bound used by the dilution proofs: if C and C' are
    /// at max-distance < 3, then distM(C', C'') >= distM(C, C'') - 3.
    #[test]
    fn dist_m_triangle_slack_exhaustive() {
        let side = 1.0;
        let range = 0..20i64;
        for ci in range.clone() {
            for cj in range.clone() {
                let c = boxc(ci, cj, side);
                for di in -4..=4i64 {
                    for dj in -4..=4i64 {
                        let c1 = boxc(ci + di, cj + dj, side);
                        if c.dist_m(&c1).unwrap() >= 3.0 {
                            continue;
                        }
                        for ei in range.clone().step_by(3) {
                            for ej in range.clone().step_by(3) {
                                let c2 = boxc(ei, ej, side);
                                assert!(
                                    c1.dist_m(&c2).unwrap() >= c.dist_m(&c2).unwrap() - 3.0
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dilution_class_examples() {
        assert_eq!(boxc(7, 3, 1.0).dilution_class(4).unwrap(), (3, 3));
        assert_eq!(boxc(-1, 0, 1.0).dilution_class(3).unwrap(), (2, 0));
        assert_eq!(boxc(-17, 42, 1.0).dilution_class(1).unwrap(), (0, 0));
        assert!(boxc(0, 0, 1.0).dilution_class(0).is_err());
    }

    #[test]
    fn parent_and_sub_position_agree() {
        for i in -9..9i64 {
            for j in -9..9i64 {
                let b = boxc(i, j, 0.25);
                let p = b.parent();
                let (si, sj) = b.sub_position();
                assert_eq!(p.i * 2 + i64::from(si), i);
                assert_eq!(p.j * 2 + i64::from(sj), j);
            }
        }
    }

    #[test]
    fn granularity_examples() {
        let two = [Point::new(0.0, 0.0), Point::new(0.25, 0.0)];
        assert!((granularity(&two).unwrap() - 4.0).abs() < 1e-12);
        let line: Vec<Point> = (0..3).map(|i| Point::new(i as f64, 0.0)).collect();
        assert!((granularity(&line).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(granularity(&[Point::new(1.0, 2.0)]).unwrap(), 1.0);
        let dup = [Point::new(1.0, 1.0), Point::new(1.0, 1.0)];
        assert!(granularity(&dup).is_err());
    }

    #[test]
    fn granularity_matches_brute_force_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point> = (0..100)
            .map(|_| Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
            .collect();
        let mut best = f64::INFINITY;
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                if a != b {
                    best = best.min(pts[a].dist(&pts[b]));
                }
            }
        }
        assert_eq!(granularity(&pts).unwrap(), 1.0 / best);
    }

    proptest! {
        /// Every point lies in the box reported for it, and any two
        /// points of one box are within side * sqrt(2).
        #[test]
        fn box_partition_and_diameter(
            xs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..40),
            side in 0.05f64..3.0,
        ) {
            let pts: Vec<Point> = xs.iter().map(|&(x, y)| Point::new(x, y)).collect();
            let boxes: Vec<BoxCoord> = pts
                .iter()
                .map(|p| box_of(*p, side).unwrap())
                .collect();
            for (p, b) in pts.iter().zip(&boxes) {
                prop_assert!((b.i as f64) * side <= p.x && p.x < ((b.i + 1) as f64) * side);
                prop_assert!((b.j as f64) * side <= p.y && p.y < ((b.j + 1) as f64) * side);
            }
            let diam = side * 2f64.sqrt() + 1e-12;
            for a in 0..pts.len() {
                for b in a + 1..pts.len() {
                    if boxes[a].key() == boxes[b].key() {
                        prop_assert!(pts[a].dist(&pts[b]) <= diam);
                    }
                }
            }
        }

        /// Stations in boxes at max-distance m are at Euclidean distance
        /// at least m * side.
        #[test]
        fn dist_m_euclidean_lower_bound(
            pairs in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 2..20),
            side in 0.1f64..2.0,
        ) {
            let pts: Vec<Point> = pairs.iter().map(|&(x, y)| Point::new(x, y)).collect();
            for a in 0..pts.len() {
                for b in a + 1..pts.len() {
                    let ba = box_of(pts[a], side).unwrap();
                    let bb = box_of(pts[b], side).unwrap();
                    let m = ba.dist_m(&bb).unwrap();
                    prop_assert!(pts[a].dist(&pts[b]) >= m * side - 1e-9);
                }
            }
        }
    }
}
