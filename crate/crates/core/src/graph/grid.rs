//! Uniform bucket grid for fixed-radius neighbor search.

use std::collections::HashMap;

pub(crate) struct SpatialGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialGrid {
    pub(crate) fn build(points: &[(f64, f64)], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key(p: (f64, f64), cell: f64) -> (i64, i64) {
        ((p.0 / cell).floor() as i64, (p.1 / cell).floor() as i64)
    }

    /// Indices stored in the 3×3 block of cells around `p`. With `cell ≥ r`
    /// this is a superset of the points within distance `r`.
    pub(crate) fn candidates(&self, p: (f64, f64)) -> impl Iterator<Item = usize> + '_ {
        let (cx, cy) = Self::key(p, self.cell);
        (-1..=1)
            .flat_map(move |dx| (-1..=1).map(move |dy| (cx + dx, cy + dy)))
            .filter_map(|k| self.buckets.get(&k))
            .flatten()
            .copied()
    }
}

/// All pairs `(i, j)`, `i < j`, with squared distance at most `r²`.
pub(crate) fn pairs_within(points: &[(f64, f64)], r: f64) -> Vec<(usize, usize)> {
    let grid = SpatialGrid::build(points, r);
    let r2 = r * r;
    let mut pairs = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        for j in grid.candidates(p) {
            if j <= i {
                continue;
            }
            let q = points[j];
            let (dx, dy) = (p.0 - q.0, p.1 - q.1);
            if dx * dx + dy * dy <= r2 {
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}
