//! Uniform-cell hash for fixed-radius neighbor queries.

use std::collections::HashMap;

use crate::geom::Point3;

pub struct PointHash<'a> {
    points: &'a [Point3],
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> PointHash<'a> {
    pub fn new(points: &'a [Point3], cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self {
            points,
            cell,
            buckets,
        }
    }

    fn key(p: &Point3, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    /// Indices of points with `|p - q| <= radius`, in ascending index order.
    pub fn within(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let lo = Self::key(&(q - Point3::repeat(radius)), self.cell);
        let hi = Self::key(&(q + Point3::repeat(radius)), self.cell);
        let mut out = Vec::new();
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(b) = self.buckets.get(&[x, y, z]) {
                        out.extend(
                            b.iter()
                                .copied()
                                .filter(|&i| (self.points[i] - q).norm_squared() <= r2),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let pts: Vec<Point3> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.37;
                Point3::new(t.sin() * 5.0, (t * 1.3).cos() * 4.0, t * 0.1)
            })
            .collect();
        let h = PointHash::new(&pts, 1.5);
        for q in [Point3::zeros(), Point3::new(2.0, -1.0, 3.0), Point3::new(-4.0, 3.0, 10.0)] {
            let brute: Vec<usize> = (0..pts.len())
                .filter(|&i| (pts[i] - q).norm() <= 2.2)
                .collect();
            assert_eq!(h.within(&q, 2.2), brute);
        }
    }
}
