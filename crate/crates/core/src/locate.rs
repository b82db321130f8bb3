//! Point location in (possibly deformed) triangulations.

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Barycentric weights below this are treated as zero (point on an edge).
pub const EDGE_TOLERANCE: f64 = 1e-12;
/// Maximum barycentric slack accepted for points just outside the hull.
pub const HULL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLocation {
    pub triangle: usize,
    pub barycentric: [f64; 3],
}

/// Uniform-grid bucket index over triangle bounding boxes.
///
/// Candidates in every bucket are kept in increasing triangle order, so the
/// first accepted triangle is the lowest-indexed one containing the point.
#[derive(Debug, Clone)]
pub struct PointLocator {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    origin: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    bucket_start: Vec<usize>,
    bucket_items: Vec<u32>,
}

impl PointLocator {
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Self {
        let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in &nodes {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let side = ((triangles.len() as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let dims = [side, side];
        let cell = [((hi.x - lo.x) / side as f64).max(f64::MIN_POSITIVE), ((hi.y - lo.y) / side as f64).max(f64::MIN_POSITIVE)];
        let mut loc = Self { nodes, triangles, origin: lo, cell, dims, bucket_start: Vec::new(), bucket_items: Vec::new() };

        let n_buckets = dims[0] * dims[1];
        let mut ranges = Vec::with_capacity(loc.triangles.len());
        let mut counts = vec![0usize; n_buckets + 1];
        for t in &loc.triangles {
            let (mut bl, mut bh) = (loc.nodes[t[0]], loc.nodes[t[0]]);
            for &v in &t[1..] {
                let p = loc.nodes[v];
                bl = Point::new(bl.x.min(p.x), bl.y.min(p.y));
                bh = Point::new(bh.x.max(p.x), bh.y.max(p.y));
            }
            // Inflate slightly so points on shared bucket lines see both sides.
            let pad = 1e-9 * (cell[0] + cell[1]);
            let (i0, j0) = loc.cell_of(Point::new(bl.x - pad, bl.y - pad));
            let (i1, j1) = loc.cell_of(Point::new(bh.x + pad, bh.y + pad));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    counts[j * dims[0] + i + 1] += 1;
                }
            }
            ranges.push((i0, j0, i1, j1));
        }
        for b in 0..n_buckets {
            counts[b + 1] += counts[b];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; counts[n_buckets]];
        for (k, &(i0, j0, i1, j1)) in ranges.iter().enumerate() {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let b = j * dims[0] + i;
                    items[fill[b]] = k as u32;
                    fill[b] += 1;
                }
            }
        }
        loc.bucket_start = counts;
        loc.bucket_items = items;
        loc
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let fi = ((p.x - self.origin.x) / self.cell[0]).floor();
        let fj = ((p.y - self.origin.y) / self.cell[1]).floor();
        let clamp = |f: f64, n: usize| if f.is_nan() || f < 0.0 { 0 } else { (f as usize).min(n - 1) };
        (clamp(fi, self.dims[0]), clamp(fj, self.dims[1]))
    }

    /// Unclamped barycentric coordinates of `p` with respect to triangle `tri`.
    pub fn barycentric(&self, tri: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangles[tri].map(|v| self.nodes[v]);
        let (u, v, w) = (b - a, c - a, p - a);
        let det = u.x * v.y - u.y * v.x;
        let s = (w.x * v.y - w.y * v.x) / det;
        let t = (u.x * w.y - u.y * w.x) / det;
        [1.0 - s - t, s, t]
    }

    /// Locates `p`, preferring the lowest-indexed containing triangle.
    pub fn locate(&self, p: Point) -> Result<PointLocation> {
        let (i, j) = self.cell_of(p);
        let b = j * self.dims[0] + i;
        let candidates = &self.bucket_items[self.bucket_start[b]..self.bucket_start[b + 1]];

        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for &k in candidates {
            let w = self.barycentric(k as usize, p);
            let min = w[0].min(w[1]).min(w[2]);
            if min >= -EDGE_TOLERANCE {
                return Ok(finish(k as usize, w));
            }
            if best.is_none_or(|(m, _, _)| min > m) {
                best = Some((min, k as usize, w));
            }
        }
        // Bucket miss: brute-force scan in triangle order.
        for k in 0..self.triangles.len() {
            let w = self.barycentric(k, p);
            let min = w[0].min(w[1]).min(w[2]);
            if min >= -EDGE_TOLERANCE {
                return Ok(finish(k, w));
            }
            if best.is_none_or(|(m, _, _)| min > m) {
                best = Some((min, k, w));
            }
        }
        match best {
            Some((min, k, w)) if min >= -HULL_TOLERANCE => Ok(finish(k, w)),
            _ => Err(Error::OutOfDomain { x: p.x, y: p.y }),
        }
    }

    /// Point reconstructed from a location.
    pub fn reconstruct(&self, loc: &PointLocation) -> Point {
        let t = self.triangles[loc.triangle];
        let c = (0..3).fold(nalgebra::Vector2::zeros(), |acc, k| acc + self.nodes[t[k]].coords * loc.barycentric[k]);
        Point::from(c)
    }
}

fn finish(triangle: usize, mut w: [f64; 3]) -> PointLocation {
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s = w[0] + w[1] + w[2];
    PointLocation { triangle, barycentric: w.map(|x| x / s) }
}
