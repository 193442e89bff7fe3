//! Small planar polygon toolbox: area, convex hull, simplification,
//! point-in-polygon tests and scanline rasterization.
//!
//! Polygons are closed rings given as vertex lists without a repeated
//! end point.

use nalgebra::Vector2;

/// Signed shoelace area (positive for counter-clockwise rings).
pub fn signed_area(poly: &[Vector2<f64>]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub fn area(poly: &[Vector2<f64>]) -> f64 {
    signed_area(poly).abs()
}

pub fn perimeter(poly: &[Vector2<f64>]) -> f64 {
    let n = poly.len();
    if n < 2 {
        return 0.0;
    }
    (0..n).map(|i| (poly[(i + 1) % n] - poly[i]).norm()).sum()
}

/// Convex hull by Andrew's monotone chain; returns vertices in
/// counter-clockwise order.
pub fn convex_hull(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut pts: Vec<Vector2<f64>> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut lower: Vec<Vector2<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vector2<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn point_segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 < 1e-24 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn douglas_peucker_open(points: &[Vector2<f64>], tol: f64, out: &mut Vec<Vector2<f64>>) {
    if points.len() < 3 {
        out.extend(points.iter().take(points.len().saturating_sub(1)));
        return;
    }
    let (first, last) = (points[0], points[points.len() - 1]);
    let mut max_d = 0.0;
    let mut max_i = 0;
    for (i, p) in points.iter().enumerate().skip(1).take(points.len() - 2) {
        let d = point_segment_distance(p, &first, &last);
        if d > max_d {
            max_d = d;
            max_i = i;
        }
    }
    if max_d > tol {
        douglas_peucker_open(&points[..=max_i], tol, out);
        douglas_peucker_open(&points[max_i..], tol, out);
    } else {
        out.push(first);
    }
}

/// Douglas-Peucker simplification of a closed ring. The ring is split
/// at its two mutually farthest vertices so the simplification has no
/// anchor-point bias.
pub fn simplify_closed(poly: &[Vector2<f64>], tol: f64) -> Vec<Vector2<f64>> {
    let n = poly.len();
    if n <= 3 {
        return poly.to_vec();
    }
    let (mut i0, mut i1, mut best) = (0usize, n / 2, -1.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (poly[j] - poly[i]).norm_squared();
            if d > best {
                best = d;
                i0 = i;
                i1 = j;
            }
        }
    }
    let chain_a: Vec<Vector2<f64>> = (i0..=i1).map(|i| poly[i]).collect();
    let mut chain_b: Vec<Vector2<f64>> = (i1..n).chain(0..=i0).map(|i| poly[i]).collect();
    if chain_b.len() < 2 {
        chain_b = vec![poly[i1], poly[i0]];
    }
    let mut out = Vec::new();
    douglas_peucker_open(&chain_a, tol, &mut out);
    douglas_peucker_open(&chain_b, tol, &mut out);
    out
}

/// Even-odd point-in-polygon test.
pub fn contains_point(poly: &[Vector2<f64>], p: &Vector2<f64>) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi.y > p.y) != (pj.y > p.y) {
            let x = pi.x + (p.y - pi.y) / (pj.y - pi.y) * (pj.x - pi.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Simplicity check: no two non-adjacent edges intersect.
pub fn is_simple(poly: &[Vector2<f64>]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let seg = |i: usize| (poly[i], poly[(i + 1) % n]);
    for i in 0..n {
        for j in (i + 1)..n {
            // skip adjacent edges (shared vertex)
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a1, a2) = seg(i);
            let (b1, b2) = seg(j);
            if segments_intersect(&a1, &a2, &b1, &b2) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect(
    a1: &Vector2<f64>,
    a2: &Vector2<f64>,
    b1: &Vector2<f64>,
    b2: &Vector2<f64>,
) -> bool {
    let d = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let d1 = d(b1, b2, a1);
    let d2 = d(b1, b2, a2);
    let d3 = d(a1, a2, b1);
    let d4 = d(a1, a2, b2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Integer pixels whose centers `(x + 0.5, y + 0.5)` lie inside the
/// polygon, restricted to `[0, width) x [0, height)`. Scanline even-odd
/// fill.
pub fn rasterize(poly: &[Vector2<f64>], width: u32, height: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    if poly.len() < 3 {
        return out;
    }
    let y_min = poly.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y_max = poly.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let row_lo = (y_min - 0.5).floor().max(0.0) as i64;
    let row_hi = ((y_max - 0.5).ceil() as i64).min(height as i64 - 1);
    let n = poly.len();
    let mut crossings: Vec<f64> = Vec::new();
    for row in row_lo..=row_hi {
        let yc = row as f64 + 0.5;
        crossings.clear();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            if (a.y > yc) != (b.y > yc) {
                crossings.push(a.x + (yc - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
        crossings.sort_by(|p, q| p.partial_cmp(q).unwrap());
        for pair in crossings.chunks(2) {
            if pair.len() < 2 {
                break;
            }
            let x_lo = (pair[0] - 0.5).ceil().max(0.0) as i64;
            let x_hi = ((pair[1] - 0.5).floor() as i64).min(width as i64 - 1);
            for x in x_lo..=x_hi {
                out.push((x as u32, row as u32));
            }
        }
    }
    out
}
