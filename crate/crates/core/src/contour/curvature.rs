use std::f64::consts::{PI, TAU};

use super::{check_scale, ContourError, CurvatureProfile, CurveSide, NormalizedContour, Point};

/// Side of the curve facing its centroid: the left side when the polygon
/// closed by the end-to-start chord winds counter-clockwise.
pub fn interior_side(points: &[Point]) -> CurveSide {
    let n = points.len();
    let mut twice_area = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        twice_area += a[0] * b[1] - b[0] * a[1];
    }
    if twice_area >= 0.0 {
        CurveSide::Left
    } else {
        CurveSide::Right
    }
}

/// Multi-scale integral curvature of a normalized contour.
///
/// For each radius and each point, the disk centered on the point is split
/// by the connected piece of curve passing through its center (extended
/// along the end tangent where the curve stops inside the disk). The value
/// is the fraction of the disk area on the interior side.
pub fn integral_curvature(
    contour: &NormalizedContour,
    scales: &[f64],
) -> Result<CurvatureProfile, ContourError> {
    for &r in scales {
        check_scale(r)?;
    }
    if contour.points.len() < 2 {
        return Err(ContourError::DegenerateContour("fewer than two points".into()));
    }
    let values = scales
        .iter()
        .map(|&r| {
            (0..contour.points.len())
                .map(|i| integral_curvature_at(&contour.points, i, r, contour.interior))
                .collect()
        })
        .collect();
    Ok(CurvatureProfile {
        scales: scales.to_vec(),
        values,
        interior: contour.interior,
    })
}

/// Interior area fraction of the disk of radius `r` centered on `points[index]`.
pub fn integral_curvature_at(points: &[Point], index: usize, r: f64, interior: CurveSide) -> f64 {
    let left = left_area(points, index, r) / (PI * r * r);
    let value = match interior {
        CurveSide::Left => left,
        CurveSide::Right => 1.0 - left,
    };
    value.clamp(0.0, 1.0)
}

/// Area of the disk part lying left of the local curve piece.
fn left_area(points: &[Point], index: usize, r: f64) -> f64 {
    let c = points[index];
    let rel = |p: Point| [p[0] - c[0], p[1] - c[1]];
    let inside = |p: Point| {
        let q = rel(p);
        q[0] * q[0] + q[1] * q[1] <= r * r
    };
    let last = points.len() - 1;

    let mut behind = Vec::new();
    let mut j = index;
    let entry = loop {
        if j == 0 {
            break ray_exit(rel(points[0]), direction(points[1], points[0]), r);
        }
        let q = points[j - 1];
        if !inside(q) {
            break segment_exit(rel(points[j]), rel(q), r);
        }
        behind.push(rel(q));
        j -= 1;
    };

    let mut ahead = Vec::new();
    let mut j = index;
    let exit = loop {
        if j == last {
            break ray_exit(rel(points[last]), direction(points[last - 1], points[last]), r);
        }
        let q = points[j + 1];
        if !inside(q) {
            break segment_exit(rel(points[j]), rel(q), r);
        }
        ahead.push(rel(q));
        j += 1;
    };

    let chain = std::iter::once(entry)
        .chain(behind.into_iter().rev())
        .chain(std::iter::once([0.0, 0.0]))
        .chain(ahead)
        .chain(std::iter::once(exit));
    // Shoelace over the chain closed by the chord exit -> entry.
    let mut twice_area = 0.0;
    let mut prev: Option<Point> = None;
    for p in chain {
        if let Some(q) = prev {
            twice_area += q[0] * p[1] - p[0] * q[1];
        }
        prev = Some(p);
    }
    twice_area += exit[0] * entry[1] - entry[0] * exit[1];

    // Circular segment between the chord and the counter-clockwise arc from
    // exit back to entry.
    let mut theta = entry[1].atan2(entry[0]) - exit[1].atan2(exit[0]);
    if theta < 0.0 {
        theta += TAU;
    }
    0.5 * twice_area + 0.5 * r * r * (theta - theta.sin())
}

fn direction(from: Point, to: Point) -> Point {
    let d = [to[0] - from[0], to[1] - from[1]];
    let len = d[0].hypot(d[1]);
    [d[0] / len, d[1] / len]
}

/// Where the segment from `p` (inside the disk) to `q` (outside) crosses
/// the circle of radius `r` about the origin.
fn segment_exit(p: Point, q: Point, r: f64) -> Point {
    let d = [q[0] - p[0], q[1] - p[1]];
    let t = exit_parameter(p, d, r).clamp(0.0, 1.0);
    [p[0] + t * d[0], p[1] + t * d[1]]
}

/// Where the ray from `p` (inside the disk) along unit `d` leaves it.
fn ray_exit(p: Point, d: Point, r: f64) -> Point {
    let t = exit_parameter(p, d, r).max(0.0);
    [p[0] + t * d[0], p[1] + t * d[1]]
}

fn exit_parameter(p: Point, d: Point, r: f64) -> f64 {
    let a = d[0] * d[0] + d[1] * d[1];
    let b = 2.0 * (p[0] * d[0] + p[1] * d[1]);
    let c = p[0] * p[0] + p[1] * p[1] - r * r;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    (-b + disc.sqrt()) / (2.0 * a)
}
