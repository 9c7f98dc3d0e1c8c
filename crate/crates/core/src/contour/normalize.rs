use super::{
    dist, interior_side, Contour, ContourError, EarSide, NormalizedContour, Point,
    MIN_CONTOUR_POINTS,
};

/// Resamples a polyline to `count` points spaced uniformly by arc length.
/// The first and last input points are kept exactly.
pub fn resample_by_arc_length(points: &[Point], count: usize) -> Vec<Point> {
    assert!(count >= 2 && points.len() >= 2);
    let mut cumulative = Vec::with_capacity(points.len());
    cumulative.push(0.0);
    for w in points.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + dist(w[0], w[1]));
    }
    let total = *cumulative.last().unwrap();

    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for j in 0..count {
        if j == count - 1 {
            out.push(*points.last().unwrap());
            break;
        }
        let target = total * j as f64 / (count - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 {
            ((target - cumulative[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (a, b) = (points[seg], points[seg + 1]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    out
}

/// Resamples to `count` points, mirrors left ears, centers on the centroid
/// and scales to unit arc length.
pub fn normalize_contour(contour: &Contour, count: usize) -> Result<NormalizedContour, ContourError> {
    let mut points: Vec<Point> = Vec::with_capacity(contour.points.len());
    for &p in &contour.points {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(ContourError::DegenerateContour("non-finite coordinate".into()));
        }
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    if points.len() < MIN_CONTOUR_POINTS {
        return Err(ContourError::DegenerateContour(format!(
            "{} distinct points, need at least {MIN_CONTOUR_POINTS}",
            points.len()
        )));
    }
    if count < MIN_CONTOUR_POINTS {
        return Err(ContourError::InvalidConfig("resample_count below 32"));
    }
    let length = super::polyline_length(&points);
    if !(length > 0.0) {
        return Err(ContourError::DegenerateContour("zero arc length".into()));
    }

    let mut resampled = resample_by_arc_length(&points, count);
    if contour.side == EarSide::Left {
        for p in &mut resampled {
            p[0] = -p[0];
        }
    }
    let n = resampled.len() as f64;
    let cx = resampled.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = resampled.iter().map(|p| p[1]).sum::<f64>() / n;
    let scale = 1.0 / super::polyline_length(&resampled);
    for p in &mut resampled {
        p[0] = (p[0] - cx) * scale;
        p[1] = (p[1] - cy) * scale;
    }
    let interior = interior_side(&resampled);
    Ok(NormalizedContour {
        points: resampled,
        side: contour.side,
        source: contour.source.clone(),
        interior,
    })
}
