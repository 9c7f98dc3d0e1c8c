use super::{ContourConfig, CurvatureProfile, Keypoint, KeypointKind};

/// Centered moving average. Windows are truncated at the ends.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n.saturating_sub(1));
            let run = &values[lo..=hi];
            run.iter().sum::<f64>() / run.len() as f64
        })
        .collect()
}

/// Keypoints of every scale: both endpoints plus each strict local extremum
/// of the smoothed curvature away from the end margins. Ordered by scale,
/// then index.
pub fn extract_keypoints(profile: &CurvatureProfile, config: &ContourConfig) -> Vec<Keypoint> {
    let mut out = Vec::new();
    for (scale_index, (row, &scale)) in profile.values.iter().zip(&profile.scales).enumerate() {
        let n = row.len();
        if n == 0 {
            continue;
        }
        let smoothed = smooth(row, config.smoothing_window);
        let kp = |index, kind| Keypoint {
            index,
            scale_index,
            scale,
            kind,
        };
        out.push(kp(0, KeypointKind::Endpoint));
        let lo = config.endpoint_margin.max(1);
        let hi = n.saturating_sub(config.endpoint_margin.max(1));
        let eps = config.extremum_tolerance;
        for i in lo..hi {
            let (prev, here, next) = (smoothed[i - 1], smoothed[i], smoothed[i + 1]);
            if here > prev + eps && here > next + eps {
                out.push(kp(i, KeypointKind::Max));
            } else if here < prev - eps && here < next - eps {
                out.push(kp(i, KeypointKind::Min));
            }
        }
        if n > 1 {
            out.push(kp(n - 1, KeypointKind::Endpoint));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::CurveSide;

    fn profile(values: Vec<f64>) -> CurvatureProfile {
        CurvatureProfile {
            scales: vec![0.04],
            values: vec![values],
            interior: CurveSide::Left,
        }
    }

    fn kinds(kps: &[Keypoint]) -> Vec<(usize, KeypointKind)> {
        kps.iter().map(|k| (k.index, k.kind)).collect()
    }

    #[test]
    fn constant_gives_endpoints_only() {
        let kps = extract_keypoints(&profile(vec![0.5; 64]), &ContourConfig::default());
        assert_eq!(
            kinds(&kps),
            vec![(0, KeypointKind::Endpoint), (63, KeypointKind::Endpoint)]
        );
    }

    #[test]
    fn triangle_peak() {
        let values: Vec<f64> = (0..65).map(|i| 1.0 - (i as f64 - 32.0).abs() / 32.0).collect();
        let kps = extract_keypoints(&profile(values), &ContourConfig::default());
        assert_eq!(
            kinds(&kps),
            vec![
                (0, KeypointKind::Endpoint),
                (32, KeypointKind::Max),
                (64, KeypointKind::Endpoint)
            ]
        );
    }

    #[test]
    fn smoothing_truncates_at_edges() {
        let s = smooth(&[1.0, 2.0, 3.0, 4.0, 5.0], 5);
        assert_eq!(s, vec![2.0, 2.5, 3.0, 3.5, 4.0]);
        assert_eq!(smooth(&[1.0, 5.0], 1), vec![1.0, 5.0]);
    }

    #[test]
    fn margin_suppresses_edge_extrema() {
        let bump = |i: usize, c: usize| 0.5 + (0.4 - 0.1 * i.abs_diff(c) as f64).max(0.0);
        let values: Vec<f64> = (0..40).map(|i| bump(i, 2).max(bump(i, 20))).collect();
        let kps = extract_keypoints(&profile(values), &ContourConfig::default());
        let maxima: Vec<usize> = kps
            .iter()
            .filter(|k| k.kind == KeypointKind::Max)
            .map(|k| k.index)
            .collect();
        assert_eq!(maxima, vec![20]);
    }
}
