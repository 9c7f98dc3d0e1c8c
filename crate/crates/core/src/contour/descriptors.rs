use super::{ContourConfig, CurvatureProfile, Descriptor, EarSide, Keypoint};

/// One descriptor per pair of same-scale keypoints at least `min_span`
/// samples apart: the raw curvature between them, linearly resampled to
/// `descriptor_dim` values and scaled to unit Euclidean norm.
pub fn extract_descriptors(
    profile: &CurvatureProfile,
    keypoints: &[Keypoint],
    side: EarSide,
    config: &ContourConfig,
) -> Vec<Descriptor> {
    let mut out = Vec::new();
    for (scale_index, row) in profile.values.iter().enumerate() {
        let mut at_scale: Vec<usize> = keypoints
            .iter()
            .filter(|k| k.scale_index == scale_index)
            .map(|k| k.index)
            .collect();
        at_scale.sort_unstable();
        at_scale.dedup();
        for (i, &a) in at_scale.iter().enumerate() {
            for &b in &at_scale[i + 1..] {
                if b - a < config.min_span.max(1) {
                    continue;
                }
                let Some(vector) = segment_vector(&row[a..=b], config.descriptor_dim) else {
                    continue;
                };
                out.push(Descriptor {
                    vector,
                    scale: profile.scales[scale_index],
                    span: (a, b),
                    side,
                });
            }
        }
    }
    out
}

fn segment_vector(segment: &[f64], dim: usize) -> Option<Vec<f64>> {
    let last = (segment.len() - 1) as f64;
    let mut v: Vec<f64> = (0..dim)
        .map(|j| {
            let pos = last * j as f64 / (dim - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(segment.len() - 1);
            let t = pos - lo as f64;
            segment[lo] * (1.0 - t) + segment[hi] * t
        })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return None;
    }
    for x in &mut v {
        *x /= norm;
    }
    Some(v)
}
