//! Association of estimates with true DOAs and error statistics (degrees).

use crate::array::DoaVector;

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(m - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, m - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// Matches estimates to true DOAs by minimizing the summed squared angular
/// error over all permutations.  Returns `perm` with `perm[m]` the estimate
/// assigned to source `m`, and the signed errors `estimate - truth` in degrees.
///
/// # Panics
/// If the two vectors differ in length.
pub fn match_and_error(estimate: &DoaVector, truth: &DoaVector) -> (Vec<usize>, Vec<f64>) {
    assert_eq!(
        estimate.len(),
        truth.len(),
        "estimate and truth differ in length"
    );
    let est = estimate.to_degrees();
    let tru = truth.to_degrees();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(tru.len()) {
        let cost: f64 = perm
            .iter()
            .enumerate()
            .map(|(m, &k)| (est[k] - tru[m]).powi(2))
            .sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, perm));
        }
    }
    let (_, perm) = best.expect("at least one permutation");
    let errors = perm
        .iter()
        .enumerate()
        .map(|(m, &k)| est[k] - tru[m])
        .collect();
    (perm, errors)
}

/// True when every matched error is within `radius_deg` (inclusive).
pub fn classify_wanted(estimate: &DoaVector, truth: &DoaVector, radius_deg: f64) -> bool {
    let (_, errors) = match_and_error(estimate, truth);
    errors.iter().all(|e| e.abs() <= radius_deg)
}

/// Pooled RMSE over trials and sources; NaN for an empty set.
pub fn pooled_rmse(errors: &[Vec<f64>]) -> f64 {
    let count: usize = errors.iter().map(Vec::len).sum();
    if count == 0 {
        return f64::NAN;
    }
    let sum: f64 = errors.iter().flatten().map(|e| e * e).sum();
    (sum / count as f64).sqrt()
}

/// RMSE of each source separately over trials.
pub fn per_source_rmse(errors: &[Vec<f64>], m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| {
            if errors.is_empty() {
                return f64::NAN;
            }
            let sum: f64 = errors.iter().map(|e| e[k] * e[k]).sum();
            (sum / errors.len() as f64).sqrt()
        })
        .collect()
}
