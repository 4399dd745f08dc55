//! Central finite-difference gradient verification.

use rand::seq::SliceRandom;

use crate::rng::substream;

/// Central-difference gradient of `f` at `point` for the given coordinates.
pub fn finite_diff_gradient<F>(f: &mut F, point: &[f64], indices: &[usize], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut perturbed = point.to_vec();
    indices
        .iter()
        .map(|&k| {
            let orig = perturbed[k];
            perturbed[k] = orig + h;
            let plus = f(&perturbed);
            perturbed[k] = orig - h;
            let minus = f(&perturbed);
            perturbed[k] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Max relative error between `analytic` and central differences on up to
/// `n_probes` randomly chosen coordinates (all of them when the parameter
/// count is smaller). The error is `|a - n| / max(1, |a|, |n|)`.
pub fn max_relative_error<F>(
    f: &mut F,
    point: &[f64],
    analytic: &[f64],
    n_probes: usize,
    h: f64,
    seed: u64,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(point.len(), analytic.len());
    let mut indices: Vec<usize> = (0..point.len()).collect();
    if indices.len() > n_probes {
        let mut rng = substream(seed, 0);
        indices.shuffle(&mut rng);
        indices.truncate(n_probes);
    }
    let numeric = finite_diff_gradient(f, point, &indices, h);
    indices
        .iter()
        .zip(&numeric)
        .map(|(&k, &n)| {
            let a = analytic[k];
            (a - n).abs() / 1.0_f64.max(a.abs()).max(n.abs())
        })
        .fold(0.0, f64::max)
}
