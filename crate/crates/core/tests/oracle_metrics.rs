//! Correlation metrics checked against structurally independent
//! reference implementations: Pearson via population moments
//! (E[xy] - E[x]E[y] over population standard deviations) instead of
//! centered sums, and ranks via O(n²) counting instead of sorting.

use audioaes::metrics::{pearson, spearman};
use audioaes::rng::stream_rng;
use rand::Rng;

const TOL: f64 = 1e-12;

/// Pearson correlation from raw population moments.
fn reference_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let ex = x.iter().sum::<f64>() / n;
    let ey = y.iter().sum::<f64>() / n;
    let exy = x.iter().zip(y).map(|(&a, &b)| a * b).sum::<f64>() / n;
    let exx = x.iter().map(|&a| a * a).sum::<f64>() / n;
    let eyy = y.iter().map(|&b| b * b).sum::<f64>() / n;
    let cov = exy - ex * ey;
    let sx = (exx - ex * ex).sqrt();
    let sy = (eyy - ey * ey).sqrt();
    cov / (sx * sy)
}

/// Average ranks by counting comparisons, quadratic but obviously right:
/// rank = (#smaller) + (#equal + 1)/2.
fn reference_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let smaller = values.iter().filter(|&&w| w < v).count() as f64;
            let equal = values.iter().filter(|&&w| w == v).count() as f64;
            smaller + (equal + 1.0) / 2.0
        })
        .collect()
}

fn reference_spearman(x: &[f64], y: &[f64]) -> f64 {
    reference_pearson(&reference_ranks(x), &reference_ranks(y))
}

/// Draw a vector from a coarse half-integer grid so ties are common.
fn tied_vector(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| rng.random_range(0..=18) as f64 / 2.0 + 1.0)
        .collect()
}

#[test]
fn pearson_matches_the_moment_form_on_random_tied_vectors() {
    let mut rng = stream_rng(20_240_817, 101);
    let mut checked = 0;
    for _ in 0..100 {
        let len = rng.random_range(2..=50);
        let x = tied_vector(&mut rng, len);
        let y = tied_vector(&mut rng, len);
        match pearson(&x, &y) {
            Ok(r) => {
                let reference = reference_pearson(&x, &y);
                assert!(
                    (r - reference).abs() < TOL,
                    "len {len}: {r} vs {reference}"
                );
                checked += 1;
            }
            // Constant draws are legitimately undefined; the reference
            // would divide by zero on them too.
            Err(_) => assert!(
                x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0])
            ),
        }
    }
    assert!(checked >= 80, "only {checked} pairs were comparable");
}

#[test]
fn spearman_matches_counting_ranks_on_random_tied_vectors() {
    let mut rng = stream_rng(20_240_817, 102);
    let mut checked = 0;
    for _ in 0..100 {
        let len = rng.random_range(2..=50);
        let x = tied_vector(&mut rng, len);
        let y = tied_vector(&mut rng, len);
        match spearman(&x, &y) {
            Ok(r) => {
                let reference = reference_spearman(&x, &y);
                assert!(
                    (r - reference).abs() < TOL,
                    "len {len}: {r} vs {reference}"
                );
                checked += 1;
            }
            Err(_) => {
                // Undefined when either side is constant (all-tied rank
                // vectors have zero variance).
                let rx = reference_ranks(&x);
                let ry = reference_ranks(&y);
                assert!(
                    rx.iter().all(|&v| v == rx[0]) || ry.iter().all(|&v| v == ry[0])
                );
            }
        }
    }
    assert!(checked >= 80, "only {checked} pairs were comparable");
}

#[test]
fn the_canonical_example_is_exact_in_both_metrics() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [1.0, 3.0, 2.0, 4.0];
    assert_eq!(pearson(&x, &y).unwrap(), 0.8);
    assert_eq!(spearman(&x, &y).unwrap(), 0.8);
    // The reference implementations agree to working precision.
    assert!((reference_pearson(&x, &y) - 0.8).abs() < TOL);
    assert!((reference_spearman(&x, &y) - 0.8).abs() < TOL);
}

#[test]
fn spearman_handles_heavy_ties_identically_to_the_reference() {
    // Deliberately pathological: long runs of equal values.
    let x = [1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 3.0];
    let y = [2.0, 2.0, 5.0, 5.0, 5.0, 5.0, 7.0, 7.0, 2.0];
    let r = spearman(&x, &y).unwrap();
    let reference = reference_spearman(&x, &y);
    assert!((r - reference).abs() < TOL, "{r} vs {reference}");
}
