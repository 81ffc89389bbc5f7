//! Cross-module equivalence: the reduced class-basis walk, the spectral
//! reconstruction, and the full arc-space walk must all tell the same story.

use pulsar_core::graph::WedgeGraph;
use pulsar_core::reduction::{
    build_reduced_walk, build_t, reduced_curve, stationary, ClassDecomposition,
};
use pulsar_core::spectral::{lift, predict, principal_eigenpair, reconstruct_curve};
use pulsar_core::walk::{self, ProbabilityCurve};

fn max_gap(a: &ProbabilityCurve, b: &ProbabilityCurve) -> f64 {
    assert_eq!(a.len(), b.len());
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn assert_curves_agree(n: usize, k: usize, m: usize, steps: usize) {
    let wedge = WedgeGraph::johnson_star(n, k, m).unwrap();
    let dec = ClassDecomposition::new(n, k, m).unwrap();
    let full = walk::curve(&wedge, steps);
    let reduced = reduced_curve(&dec, steps);
    let gap = max_gap(&full, &reduced);
    assert!(gap < 1e-12, "J({n},{k}) with {m} leaves: max gap {gap:e}");
}

#[test]
fn reduced_curve_matches_the_full_walk() {
    assert_curves_agree(5, 2, 1, 200);
}

#[test]
fn reduced_curve_matches_for_a_three_subset_base() {
    assert_curves_agree(7, 3, 2, 300);
}

#[test]
fn reduced_curve_matches_with_a_large_star() {
    assert_curves_agree(8, 2, 5, 300);
}

/// The two lifted eigenvectors alone, evolved by pure phases, reproduce the
/// finding probability of the full 722-arc walk to within the weight the
/// initial state puts on the rest of the spectrum.
#[test]
fn spectral_reconstruction_tracks_the_full_walk() {
    let dec = ClassDecomposition::new(10, 2, 1).unwrap();
    let prediction = predict(&dec).unwrap();
    let t_max = 3 * prediction.tau as usize;

    let walk_red = build_reduced_walk(&dec);
    let pair = principal_eigenpair(&build_t(&dec), &stationary(&dec)).unwrap();
    let lifted = lift(&pair, &walk_red).unwrap();
    let reconstruction = reconstruct_curve(&lifted, &walk_red.initial_state(), t_max);

    let wedge = WedgeGraph::johnson_star(10, 2, 1).unwrap();
    let full = walk::curve(&wedge, t_max);

    let gap = max_gap(&full, &reconstruction);
    assert!(gap < 1e-2, "reconstruction drifts from the walk by {gap:e}");
}

/// The exact lumped spectrum predicts the full walk's first peak even on a
/// 15-vertex base, where the asymptotic series is far from its limit.
#[test]
fn full_walk_peaks_when_the_spectrum_says_so() {
    let dec = ClassDecomposition::new(6, 2, 2).unwrap();
    let prediction = predict(&dec).unwrap();
    let wedge = WedgeGraph::johnson_star(6, 2, 2).unwrap();
    let full = walk::curve(&wedge, 3 * prediction.tau as usize);

    let (t_star, peak) = full.argmax();
    let predicted = prediction.tau as i64;
    assert!(
        (t_star as i64 - predicted).abs() <= 2,
        "peak at {t_star}, predicted {predicted}"
    );
    assert!(peak > 0.7, "first peak only reaches {peak}");
}
