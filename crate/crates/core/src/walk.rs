//! The discrete-time Grover walk on symmetric arcs.
//!
//! One step is `U = S (2 K* K - I)`: the coin reflects each terminus group
//! of arcs through its local uniform vector (and acts as `-I` on groups
//! whose terminus is marked), then the shift moves every amplitude to the
//! reversed arc. The walker starts uniformly on the base component's arcs
//! and is "found" with the probability mass sitting on the marked
//! component's arcs.
//!
//! The step is data-parallel over terminus groups. With the `parallel`
//! feature (on by default) large instances fan out over a rayon pool; the
//! sequential kernel is always compiled and both paths sum each group in
//! the same fixed order, so their outputs are bit-identical.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, WedgeGraph};

/// Dense materialisations refuse instances with more arcs than this.
pub const MATERIALIZE_ARC_CAP: usize = 3000;

/// Below this many arcs the step always runs on the calling thread;
/// fan-out overhead would dominate. Both paths agree bit-for-bit, so the
/// cutoff never changes results.
#[cfg(feature = "parallel")]
const PARALLEL_CUTOFF: usize = 4096;

/// A walk state: one complex amplitude per symmetric arc.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcState {
    amps: Vec<Complex64>,
}

impl ArcState {
    /// The zero state on `len` arcs.
    pub fn zeros(len: usize) -> ArcState {
        ArcState {
            amps: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Wraps raw amplitudes.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> ArcState {
        ArcState { amps }
    }

    /// Number of arcs.
    pub fn len(&self) -> usize {
        self.amps.len()
    }

    /// True when the state has no arcs at all.
    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// Amplitudes indexed by arc id.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Mutable amplitudes indexed by arc id.
    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &ArcState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .fold(Complex64::new(0.0, 0.0), |acc, z| acc + z)
    }

    /// Probability mass on a set of arcs.
    pub fn probability_on(&self, arcs: impl IntoIterator<Item = usize>) -> f64 {
        arcs.into_iter().map(|a| self.amps[a].norm_sqr()).sum()
    }

    /// View as an nalgebra column vector (copies).
    pub fn to_vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amps)
    }
}

/// The uniform superposition over the base component's arcs, the standard
/// initial state for pulsation experiments.
pub fn uniform_initial(wedge: &WedgeGraph) -> ArcState {
    let mut state = ArcState::zeros(wedge.arc_count());
    let base = wedge.base_arcs();
    let amp = Complex64::new(1.0 / (base.len() as f64).sqrt(), 0.0);
    for a in base {
        state.amps[a] = amp;
    }
    state
}

/// Coin kernel for one terminus group: reflect through the group's uniform
/// vector, or negate wholesale when the terminus is marked. Writes the
/// group's coined amplitudes in terminus-grouped order.
#[inline]
fn coin_group(arcs: &[u32], src: &[Complex64], out: &mut [Complex64], marked: bool) {
    if marked {
        for (slot, &a) in out.iter_mut().zip(arcs) {
            *slot = -src[a as usize];
        }
    } else {
        let mut sum = Complex64::new(0.0, 0.0);
        for &a in arcs {
            sum += src[a as usize];
        }
        let scale = 2.0 / arcs.len() as f64;
        for (slot, &a) in out.iter_mut().zip(arcs) {
            *slot = scale * sum - src[a as usize];
        }
    }
}

fn coin_into_sequential(wedge: &WedgeGraph, src: &[Complex64], coined: &mut [Complex64]) {
    let g = wedge.graph();
    let offsets = g.in_offsets();
    for v in 0..g.vertex_count() {
        let (lo, hi) = (offsets[v] as usize, offsets[v + 1] as usize);
        coin_group(g.arcs_into(v), src, &mut coined[lo..hi], wedge.is_target(v));
    }
}

#[cfg(feature = "parallel")]
fn coin_into_parallel(wedge: &WedgeGraph, src: &[Complex64], coined: &mut [Complex64]) {
    let g = wedge.graph();
    let offsets = g.in_offsets();
    // Carve the coined buffer into per-terminus slices so every group is
    // written by exactly one task.
    let mut groups: Vec<(usize, &mut [Complex64])> = Vec::with_capacity(g.vertex_count());
    let mut rest = coined;
    for v in 0..g.vertex_count() {
        let len = (offsets[v + 1] - offsets[v]) as usize;
        let (head, tail) = rest.split_at_mut(len);
        groups.push((v, head));
        rest = tail;
    }
    groups.into_par_iter().for_each(|(v, out)| {
        coin_group(g.arcs_into(v), src, out, wedge.is_target(v));
    });
}

fn gather_sequential(gather: &[u32], coined: &[Complex64], out: &mut [Complex64]) {
    for (slot, &idx) in out.iter_mut().zip(gather) {
        *slot = coined[idx as usize];
    }
}

#[cfg(feature = "parallel")]
fn gather_parallel(gather: &[u32], coined: &[Complex64], out: &mut [Complex64]) {
    out.par_iter_mut().zip(gather.par_iter()).for_each(|(slot, &idx)| {
        *slot = coined[idx as usize];
    });
}

fn step_into_sequential(
    wedge: &WedgeGraph,
    src: &[Complex64],
    coined: &mut [Complex64],
    out: &mut [Complex64],
) {
    coin_into_sequential(wedge, src, coined);
    gather_sequential(wedge.graph().shift_gather(), coined, out);
}

#[cfg(feature = "parallel")]
fn step_into_parallel(
    wedge: &WedgeGraph,
    src: &[Complex64],
    coined: &mut [Complex64],
    out: &mut [Complex64],
) {
    coin_into_parallel(wedge, src, coined);
    gather_parallel(wedge.graph().shift_gather(), coined, out);
}

fn step_into(wedge: &WedgeGraph, src: &[Complex64], coined: &mut [Complex64], out: &mut [Complex64]) {
    #[cfg(feature = "parallel")]
    if src.len() >= PARALLEL_CUTOFF {
        step_into_parallel(wedge, src, coined, out);
        return;
    }
    step_into_sequential(wedge, src, coined, out);
}

/// One walk step. Dispatches to the rayon kernel on large instances when
/// the `parallel` feature is enabled; results are identical either way.
pub fn step(wedge: &WedgeGraph, state: &ArcState) -> ArcState {
    assert_eq!(state.len(), wedge.arc_count(), "state size mismatch");
    let mut coined = vec![Complex64::new(0.0, 0.0); state.len()];
    let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
    step_into(wedge, &state.amps, &mut coined, &mut out);
    ArcState { amps: out }
}

/// One walk step on the single-threaded kernel, regardless of features.
pub fn step_sequential(wedge: &WedgeGraph, state: &ArcState) -> ArcState {
    assert_eq!(state.len(), wedge.arc_count(), "state size mismatch");
    let mut coined = vec![Complex64::new(0.0, 0.0); state.len()];
    let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
    step_into_sequential(wedge, &state.amps, &mut coined, &mut out);
    ArcState { amps: out }
}

/// Applies `steps` walk steps, reusing internal buffers.
pub fn evolve(wedge: &WedgeGraph, initial: &ArcState, steps: usize) -> ArcState {
    assert_eq!(initial.len(), wedge.arc_count(), "state size mismatch");
    let mut current = initial.amps.clone();
    let mut coined = vec![Complex64::new(0.0, 0.0); current.len()];
    let mut next = vec![Complex64::new(0.0, 0.0); current.len()];
    for _ in 0..steps {
        step_into(wedge, &current, &mut coined, &mut next);
        std::mem::swap(&mut current, &mut next);
    }
    ArcState { amps: current }
}

/// Probability of finding the walker on the marked component.
pub fn finding_probability(wedge: &WedgeGraph, state: &ArcState) -> f64 {
    state.probability_on(wedge.target_arcs())
}

/// A finding-probability time series `p(0), p(1), .., p(t_max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityCurve {
    values: Vec<f64>,
}

impl ProbabilityCurve {
    /// Wraps raw samples; index is the time step.
    pub fn new(values: Vec<f64>) -> ProbabilityCurve {
        ProbabilityCurve { values }
    }

    /// All samples, indexed by time step.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample at time `t`.
    pub fn get(&self, t: usize) -> f64 {
        self.values[t]
    }

    /// Number of samples (`t_max + 1`).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the curve holds no samples.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Global maximum as `(t, p)`; the earliest time wins ties.
    pub fn argmax(&self) -> (usize, f64) {
        self.extremum_on(0..self.values.len(), false)
            .expect("curve is non-empty")
    }

    /// Maximum over a half-open window, clamped to the curve; `None` if the
    /// clamped window is empty.
    pub fn max_on(&self, window: std::ops::Range<usize>) -> Option<(usize, f64)> {
        self.extremum_on(window, false)
    }

    /// Minimum over a half-open window, clamped to the curve; `None` if the
    /// clamped window is empty.
    pub fn min_on(&self, window: std::ops::Range<usize>) -> Option<(usize, f64)> {
        self.extremum_on(window, true)
    }

    /// The first crest as `(t, p)`: the earliest `t >= 1` that reaches at
    /// least half the global maximum and is not exceeded during the next
    /// five steps.
    ///
    /// A plain argmax can land on a later crest when the oscillation is not
    /// perfectly periodic and a revival overshoots the first peak by a hair;
    /// the half-height gate skips the initial rise and the short lookahead
    /// rides over the even/odd ripple that bipartite composites superpose on
    /// the envelope without reaching the next crest.
    pub fn first_peak(&self) -> (usize, f64) {
        const LOOKAHEAD: usize = 5;
        let (_, global) = self.argmax();
        for (t, &p) in self.values.iter().enumerate().skip(1) {
            if p < 0.5 * global {
                continue;
            }
            let end = (t + 1 + LOOKAHEAD).min(self.values.len());
            if self.values[t + 1..end].iter().all(|&q| q <= p) {
                return (t, p);
            }
        }
        self.argmax()
    }

    fn extremum_on(&self, window: std::ops::Range<usize>, minimum: bool) -> Option<(usize, f64)> {
        let lo = window.start.min(self.values.len());
        let hi = window.end.min(self.values.len());
        let mut best: Option<(usize, f64)> = None;
        for t in lo..hi {
            let p = self.values[t];
            let better = match best {
                None => true,
                Some((_, b)) => {
                    if minimum {
                        p < b
                    } else {
                        p > b
                    }
                }
            };
            if better {
                best = Some((t, p));
            }
        }
        best
    }
}

/// Runs the walk from the uniform initial state and records the finding
/// probability at every step up to `t_max` inclusive.
pub fn curve(wedge: &WedgeGraph, t_max: usize) -> ProbabilityCurve {
    curve_from(wedge, &uniform_initial(wedge), t_max)
}

/// Like [`curve`], but from an arbitrary initial state.
pub fn curve_from(wedge: &WedgeGraph, initial: &ArcState, t_max: usize) -> ProbabilityCurve {
    assert_eq!(initial.len(), wedge.arc_count(), "state size mismatch");
    let mut current = initial.amps.clone();
    let mut coined = vec![Complex64::new(0.0, 0.0); current.len()];
    let mut next = vec![Complex64::new(0.0, 0.0); current.len()];
    let mut values = Vec::with_capacity(t_max + 1);
    let target = wedge.target_arcs();
    values.push(current[target.clone()].iter().map(|a| a.norm_sqr()).sum());
    for _ in 0..t_max {
        step_into(wedge, &current, &mut coined, &mut next);
        std::mem::swap(&mut current, &mut next);
        values.push(current[target.clone()].iter().map(|a| a.norm_sqr()).sum());
    }
    ProbabilityCurve { values }
}

fn check_materialize_cap(wedge: &WedgeGraph) -> Result<()> {
    if wedge.arc_count() > MATERIALIZE_ARC_CAP {
        return Err(Error::SizeCap(format!(
            "{} arcs exceed the dense materialisation cap of {MATERIALIZE_ARC_CAP}",
            wedge.arc_count()
        )));
    }
    Ok(())
}

/// Dense shift operator: `(S psi)(a) = psi(a^{-1})`.
pub fn shift_matrix(wedge: &WedgeGraph) -> Result<DMatrix<f64>> {
    check_materialize_cap(wedge)?;
    let n = wedge.arc_count();
    let mut s = DMatrix::zeros(n, n);
    for a in 0..n {
        s[(a, Graph::inverse(a))] = 1.0;
    }
    Ok(s)
}

/// Dense boundary operator and its row-to-vertex map.
///
/// Rows range over the *unmarked* vertices in increasing id;
/// `K[v, a] = 1 / sqrt(deg(t(a)))` when arc `a` ends at the row's vertex.
/// Restricting rows this way makes `K K*` exactly the identity.
pub fn boundary_matrix(wedge: &WedgeGraph) -> Result<(DMatrix<f64>, Vec<usize>)> {
    check_materialize_cap(wedge)?;
    let g = wedge.graph();
    let rows: Vec<usize> = (0..g.vertex_count()).filter(|&v| !wedge.is_target(v)).collect();
    let mut k = DMatrix::zeros(rows.len(), g.arc_count());
    for (r, &v) in rows.iter().enumerate() {
        let w = 1.0 / (g.degree(v) as f64).sqrt();
        for &a in g.arcs_into(v) {
            k[(r, a as usize)] = w;
        }
    }
    Ok((k, rows))
}

/// Dense walk operator `U = S (2 K* K - I)` as a complex matrix.
pub fn materialize_unitary(wedge: &WedgeGraph) -> Result<DMatrix<Complex64>> {
    check_materialize_cap(wedge)?;
    let s = shift_matrix(wedge)?;
    let (k, _) = boundary_matrix(wedge)?;
    let n = wedge.arc_count();
    let coin = 2.0 * k.transpose() * &k - DMatrix::<f64>::identity(n, n);
    let u = s * coin;
    Ok(u.map(|x| Complex64::new(x, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(len: usize, seed: u64) -> ArcState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        ArcState::from_amplitudes(amps)
    }

    fn max_abs_c(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn max_abs_f(m: &DMatrix<f64>) -> f64 {
        m.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn uniform_initial_is_normalised_and_supported_on_the_base() {
        let w = WedgeGraph::johnson_star(6, 2, 3).unwrap();
        let s = uniform_initial(&w);
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-12);
        for a in w.target_arcs() {
            assert_eq!(s.amplitudes()[a], Complex64::new(0.0, 0.0));
        }
        assert_abs_diff_eq!(finding_probability(&w, &s), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn step_matches_the_materialized_operator() {
        for w in [
            WedgeGraph::johnson_star(5, 2, 1).unwrap(),
            WedgeGraph::johnson_star(6, 2, 3).unwrap(),
            WedgeGraph::complete_wedge(5, 4).unwrap(),
            WedgeGraph::from_graph(graph::hypercube(4).unwrap()),
        ] {
            let u = materialize_unitary(&w).unwrap();
            let psi = random_state(w.arc_count(), 7);
            let by_step = step(&w, &psi);
            let by_matrix = &u * psi.to_vector();
            for (a, expect) in by_matrix.iter().enumerate() {
                let got = by_step.amplitudes()[a];
                assert!((got - expect).norm() < 1e-12, "arc {a}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn sequential_and_dispatched_steps_agree_bitwise() {
        let w = WedgeGraph::johnson_star(8, 2, 2).unwrap();
        let psi = random_state(w.arc_count(), 21);
        let a = step(&w, &psi);
        let b = step_sequential(&w, &psi);
        assert_eq!(a.amplitudes(), b.amplitudes());
    }

    #[test]
    fn walk_preserves_the_norm() {
        let w = WedgeGraph::johnson_star(7, 3, 2).unwrap();
        let psi = evolve(&w, &uniform_initial(&w), 50);
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        let psi = evolve(&w, &random_state(w.arc_count(), 3), 50);
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn marked_coin_negates_incoming_amplitudes() {
        let w = WedgeGraph::johnson_star(5, 2, 1).unwrap();
        let leaf = w.target_vertices()[0] as usize;
        let into_leaf = w.graph().arcs_into(leaf)[0] as usize;
        let mut psi = ArcState::zeros(w.arc_count());
        psi.amplitudes_mut()[into_leaf] = Complex64::new(1.0, 0.0);
        let next = step(&w, &psi);
        // The shift forwards the negated amplitude to the reversed arc.
        assert_eq!(
            next.amplitudes()[Graph::inverse(into_leaf)],
            Complex64::new(-1.0, 0.0)
        );
        assert_abs_diff_eq!(next.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn shift_matrix_is_an_involution() {
        let w = WedgeGraph::johnson_star(5, 2, 2).unwrap();
        let s = shift_matrix(&w).unwrap();
        let n = w.arc_count();
        let defect = &s * &s - DMatrix::<f64>::identity(n, n);
        assert!(max_abs_f(&defect) == 0.0);
    }

    #[test]
    fn boundary_rows_are_orthonormal() {
        let w = WedgeGraph::johnson_star(6, 2, 4).unwrap();
        let (k, rows) = boundary_matrix(&w).unwrap();
        assert_eq!(rows.len(), w.vertex_count() - w.target_vertices().len());
        let gram = &k * k.transpose();
        let defect = gram - DMatrix::<f64>::identity(rows.len(), rows.len());
        assert!(max_abs_f(&defect) < 1e-12);
    }

    #[test]
    fn materialized_walk_is_unitary() {
        let w = WedgeGraph::johnson_star(5, 2, 1).unwrap();
        let u = materialize_unitary(&w).unwrap();
        let n = w.arc_count();
        let defect = u.adjoint() * &u - DMatrix::<Complex64>::identity(n, n);
        assert!(max_abs_c(&defect) < 1e-12);
    }

    #[test]
    fn materialisation_refuses_oversized_instances() {
        let w = WedgeGraph::johnson_star(12, 2, 1).unwrap();
        // C(12,2) = 66 vertices, degree 20: 1320 arcs + 2 — under the cap.
        assert!(materialize_unitary(&w).is_ok());
        let big = WedgeGraph::johnson_star(16, 2, 1).unwrap();
        // C(16,2) = 120 vertices, degree 28: 3360 arcs + 2 — over the cap.
        assert!(matches!(
            materialize_unitary(&big),
            Err(crate::Error::SizeCap(_))
        ));
    }

    #[test]
    fn evolve_equals_repeated_steps() {
        let w = WedgeGraph::complete_wedge(6, 5).unwrap();
        let psi0 = uniform_initial(&w);
        let mut manual = psi0.clone();
        for _ in 0..7 {
            manual = step(&w, &manual);
        }
        let direct = evolve(&w, &psi0, 7);
        assert_eq!(manual.amplitudes(), direct.amplitudes());
    }

    #[test]
    fn curve_records_every_step() {
        let w = WedgeGraph::johnson_star(5, 2, 1).unwrap();
        let c = curve(&w, 30);
        assert_eq!(c.len(), 31);
        assert_eq!(c.get(0), 0.0);
        let psi5 = evolve(&w, &uniform_initial(&w), 5);
        assert_abs_diff_eq!(c.get(5), finding_probability(&w, &psi5), epsilon = 1e-14);
        let (t_peak, p_peak) = c.argmax();
        assert!(p_peak > 0.0);
        assert!(t_peak > 0);
    }

    #[test]
    fn curve_windows_clamp_to_the_samples() {
        let c = ProbabilityCurve::new(vec![0.0, 0.3, 0.9, 0.2, 0.5]);
        assert_eq!(c.argmax(), (2, 0.9));
        assert_eq!(c.max_on(3..100), Some((4, 0.5)));
        assert_eq!(c.min_on(1..4), Some((3, 0.2)));
        assert_eq!(c.max_on(7..9), None);
    }

    #[test]
    fn first_peak_finds_the_first_crest() {
        // A slow oscillation whose revival overshoots the first crest by a
        // hair: argmax lands on the revival, first_peak must not.
        let theta = 0.05;
        let slow: Vec<f64> = (0..200)
            .map(|t| {
                let base = (theta * t as f64).sin().powi(2);
                if t > 80 {
                    (base + 1e-4).min(1.0)
                } else {
                    base
                }
            })
            .collect();
        let c = ProbabilityCurve::new(slow);
        let tau = (std::f64::consts::FRAC_PI_2 / theta).round() as usize;
        assert!(c.argmax().0 > 90);
        assert_eq!(c.first_peak().0, tau);

        // An even/odd ripple on the rise must not register as the crest.
        let rippled: Vec<f64> = (0..200)
            .map(|t| {
                let base = (theta * t as f64).sin().powi(2);
                base * (1.0 - 0.05 * (t % 2) as f64)
            })
            .collect();
        let c = ProbabilityCurve::new(rippled);
        let (t_star, _) = c.first_peak();
        assert!((t_star as i64 - tau as i64).abs() <= 2, "crest at {t_star}");
    }

    #[test]
    fn closed_walk_has_zero_finding_probability() {
        let w = WedgeGraph::from_graph(graph::complete(5).unwrap());
        let c = curve(&w, 10);
        assert!(c.values().iter().all(|&p| p == 0.0));
    }
}
