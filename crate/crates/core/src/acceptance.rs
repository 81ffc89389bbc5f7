//! The verification battery: seven numbered end-to-end checks with pinned
//! tolerances.
//!
//! Each criterion exercises one layer of the pipeline against ground truth
//! computed by an independent route — exact integer identities, dense
//! materialisations, exact rational series coefficients, or full arc-space
//! simulations. [`run_all`] powers both the `verify` subcommand and the
//! crate's acceptance test; every criterion reports its sub-checks with the
//! measured values so a failure is diagnosable from the log alone.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::graph::WedgeGraph;
use crate::perturbation;
use crate::reduction::{
    adjacency_split, build_reduced_walk, build_t, embed_classes, reduced_curve, shell_size_of,
    stationary, ClassDecomposition,
};
use crate::spectral::{self, lift, overlap, principal_eigenpair, reconstruct_curve};
use crate::walk::{self, ProbabilityCurve};

/// Ceiling for the operator identities `S^2 = I`, `K K* = I`, `U* U = I`
/// on dense materialisations (entrywise max-abs defect).
pub const IDENTITY_TOL: f64 = 1e-10;

/// Ceiling for the subspace-closure defect `max |U E - E U_red|`.
pub const CLOSURE_TOL: f64 = 1e-10;

/// Ceiling for `max_t |p_full(t) - p_reduced(t)|` over the equivalence run.
pub const EQUIVALENCE_TOL: f64 = 1e-8;

/// Length of the full-versus-reduced equivalence run.
pub const EQUIVALENCE_STEPS: usize = 500;

/// The scaled series residual `|lambda_exact - lambda_series| / eps^{k+2}`
/// must stay within this factor of itself across size doublings.
pub const RESIDUAL_RATIO_CAP: f64 = 4.0;

/// Minimum height of the first pulsation peak in the battery.
pub const PEAK_MIN: f64 = 0.8;

/// The first peak must land inside `[0.85, 1.15] * tau_hat`.
pub const PEAK_WINDOW: (f64, f64) = (0.85, 1.15);

/// Maximum trough depth near twice the predicted peak time.
pub const TROUGH_MAX: f64 = 0.1;

/// Window `[1.6, 2.4] * tau_hat` searched for the trough.
pub const TROUGH_WINDOW: (f64, f64) = (1.6, 2.4);

/// The second peak must reach this fraction of the first.
pub const SECOND_PEAK_RATIO: f64 = 0.7;

/// Window `[2.6, 3.4] * tau_hat` searched for the second peak.
pub const SECOND_PEAK_WINDOW: (f64, f64) = (2.6, 3.4);

/// Growing the star from 1 to 5 leaves must shrink the first-peak time to
/// `1/sqrt(5)` of its value, within this relative tolerance.
pub const STAR_SPEEDUP_TOL: f64 = 0.10;

/// Half-width of the allowed band around the predicted log-log slope
/// `(1 + 1/k) / 2` of the first-peak time in the base's vertex count.
pub const SLOPE_TOL: f64 = 0.05;

/// Ceiling for the lifted-eigenvector residual `|U psi - exp(i theta) psi|`.
pub const MAPPING_RESIDUAL_TOL: f64 = 1e-8;

/// Allowed deviation of the initial-state overlap from `1/sqrt(2)` on the
/// small reference instance.
pub const OVERLAP_TOL_SMALL: f64 = 0.05;

/// Allowed deviation of the overlap from `1/sqrt(2)` on the large instance.
pub const OVERLAP_TOL_LARGE: f64 = 0.02;

/// Ceiling for `max_t |p_reduced(t) - p_two_eigenvectors(t)|`.
pub const RECONSTRUCTION_TOL: f64 = 0.05;

/// Minimum first-peak height for the beyond-Johnson composites.
pub const QUALITATIVE_PEAK_MIN: f64 = 0.5;

/// Simulation horizon for the hypercube composite (its first peak sits
/// near t = 356, so the following trough needs room).
pub const HYPERCUBE_T_MAX: usize = 900;

/// Simulation horizon for the two-clique composite.
pub const CLIQUE_T_MAX: usize = 80;

/// The trough after a qualitative peak is searched up to this multiple of
/// the peak time (clamped to the horizon).
pub const QUALITATIVE_TROUGH_SPAN: f64 = 2.5;

/// One sub-check of a criterion: a verdict plus the measured values.
#[derive(Debug, Clone)]
pub struct Check {
    /// Whether the sub-check passed.
    pub passed: bool,
    /// Human-readable description with the measured numbers.
    pub detail: String,
}

/// The outcome of one numbered criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    /// Criterion number, 1-based.
    pub id: usize,
    /// Short name.
    pub name: &'static str,
    /// All sub-checks that were run.
    pub checks: Vec<Check>,
}

impl CriterionOutcome {
    fn from_result(
        id: usize,
        name: &'static str,
        result: crate::Result<Vec<Check>>,
    ) -> CriterionOutcome {
        let checks = match result {
            Ok(checks) => checks,
            Err(e) => vec![Check {
                passed: false,
                detail: format!("aborted: {e}"),
            }],
        };
        CriterionOutcome { id, name, checks }
    }

    /// True when every sub-check passed (and at least one ran).
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// The one-line `[PASS]`/`[FAIL]` summary.
    pub fn summary_line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        format!("[{verdict}] criterion {}: {}", self.id, self.name)
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn new() -> Checks {
        Checks(Vec::new())
    }

    fn push(&mut self, passed: bool, detail: String) {
        self.0.push(Check { passed, detail });
    }

    fn le(&mut self, label: &str, value: f64, ceiling: f64) {
        self.push(
            value <= ceiling,
            format!("{label}: {value:.3e} (allowed {ceiling:.1e})"),
        );
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn max_abs_c(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn scaled_window(tau: f64, window: (f64, f64)) -> std::ops::Range<usize> {
    let lo = (tau * window.0).floor() as usize;
    let hi = (tau * window.1).ceil() as usize + 1;
    lo..hi
}

/// Least-squares slope of `y` against `x`.
fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Criterion 1: dense operator identities and exact counting identities on
/// three small composites.
pub fn structural_identities() -> CriterionOutcome {
    let inner = || -> crate::Result<Vec<Check>> {
        let mut checks = Checks::new();
        for (n, k, m) in [(5usize, 2usize, 1usize), (6, 3, 2), (8, 2, 5)] {
            let wedge = WedgeGraph::johnson_star(n, k, m)?;
            let arcs = wedge.arc_count();
            let tag = format!("J({n},{k}) star {m}");

            let s = walk::shift_matrix(&wedge)?;
            let defect = max_abs(&(&s * &s - DMatrix::<f64>::identity(arcs, arcs)));
            checks.le(&format!("{tag}: |S^2 - I|"), defect, IDENTITY_TOL);

            let (kb, rows) = walk::boundary_matrix(&wedge)?;
            let gram = &kb * kb.transpose();
            let defect = max_abs(&(gram - DMatrix::<f64>::identity(rows.len(), rows.len())));
            checks.le(&format!("{tag}: |K K* - I|"), defect, IDENTITY_TOL);

            let u = walk::materialize_unitary(&wedge)?;
            let defect =
                max_abs_c(&(u.adjoint() * &u - DMatrix::<Complex64>::identity(arcs, arcs)));
            checks.le(&format!("{tag}: |U* U - I|"), defect, IDENTITY_TOL);

            // Exact integer identities of the shell structure.
            let d = (k * (n - k)) as u64;
            let mut split_ok = true;
            let mut balance_ok = true;
            for j in 0..=k {
                let (a, b, c) = adjacency_split(n, k, j)?;
                split_ok &= a + b + c == d;
                if j < k {
                    let (_, _, c_next) = adjacency_split(n, k, j + 1)?;
                    balance_ok &= b * shell_size_of(n, k, j)?
                        == c_next * shell_size_of(n, k, j + 1)?;
                }
            }
            checks.push(split_ok, format!("{tag}: a_j + b_j + c_j = d, all shells"));
            checks.push(balance_ok, format!("{tag}: b_j |X_j| = c_(j+1) |X_(j+1)|, all shells"));
        }
        Ok(checks.0)
    };
    CriterionOutcome::from_result(1, "operator and counting identities", inner())
}

/// Criterion 2: the class span is closed under the full walk, and the
/// reduced dynamics reproduce the full finding probability.
pub fn invariant_subspace() -> CriterionOutcome {
    let inner = || -> crate::Result<Vec<Check>> {
        let mut checks = Checks::new();

        // Closure, on a dense materialisation: U E = E U_red.
        let (n, k, m) = (8usize, 2usize, 2usize);
        let wedge = WedgeGraph::johnson_star(n, k, m)?;
        let dec = ClassDecomposition::new(n, k, m)?;
        let embed = embed_classes(&wedge)?;
        let u_full = walk::materialize_unitary(&wedge)?.map(|z| z.re);
        let reduced = build_reduced_walk(&dec);
        let defect = max_abs(&(&u_full * &embed - &embed * reduced.unitary()));
        checks.le(&format!("J({n},{k}) star {m}: closure |U E - E U_red|"), defect, CLOSURE_TOL);

        // Equivalence, streamed: the full and reduced curves agree.
        let (n, k, m) = (10usize, 2usize, 2usize);
        let wedge = WedgeGraph::johnson_star(n, k, m)?;
        let dec = ClassDecomposition::new(n, k, m)?;
        let full = walk::curve(&wedge, EQUIVALENCE_STEPS);
        let red = reduced_curve(&dec, EQUIVALENCE_STEPS);
        let worst = (0..=EQUIVALENCE_STEPS)
            .map(|t| (full.get(t) - red.get(t)).abs())
            .fold(0.0, f64::max);
        checks.le(
            &format!("J({n},{k}) star {m}: max |p_full - p_reduced| over {EQUIVALENCE_STEPS} steps"),
            worst,
            EQUIVALENCE_TOL,
        );
        Ok(checks.0)
    };
    CriterionOutcome::from_result(2, "invariant subspace closure and equivalence", inner())
}

/// Criterion 3: exact vanishing and closed form of the perturbation
/// coefficients, plus bounded residual scaling across size doublings.
pub fn perturbation_series() -> CriterionOutcome {
    let inner = || -> crate::Result<Vec<Check>> {
        let mut checks = Checks::new();

        for k in 1..=4usize {
            for m in [1usize, 5] {
                let coeffs = perturbation::kato_coefficients(k, m, k + 1)?;
                let low_zero = coeffs[..k].iter().all(num::Zero::is_zero);
                checks.push(
                    low_zero,
                    format!("k={k} m={m}: lambda_1..lambda_{k} vanish exactly"),
                );
                let expected = -perturbation::closed_form_gap(k, m);
                checks.push(
                    coeffs[k] == expected,
                    format!(
                        "k={k} m={m}: lambda_{} = -m k! k^k = {expected} (got {})",
                        k + 1,
                        coeffs[k]
                    ),
                );
            }
        }

        // Residual scaling: the leftover after subtracting the series is
        // O(eps^{k+2}); its scaled magnitude must stay flat (within a
        // factor) as n doubles.
        for k in [1usize, 2] {
            let mut scaled = Vec::new();
            for n in [20usize, 40, 80, 160] {
                let dec = ClassDecomposition::new(n, k, 1)?;
                let pair = principal_eigenpair(&build_t(&dec), &stationary(&dec))?;
                let series = perturbation::lambda_series(k, 1, dec.eps());
                let residual = (pair.lambda - series).abs();
                scaled.push(residual / dec.eps().powi(k as i32 + 2));
            }
            let (lo, hi) = scaled
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
            let ratio = hi / lo;
            checks.push(
                ratio.is_finite() && ratio <= RESIDUAL_RATIO_CAP,
                format!(
                    "k={k}: residual/eps^{} spans {lo:.3}..{hi:.3} over n=20..160, \
                     ratio {ratio:.2} (allowed {RESIDUAL_RATIO_CAP})",
                    k + 2
                ),
            );
        }
        Ok(checks.0)
    };
    CriterionOutcome::from_result(3, "perturbation series exactness and residual scaling", inner())
}

struct BatteryRun {
    peak_time: usize,
    checks: Vec<Check>,
}

fn battery_run(n: usize, k: usize, m: usize) -> crate::Result<BatteryRun> {
    let dec = ClassDecomposition::new(n, k, m)?;
    let tau = spectral::predict(&dec)?.tau as f64;
    let t_max = (3.5 * tau).ceil() as usize;
    let wedge = WedgeGraph::johnson_star(n, k, m)?;
    let curve = walk::curve(&wedge, t_max);
    let tag = format!("J({n},{k}) star {m}");
    let mut checks = Checks::new();

    let (t_peak, p_peak) = curve
        .max_on(0..(2.0 * tau).ceil() as usize)
        .expect("non-empty window");
    checks.push(
        p_peak >= PEAK_MIN,
        format!("{tag}: first peak p = {p_peak:.4} (needs >= {PEAK_MIN})"),
    );
    let window = scaled_window(tau, PEAK_WINDOW);
    checks.push(
        window.contains(&t_peak),
        format!(
            "{tag}: first peak at t = {t_peak}, predicted tau_hat = {tau:.1} \
             (window {}..{})",
            window.start, window.end
        ),
    );

    let (t_trough, p_trough) = curve
        .min_on(scaled_window(tau, TROUGH_WINDOW))
        .expect("non-empty window");
    checks.push(
        p_trough <= TROUGH_MAX,
        format!("{tag}: trough p = {p_trough:.4} at t = {t_trough} (needs <= {TROUGH_MAX})"),
    );

    let (t_second, p_second) = curve
        .max_on(scaled_window(tau, SECOND_PEAK_WINDOW))
        .expect("non-empty window");
    checks.push(
        p_second >= SECOND_PEAK_RATIO * p_peak,
        format!(
            "{tag}: second peak p = {p_second:.4} at t = {t_second} \
             (needs >= {SECOND_PEAK_RATIO} * {p_peak:.4})"
        ),
    );

    Ok(BatteryRun {
        peak_time: t_peak,
        checks: checks.0,
    })
}

/// Criterion 4: the pulsation battery — full simulations show the
/// predicted peak, trough, and revival, and a 5-leaf star speeds the clock
/// up by `sqrt(5)`.
pub fn pulsation_battery() -> CriterionOutcome {
    let inner = || -> crate::Result<Vec<Check>> {
        let mut checks = Vec::new();
        for k in [2usize, 3] {
            let single = battery_run(15, k, 1)?;
            let five = battery_run(15, k, 5)?;
            checks.extend(single.checks);
            checks.extend(five.checks);

            let expected = single.peak_time as f64 / 5.0f64.sqrt();
            let got = five.peak_time as f64;
            let off = (got - expected).abs() / expected;
            checks.push(Check {
                passed: off <= STAR_SPEEDUP_TOL,
                detail: format!(
                    "k={k}: 5-leaf peak at t = {got}, expected ~{expected:.1} \
                     (off by {:.1}%, allowed {:.0}%)",
                    100.0 * off,
                    100.0 * STAR_SPEEDUP_TOL
                ),
            });
        }
        Ok(checks)
    };
    CriterionOutcome::from_result(4, "pulsation battery", inner())
}

/// Criterion 5: the first-peak time scales as `N^{(1 + 1/k) / 2}` in the
/// base's vertex count, for `k = 1, 2, 3`.
pub fn scaling_law() -> CriterionOutcome {
    let inner = || -> crate::Result<Vec<Check>> {
        let mut checks = Checks::new();
        let suites: [(usize, &[usize]); 3] = [
            (1, &[20, 40, 80, 160]),
            (2, &[20, 30, 40, 60]),
            (3, &[15, 20, 30, 40]),
        ];
        for (k, ns) in suites {
            let mut points = Vec::new();
            for &n in ns {
                let dec = ClassDecomposition::new(n, k, 1)?;
                let pair = principal_eigenpair(&build_t(&dec), &stationary(&dec))?;
                let tau = std::f64::consts::FRAC_PI_2 / pair.theta;
                points.push(((dec.vertex_count() as f64).ln(), tau.ln()));
            }
            let slope = fit_slope(&points);
            let expected = 0.5 * (1.0 + 1.0 / k as f64);
            checks.push(
                (slope - expected).abs() <= SLOPE_TOL,
                format!(
                    "k={k}: log-log slope {slope:.4}, predicted {expected:.4} \
                     (allowed +-{SLOPE_TOL})"
                ),
            );
        }
        Ok(checks.0)
    };
    CriterionOutcome::from_result(5, "first-peak scaling law", inner())
}

/// Criterion 6: the spectral mapping — lifted eigenvectors are genuine
/// eigenvectors, the initial state overlaps each at `~1/sqrt(2)`, and two
/// eigenvectors alone reconstruct the pulsation curve.
pub fn spectral_mapping() -> CriterionOutcome {
    let inner = || -> crate::Result<Vec<Check>> {
        let mut checks = Checks::new();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;

        for (n, overlap_tol) in [(15usize, OVERLAP_TOL_SMALL), (40, OVERLAP_TOL_LARGE)] {
            let (k, m) = (2usize, 1usize);
            let dec = ClassDecomposition::new(n, k, m)?;
            let walk = build_reduced_walk(&dec);
            let pair = principal_eigenpair(&build_t(&dec), &stationary(&dec))?;
            let lifted = lift(&pair, &walk)?;
            let tag = format!("J({n},{k}) star {m}");

            for (state, sign, label) in [
                (&lifted.psi_plus, 1.0f64, "psi+"),
                (&lifted.psi_minus, -1.0, "psi-"),
            ] {
                let phase = Complex64::new(pair.theta.cos(), sign * pair.theta.sin());
                let next = walk.apply(state);
                let defect: f64 = next
                    .amplitudes()
                    .iter()
                    .zip(state.amplitudes())
                    .map(|(got, amp)| (got - phase * amp).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                checks.le(
                    &format!("{tag}: |U {label} - exp({:+}i theta) {label}|", sign as i64),
                    defect,
                    MAPPING_RESIDUAL_TOL,
                );
            }

            let (c_plus, c_minus) = overlap(&walk.initial_state(), &lifted);
            for (c, label) in [(c_plus, "psi+"), (c_minus, "psi-")] {
                let off = (c.norm() - inv_sqrt2).abs();
                checks.push(
                    off <= overlap_tol,
                    format!(
                        "{tag}: |<{label}|initial>| = {:.4}, off 1/sqrt(2) by {off:.4} \
                         (allowed {overlap_tol})",
                        c.norm()
                    ),
                );
            }
        }

        // Reconstruction from the two lifted eigenvectors alone.
        let (n, k, m) = (30usize, 2usize, 1usize);
        let dec = ClassDecomposition::new(n, k, m)?;
        let walk = build_reduced_walk(&dec);
        let pair = principal_eigenpair(&build_t(&dec), &stationary(&dec))?;
        let lifted = lift(&pair, &walk)?;
        let tau = spectral::predict(&dec)?.tau as usize;
        let horizon = 3 * tau;
        let exact = reduced_curve(&dec, horizon);
        let rebuilt = reconstruct_curve(&lifted, &walk.initial_state(), horizon);
        let worst = (0..=horizon)
            .map(|t| (exact.get(t) - rebuilt.get(t)).abs())
            .fold(0.0, f64::max);
        checks.le(
            &format!("J({n},{k}) star {m}: two-eigenvector reconstruction over 3 tau"),
            worst,
            RECONSTRUCTION_TOL,
        );
        Ok(checks.0)
    };
    CriterionOutcome::from_result(6, "spectral mapping battery", inner())
}

fn qualitative_pulsation(
    label: &str,
    wedge: &WedgeGraph,
    t_max: usize,
    checks: &mut Checks,
) {
    let curve = walk::curve(wedge, t_max);
    let (t_peak, p_peak) = curve.max_on(1..t_max + 1).expect("non-empty window");
    checks.push(
        p_peak >= QUALITATIVE_PEAK_MIN,
        format!("{label}: peak p = {p_peak:.4} at t = {t_peak} (needs >= {QUALITATIVE_PEAK_MIN})"),
    );
    let window_end = ((t_peak as f64 * QUALITATIVE_TROUGH_SPAN) as usize).min(t_max) + 1;
    let (t_trough, p_trough) = curve
        .min_on(t_peak..window_end)
        .expect("non-empty window");
    checks.push(
        p_trough <= 0.5 * p_peak,
        format!(
            "{label}: following trough p = {p_trough:.4} at t = {t_trough} \
             (needs <= half of {p_peak:.4})"
        ),
    );
}

/// Criterion 7: pulsation is not a Johnson artefact — a hypercube base and
/// a two-clique wedge both show a high peak followed by a deep trough.
pub fn beyond_johnson() -> CriterionOutcome {
    let inner = || -> crate::Result<Vec<Check>> {
        let mut checks = Checks::new();
        let hypercube = WedgeGraph::hypercube_star(10, 1)?;
        qualitative_pulsation("Q10 star 1", &hypercube, HYPERCUBE_T_MAX, &mut checks);
        let cliques = WedgeGraph::complete_wedge(30, 30)?;
        qualitative_pulsation("K30 wedge K30", &cliques, CLIQUE_T_MAX, &mut checks);
        Ok(checks.0)
    };
    CriterionOutcome::from_result(7, "pulsation beyond the Johnson family", inner())
}

/// Runs all seven criteria in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    vec![
        structural_identities(),
        invariant_subspace(),
        perturbation_series(),
        pulsation_battery(),
        scaling_law(),
        spectral_mapping(),
        beyond_johnson(),
    ]
}

/// Convenience for curve-based tooling: the largest absolute gap between
/// two probability curves over their common length.
pub fn max_curve_gap(a: &ProbabilityCurve, b: &ProbabilityCurve) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
