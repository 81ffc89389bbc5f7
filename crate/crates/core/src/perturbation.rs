//! Exact eigenvalue perturbation for the lumped transition matrix.
//!
//! With `eps = 1/d` as the small parameter, the `(k+1) x (k+1)` lumped
//! matrix expands as `T(eps) = T0 + eps T1 + eps^2 T2 + ..` where every
//! term has integer entries depending only on `k` and the leaf count `m`
//! (see [`expand_t`]). `T0` is upper bidiagonal with simple eigenvalues
//! `j/k`, and its top eigenvalue `1` moves under the perturbation by
//!
//! ```text
//! lambda(eps) = 1 + sum_{p >= 1} lambda_p eps^p ,
//! ```
//!
//! with coefficients given by a trace formula over products of series
//! terms, the spectral projection `P`, and the reduced resolvent `S` at the
//! eigenvalue `1` ([`kato_lambda`]). Everything here runs in exact rational
//! arithmetic, which is what lets the crate assert `lambda_p = 0` for
//! `p <= k` and `lambda_{k+1} = -m k! k^k` as identities rather than
//! approximations.

use nalgebra::DMatrix;
use num::{BigInt, BigRational, One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graph::binomial;

/// A dense square matrix of exact rationals.
///
/// Only the handful of operations the perturbation series needs; the
/// dimension is `k + 1`, so none of this is performance-sensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct RatMat {
    n: usize,
    data: Vec<BigRational>,
}

impl RatMat {
    /// The zero matrix.
    pub fn zeros(n: usize) -> RatMat {
        RatMat {
            n,
            data: vec![BigRational::zero(); n * n],
        }
    }

    /// The identity matrix.
    pub fn identity(n: usize) -> RatMat {
        let mut m = RatMat::zeros(n);
        for i in 0..n {
            m.set(i, i, BigRational::one());
        }
        m
    }

    /// Side length.
    pub fn size(&self) -> usize {
        self.n
    }

    /// Entry at `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> &BigRational {
        &self.data[row * self.n + col]
    }

    /// Overwrites the entry at `(row, col)`.
    pub fn set(&mut self, row: usize, col: usize, value: BigRational) {
        self.data[row * self.n + col] = value;
    }

    /// Matrix product.
    pub fn mul(&self, other: &RatMat) -> RatMat {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut out = RatMat::zeros(self.n);
        for r in 0..self.n {
            for i in 0..self.n {
                let a = self.get(r, i);
                if a.is_zero() {
                    continue;
                }
                for c in 0..self.n {
                    let b = other.get(i, c);
                    if !b.is_zero() {
                        let cur = out.get(r, c) + a * b;
                        out.set(r, c, cur);
                    }
                }
            }
        }
        out
    }

    /// Matrix sum.
    pub fn add(&self, other: &RatMat) -> RatMat {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut out = self.clone();
        for (slot, x) in out.data.iter_mut().zip(&other.data) {
            *slot += x;
        }
        out
    }

    /// Matrix difference.
    pub fn sub(&self, other: &RatMat) -> RatMat {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut out = self.clone();
        for (slot, x) in out.data.iter_mut().zip(&other.data) {
            *slot -= x;
        }
        out
    }

    /// Scalar multiple.
    pub fn scale(&self, factor: &BigRational) -> RatMat {
        let mut out = self.clone();
        for slot in out.data.iter_mut() {
            *slot *= factor;
        }
        out
    }

    /// Trace.
    pub fn trace(&self) -> BigRational {
        (0..self.n).map(|i| self.get(i, i).clone()).sum()
    }

    /// True when every entry is zero.
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Rank-one product `u v^T`.
    pub fn outer(u: &[BigRational], v: &[BigRational]) -> RatMat {
        assert_eq!(u.len(), v.len(), "dimension mismatch");
        let n = u.len();
        let mut out = RatMat::zeros(n);
        for r in 0..n {
            if u[r].is_zero() {
                continue;
            }
            for c in 0..n {
                if !v[c].is_zero() {
                    out.set(r, c, &u[r] * &v[c]);
                }
            }
        }
        out
    }

    /// Lossy conversion to a dense float matrix.
    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |r, c| {
            self.get(r, c).to_f64().expect("rational fits in f64")
        })
    }
}

fn rat(value: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(value))
}

fn rat_frac(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn big_binomial(n: usize, k: usize) -> BigRational {
    let b = binomial(n as u64, k as u64).expect("small binomial");
    BigRational::from_integer(BigInt::from(b))
}

/// `n!` as an exact integer.
fn factorial(n: usize) -> BigInt {
    (1..=n as u64).map(BigInt::from).product()
}

/// The series terms of the lumped matrix in powers of `eps = 1/d`.
///
/// For fixed `k` the interior rows are exact polynomials of degree one in
/// `eps`; only the root row's escape probability `x = 1/(1 + m eps)`
/// contributes an infinite (geometric) tail, so the term of order `q >= 2`
/// has a single entry `(-m)^q` at `(0, 1)`.
#[derive(Debug, Clone)]
pub struct SeriesExpansion {
    k: usize,
    m: usize,
    t0: RatMat,
    t1: RatMat,
}

/// Builds the series terms for subset size `k` and leaf count `m`.
pub fn expand_t(k: usize, m: usize) -> Result<SeriesExpansion> {
    if k < 1 || m < 1 {
        return Err(Error::invalid("series expansion needs k >= 1 and m >= 1"));
    }
    let n = k + 1;
    let mut t0 = RatMat::zeros(n);
    let mut t1 = RatMat::zeros(n);
    for j in 0..=k {
        t0.set(j, j, rat_frac(j as i64, k as i64));
        if j < k {
            t0.set(j, j + 1, rat_frac((k - j) as i64, k as i64));
        }
    }
    t1.set(0, 1, rat(-(m as i64)));
    for j in 1..=k {
        let (jj, kk) = (j as i64, k as i64);
        t1.set(j, j, rat(jj * (kk - 2 * jj)));
        if j < k {
            t1.set(j, j + 1, rat(-jj * (kk - jj)));
        }
        t1.set(j, j - 1, rat(jj * jj));
    }
    Ok(SeriesExpansion { k, m, t0, t1 })
}

impl SeriesExpansion {
    /// Subset size.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Leaf count.
    pub fn m(&self) -> usize {
        self.m
    }

    /// The constant term (upper bidiagonal, eigenvalues `j/k`).
    pub fn t0(&self) -> &RatMat {
        &self.t0
    }

    /// The first-order term.
    pub fn t1(&self) -> &RatMat {
        &self.t1
    }

    /// The term of order `q`: `t0` and `t1` for `q <= 1`, and the geometric
    /// root-row entry `(-m)^q` at `(0, 1)` beyond that.
    pub fn term(&self, q: usize) -> RatMat {
        match q {
            0 => self.t0.clone(),
            1 => self.t1.clone(),
            _ => {
                let mut t = RatMat::zeros(self.k + 1);
                let minus_m = BigInt::from(-(self.m as i64));
                t.set(0, 1, BigRational::from_integer(minus_m.pow(q as u32)));
                t
            }
        }
    }

    /// The partial sum `sum_{q <= order} eps^q T_q` at `eps = 1/d`, exact.
    pub fn partial_sum(&self, d: u64, order: usize) -> RatMat {
        let eps = BigRational::new(BigInt::one(), BigInt::from(d));
        let mut acc = RatMat::zeros(self.k + 1);
        let mut power = BigRational::one();
        for q in 0..=order {
            acc = acc.add(&self.term(q).scale(&power));
            power *= &eps;
        }
        acc
    }
}

/// The exact eigensystem of the constant term `T0`.
///
/// `T0` is upper bidiagonal with simple spectrum `{j/k}`; the right and
/// left eigenvectors have closed binomial forms and pair to
/// `<v_j, u_j> = 1 / C(k, j)`.
#[derive(Debug, Clone)]
pub struct UnperturbedEigensystem {
    k: usize,
    values: Vec<BigRational>,
    right: Vec<Vec<BigRational>>,
    left: Vec<Vec<BigRational>>,
}

/// Builds the eigensystem of `T0` for subset size `k`.
pub fn t0_eigensystem(k: usize) -> Result<UnperturbedEigensystem> {
    if k < 1 {
        return Err(Error::invalid("eigensystem needs k >= 1"));
    }
    let mut values = Vec::with_capacity(k + 1);
    let mut right = Vec::with_capacity(k + 1);
    let mut left = Vec::with_capacity(k + 1);
    for j in 0..=k {
        values.push(rat_frac(j as i64, k as i64));
        // u_j(r) = C(j, r) / C(k, r): supported on r <= j.
        let u: Vec<BigRational> = (0..=k)
            .map(|r| big_binomial(j, r) / big_binomial(k, r))
            .collect();
        // v_j(r) = (-1)^{r-j} C(k-j, r-j): supported on r >= j.
        let v: Vec<BigRational> = (0..=k)
            .map(|r| {
                if r < j {
                    BigRational::zero()
                } else {
                    let sign = if (r - j) % 2 == 0 { 1 } else { -1 };
                    big_binomial(k - j, r - j) * rat(sign)
                }
            })
            .collect();
        right.push(u);
        left.push(v);
    }
    Ok(UnperturbedEigensystem { k, values, right, left })
}

impl UnperturbedEigensystem {
    /// Subset size.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Eigenvalue `j/k`.
    pub fn value(&self, j: usize) -> &BigRational {
        &self.values[j]
    }

    /// Right eigenvector for eigenvalue `j/k`.
    pub fn right(&self, j: usize) -> &[BigRational] {
        &self.right[j]
    }

    /// Left eigenvector for eigenvalue `j/k`.
    pub fn left(&self, j: usize) -> &[BigRational] {
        &self.left[j]
    }

    /// Pairing `<v_j, u_j> = 1 / C(k, j)`.
    pub fn pairing(&self, j: usize) -> BigRational {
        self.left[j]
            .iter()
            .zip(&self.right[j])
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// The spectral projection `P` onto the top eigenvalue of `T0` and the
/// reduced resolvent `S = (T0 - I)^{-1} (I - P)` at that eigenvalue.
#[derive(Debug, Clone)]
pub struct KatoOperators {
    k: usize,
    projection: RatMat,
    resolvent: RatMat,
}

/// Builds the projection and reduced resolvent for subset size `k`.
pub fn reduced_resolvent(k: usize) -> Result<KatoOperators> {
    let eig = t0_eigensystem(k)?;
    let n = k + 1;

    // P = |u_k><v_k| / <v_k, u_k>; the pairing at j = k is exactly one.
    let projection = RatMat::outer(eig.right(k), eig.left(k));

    // S = sum_{j < k} |u_j><v_j| / (<v_j, u_j> (j/k - 1))
    //   = - sum_{j < k} (k / (k - j)) C(k, j) |u_j><v_j|.
    let mut resolvent = RatMat::zeros(n);
    for j in 0..k {
        let weight = rat_frac(-(k as i64), (k - j) as i64) * big_binomial(k, j);
        let outer = RatMat::outer(eig.right(j), eig.left(j));
        resolvent = resolvent.add(&outer.scale(&weight));
    }
    Ok(KatoOperators {
        k,
        projection,
        resolvent,
    })
}

impl KatoOperators {
    /// Subset size.
    pub fn k(&self) -> usize {
        self.k
    }

    /// The spectral projection `P`.
    pub fn projection(&self) -> &RatMat {
        &self.projection
    }

    /// The reduced resolvent `S`.
    pub fn resolvent(&self) -> &RatMat {
        &self.resolvent
    }

    /// The weighted power appearing in the trace formula: `-P` for
    /// exponent zero, `S^w` otherwise.
    pub fn weighted_power(&self, w: usize) -> RatMat {
        if w == 0 {
            return self.projection.scale(&rat(-1));
        }
        let mut acc = self.resolvent.clone();
        for _ in 1..w {
            acc = acc.mul(&self.resolvent);
        }
        acc
    }
}

/// All compositions of `total` into exactly `parts` parts, each `>= min`.
fn compositions(total: usize, parts: usize, min: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, min: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if total == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        if total < min * parts {
            return;
        }
        let max = total - min * (parts - 1);
        for first in min..=max {
            prefix.push(first);
            rec(total - first, parts - 1, min, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, min, &mut Vec::new(), &mut out);
    out
}

fn check_order(order: usize, k: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::invalid("perturbation order starts at 1"));
    }
    if k > 5 && order > k + 2 {
        return Err(Error::SizeCap(format!(
            "order-{order} coefficient for k = {k}: the trace formula grows \
             combinatorially; orders beyond k + 2 are only supported for k <= 5"
        )));
    }
    Ok(())
}

/// The exact coefficient `lambda_p` of `eps^p` in the expansion of the top
/// eigenvalue, by the trace formula
///
/// ```text
/// lambda_p = sum_{s=1}^{p} (-1)^s / s
///            sum_{nu_1+..+nu_s = p, nu_i >= 1}
///            sum_{w_1+..+w_s = s-1, w_i >= 0}
///            tr( T_{nu_1} S^{(w_1)} .. T_{nu_s} S^{(w_s)} )
/// ```
///
/// with `S^{(0)} = -P` and `S^{(w)} = S^w`.
pub fn kato_lambda(order: usize, series: &SeriesExpansion, ops: &KatoOperators) -> Result<BigRational> {
    if series.k() != ops.k() {
        return Err(Error::invalid("series and operators disagree on k"));
    }
    check_order(order, series.k())?;

    // Cache the matrices the inner loops re-use.
    let terms: Vec<RatMat> = (1..=order).map(|q| series.term(q)).collect();
    let powers: Vec<RatMat> = (0..order).map(|w| ops.weighted_power(w)).collect();

    let mut total = BigRational::zero();
    for s in 1..=order {
        let mut block = BigRational::zero();
        for nu in compositions(order, s, 1) {
            for omega in compositions(s - 1, s, 0) {
                let mut prod = RatMat::identity(series.k() + 1);
                for i in 0..s {
                    prod = prod.mul(&terms[nu[i] - 1]);
                    prod = prod.mul(&powers[omega[i]]);
                }
                block += prod.trace();
            }
        }
        let sign = if s % 2 == 0 { 1 } else { -1 };
        total += rat_frac(sign, s as i64) * block;
    }
    Ok(total)
}

/// The coefficients `lambda_1, .., lambda_max` in one call.
pub fn kato_coefficients(k: usize, m: usize, max_order: usize) -> Result<Vec<BigRational>> {
    let series = expand_t(k, m)?;
    let ops = reduced_resolvent(k)?;
    (1..=max_order)
        .map(|p| kato_lambda(p, &series, &ops))
        .collect()
}

/// The closed form of the first non-vanishing coefficient magnitude:
/// `|lambda_{k+1}| = m k! k^k`.
pub fn closed_form_gap(k: usize, m: usize) -> BigRational {
    let gap = BigInt::from(m as u64) * factorial(k) * BigInt::from(k as u64).pow(k as u32);
    BigRational::from_integer(gap)
}

/// Leading-order approximation of the top eigenvalue:
/// `lambda(eps) ~ 1 - m k! k^k eps^{k+1}`.
pub fn lambda_series(k: usize, m: usize, eps: f64) -> f64 {
    let gap = closed_form_gap(k, m).to_f64().expect("gap fits in f64");
    1.0 - gap * eps.powi(k as i32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{build_t, ClassDecomposition};

    /// Oracle: the lumped matrix with exact rational entries, built from
    /// the adjacency split rather than the series.
    fn exact_t(n: usize, k: usize, m: usize) -> RatMat {
        let dec = ClassDecomposition::new(n, k, m).unwrap();
        let d = dec.d() as i64;
        let mut t = RatMat::zeros(k + 1);
        t.set(0, 1, rat_frac(d, d + m as i64));
        for j in 1..=k {
            t.set(j, j - 1, rat_frac(dec.coeff_c(j) as i64, d));
            t.set(j, j, rat_frac(dec.coeff_a(j) as i64, d));
            if j < k {
                t.set(j, j + 1, rat_frac(dec.coeff_b(j) as i64, d));
            }
        }
        t
    }

    #[test]
    fn series_terms_reconstruct_the_exact_matrix() {
        for (n, k, m) in [(7, 2, 3), (9, 3, 1), (5, 1, 2), (11, 4, 6)] {
            let dec = ClassDecomposition::new(n, k, m).unwrap();
            let d = dec.d();
            let series = expand_t(k, m).unwrap();
            for order in [1usize, 2, 3, 5] {
                let partial = series.partial_sum(d, order);
                let remainder = exact_t(n, k, m).sub(&partial);
                // Interior rows are exact at first order; only the root
                // row's geometric tail survives, and it equals
                // (-m eps)^{order+1} / (1 + m eps) exactly.
                let eps = BigRational::new(BigInt::one(), BigInt::from(d));
                let minus_m_eps = &eps * rat(-(m as i64));
                let expected_tail = num::pow::pow(minus_m_eps.clone(), order + 1)
                    / (BigRational::one() + &eps * rat(m as i64));
                for r in 0..=k {
                    for c in 0..=k {
                        let got = remainder.get(r, c);
                        if (r, c) == (0, 1) {
                            assert_eq!(got, &expected_tail, "tail at order {order}");
                        } else {
                            assert!(got.is_zero(), "({r},{c}) at order {order}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn float_transition_matrix_matches_the_rational_one() {
        let (n, k, m) = (9, 3, 2);
        let dec = ClassDecomposition::new(n, k, m).unwrap();
        let float_t = build_t(&dec);
        let rational_t = exact_t(n, k, m).to_f64();
        let diff = (float_t.matrix() - rational_t).abs().max();
        assert!(diff < 1e-15);
    }

    #[test]
    fn eigensystem_satisfies_the_defining_relations() {
        for k in 1..=5 {
            let series = expand_t(k, 1).unwrap();
            let eig = t0_eigensystem(k).unwrap();
            let t0 = series.t0();
            for j in 0..=k {
                // T0 u_j = (j/k) u_j
                for r in 0..=k {
                    let lhs: BigRational =
                        (0..=k).map(|c| t0.get(r, c) * &eig.right(j)[c]).sum();
                    assert_eq!(lhs, eig.value(j) * &eig.right(j)[r], "right k={k} j={j}");
                }
                // v_j^T T0 = (j/k) v_j^T
                for c in 0..=k {
                    let lhs: BigRational =
                        (0..=k).map(|r| &eig.left(j)[r] * t0.get(r, c)).sum();
                    assert_eq!(lhs, eig.value(j) * &eig.left(j)[c], "left k={k} j={j}");
                }
            }
            // Biorthogonality with pairing 1 / C(k, j).
            for i in 0..=k {
                for j in 0..=k {
                    let dot: BigRational = eig
                        .left(i)
                        .iter()
                        .zip(eig.right(j))
                        .map(|(a, b)| a * b)
                        .sum();
                    if i == j {
                        assert_eq!(dot, big_binomial(k, j).recip(), "pair k={k} j={j}");
                    } else {
                        assert!(dot.is_zero(), "cross k={k} i={i} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn projection_and_resolvent_satisfy_their_identities() {
        for k in 1..=5 {
            let ops = reduced_resolvent(k).unwrap();
            let series = expand_t(k, 1).unwrap();
            let p = ops.projection();
            let s = ops.resolvent();
            let n = k + 1;
            let id = RatMat::identity(n);

            assert_eq!(p.mul(p), *p, "P^2 = P at k={k}");
            assert_eq!(p.trace(), BigRational::one(), "tr P = 1 at k={k}");
            assert!(s.mul(p).is_zero(), "S P = 0 at k={k}");
            assert!(p.mul(s).is_zero(), "P S = 0 at k={k}");

            // S (T0 - I) = I - P.
            let shifted = series.t0().sub(&id);
            assert_eq!(s.mul(&shifted), id.sub(p), "resolvent identity at k={k}");
        }
    }

    #[test]
    fn low_order_coefficients_vanish_and_the_gap_is_closed_form() {
        for k in 1..=3usize {
            for m in [1usize, 4] {
                let coeffs = kato_coefficients(k, m, k + 1).unwrap();
                for (idx, lambda) in coeffs.iter().take(k).enumerate() {
                    assert!(lambda.is_zero(), "lambda_{} k={k} m={m}", idx + 1);
                }
                let expected = -closed_form_gap(k, m);
                assert_eq!(coeffs[k], expected, "lambda_{} k={k} m={m}", k + 1);
            }
        }
    }

    #[test]
    fn series_approximation_matches_the_coefficients() {
        let (k, m) = (2, 3);
        let eps: f64 = 1.0 / 26.0;
        let gap = closed_form_gap(k, m).to_f64().unwrap();
        assert_eq!(gap, (m as f64) * 2.0 * 4.0);
        let expected = 1.0 - gap * eps.powi(3);
        assert!((lambda_series(k, m, eps) - expected).abs() < 1e-15);
    }

    #[test]
    fn trace_formula_rejects_runaway_orders() {
        assert!(kato_coefficients(6, 1, 9).is_err());
        assert!(kato_coefficients(6, 1, 2).is_ok());
        let series = expand_t(2, 1).unwrap();
        let ops = reduced_resolvent(2).unwrap();
        assert!(kato_lambda(0, &series, &ops).is_err());
    }

    #[test]
    fn compositions_enumerate_correctly() {
        assert_eq!(compositions(3, 2, 1), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(compositions(2, 3, 0).len(), 6);
        assert_eq!(compositions(0, 1, 0), vec![vec![0]]);
        assert!(compositions(1, 3, 1).is_empty());
        assert_eq!(compositions(5, 1, 1), vec![vec![5]]);
    }
}
