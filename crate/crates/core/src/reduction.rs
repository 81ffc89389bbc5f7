//! The distance-class reduction of a Johnson-star composite.
//!
//! Johnson-graph symmetry groups the vertices of `J(n, k)` by their distance
//! `j` from the join vertex into shells `X_0, .., X_k`, with the star's
//! leaves forming one extra class. The simple random walk lumps exactly over
//! these shells, giving the `(k+1) x (k+1)` sub-stochastic transition matrix
//! handled here, together with its degree-proportional stationary measure
//! and the similarity transform that turns it into a symmetric matrix.
//!
//! Arcs group the same way: within-shell (`A_j`), outward (`B_j`), inward
//! (`C_j`), plus the two star orientations (`S+`, `S-`). The span of the
//! uniform vectors on those `3k + 2` classes is invariant under the walk,
//! and [`build_reduced_walk`] materialises the walk restricted to it: a tiny
//! orthogonal matrix whose dynamics reproduce the full finding probability
//! exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::{binomial, VertexLabels, WedgeGraph};
use crate::walk::ProbabilityCurve;

/// Class-basis embeddings refuse instances with more arcs than this.
pub const EMBED_ARC_CAP: usize = 50_000;

/// Shell structure of `J(n, k)` with an `m`-leaf star at the join vertex.
///
/// Everything here is exact integer combinatorics: shell sizes, the
/// adjacency split `(a_j, b_j, c_j)` of the common degree `d = k (n - k)`,
/// and the arc-class sizes derived from them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecomposition {
    n: usize,
    k: usize,
    m: usize,
    d: u64,
    shell_sizes: Vec<u64>,
}

impl ClassDecomposition {
    /// Builds the decomposition for `J(n, k)` with an `m`-leaf star.
    ///
    /// Requires `k >= 1`, `m >= 1`, and `n > 2k`; the last keeps every
    /// within-shell count `a_j = j (n - 2j)` positive, which the lumped
    /// spectral analysis relies on.
    pub fn new(n: usize, k: usize, m: usize) -> Result<ClassDecomposition> {
        if k < 1 {
            return Err(Error::invalid("decomposition needs k >= 1"));
        }
        if n <= 2 * k {
            return Err(Error::invalid(format!(
                "decomposition needs n > 2k, got n = {n}, k = {k}"
            )));
        }
        if m < 1 {
            return Err(Error::invalid("decomposition needs m >= 1"));
        }
        let d = (k as u64) * ((n - k) as u64);
        let mut shell_sizes = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let size = binomial(k as u64, j as u64)?
                .checked_mul(binomial((n - k) as u64, j as u64)?)
                .ok_or_else(|| Error::SizeCap(format!("shell sizes of J({n}, {k}) overflow")))?;
            shell_sizes.push(size);
        }
        let dec = ClassDecomposition {
            n,
            k,
            m,
            d,
            shell_sizes,
        };
        // Sanity: the split and the shell sizes must satisfy the exact
        // counting identities the whole reduction rests on.
        for j in 0..=k {
            assert_eq!(dec.coeff_a(j) + dec.coeff_b(j) + dec.coeff_c(j), d);
            if j < k {
                assert_eq!(
                    dec.coeff_b(j) * dec.shell_size(j),
                    dec.coeff_c(j + 1) * dec.shell_size(j + 1)
                );
            }
        }
        assert_eq!(
            dec.shell_sizes.iter().sum::<u64>(),
            binomial(n as u64, k as u64)?
        );
        Ok(dec)
    }

    /// Ground-set size of the Johnson base.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Subset size of the Johnson base (also the number of shells minus 1).
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of star leaves.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Common degree inside the Johnson base, `d = k (n - k)`.
    pub fn d(&self) -> u64 {
        self.d
    }

    /// The perturbation parameter `eps = 1/d`.
    pub fn eps(&self) -> f64 {
        1.0 / self.d as f64
    }

    /// Number of vertices in shell `j` (distance `j` from the join vertex).
    pub fn shell_size(&self, j: usize) -> u64 {
        self.shell_sizes[j]
    }

    /// Number of Johnson vertices.
    pub fn vertex_count(&self) -> u64 {
        self.shell_sizes.iter().sum()
    }

    /// Neighbours of an `X_j` vertex inside its own shell.
    pub fn coeff_a(&self, j: usize) -> u64 {
        (j as u64) * (self.n as u64 - 2 * j as u64)
    }

    /// Neighbours of an `X_j` vertex in the next shell out.
    pub fn coeff_b(&self, j: usize) -> u64 {
        ((self.k - j) as u64) * ((self.n - self.k - j) as u64)
    }

    /// Neighbours of an `X_j` vertex in the next shell in.
    pub fn coeff_c(&self, j: usize) -> u64 {
        (j as u64) * (j as u64)
    }

    /// Number of symmetric arcs of the Johnson base, `d * C(n, k)`.
    pub fn johnson_arc_count(&self) -> u64 {
        self.d * self.vertex_count()
    }

    /// Total degree of the composite, `d * C(n, k) + 2m`; normalises the
    /// stationary measure.
    pub fn total_degree(&self) -> u64 {
        self.johnson_arc_count() + 2 * self.m as u64
    }

    /// Escape probability from the join vertex into the base,
    /// `x = d / (d + m)`.
    pub fn x(&self) -> f64 {
        self.d as f64 / (self.d as f64 + self.m as f64)
    }

    /// Number of arcs in an arc class.
    pub fn class_size(&self, class: ArcClass) -> Result<u64> {
        self.check(class)?;
        Ok(match class {
            ArcClass::Within(j) => self.coeff_a(j) * self.shell_size(j),
            ArcClass::Outward(j) => self.coeff_b(j) * self.shell_size(j),
            ArcClass::Inward(j) => self.coeff_c(j) * self.shell_size(j),
            ArcClass::StarIn | ArcClass::StarOut => self.m as u64,
        })
    }

    /// Probability that the simple random walk, sitting at the origin
    /// vertex of the class, traverses an arc of the class in one move.
    pub fn class_prob(&self, class: ArcClass) -> Result<f64> {
        self.check(class)?;
        let d = self.d as f64;
        let m = self.m as f64;
        Ok(match class {
            ArcClass::Within(j) => self.coeff_a(j) as f64 / d,
            ArcClass::Outward(0) => d / (d + m),
            ArcClass::Outward(j) => self.coeff_b(j) as f64 / d,
            ArcClass::Inward(j) => self.coeff_c(j) as f64 / d,
            ArcClass::StarIn => 1.0,
            ArcClass::StarOut => m / (d + m),
        })
    }

    /// Stationary arc measure of the class: its share of all arcs,
    /// `|class| / total_degree`. Equals `pi(origin shell) * class_prob`.
    pub fn m_weight(&self, class: ArcClass) -> Result<f64> {
        Ok(self.class_size(class)? as f64 / self.total_degree() as f64)
    }

    fn check(&self, class: ArcClass) -> Result<()> {
        let k = self.k;
        let ok = match class {
            ArcClass::Within(j) => (1..=k).contains(&j),
            ArcClass::Outward(j) => j < k,
            ArcClass::Inward(j) => (1..=k).contains(&j),
            ArcClass::StarIn | ArcClass::StarOut => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::EmptyClass(format!("{class} does not exist for k = {k}")))
        }
    }
}

/// The adjacency split `(a_j, b_j, c_j)` of a shell-`j` vertex of
/// `J(n, k)`: neighbours within the shell, one shell out, one shell in.
/// Valid for `1 <= k`, `n >= 2k`, `j <= k`; always sums to `d = k (n - k)`.
pub fn adjacency_split(n: usize, k: usize, j: usize) -> Result<(u64, u64, u64)> {
    if k < 1 || n < 2 * k || j > k {
        return Err(Error::invalid(format!(
            "adjacency split needs 1 <= k, n >= 2k, j <= k; got n = {n}, k = {k}, j = {j}"
        )));
    }
    let a = (j as u64) * (n as u64 - 2 * j as u64);
    let b = ((k - j) as u64) * ((n - k - j) as u64);
    let c = (j as u64) * (j as u64);
    Ok((a, b, c))
}

/// Size of shell `j` of `J(n, k)` around a fixed vertex,
/// `C(k, j) * C(n - k, j)`. Same domain as [`adjacency_split`].
pub fn shell_size_of(n: usize, k: usize, j: usize) -> Result<u64> {
    if k < 1 || n < 2 * k || j > k {
        return Err(Error::invalid(format!(
            "shell size needs 1 <= k, n >= 2k, j <= k; got n = {n}, k = {k}, j = {j}"
        )));
    }
    binomial(k as u64, j as u64)?
        .checked_mul(binomial((n - k) as u64, j as u64)?)
        .ok_or_else(|| Error::SizeCap(format!("shell size of J({n}, {k}) overflows")))
}

/// One of the `3k + 2` arc classes of a Johnson-star composite.
///
/// `Within(j)`, `Outward(j)`, `Inward(j)` are Johnson arcs between shells
/// (`j -> j`, `j -> j + 1`, `j -> j - 1` respectively, indexed by origin
/// shell); `StarIn` points from a leaf to the join vertex and `StarOut`
/// back out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcClass {
    /// Both endpoints in shell `j` (exists for `1 <= j <= k`).
    Within(usize),
    /// Origin in shell `j`, terminus in shell `j + 1` (for `0 <= j < k`).
    Outward(usize),
    /// Origin in shell `j`, terminus in shell `j - 1` (for `1 <= j <= k`).
    Inward(usize),
    /// Leaf to join vertex.
    StarIn,
    /// Join vertex to leaf.
    StarOut,
}

impl ArcClass {
    /// All classes in basis order: `Within(1..=k)`, `Outward(0..k)`,
    /// `Inward(1..=k)`, `StarIn`, `StarOut`.
    pub fn all(k: usize) -> Vec<ArcClass> {
        let mut out = Vec::with_capacity(3 * k + 2);
        out.extend((1..=k).map(ArcClass::Within));
        out.extend((0..k).map(ArcClass::Outward));
        out.extend((1..=k).map(ArcClass::Inward));
        out.push(ArcClass::StarIn);
        out.push(ArcClass::StarOut);
        out
    }

    /// Position of the class in the basis order of [`ArcClass::all`].
    pub fn index(self, k: usize) -> usize {
        match self {
            ArcClass::Within(j) => j - 1,
            ArcClass::Outward(j) => k + j,
            ArcClass::Inward(j) => 2 * k + j - 1,
            ArcClass::StarIn => 3 * k,
            ArcClass::StarOut => 3 * k + 1,
        }
    }

    /// The class of the reversed arcs.
    pub fn inverse(self) -> ArcClass {
        match self {
            ArcClass::Within(j) => ArcClass::Within(j),
            ArcClass::Outward(j) => ArcClass::Inward(j + 1),
            ArcClass::Inward(j) => ArcClass::Outward(j - 1),
            ArcClass::StarIn => ArcClass::StarOut,
            ArcClass::StarOut => ArcClass::StarIn,
        }
    }

    /// Shell of the origin vertex; `-1` means the leaf class.
    pub fn origin_shell(self) -> isize {
        match self {
            ArcClass::Within(j) | ArcClass::Outward(j) | ArcClass::Inward(j) => j as isize,
            ArcClass::StarIn => -1,
            ArcClass::StarOut => 0,
        }
    }

    /// Shell of the terminus vertex; `-1` means the leaf class.
    pub fn terminus_shell(self) -> isize {
        match self {
            ArcClass::Within(j) => j as isize,
            ArcClass::Outward(j) => j as isize + 1,
            ArcClass::Inward(j) => j as isize - 1,
            ArcClass::StarIn => 0,
            ArcClass::StarOut => -1,
        }
    }
}

impl std::fmt::Display for ArcClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArcClass::Within(j) => write!(f, "A{j}"),
            ArcClass::Outward(j) => write!(f, "B{j}"),
            ArcClass::Inward(j) => write!(f, "C{j}"),
            ArcClass::StarIn => write!(f, "S+"),
            ArcClass::StarOut => write!(f, "S-"),
        }
    }
}

/// The lumped transition matrix of the simple random walk over shells.
///
/// Row `j`, column `j'` holds the probability of moving from shell `j` to
/// shell `j'`. Row `0` leaks probability `m / (d + m)` to the leaves, so
/// the matrix is sub-stochastic there and stochastic elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    k: usize,
    mat: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Shell count minus one.
    pub fn k(&self) -> usize {
        self.k
    }

    /// The `(k+1) x (k+1)` matrix itself.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }
}

/// Builds the lumped transition matrix from the decomposition.
pub fn build_t(dec: &ClassDecomposition) -> TransitionMatrix {
    let k = dec.k();
    let d = dec.d() as f64;
    let mut mat = DMatrix::zeros(k + 1, k + 1);
    mat[(0, 1)] = dec.x();
    for j in 1..=k {
        mat[(j, j - 1)] = dec.coeff_c(j) as f64 / d;
        mat[(j, j)] = dec.coeff_a(j) as f64 / d;
        if j < k {
            mat[(j, j + 1)] = dec.coeff_b(j) as f64 / d;
        }
    }
    TransitionMatrix { k, mat }
}

/// Degree-proportional stationary measure over the vertex classes,
/// normalised to total mass one. Index `-1` is the leaf class.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMeasure {
    /// `weights[0]` is the leaf class, `weights[j + 1]` is shell `j`.
    weights: Vec<f64>,
}

impl StationaryMeasure {
    /// Measure of shell `j`.
    pub fn shell(&self, j: usize) -> f64 {
        self.weights[j + 1]
    }

    /// Measure of the leaf class.
    pub fn leaf(&self) -> f64 {
        self.weights[0]
    }

    /// Measure of a class by signed index (`-1` is the leaf class).
    pub fn class(&self, j: isize) -> f64 {
        self.weights[(j + 1) as usize]
    }

    /// Number of shells, including the leaf class.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// Never true: the measure always covers the leaf class and shell 0.
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Builds the stationary measure: class weight proportional to total degree
/// (`m` for the leaves, `d + m` for the join vertex, `d |X_j|` for shell
/// `j >= 1`). This choice satisfies detailed balance for the lumped chain
/// exactly, which is what makes the symmetrisation work.
pub fn stationary(dec: &ClassDecomposition) -> StationaryMeasure {
    let total = dec.total_degree() as f64;
    let mut weights = Vec::with_capacity(dec.k() + 2);
    weights.push(dec.m() as f64 / total);
    weights.push((dec.d() + dec.m() as u64) as f64 / total);
    for j in 1..=dec.k() {
        weights.push((dec.d() * dec.shell_size(j)) as f64 / total);
    }
    StationaryMeasure { weights }
}

/// Conjugates the lumped matrix into symmetric form,
/// `J = D^{1/2} T D^{-1/2}` with `D = diag(pi)` over the shells.
///
/// Detailed balance makes `J` symmetric up to rounding; the result is
/// explicitly averaged with its transpose so downstream symmetric
/// eigensolvers see an exactly symmetric matrix.
pub fn symmetrize(t: &TransitionMatrix, pi: &StationaryMeasure) -> Result<DMatrix<f64>> {
    let k = t.k();
    if pi.len() != k + 2 {
        return Err(Error::invalid(format!(
            "measure has {} classes, expected {}",
            pi.len(),
            k + 2
        )));
    }
    let mut j_mat = DMatrix::zeros(k + 1, k + 1);
    for row in 0..=k {
        for col in 0..=k {
            let t_rc = t.matrix()[(row, col)];
            if t_rc != 0.0 {
                j_mat[(row, col)] = t_rc * (pi.shell(row) / pi.shell(col)).sqrt();
            }
        }
    }
    let sym = (&j_mat + j_mat.transpose()) * 0.5;
    Ok(sym)
}

/// A complex state on the `3k + 2` arc classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    amps: Vec<Complex64>,
}

impl ReducedState {
    /// The zero state of the given dimension.
    pub fn zeros(dim: usize) -> ReducedState {
        ReducedState {
            amps: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    /// Wraps raw amplitudes.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> ReducedState {
        ReducedState { amps }
    }

    /// Dimension of the state.
    pub fn len(&self) -> usize {
        self.amps.len()
    }

    /// True when the state has no entries.
    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// Amplitudes in basis order.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Mutable amplitudes in basis order.
    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &ReducedState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .fold(Complex64::new(0.0, 0.0), |acc, z| acc + z)
    }
}

/// The Grover walk restricted to the invariant arc-class subspace.
///
/// Carries the reduced boundary map (rows: shells, columns: arc classes),
/// the shift as the inverse-class permutation, and the resulting
/// `(3k+2) x (3k+2)` real orthogonal walk operator.
#[derive(Debug, Clone)]
pub struct ReducedWalk {
    dec: ClassDecomposition,
    dim: usize,
    boundary: DMatrix<f64>,
    shift: Vec<usize>,
    unitary: DMatrix<f64>,
}

/// Builds the reduced walk for a decomposition.
pub fn build_reduced_walk(dec: &ClassDecomposition) -> ReducedWalk {
    let k = dec.k();
    let dim = 3 * k + 2;
    let classes = ArcClass::all(k);

    // Reduced boundary: row = terminus shell of the class, entry =
    // sqrt(traversal probability of the reversed class). Rows cover only
    // the shells (the leaf class carries no boundary row), which makes the
    // rows exactly orthonormal.
    let mut boundary = DMatrix::zeros(k + 1, dim);
    for &class in &classes {
        let t_shell = class.terminus_shell();
        if t_shell >= 0 {
            let p = dec
                .class_prob(class.inverse())
                .expect("inverse of a valid class is valid");
            boundary[(t_shell as usize, class.index(k))] = p.sqrt();
        }
    }

    let shift: Vec<usize> = classes.iter().map(|c| c.inverse().index(k)).collect();

    // U = S (2 K^T K - I), assembled densely; the dimension is tiny.
    let mut coin = 2.0 * boundary.transpose() * &boundary;
    for i in 0..dim {
        coin[(i, i)] -= 1.0;
    }
    let mut unitary = DMatrix::zeros(dim, dim);
    for row in 0..dim {
        for col in 0..dim {
            unitary[(row, col)] = coin[(shift[row], col)];
        }
    }

    ReducedWalk {
        dec: dec.clone(),
        dim,
        boundary,
        shift,
        unitary,
    }
}

impl ReducedWalk {
    /// The decomposition the walk was built from.
    pub fn decomposition(&self) -> &ClassDecomposition {
        &self.dec
    }

    /// Dimension of the invariant subspace, `3k + 2`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The reduced boundary map (shells x classes).
    pub fn boundary(&self) -> &DMatrix<f64> {
        &self.boundary
    }

    /// The shift as a permutation of class indices.
    pub fn shift_permutation(&self) -> &[usize] {
        &self.shift
    }

    /// The reduced walk operator.
    pub fn unitary(&self) -> &DMatrix<f64> {
        &self.unitary
    }

    /// The discriminant `K S K*` of the reduced walk; equals the
    /// symmetrised lumped matrix exactly (up to rounding), which is the
    /// bridge between the walk spectrum and the lumped chain.
    pub fn discriminant(&self) -> DMatrix<f64> {
        let shells = self.boundary.nrows();
        // shifted = S K^T: row i of S reads class shift[i].
        let mut shifted = DMatrix::zeros(self.dim, shells);
        for i in 0..self.dim {
            for c in 0..shells {
                shifted[(i, c)] = self.boundary[(c, self.shift[i])];
            }
        }
        &self.boundary * shifted
    }

    /// Applies one walk step.
    pub fn apply(&self, state: &ReducedState) -> ReducedState {
        assert_eq!(state.len(), self.dim, "state size mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (row, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for col in 0..self.dim {
                let u = self.unitary[(row, col)];
                if u != 0.0 {
                    acc += u * state.amps[col];
                }
            }
            *slot = acc;
        }
        ReducedState { amps: out }
    }

    /// The uniform-on-the-base initial state in class coordinates:
    /// amplitude `sqrt(|class| / |base arcs|)` on every Johnson class.
    pub fn initial_state(&self) -> ReducedState {
        let k = self.dec.k();
        let total = self.dec.johnson_arc_count() as f64;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.dim];
        for class in ArcClass::all(k) {
            if !matches!(class, ArcClass::StarIn | ArcClass::StarOut) {
                let size = self.dec.class_size(class).expect("valid class") as f64;
                amps[class.index(k)] = Complex64::new((size / total).sqrt(), 0.0);
            }
        }
        ReducedState { amps }
    }

    /// Probability mass on the star classes.
    pub fn finding_probability(&self, state: &ReducedState) -> f64 {
        let k = self.dec.k();
        state.amps[ArcClass::StarIn.index(k)].norm_sqr()
            + state.amps[ArcClass::StarOut.index(k)].norm_sqr()
    }
}

/// Runs the reduced walk from its standard initial state and records the
/// finding probability at every step up to `t_max` inclusive.
pub fn reduced_curve(dec: &ClassDecomposition, t_max: usize) -> ProbabilityCurve {
    let walk = build_reduced_walk(dec);
    let mut state = walk.initial_state();
    let mut values = Vec::with_capacity(t_max + 1);
    values.push(walk.finding_probability(&state));
    for _ in 0..t_max {
        state = walk.apply(&state);
        values.push(walk.finding_probability(&state));
    }
    ProbabilityCurve::new(values)
}

fn shell_map(wedge: &WedgeGraph) -> Result<Vec<isize>> {
    let params = wedge.johnson_params().ok_or_else(|| {
        Error::MissingLabels("arc classification needs a Johnson-star composite".into())
    })?;
    let Some(VertexLabels::Subsets { sets, .. }) = wedge.base_labels() else {
        return Err(Error::MissingLabels(
            "arc classification needs subset labels on the base".into(),
        ));
    };
    let join = wedge
        .join_vertex()
        .ok_or_else(|| Error::MissingLabels("composite has no join vertex".into()))?;
    let root = &sets[join];

    let overlap = |set: &[u32]| -> usize {
        let (mut i, mut j, mut hits) = (0usize, 0usize, 0usize);
        while i < set.len() && j < root.len() {
            match set[i].cmp(&root[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    hits += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        hits
    };

    let mut shells = vec![-1isize; wedge.vertex_count()];
    for (v, set) in sets.iter().enumerate() {
        shells[v] = (params.k - overlap(set)) as isize;
    }
    for &v in wedge.target_vertices() {
        shells[v as usize] = -1;
    }
    Ok(shells)
}

fn classify(shells: &[isize], wedge: &WedgeGraph, arc: usize) -> Result<ArcClass> {
    let g = wedge.graph();
    let o = shells[g.origin(arc)];
    let t = shells[g.terminus(arc)];
    match (o, t) {
        (-1, 0) => Ok(ArcClass::StarIn),
        (0, -1) => Ok(ArcClass::StarOut),
        (o, t) if o >= 1 && t == o => Ok(ArcClass::Within(o as usize)),
        (o, t) if o >= 0 && t == o + 1 => Ok(ArcClass::Outward(o as usize)),
        (o, t) if o >= 1 && t == o - 1 => Ok(ArcClass::Inward(o as usize)),
        _ => Err(Error::Numerical(format!(
            "arc {arc} joins shells {o} and {t}; adjacency must step shells by at most one"
        ))),
    }
}

/// The arc class of a single arc of a Johnson-star composite.
pub fn arc_class_of(wedge: &WedgeGraph, arc: usize) -> Result<ArcClass> {
    let shells = shell_map(wedge)?;
    classify(&shells, wedge, arc)
}

/// The orthonormal embedding of the class basis into arc space: an
/// `|A| x (3k + 2)` matrix whose column for class `W` is the uniform unit
/// vector on the arcs of `W`. Columns are pairwise orthogonal because the
/// classes partition the arcs.
pub fn embed_classes(wedge: &WedgeGraph) -> Result<DMatrix<f64>> {
    if wedge.arc_count() > EMBED_ARC_CAP {
        return Err(Error::SizeCap(format!(
            "{} arcs exceed the embedding cap of {EMBED_ARC_CAP}",
            wedge.arc_count()
        )));
    }
    let params = wedge.johnson_params().ok_or_else(|| {
        Error::MissingLabels("class embedding needs a Johnson-star composite".into())
    })?;
    let k = params.k;
    let shells = shell_map(wedge)?;
    let dec = ClassDecomposition::new(params.n, params.k, params.m)?;

    let mut embed = DMatrix::zeros(wedge.arc_count(), 3 * k + 2);
    for arc in 0..wedge.arc_count() {
        let class = classify(&shells, wedge, arc)?;
        let size = dec.class_size(class)? as f64;
        embed[(arc, class.index(k))] = 1.0 / size.sqrt();
    }
    Ok(embed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn decomposition_counts_match_the_graph() {
        let (n, k, m) = (7, 2, 3);
        let dec = ClassDecomposition::new(n, k, m).unwrap();
        let wedge = WedgeGraph::johnson_star(n, k, m).unwrap();

        // Shell census against the actual composite.
        let shells = shell_map(&wedge).unwrap();
        let mut shell_census: HashMap<isize, u64> = HashMap::new();
        for &s in &shells {
            *shell_census.entry(s).or_insert(0) += 1;
        }
        assert_eq!(shell_census[&-1], m as u64);
        for j in 0..=k {
            assert_eq!(shell_census[&(j as isize)], dec.shell_size(j), "shell {j}");
        }

        // Arc census: every arc classifies, and the class sizes match.
        let mut arc_census: HashMap<ArcClass, u64> = HashMap::new();
        for arc in 0..wedge.arc_count() {
            *arc_census
                .entry(arc_class_of(&wedge, arc).unwrap())
                .or_insert(0) += 1;
        }
        for class in ArcClass::all(k) {
            assert_eq!(
                arc_census.get(&class).copied().unwrap_or(0),
                dec.class_size(class).unwrap(),
                "class {class}"
            );
        }
        assert_eq!(dec.total_degree(), wedge.arc_count() as u64);
    }

    #[test]
    fn decomposition_rejects_bad_parameters() {
        assert!(ClassDecomposition::new(4, 2, 1).is_err(), "n = 2k");
        assert!(ClassDecomposition::new(5, 0, 1).is_err(), "k = 0");
        assert!(ClassDecomposition::new(5, 2, 0).is_err(), "m = 0");
        assert!(ClassDecomposition::new(5, 2, 1).is_ok());
    }

    #[test]
    fn transition_rows_sum_to_one_except_the_leaky_root() {
        let dec = ClassDecomposition::new(9, 3, 2).unwrap();
        let t = build_t(&dec);
        let sums: Vec<f64> = (0..=3).map(|r| t.matrix().row(r).sum()).collect();
        assert_abs_diff_eq!(sums[0], dec.x(), epsilon = 1e-15);
        for j in 1..=3 {
            assert_abs_diff_eq!(sums[j], 1.0, epsilon = 1e-14);
        }
        assert_eq!(t.matrix()[(0, 0)], 0.0);
    }

    #[test]
    fn stationary_measure_satisfies_detailed_balance() {
        let dec = ClassDecomposition::new(10, 3, 4).unwrap();
        let t = build_t(&dec);
        let pi = stationary(&dec);
        for i in 0..=3usize {
            for j in 0..=3usize {
                let lhs = pi.shell(i) * t.matrix()[(i, j)];
                let rhs = pi.shell(j) * t.matrix()[(j, i)];
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-16);
            }
        }
        // Total mass one, including the leaves and the root's star share.
        let total: f64 = (0..=3).map(|j| pi.shell(j)).sum::<f64>() + pi.leaf();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn symmetrization_is_exactly_symmetric_and_isospectral() {
        let dec = ClassDecomposition::new(8, 2, 5).unwrap();
        let t = build_t(&dec);
        let pi = stationary(&dec);
        let j = symmetrize(&t, &pi).unwrap();
        assert!(max_abs(&(j.clone() - j.transpose())) == 0.0);

        // Oracle: J and T share eigenvalues; compare sorted spectra
        // computed by two different routes.
        let mut sym_eigs: Vec<f64> = j.symmetric_eigenvalues().iter().copied().collect();
        let mut t_eigs: Vec<f64> = t
            .matrix()
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| {
                assert!(z.im.abs() < 1e-10, "lumped spectrum must be real");
                z.re
            })
            .collect();
        sym_eigs.sort_by(f64::total_cmp);
        t_eigs.sort_by(f64::total_cmp);
        for (a, b) in sym_eigs.iter().zip(&t_eigs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn class_bookkeeping_is_consistent() {
        let dec = ClassDecomposition::new(9, 2, 3).unwrap();
        let k = dec.k();

        // Traversal probabilities out of each shell sum to one.
        for shell in -1isize..=(k as isize) {
            let total: f64 = ArcClass::all(k)
                .into_iter()
                .filter(|c| c.origin_shell() == shell)
                .map(|c| dec.class_prob(c).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-15, "shell {shell}: {total}");
        }

        // The stationary arc measure sums to one over all classes.
        let total_m: f64 = ArcClass::all(k)
            .into_iter()
            .map(|c| dec.m_weight(c).unwrap())
            .sum();
        assert_abs_diff_eq!(total_m, 1.0, epsilon = 1e-14);

        // Inversion pairs classes of equal size and is an involution.
        for class in ArcClass::all(k) {
            assert_eq!(class.inverse().inverse(), class);
            assert_eq!(
                dec.class_size(class).unwrap(),
                dec.class_size(class.inverse()).unwrap()
            );
            assert_eq!(class.origin_shell(), class.inverse().terminus_shell());
        }

        // Nonexistent classes are rejected.
        assert!(dec.class_prob(ArcClass::Within(0)).is_err());
        assert!(dec.class_prob(ArcClass::Outward(k)).is_err());
        assert!(dec.class_prob(ArcClass::Inward(0)).is_err());
        assert!(dec.class_size(ArcClass::Within(k + 1)).is_err());
    }

    #[test]
    fn class_indexing_round_trips() {
        let k = 3;
        let classes = ArcClass::all(k);
        assert_eq!(classes.len(), 3 * k + 2);
        for (i, class) in classes.iter().enumerate() {
            assert_eq!(class.index(k), i);
        }
    }

    #[test]
    fn reduced_boundary_rows_are_orthonormal() {
        for (n, k, m) in [(5, 2, 1), (9, 3, 2), (12, 4, 7), (3, 1, 1)] {
            let dec = ClassDecomposition::new(n, k, m).unwrap();
            let walk = build_reduced_walk(&dec);
            let gram = walk.boundary() * walk.boundary().transpose();
            let defect = gram - DMatrix::<f64>::identity(k + 1, k + 1);
            assert!(max_abs(&defect) < 1e-14, "J({n},{k}) star {m}");
        }
    }

    #[test]
    fn reduced_walk_is_orthogonal() {
        let dec = ClassDecomposition::new(10, 4, 3).unwrap();
        let walk = build_reduced_walk(&dec);
        let u = walk.unitary();
        let defect = u.transpose() * u - DMatrix::<f64>::identity(walk.dim(), walk.dim());
        assert!(max_abs(&defect) < 1e-14);
    }

    #[test]
    fn discriminant_equals_the_symmetrized_lumped_matrix() {
        for (n, k, m) in [(5, 2, 1), (8, 3, 2), (15, 2, 5), (7, 1, 4)] {
            let dec = ClassDecomposition::new(n, k, m).unwrap();
            let walk = build_reduced_walk(&dec);
            let j = symmetrize(&build_t(&dec), &stationary(&dec)).unwrap();
            let defect = walk.discriminant() - j;
            assert!(max_abs(&defect) < 1e-14, "J({n},{k}) star {m}");
        }
    }

    #[test]
    fn reduced_initial_state_is_normalised_off_the_star() {
        let dec = ClassDecomposition::new(8, 2, 3).unwrap();
        let walk = build_reduced_walk(&dec);
        let s = walk.initial_state();
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-14);
        assert_eq!(walk.finding_probability(&s), 0.0);
    }

    #[test]
    fn star_amplitudes_swap_with_a_sign_each_step() {
        let dec = ClassDecomposition::new(7, 2, 2).unwrap();
        let walk = build_reduced_walk(&dec);
        let k = dec.k();
        let mut state = walk.initial_state();
        for _ in 0..10 {
            let next = walk.apply(&state);
            // The star-out amplitude reflects at the leaves and returns
            // negated as the star-in amplitude one step later.
            let expect = -state.amplitudes()[ArcClass::StarOut.index(k)];
            let got = next.amplitudes()[ArcClass::StarIn.index(k)];
            assert!((got - expect).norm() < 1e-14);
            state = next;
        }
    }

    #[test]
    fn embedding_is_orthonormal_and_intertwines_the_walk() {
        let wedge = WedgeGraph::johnson_star(6, 2, 2).unwrap();
        let dec = ClassDecomposition::new(6, 2, 2).unwrap();
        let embed = embed_classes(&wedge).unwrap();
        let dim = 3 * dec.k() + 2;
        let gram = embed.transpose() * &embed;
        assert!(max_abs(&(gram - DMatrix::<f64>::identity(dim, dim))) < 1e-13);

        // U E = E U_red: the class span is closed under the full walk and
        // the restriction is exactly the reduced operator.
        let u_full = walk::materialize_unitary(&wedge).unwrap().map(|z| z.re);
        let reduced = build_reduced_walk(&dec);
        let defect = &u_full * &embed - &embed * reduced.unitary();
        assert!(max_abs(&defect) < 1e-13);
    }

    #[test]
    fn reduced_curve_matches_the_full_walk() {
        let (n, k, m) = (6, 2, 2);
        let wedge = WedgeGraph::johnson_star(n, k, m).unwrap();
        let dec = ClassDecomposition::new(n, k, m).unwrap();
        let full = walk::curve(&wedge, 60);
        let reduced = reduced_curve(&dec, 60);
        for t in 0..=60 {
            assert_abs_diff_eq!(full.get(t), reduced.get(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn embedding_carries_the_initial_state() {
        let wedge = WedgeGraph::johnson_star(7, 2, 1).unwrap();
        let dec = ClassDecomposition::new(7, 2, 1).unwrap();
        let embed = embed_classes(&wedge).unwrap();
        let reduced = build_reduced_walk(&dec).initial_state();
        let full = walk::uniform_initial(&wedge);
        // E psi_red = psi_full, entry by entry.
        let red_re = DMatrix::from_fn(reduced.len(), 1, |i, _| reduced.amplitudes()[i].re);
        let lifted = &embed * red_re;
        for (a, amp) in full.amplitudes().iter().enumerate() {
            assert_abs_diff_eq!(lifted[(a, 0)], amp.re, epsilon = 1e-14);
        }
    }
}
