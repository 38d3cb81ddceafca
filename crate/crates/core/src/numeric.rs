//! Dense complex linear algebra: Hermitian and unitary eigensolvers, unitary
//! exponentials of Hermitian operators, overlaps and seeded random matrices.
//!
//! All operators are small (N ≤ 32) and dense. The unitary eigensolver maps
//! the problem onto a Hermitian one through a Cayley transform
//! `H = i (w + U)(w - U)^{-1}` with a pole `w` on the unit circle chosen away
//! from the spectrum, so eigenvectors are always orthonormal to machine
//! precision, including inside degenerate clusters.

use std::f64::consts::{FRAC_1_PI, PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigenphase gap below which two eigenvalues are reported as one cluster.
pub const TOL_DEG: f64 = 1e-9;
/// Residual bound for eigenpairs.
pub const EPS_EIG: f64 = 1e-9;
/// Bound on deviations from orthonormality and normalization.
pub const EPS_ORTH: f64 = 1e-9;

/// Phases this close below 2π are folded to the negative side of zero, so an
/// eigenvalue of 1 perturbed by rounding keeps quasienergy ≈ 0.
const PHASE_SNAP: f64 = 1e-12;

/// Hermiticity and unitarity tolerance, `1e-10 · N`.
pub fn structural_tolerance(dim: usize) -> f64 {
    1e-10 * dim as f64
}

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{-i θ}`.
pub fn phase_factor(theta: f64) -> C64 {
    C64::from_polar(1.0, -theta)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Eigenphase `θ` with `z = e^{-iθ}`, folded into `[-PHASE_SNAP, 2π - PHASE_SNAP)`.
pub fn eigenphase(z: C64) -> f64 {
    let mut theta = (-z.arg()).rem_euclid(TAU);
    if theta >= TAU - PHASE_SNAP {
        theta -= TAU;
    }
    theta
}

pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

/// `|v⟩⟨v|`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// `‖M - M†‖_F`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// `‖U†U - I‖_F`.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    (m.adjoint() * m - identity(m.nrows())).norm()
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Rotates every column so that its largest-modulus entry is real positive.
fn canonical_gauge(vectors: &mut CMatrix) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > best_abs * (1.0 + 1e-12) {
                best = i;
                best_abs = a;
            }
        }
        if best_abs > 0.0 {
            let rot = col[best].conj() / best_abs;
            col *= rot;
        }
    }
}

/// Self-adjoint operator with its eigendecomposition computed at construction.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let (eigenvalues, eigenvectors) = hermitian_eigensolve(&matrix)?;
        Ok(Self {
            matrix,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn from_diagonal(diagonal: &[f64]) -> Result<Self> {
        let d = CVector::from_iterator(diagonal.len(), diagonal.iter().map(|&x| c64(x, 0.0)));
        Self::new(CMatrix::from_diagonal(&d))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(CMatrix::zeros(dim, dim))
    }

    /// `|v⟩⟨v|` for any vector (normalization is not required here).
    pub fn projector(v: &CVector) -> Result<Self> {
        Self::new(outer(v))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `⟨a|H|a⟩`, real by construction.
    pub fn expectation(&self, a: &CVector) -> f64 {
        a.dotc(&(&self.matrix * a)).re
    }
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and
/// orthonormal eigenvector columns in canonical gauge.
pub fn hermitian_eigensolve(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    check_square(m)?;
    let n = m.nrows();
    let deviation = hermiticity_defect(m);
    let tolerance = structural_tolerance(n);
    if deviation > tolerance {
        return Err(Error::NotHermitian {
            deviation,
            tolerance,
        });
    }
    Ok(hermitian_eigensolve_unchecked(m))
}

fn hermitian_eigensolve_unchecked(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let sym = (m + m.adjoint()) * c64(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    canonical_gauge(&mut vectors);
    (values, vectors)
}

/// A matrix known to be unitary within `1e-10 · N`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: CMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let deviation = unitarity_defect(&matrix);
        let tolerance = structural_tolerance(matrix.nrows());
        if deviation > tolerance {
            return Err(Error::NotUnitary {
                deviation,
                tolerance,
            });
        }
        Ok(Self { matrix })
    }

    /// For products of unitaries built inside the crate.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        debug_assert!(unitarity_defect(&matrix) <= structural_tolerance(matrix.nrows()) * 10.0);
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: identity(dim),
        }
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        let d = CVector::from_iterator(phases.len(), phases.iter().map(|&t| phase_factor(t)));
        Self {
            matrix: CMatrix::from_diagonal(&d),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn compose(&self, rhs: &UnitaryOperator) -> Self {
        Self::from_trusted(&self.matrix * &rhs.matrix)
    }

    /// Multiplies by the global phase `e^{-iθ}`.
    pub fn rephased(&self, theta: f64) -> Self {
        Self {
            matrix: &self.matrix * phase_factor(theta),
        }
    }
}

/// Eigendecomposition of a unitary operator.
///
/// Eigenpairs are ordered by eigenphase `θ_k = -arg z_k` ascending in
/// `[0, 2π)`. Eigenvalues closer than [`TOL_DEG`] in phase (cyclically) are
/// grouped into clusters; the eigenvectors of a cluster form an arbitrary
/// orthonormal basis of its eigenspace.
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    pub eigenvalues: Vec<C64>,
    pub phases: Vec<f64>,
    pub eigenvectors: CMatrix,
    pub clusters: Vec<Vec<usize>>,
}

impl UnitaryEigen {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.clusters.iter().any(|c| c.len() > 1)
    }

    pub fn degenerate_clusters(&self) -> Vec<Vec<usize>> {
        self.clusters.iter().filter(|c| c.len() > 1).cloned().collect()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.eigenvectors.column(k).into_owned()
    }

    /// Smallest cyclic gap between consecutive eigenphases (`2π` for N = 1).
    pub fn min_gap(&self) -> f64 {
        cyclic_gaps(&self.phases).into_iter().fold(TAU, f64::min)
    }

    /// A point `e^{iφ}` in the middle of the widest spectral gap.
    pub fn pole_hint(&self) -> C64 {
        let gaps = cyclic_gaps(&self.phases);
        let (k, g) = gaps
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (k, &g)| if g > acc.1 { (k, g) } else { acc });
        // gap k runs from phases[k] upward; z = e^{-iθ}
        let mid = self.phases[k] + 0.5 * g;
        phase_factor(mid)
    }
}

/// Gaps `θ_{k+1} - θ_k` of sorted phases, the last one wrapping through 2π.
fn cyclic_gaps(phases: &[f64]) -> Vec<f64> {
    let n = phases.len();
    if n == 0 {
        return Vec::new();
    }
    (0..n)
        .map(|k| {
            if k + 1 < n {
                phases[k + 1] - phases[k]
            } else {
                phases[0] + TAU - phases[n - 1]
            }
        })
        .collect()
}

/// Groups sorted eigenphases into clusters whose consecutive gaps are below
/// `tol`, treating the phase axis as a circle.
pub fn phase_clusters(phases: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let n = phases.len();
    if n == 0 {
        return Vec::new();
    }
    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..n {
        if phases[k] - phases[k - 1] < tol {
            clusters.last_mut().unwrap().push(k);
        } else {
            clusters.push(vec![k]);
        }
    }
    if clusters.len() > 1 && phases[0] + TAU - phases[n - 1] < tol {
        let last = clusters.pop().unwrap();
        let first = &mut clusters[0];
        let mut merged = last;
        merged.append(first);
        *first = merged;
    }
    clusters
}

/// Largest eigenvalue of `(w̄U + wU†)/2`, i.e. `max_k cos(arg z_k - arg w)`.
fn pole_proximity(u: &CMatrix, w: C64) -> f64 {
    let r = (u * w.conj() + u.adjoint() * w) * c64(0.5, 0.0);
    r.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Finds a pole on the unit circle at angular distance at least `π/(2N)` from
/// every eigenvalue. Among `2N` equally spaced candidates at least `N`
/// qualify.
fn choose_pole(u: &CMatrix, hint: Option<C64>) -> C64 {
    let n = u.nrows();
    let threshold = (PI / (2.0 * n as f64)).cos() + 1e-12;
    if let Some(w) = hint {
        if pole_proximity(u, w) <= threshold {
            return w;
        }
    }
    let m = 2 * n;
    let mut best = (c64(1.0, 0.0), f64::INFINITY);
    for c in 0..m {
        let angle = PI * (c as f64 + FRAC_1_PI) / n as f64;
        let w = C64::from_polar(1.0, angle);
        let p = pole_proximity(u, w);
        if p <= threshold {
            return w;
        }
        if p < best.1 {
            best = (w, p);
        }
    }
    best.0
}

/// Eigendecomposition of a unitary operator. Degenerate clusters are not an
/// error; they are reported in [`UnitaryEigen::clusters`].
pub fn unitary_eigensolve(u: &UnitaryOperator) -> UnitaryEigen {
    unitary_eigensolve_with_hint(u, None)
}

/// As [`unitary_eigensolve`], trying `hint` (a unit-modulus point expected to
/// lie in a spectral gap) as the Cayley pole first.
pub fn unitary_eigensolve_with_hint(u: &UnitaryOperator, hint: Option<C64>) -> UnitaryEigen {
    let m = u.matrix();
    let n = m.nrows();
    let w = choose_pole(m, hint);
    let id = identity(n);
    let denom = &id * w - m;
    let numer = (&id * w + m) * c64(0.0, 1.0);
    // w lies at distance ≥ 2 sin(π/4N) from the spectrum, so the normal
    // matrix w - U is safely invertible.
    let inv = denom
        .lu()
        .try_inverse()
        .expect("Cayley pole chosen away from the spectrum");
    let cayley = numer * inv;
    let (_, vectors) = hermitian_eigensolve_unchecked(&cayley);

    let mut pairs: Vec<(f64, C64, usize)> = (0..n)
        .map(|k| {
            let x = vectors.column(k);
            let rq = x.dotc(&(m * x));
            let z = if rq.norm() > 0.0 { rq / rq.norm() } else { c64(1.0, 0.0) };
            (eigenphase(z), z, k)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let phases: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let eigenvalues = pairs.iter().map(|p| p.1).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| vectors[(i, pairs[j].2)]);
    let clusters = phase_clusters(&phases, TOL_DEG);
    UnitaryEigen {
        eigenvalues,
        phases,
        eigenvectors,
        clusters,
    }
}

/// `Ξ · diag(e^{-i·scale·e_k}) · Ξ†`, i.e. `exp(-i·scale·H)` with ħ = 1.
pub fn expm_hermitian(h: &HermitianOperator, scale: f64) -> UnitaryOperator {
    let xi = h.eigenvectors();
    let d = CVector::from_iterator(h.dim(), h.eigenvalues().iter().map(|&e| phase_factor(scale * e)));
    let m = xi * CMatrix::from_diagonal(&d) * xi.adjoint();
    UnitaryOperator::from_trusted(m)
}

/// Generator behind every seeded construction.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im)
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_gaussian(rng);
        }
    }
    m
}

/// Haar-distributed unitary from the QR decomposition of a complex Ginibre
/// matrix, with the phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary_from<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<UnitaryOperator> {
    if dim == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let g = complex_gaussian_matrix(rng, dim, dim);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    Ok(UnitaryOperator::from_trusted(q))
}

pub fn haar_random_unitary(dim: usize, seed: u64) -> Result<UnitaryOperator> {
    haar_unitary_from(&mut seeded_rng(seed), dim)
}

/// GUE-style Hermitian matrix: Gaussian real and imaginary parts, symmetrized.
pub fn random_hermitian_from<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<HermitianOperator> {
    if dim == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let g = complex_gaussian_matrix(rng, dim, dim);
    HermitianOperator::new((&g + g.adjoint()) * c64(0.5, 0.0))
}

pub fn random_hermitian(dim: usize, seed: u64) -> Result<HermitianOperator> {
    random_hermitian_from(&mut seeded_rng(seed), dim)
}

/// Uniformly distributed unit vector.
pub fn random_unit_vector_from<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<CVector> {
    if dim == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let g = complex_gaussian_matrix(rng, dim, 1).column(0).into_owned();
    let norm = g.norm();
    Ok(g / c64(norm, 0.0))
}

/// Entry `(i, j)` is `⟨a_i|b_j⟩`.
pub fn overlap_matrix(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(a.adjoint() * b)
}

/// `Ξ · diag(z) · Ξ†`.
pub fn spectral_reconstruction(values: &[C64], vectors: &CMatrix) -> CMatrix {
    let d = CVector::from_column_slice(values);
    vectors * CMatrix::from_diagonal(&d) * vectors.adjoint()
}
